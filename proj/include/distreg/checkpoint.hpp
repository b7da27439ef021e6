// Copyright (c) 2026 distreg contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "distreg/matrix.hpp"
#include "distreg/network.hpp"

namespace distreg {

/// Flat key -> tensor container with free-form JSON metadata.
///
/// On disk: an 8-byte little-endian header length, a JSON header carrying the
/// format tag, per-tensor names/shapes/offsets and the metadata blob, then all
/// tensor payloads as little-endian 64-bit floats in offset order.
struct Checkpoint {
  std::vector<std::pair<std::string, Matrix>> tensors;
  std::string meta_json = "{}";

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

  const Matrix* find(const std::string& name) const;
};

/// Snapshot of all parameters and buffers, keyed by layer path.
Checkpoint checkpoint_from_network(Network& network, std::string meta_json = "{}");

/// Fills an already-built network's parameters and buffers by name.
/// Throws ParseError when a tensor is missing or shaped differently.
void load_into_network(const Checkpoint& checkpoint, Network& network);

}  // namespace distreg
