// Copyright (c) 2026 distreg contributors
// SPDX-License-Identifier: Apache-2.0

#include "distreg/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "distreg/errors.hpp"

namespace distreg {

namespace {

constexpr char kFormatTag[] = "distreg-checkpoint";
constexpr int kFormatVersion = 1;

void write_u64_le(std::ostream& out, std::uint64_t v) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

std::uint64_t read_u64_le(std::istream& in) {
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

void write_f64_le(std::ostream& out, const double* values, std::size_t count) {
  std::vector<unsigned char> buf(count * 8);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t bits = std::bit_cast<std::uint64_t>(values[i]);
    for (int b = 0; b < 8; ++b) {
      buf[i * 8 + b] = static_cast<unsigned char>((bits >> (8 * b)) & 0xff);
    }
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

void read_f64_le(std::istream& in, double* values, std::size_t count) {
  std::vector<unsigned char> buf(count * 8);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(buf[i * 8 + b]) << (8 * b);
    }
    values[i] = std::bit_cast<double>(bits);
  }
}

}  // namespace

void Checkpoint::save(const std::filesystem::path& path) const {
  nlohmann::json header;
  header["format"] = kFormatTag;
  header["version"] = kFormatVersion;
  header["dtype"] = "f64le";
  header["meta"] = nlohmann::json::parse(meta_json);
  nlohmann::json entries = nlohmann::json::object();
  std::uint64_t offset = 0;  // in values, not bytes
  for (const auto& [name, tensor] : tensors) {
    entries[name] = {{"shape", {tensor.rows(), tensor.cols()}}, {"offset", offset}};
    offset += tensor.size();
  }
  header["tensors"] = entries;
  const std::string header_str = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParseError("checkpoint save: cannot open " + path.string());
  write_u64_le(out, header_str.size());
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
  for (const auto& [name, tensor] : tensors) {
    tensor.ensure_finite(("checkpoint tensor " + name).c_str());
    write_f64_le(out, tensor.data(), tensor.size());
  }
  if (!out) throw ParseError("checkpoint save: write failed for " + path.string());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("checkpoint load: cannot open " + path.string());
  const std::uint64_t header_len = read_u64_le(in);
  if (!in || header_len == 0 || header_len > (1u << 26)) {
    throw ParseError("checkpoint load: bad header length in " + path.string());
  }
  std::string header_str(header_len, '\0');
  in.read(header_str.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw ParseError("checkpoint load: truncated header in " + path.string());

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_str);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint load: header is not valid JSON: ") + e.what());
  }
  if (header.value("format", "") != kFormatTag) {
    throw ParseError("checkpoint load: unrecognized format tag in " + path.string());
  }
  if (header.value("version", -1) != kFormatVersion) {
    throw ParseError("checkpoint load: unsupported version " +
                     std::to_string(header.value("version", -1)));
  }

  // Entries ordered by offset so payloads can be read sequentially.
  std::vector<std::tuple<std::uint64_t, std::string, std::size_t, std::size_t>> order;
  for (const auto& [name, entry] : header.at("tensors").items()) {
    const auto& shape = entry.at("shape");
    order.emplace_back(entry.at("offset").get<std::uint64_t>(), name,
                       shape.at(0).get<std::size_t>(), shape.at(1).get<std::size_t>());
  }
  std::sort(order.begin(), order.end());

  Checkpoint ckpt;
  ckpt.meta_json = header.value("meta", nlohmann::json::object()).dump();
  for (const auto& [offset, name, rows, cols] : order) {
    Matrix tensor(rows, cols);
    read_f64_le(in, tensor.data(), tensor.size());
    if (!in) throw ParseError("checkpoint load: truncated payload for tensor " + name);
    ckpt.tensors.emplace_back(name, std::move(tensor));
  }
  return ckpt;
}

const Matrix* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, tensor] : tensors) {
    if (n == name) return &tensor;
  }
  return nullptr;
}

Checkpoint checkpoint_from_network(Network& network, std::string meta_json) {
  Checkpoint ckpt;
  ckpt.meta_json = std::move(meta_json);
  for (const auto& p : network.parameters()) ckpt.tensors.emplace_back(p.name, *p.value);
  for (const auto& b : network.buffers()) ckpt.tensors.emplace_back(b.name, *b.value);
  return ckpt;
}

void load_into_network(const Checkpoint& checkpoint, Network& network) {
  auto fill = [&](const std::string& name, Matrix* dst) {
    const Matrix* src = checkpoint.find(name);
    if (src == nullptr) throw ParseError("checkpoint: missing tensor " + name);
    if (!src->same_shape(*dst)) throw ParseError("checkpoint: shape mismatch for " + name);
    *dst = *src;
  };
  for (auto& p : network.parameters()) fill(p.name, p.value);
  for (auto& b : network.buffers()) fill(b.name, b.value);
}

}  // namespace distreg
