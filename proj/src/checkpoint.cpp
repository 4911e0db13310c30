// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The npnas Authors

#include "npnas/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>

namespace npnas {

namespace {

constexpr std::array<char, 4> kMagic{'N', 'P', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void put_u64(std::ostream& out, std::uint64_t v, int bytes) {
  char buf[8];
  for (int i = 0; i < bytes; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  out.write(buf, bytes);
}

std::uint64_t get_u64(std::istream& in, int bytes) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), bytes);
  if (!in) throw CheckpointError("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

void put_u32(std::ostream& out, std::size_t v) {
  if (v > 0xffffffffu) throw CheckpointError("checkpoint field exceeds 32 bits");
  put_u64(out, v, 4);
}

std::uint32_t get_u32(std::istream& in) { return static_cast<std::uint32_t>(get_u64(in, 4)); }

std::string get_string(std::istream& in, std::uint32_t len) {
  std::string s(len, '\0');
  in.read(s.data(), len);
  if (!in) throw CheckpointError("checkpoint truncated");
  return s;
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, kVersion);
  put_u32(out, ckpt.header.size());
  out.write(ckpt.header.data(), static_cast<std::streamsize>(ckpt.header.size()));
  put_u32(out, ckpt.tensors.size());
  for (const auto& t : ckpt.tensors) {
    put_u32(out, t.name.size());
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put_u32(out, t.value.rows());
    put_u32(out, t.value.cols());
    for (double v : t.value.data()) put_u64(out, std::bit_cast<std::uint64_t>(v), 8);
  }
  if (!out) throw CheckpointError("checkpoint write failed");
}

Checkpoint read_checkpoint(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw CheckpointError("not a checkpoint (bad magic)");
  const std::uint32_t version = get_u32(in);
  if (version != kVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  ckpt.header = get_string(in, get_u32(in));
  const std::uint32_t count = get_u32(in);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = get_string(in, get_u32(in));
    const std::uint32_t rows = get_u32(in);
    const std::uint32_t cols = get_u32(in);
    std::vector<double> data(static_cast<std::size_t>(rows) * cols);
    for (double& v : data) v = std::bit_cast<double>(get_u64(in, 8));
    t.value = Tensor2(rows, cols, std::move(data));
    ckpt.tensors.push_back(std::move(t));
  }
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open " + path + " for writing");
  write_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path);
  return read_checkpoint(in);
}

}  // namespace npnas
