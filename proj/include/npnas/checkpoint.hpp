// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The npnas Authors

#pragma once

#include <iosfwd>
#include <string>

#include "npnas/optim.hpp"

namespace npnas {

/// Portable parameter checkpoint.
///
/// Byte layout, all integers unsigned 32-bit little-endian, all reals IEEE-754
/// binary64 little-endian:
///
///   "NPCK"  u32 version(=1)  u32 header_len  header_len bytes of UTF-8 header
///   u32 tensor_count
///   repeated tensor_count times:
///     u32 name_len  name bytes  u32 rows  u32 cols  rows*cols f64 (row-major)
struct Checkpoint {
  std::string header;
  ParameterSet tensors;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace npnas
