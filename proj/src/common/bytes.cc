// Copyright 2026 The psearch Authors.
// SPDX-License-Identifier: Apache-2.0

#include "psearch/common/bytes.h"

#include <fstream>
#include <iterator>

namespace psearch {

void ByteWriter::PackedBits(const uint64_t* values, size_t count, int width) {
  if (width < 0 || width > 64) throw UsageError("PackedBits: width out of range");
  unsigned __int128 acc = 0;
  int have = 0;
  for (size_t i = 0; i < count; ++i) {
    uint64_t v = width == 64 ? values[i] : (values[i] & ((uint64_t{1} << width) - 1));
    acc |= static_cast<unsigned __int128>(v) << have;
    have += width;
    while (have >= 8) {
      out_.push_back(static_cast<uint8_t>(acc));
      acc >>= 8;
      have -= 8;
    }
  }
  if (have > 0) out_.push_back(static_cast<uint8_t>(acc));
}

void ByteReader::PackedBits(uint64_t* values, size_t count, int width) {
  if (width < 0 || width > 64) throw UsageError("PackedBits: width out of range");
  const size_t nbytes = PackedBytes(count, width);
  Need(nbytes);
  unsigned __int128 acc = 0;
  int have = 0;
  const uint8_t* p = p_;
  const uint64_t mask = width == 64 ? ~uint64_t{0} : ((uint64_t{1} << width) - 1);
  for (size_t i = 0; i < count; ++i) {
    while (have < width) {
      acc |= static_cast<unsigned __int128>(*p++) << have;
      have += 8;
    }
    values[i] = static_cast<uint64_t>(acc) & mask;
    acc >>= width;
    have -= width;
  }
  p_ += nbytes;
}

std::vector<uint8_t> ReadFileBytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw RuntimeFailure("cannot open " + path);
  return std::vector<uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void WriteFileBytes(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw RuntimeFailure("short write to " + path);
}

}  // namespace psearch
