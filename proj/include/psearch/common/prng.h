// Copyright 2026 The psearch Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef PSEARCH_COMMON_PRNG_H_
#define PSEARCH_COMMON_PRNG_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string_view>

namespace psearch {

// Deterministic ChaCha20 keystream generator. Satisfies
// UniformRandomBitGenerator so it plugs into <random> distributions.
// Children derived with Fork() depend only on the parent key, never on how
// many words the parent has produced.
class Prng {
 public:
  using result_type = uint64_t;
  using Key = std::array<uint8_t, 32>;

  explicit Prng(uint64_t seed, std::string_view domain = "psearch");
  explicit Prng(const Key& key);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }
  result_type operator()();

  // Uniform in [0, bound). bound must be > 0.
  uint64_t UniformBelow(uint64_t bound);
  // Uniform double in [0, 1) with 53 random bits.
  double UniformDouble();
  void Fill(uint8_t* out, size_t len);

  Prng Fork(std::string_view label, uint64_t index = 0) const;
  const Key& key() const { return key_; }

 private:
  void Refill();

  static constexpr size_t kBufferBytes = 4096;
  Key key_{};
  uint64_t block_ = 0;
  size_t pos_ = kBufferBytes;
  std::array<uint8_t, kBufferBytes> buf_{};
};

}  // namespace psearch

#endif  // PSEARCH_COMMON_PRNG_H_
