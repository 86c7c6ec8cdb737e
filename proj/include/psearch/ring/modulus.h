// Copyright 2026 The psearch Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef PSEARCH_RING_MODULUS_H_
#define PSEARCH_RING_MODULUS_H_

#include <cstdint>
#include <vector>

namespace psearch {

using u128 = unsigned __int128;

// Deterministic Miller-Rabin for 64-bit inputs.
bool IsPrime(uint64_t v);

// A prime modulus below 2^62 with Barrett constants for products below q^2.
class Modulus {
 public:
  Modulus() = default;
  // Throws ValidationError if value is not a prime in [3, 2^62).
  explicit Modulus(uint64_t value);

  uint64_t value() const { return value_; }
  int bits() const { return bits_; }

  // x < q^2.
  uint64_t Reduce(u128 x) const {
    u128 est = ((x >> (bits_ - 1)) * mu_) >> (bits_ + 1);
    uint64_t r = static_cast<uint64_t>(x - est * value_);
    while (r >= value_) r -= value_;
    return r;
  }
  uint64_t ReduceU64(uint64_t x) const { return x % value_; }
  uint64_t Mul(uint64_t a, uint64_t b) const {
    return Reduce(static_cast<u128>(a) * b);
  }
  uint64_t Add(uint64_t a, uint64_t b) const {
    uint64_t s = a + b;
    return s >= value_ ? s - value_ : s;
  }
  uint64_t Sub(uint64_t a, uint64_t b) const {
    return a >= b ? a - b : a + value_ - b;
  }
  uint64_t Neg(uint64_t a) const { return a == 0 ? 0 : value_ - a; }
  uint64_t Pow(uint64_t base, uint64_t exp) const;
  // Throws if a is 0 mod q.
  uint64_t Inv(uint64_t a) const;
  // Reduces a signed value into [0, q).
  uint64_t FromSigned(int64_t v) const {
    int64_t r = v % static_cast<int64_t>(value_);
    return r < 0 ? static_cast<uint64_t>(r + static_cast<int64_t>(value_))
                 : static_cast<uint64_t>(r);
  }
  // Centered representative in (-q/2, q/2].
  int64_t Center(uint64_t a) const {
    return a > value_ / 2 ? static_cast<int64_t>(a) - static_cast<int64_t>(value_)
                          : static_cast<int64_t>(a);
  }

  // floor(w * 2^64 / q) for Shoup multiplication by the constant w < q.
  uint64_t ShoupPrecompute(uint64_t w) const {
    return static_cast<uint64_t>((static_cast<u128>(w) << 64) / value_);
  }
  // a * w mod q in [0, 2q) for any 64-bit a.
  uint64_t MulShoupLazy(uint64_t a, uint64_t w, uint64_t w_shoup) const {
    uint64_t hi = static_cast<uint64_t>((static_cast<u128>(a) * w_shoup) >> 64);
    return a * w - hi * value_;
  }
  uint64_t MulShoup(uint64_t a, uint64_t w, uint64_t w_shoup) const {
    uint64_t r = MulShoupLazy(a, w, w_shoup);
    return r >= value_ ? r - value_ : r;
  }

  bool operator==(const Modulus& o) const { return value_ == o.value_; }
  bool operator!=(const Modulus& o) const { return value_ != o.value_; }

 private:
  uint64_t value_ = 0;
  int bits_ = 0;
  uint64_t mu_ = 0;  // floor(2^(2*bits) / q)
};

// The `count` largest primes below 2^bits that are 1 mod `two_n`, skipping
// anything in `exclude`. Deterministic.
std::vector<uint64_t> FindNttPrimes(int bits, size_t count, uint64_t two_n,
                                    const std::vector<uint64_t>& exclude = {});

// Smallest primitive `order`-th root of unity mod q (order | q - 1, order a
// power of two).
uint64_t MinimalPrimitiveRoot(const Modulus& q, uint64_t order);

std::vector<Modulus> ToModuli(const std::vector<uint64_t>& values);

}  // namespace psearch

#endif  // PSEARCH_RING_MODULUS_H_
