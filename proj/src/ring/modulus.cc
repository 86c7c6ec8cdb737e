// Copyright 2026 The psearch Authors.
// SPDX-License-Identifier: Apache-2.0

#include "psearch/ring/modulus.h"

#include <algorithm>
#include <bit>

#include "psearch/common/error.h"

namespace psearch {
namespace {

uint64_t MulMod64(uint64_t a, uint64_t b, uint64_t m) {
  return static_cast<uint64_t>(static_cast<u128>(a) * b % m);
}

uint64_t PowMod64(uint64_t b, uint64_t e, uint64_t m) {
  uint64_t r = 1 % m;
  b %= m;
  while (e) {
    if (e & 1) r = MulMod64(r, b, m);
    b = MulMod64(b, b, m);
    e >>= 1;
  }
  return r;
}

}  // namespace

bool IsPrime(uint64_t v) {
  if (v < 2) return false;
  for (uint64_t p : {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37}) {
    if (v % p == 0) return v == p;
  }
  uint64_t d = v - 1;
  int s = 0;
  while ((d & 1) == 0) {
    d >>= 1;
    ++s;
  }
  // These bases are a deterministic witness set for all 64-bit integers.
  for (uint64_t a : {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37}) {
    uint64_t x = PowMod64(a, d, v);
    if (x == 1 || x == v - 1) continue;
    bool composite = true;
    for (int r = 1; r < s; ++r) {
      x = MulMod64(x, x, v);
      if (x == v - 1) {
        composite = false;
        break;
      }
    }
    if (composite) return false;
  }
  return true;
}

Modulus::Modulus(uint64_t value) : value_(value) {
  if (value < 3 || value >= (uint64_t{1} << 62)) {
    throw ValidationError("modulus must lie in [3, 2^62)");
  }
  if (!IsPrime(value)) throw ValidationError("modulus is not prime");
  bits_ = std::bit_width(value);
  mu_ = static_cast<uint64_t>((static_cast<u128>(1) << (2 * bits_)) / value);
}

uint64_t Modulus::Pow(uint64_t base, uint64_t exp) const {
  uint64_t r = 1;
  base %= value_;
  while (exp) {
    if (exp & 1) r = Mul(r, base);
    base = Mul(base, base);
    exp >>= 1;
  }
  return r;
}

uint64_t Modulus::Inv(uint64_t a) const {
  a %= value_;
  if (a == 0) throw UsageError("inverse of zero");
  return Pow(a, value_ - 2);
}

std::vector<uint64_t> FindNttPrimes(int bits, size_t count, uint64_t two_n,
                                    const std::vector<uint64_t>& exclude) {
  if (bits < 2 || bits > 62) throw ValidationError("prime size out of range");
  std::vector<uint64_t> out;
  const uint64_t upper = uint64_t{1} << bits;
  const uint64_t lower = uint64_t{1} << (bits - 1);
  // Largest candidate below 2^bits that is 1 mod two_n.
  uint64_t c = upper - (upper - 1) % two_n;
  if (c >= upper) c -= two_n;
  for (; c > lower && out.size() < count; c -= two_n) {
    if (IsPrime(c) && std::find(exclude.begin(), exclude.end(), c) == exclude.end()) {
      out.push_back(c);
    }
  }
  if (out.size() < count) throw ValidationError("not enough NTT-friendly primes");
  return out;
}

uint64_t MinimalPrimitiveRoot(const Modulus& q, uint64_t order) {
  const uint64_t qv = q.value();
  if (order < 2 || (qv - 1) % order != 0) {
    throw ValidationError("modulus is not NTT-friendly for this degree");
  }
  uint64_t root = 0;
  for (uint64_t x = 2; x < qv; ++x) {
    uint64_t g = q.Pow(x, (qv - 1) / order);
    if (q.Pow(g, order / 2) == qv - 1) {
      root = g;
      break;
    }
  }
  if (root == 0) throw ValidationError("no primitive root found");
  // Primitive roots are root^k for odd k; take the smallest.
  const uint64_t sq = q.Mul(root, root);
  uint64_t cur = root, best = root;
  for (uint64_t k = 3; k < order; k += 2) {
    cur = q.Mul(cur, sq);
    best = std::min(best, cur);
  }
  return best;
}

std::vector<Modulus> ToModuli(const std::vector<uint64_t>& values) {
  std::vector<Modulus> out;
  out.reserve(values.size());
  for (uint64_t v : values) out.emplace_back(v);
  return out;
}

}  // namespace psearch
