// Copyright 2026 The psearch Authors.
// SPDX-License-Identifier: Apache-2.0

#include "psearch/ring/ntt.h"

#include <bit>
#include <map>
#include <memory>
#include <mutex>
#include <unordered_map>
#include <utility>

#include "psearch/common/error.h"

namespace psearch {
namespace {

size_t BitReverse(size_t x, int bits) {
  size_t r = 0;
  for (int i = 0; i < bits; ++i) {
    r = (r << 1) | (x & 1);
    x >>= 1;
  }
  return r;
}

}  // namespace

NttTables::NttTables(size_t n, const Modulus& q) : n_(n), q_(q) {
  if (n < 2 || !std::has_single_bit(n)) throw ValidationError("degree must be a power of two");
  log_n_ = std::countr_zero(n);
  psi_ = MinimalPrimitiveRoot(q_, 2 * n);
  const uint64_t psi_inv = q_.Inv(psi_);
  fwd_.resize(n);
  inv_.resize(n);
  fwd_shoup_.resize(n);
  inv_shoup_.resize(n);
  uint64_t pw = 1, pw_inv = 1;
  for (size_t i = 0; i < n; ++i) {
    const size_t r = BitReverse(i, log_n_);
    fwd_[r] = pw;
    inv_[r] = pw_inv;
    pw = q_.Mul(pw, psi_);
    pw_inv = q_.Mul(pw_inv, psi_inv);
  }
  for (size_t i = 0; i < n; ++i) {
    fwd_shoup_[i] = q_.ShoupPrecompute(fwd_[i]);
    inv_shoup_[i] = q_.ShoupPrecompute(inv_[i]);
  }
  n_inv_ = q_.Inv(n);
  n_inv_shoup_ = q_.ShoupPrecompute(n_inv_);

  // Transform X itself; slot j then holds psi^exponent(j).
  std::vector<uint64_t> x(n, 0);
  x[1 % n] = 1;
  Forward(x.data());
  std::unordered_map<uint64_t, uint64_t> log_table;
  log_table.reserve(2 * n);
  uint64_t cur = psi_;
  const uint64_t psi_sq = q_.Mul(psi_, psi_);
  for (uint64_t e = 1; e < 2 * n; e += 2) {
    log_table[cur] = e;
    cur = q_.Mul(cur, psi_sq);
  }
  exponent_of_index_.resize(n);
  index_of_exponent_.resize(n);
  for (size_t j = 0; j < n; ++j) {
    const uint64_t e = log_table.at(x[j]);
    exponent_of_index_[j] = e;
    index_of_exponent_[e >> 1] = j;
  }
}

void NttTables::Forward(uint64_t* a) const {
  const uint64_t q = q_.value();
  const uint64_t two_q = 2 * q;
  size_t t = n_ >> 1;
  for (size_t m = 1; m < n_; m <<= 1, t >>= 1) {
    for (size_t i = 0; i < m; ++i) {
      const uint64_t w = fwd_[m + i];
      const uint64_t ws = fwd_shoup_[m + i];
      uint64_t* x = a + 2 * i * t;
      uint64_t* y = x + t;
      for (size_t j = 0; j < t; ++j) {
        uint64_t u = x[j];
        if (u >= two_q) u -= two_q;
        const uint64_t v = q_.MulShoupLazy(y[j], w, ws);
        x[j] = u + v;
        y[j] = u + two_q - v;
      }
    }
  }
  for (size_t j = 0; j < n_; ++j) {
    uint64_t v = a[j];
    if (v >= two_q) v -= two_q;
    if (v >= q) v -= q;
    a[j] = v;
  }
}

void NttTables::Inverse(uint64_t* a) const {
  const uint64_t q = q_.value();
  const uint64_t two_q = 2 * q;
  size_t t = 1;
  for (size_t m = n_ >> 1; m >= 1; m >>= 1, t <<= 1) {
    for (size_t i = 0; i < m; ++i) {
      const uint64_t w = inv_[m + i];
      const uint64_t ws = inv_shoup_[m + i];
      uint64_t* x = a + 2 * i * t;
      uint64_t* y = x + t;
      for (size_t j = 0; j < t; ++j) {
        const uint64_t u = x[j];
        const uint64_t v = y[j];
        uint64_t s = u + v;
        if (s >= two_q) s -= two_q;
        x[j] = s;
        y[j] = q_.MulShoupLazy(u + two_q - v, w, ws);
      }
    }
  }
  for (size_t j = 0; j < n_; ++j) {
    a[j] = q_.MulShoup(a[j], n_inv_, n_inv_shoup_);
  }
}

void NttTables::ForwardReference(uint64_t* a) const {
  size_t t = n_ >> 1;
  for (size_t m = 1; m < n_; m <<= 1, t >>= 1) {
    for (size_t i = 0; i < m; ++i) {
      const uint64_t w = fwd_[m + i];
      for (size_t j = 2 * i * t; j < 2 * i * t + t; ++j) {
        const uint64_t u = a[j];
        const uint64_t v = q_.Mul(a[j + t], w);
        a[j] = q_.Add(u, v);
        a[j + t] = q_.Sub(u, v);
      }
    }
  }
}

void NttTables::InverseReference(uint64_t* a) const {
  size_t t = 1;
  for (size_t m = n_ >> 1; m >= 1; m >>= 1, t <<= 1) {
    for (size_t i = 0; i < m; ++i) {
      const uint64_t w = inv_[m + i];
      for (size_t j = 2 * i * t; j < 2 * i * t + t; ++j) {
        const uint64_t u = a[j];
        const uint64_t v = a[j + t];
        a[j] = q_.Add(u, v);
        a[j + t] = q_.Mul(q_.Sub(u, v), w);
      }
    }
  }
  for (size_t j = 0; j < n_; ++j) a[j] = q_.Mul(a[j], n_inv_);
}

const NttTables& GetNttTables(size_t n, uint64_t q) {
  static std::mutex mu;
  static std::map<std::pair<size_t, uint64_t>, std::unique_ptr<NttTables>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[{n, q}];
  if (!slot) slot = std::make_unique<NttTables>(n, Modulus(q));
  return *slot;
}

}  // namespace psearch
