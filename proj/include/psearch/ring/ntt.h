// Copyright 2026 The psearch Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef PSEARCH_RING_NTT_H_
#define PSEARCH_RING_NTT_H_

#include <cstddef>
#include <cstdint>
#include <vector>

#include "psearch/ring/modulus.h"

namespace psearch {

// Negacyclic NTT over Z_q[X]/(X^n + 1). Output slot j holds the evaluation at
// psi^exponent(j), psi the smallest primitive 2n-th root of unity.
class NttTables {
 public:
  NttTables(size_t n, const Modulus& q);

  size_t n() const { return n_; }
  const Modulus& modulus() const { return q_; }
  uint64_t psi() const { return psi_; }

  // Harvey butterflies with values kept in [0, 4q) between stages; inputs and
  // outputs are fully reduced.
  void Forward(uint64_t* a) const;
  void Inverse(uint64_t* a) const;
  // Same transforms with a full reduction after every operation.
  void ForwardReference(uint64_t* a) const;
  void InverseReference(uint64_t* a) const;

  // Odd exponent e in [1, 2n) of the evaluation point stored at index j.
  uint64_t exponent(size_t j) const { return exponent_of_index_[j]; }
  // Inverse of exponent(); e must be odd.
  size_t index_of_exponent(uint64_t e) const { return index_of_exponent_[e >> 1]; }

 private:
  size_t n_;
  int log_n_;
  Modulus q_;
  uint64_t psi_;
  uint64_t n_inv_, n_inv_shoup_;
  std::vector<uint64_t> fwd_, fwd_shoup_;  // psi^bitrev(i)
  std::vector<uint64_t> inv_, inv_shoup_;  // psi^-(bitrev(i))
  std::vector<uint64_t> exponent_of_index_;
  std::vector<size_t> index_of_exponent_;
};

// Process-wide cache; tables are immutable once built.
const NttTables& GetNttTables(size_t n, uint64_t q);

}  // namespace psearch

#endif  // PSEARCH_RING_NTT_H_
