// Copyright 2026 The psearch Authors.
// SPDX-License-Identifier: Apache-2.0

#include "psearch/bfv/bfv.h"
#include "psearch/common/error.h"
#include "psearch/ring/ntt.h"

namespace psearch {

BatchEncoder::BatchEncoder(const BfvContext& ctx) : n_(ctx.n()), t_(ctx.t()) {
  PSEARCH_CHECK(ctx.params().batching, ValidationError,
                "slot encoding requires batching parameters");
  const NttTables& tables = GetNttTables(n_, t_);
  const uint64_t two_n = 2 * n_;
  const size_t row = n_ / 2;
  slot_to_index_.resize(n_);
  uint64_t gen_pow = 1;  // 3^col mod 2n
  for (size_t col = 0; col < row; ++col) {
    slot_to_index_[col] = tables.index_of_exponent(gen_pow);
    slot_to_index_[row + col] = tables.index_of_exponent(two_n - gen_pow);
    gen_pow = gen_pow * 3 % two_n;
  }
}

Plaintext BatchEncoder::Encode(const std::vector<uint64_t>& slots) const {
  PSEARCH_CHECK(slots.size() <= n_, UsageError, "too many slot values");
  std::vector<uint64_t> evals(n_, 0);
  for (size_t s = 0; s < slots.size(); ++s) {
    PSEARCH_CHECK(slots[s] < t_, UsageError, "slot value not below t");
    evals[slot_to_index_[s]] = slots[s];
  }
  GetNttTables(n_, t_).Inverse(evals.data());
  return Plaintext{std::move(evals), t_};
}

std::vector<uint64_t> BatchEncoder::Decode(const Plaintext& pt) const {
  PSEARCH_CHECK(pt.t == t_ && pt.coeffs.size() == n_, UsageError, "plaintext shape mismatch");
  std::vector<uint64_t> evals = pt.coeffs;
  GetNttTables(n_, t_).Forward(evals.data());
  std::vector<uint64_t> slots(n_);
  for (size_t s = 0; s < n_; ++s) slots[s] = evals[slot_to_index_[s]];
  return slots;
}

Plaintext EncodeCoefficients(const std::vector<uint64_t>& coeffs, size_t n, uint64_t t) {
  PSEARCH_CHECK(coeffs.size() <= n, UsageError, "too many coefficients");
  Plaintext pt{std::vector<uint64_t>(n, 0), t};
  for (size_t i = 0; i < coeffs.size(); ++i) {
    PSEARCH_CHECK(coeffs[i] < t, UsageError, "coefficient not below t");
    pt.coeffs[i] = coeffs[i];
  }
  return pt;
}

}  // namespace psearch
