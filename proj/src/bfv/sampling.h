// Copyright 2026 The psearch Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef PSEARCH_SRC_BFV_SAMPLING_H_
#define PSEARCH_SRC_BFV_SAMPLING_H_

#include <bit>
#include <cstdint>
#include <vector>

#include "psearch/common/prng.h"
#include "psearch/ring/ring_poly.h"

namespace psearch::internal {

// Centered binomial with 2*kCbdHalf coin flips: variance kCbdHalf / 2 = 10,
// standard deviation 3.16, support [-20, 20].
inline constexpr int kCbdHalf = 20;

inline std::vector<int64_t> SampleCbd(size_t n, Prng& rng) {
  std::vector<int64_t> out(n);
  constexpr uint64_t mask = (uint64_t{1} << kCbdHalf) - 1;
  for (auto& v : out) {
    const uint64_t r = rng();
    v = static_cast<int64_t>(std::popcount(r & mask)) -
        static_cast<int64_t>(std::popcount((r >> kCbdHalf) & mask));
  }
  return out;
}

inline std::vector<int64_t> SampleTernary(size_t n, Prng& rng) {
  std::vector<int64_t> out(n);
  for (auto& v : out) v = static_cast<int64_t>(rng.UniformBelow(3)) - 1;
  return out;
}

// Uniform polynomial, interpreted directly in evaluation form.
inline RingPoly SampleUniform(size_t n, const std::vector<Modulus>& limbs, Prng& rng) {
  RingPoly p(n, limbs, PolyForm::kEvaluation);
  for (size_t i = 0; i < limbs.size(); ++i) {
    uint64_t* dst = p.limb(i);
    for (size_t j = 0; j < n; ++j) dst[j] = rng.UniformBelow(limbs[i].value());
  }
  return p;
}

inline RingPoly SmallToEval(size_t n, const std::vector<Modulus>& limbs,
                            const std::vector<int64_t>& coeffs) {
  RingPoly p = RingPoly::FromSigned(n, limbs, coeffs);
  p.NttForward();
  return p;
}

}  // namespace psearch::internal

#endif  // PSEARCH_SRC_BFV_SAMPLING_H_
