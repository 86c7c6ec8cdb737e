// Copyright 2026 The psearch Authors.
// SPDX-License-Identifier: Apache-2.0

#include "psearch/bfv/params.h"

#include <bit>
#include <cmath>

#include "psearch/common/error.h"

namespace psearch {
namespace {

constexpr int kMultPrimeBits = 61;

uint64_t Fnv1a(uint64_t h, uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xff;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace

SheParams SheParams::Search(uint64_t t) {
  SheParams p;
  p.n = 4096;
  const uint64_t two_n = 2 * p.n;
  p.q = FindNttPrimes(27, 1, two_n);
  for (uint64_t v : FindNttPrimes(28, 2, two_n)) p.q.push_back(v);
  p.aux = FindNttPrimes(29, 1, two_n)[0];
  p.t = t;
  p.batching = true;
  return p;
}

SheParams SheParams::Pir(uint64_t t) {
  SheParams p = Search(t);
  p.batching = false;
  return p;
}

SheParams SheParams::Toy(size_t n, uint64_t t, size_t limbs, bool batching) {
  SheParams p;
  p.n = n;
  const uint64_t two_n = 2 * n;
  p.q = FindNttPrimes(30, limbs, two_n);
  p.aux = FindNttPrimes(31, 1, two_n)[0];
  p.t = t;
  p.batching = batching;
  return p;
}

void SheParams::Validate() const {
  PSEARCH_CHECK(n >= 4 && std::has_single_bit(n), ValidationError,
                "ring degree must be a power of two >= 4");
  PSEARCH_CHECK(!q.empty(), ValidationError, "at least one ciphertext limb required");
  PSEARCH_CHECK(q.size() < 200, ValidationError, "too many ciphertext limbs");
  PSEARCH_CHECK(IsPrime(t) && t >= 3, ValidationError, "plaintext modulus must be an odd prime");
  PSEARCH_CHECK(!batching || t % (2 * n) == 1, ValidationError,
                "slot encoding needs t = 1 mod 2n");
  PSEARCH_CHECK(sigma > 0, ValidationError, "error deviation must be positive");
  PSEARCH_CHECK(max_lazy_terms >= 1, ValidationError, "max_lazy_terms must be >= 1");
  uint64_t qmax = 0;
  double log_q = 0;
  for (size_t i = 0; i < q.size(); ++i) {
    PSEARCH_CHECK(IsPrime(q[i]) && q[i] % (2 * n) == 1, ValidationError,
                  "ciphertext limbs must be primes = 1 mod 2n");
    PSEARCH_CHECK(q[i] < (uint64_t{1} << 61), ValidationError, "limb above 61 bits");
    PSEARCH_CHECK(q[i] != t, ValidationError, "limb equals plaintext modulus");
    for (size_t j = 0; j < i; ++j) {
      PSEARCH_CHECK(q[i] != q[j], ValidationError, "duplicate ciphertext limb");
    }
    qmax = std::max(qmax, q[i]);
    log_q += std::log2(static_cast<double>(q[i]));
  }
  PSEARCH_CHECK(IsPrime(aux) && aux % (2 * n) == 1, ValidationError,
                "auxiliary limb must be a prime = 1 mod 2n");
  PSEARCH_CHECK(aux >= qmax, ValidationError, "auxiliary limb must be at least max(q)");
  for (uint64_t v : q) PSEARCH_CHECK(v != aux, ValidationError, "auxiliary limb reused");
  PSEARCH_CHECK(log_q - std::log2(2.0 * static_cast<double>(t)) > 0, ValidationError,
                "initial noise budget must be positive");
}

BfvContext::BfvContext(const SheParams& params) : params_(params) {
  params_.Validate();
  const size_t n = params_.n;
  t_mod_ = Modulus(params_.t);
  q_ = ToModuli(params_.q);
  aux_ = Modulus(params_.aux);
  key_basis_ = q_;
  key_basis_.push_back(aux_);

  // The extension basis must hold t * (tensor) / Q for the largest lazy sum.
  // Sized for inputs up to L*Q in magnitude (the offset of a fast lift) so
  // either lift is safe; a product of two such polynomials sums 2n terms.
  const double log_l = std::log2(static_cast<double>(q_.size()));
  const double need = Log2Product(q_) + std::log2(static_cast<double>(params_.t)) +
                      std::log2(static_cast<double>(n)) + 2 * log_l + 3 +
                      std::log2(static_cast<double>(params_.max_lazy_terms)) + 4;
  const size_t b_count = static_cast<size_t>(std::ceil(need / (kMultPrimeBits - 1)));
  std::vector<uint64_t> exclude = params_.q;
  exclude.push_back(params_.aux);
  b_ = ToModuli(FindNttPrimes(kMultPrimeBits, b_count, 2 * n, exclude));

  levels_.resize(q_.size());
  for (size_t level = 1; level <= q_.size(); ++level) {
    LevelData& d = levels_[level - 1];
    std::vector<Modulus> limbs = LimbsAt(level);
    const BigInt big_q = ProductOf(limbs);
    const BigInt delta = big_q / params_.t;
    for (const Modulus& qi : limbs) d.delta.push_back(static_cast<uint64_t>(delta % qi.value()));
    d.q_to_b = std::make_unique<BaseConverter>(limbs, b_);
    d.b_to_q = std::make_unique<BaseConverter>(b_, limbs);
    for (const Modulus& bk : b_) {
      d.q_inv_mod_b.push_back(bk.Inv(static_cast<uint64_t>(big_q % bk.value())));
    }
  }

  uint64_t h = 0xcbf29ce484222325ull;
  h = Fnv1a(h, n);
  for (const Modulus& m : key_basis_) h = Fnv1a(h, m.value());
  key_id_ = h;
}

std::vector<Modulus> BfvContext::LimbsAt(size_t level) const {
  PSEARCH_CHECK(level >= 1 && level <= q_.size(), UsageError, "level out of range");
  return std::vector<Modulus>(q_.begin(), q_.begin() + level);
}

double BfvContext::Log2Q(size_t level) const { return Log2Product(LimbsAt(level)); }

uint64_t BfvContext::GaloisElt(long steps) const {
  const long row = static_cast<long>(params_.n / 2);
  long r = steps % row;
  if (r < 0) r += row;
  const uint64_t two_n = 2 * params_.n;
  uint64_t elt = 1;
  for (long i = 0; i < r; ++i) elt = elt * 3 % two_n;
  return elt;
}

double BfvContext::FreshNoiseLog2() const {
  // |t*e - (Q mod t)*m| / t with |e| <= 20 (centered binomial, k = 20).
  return std::log2(static_cast<double>(params_.t) + 21.0);
}

double BfvContext::KeySwitchNoiseLog2(size_t level) const {
  double qmax = 0;
  for (size_t i = 0; i < level; ++i) qmax = std::max(qmax, static_cast<double>(q_[i].value()));
  const double n = static_cast<double>(params_.n);
  const double digits = static_cast<double>(level) * qmax / 2 * std::sqrt(n) * params_.sigma *
                        kNoiseZScore / static_cast<double>(aux_.value());
  const double rounding = kNoiseZScore * std::sqrt(n / 18.0) + 1;
  return std::log2(digits + rounding);
}

double BfvContext::ModSwitchRoundingLog2() const {
  return std::log2(1.0 + kNoiseZScore * std::sqrt(static_cast<double>(params_.n) / 18.0));
}

double BfvContext::DropNoise(int l0, int l1) const {
  return kNoiseZScore * std::sqrt(2.0 * static_cast<double>(params_.n) / 9.0) *
             std::exp2(l1) +
         std::exp2(l0);
}

}  // namespace psearch
