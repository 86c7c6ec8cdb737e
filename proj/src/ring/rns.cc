// Copyright 2026 The psearch Authors.
// SPDX-License-Identifier: Apache-2.0

#include "psearch/ring/rns.h"

#include <cmath>
#include <utility>

#include "psearch/common/error.h"

namespace psearch {

BaseConverter::BaseConverter(std::vector<Modulus> from, std::vector<Modulus> to)
    : from_(std::move(from)), to_(std::move(to)) {
  if (from_.empty()) throw UsageError("base conversion: empty source basis");
  if (to_.empty()) throw UsageError("base conversion: empty target basis");
  const size_t l = from_.size();
  qhat_inv_.resize(l);
  qhat_inv_shoup_.resize(l);
  inv_q_.resize(l);
  for (size_t i = 0; i < l; ++i) {
    const Modulus& qi = from_[i];
    uint64_t prod = 1;
    for (size_t k = 0; k < l; ++k) {
      if (k != i) prod = qi.Mul(prod, qi.ReduceU64(from_[k].value()));
    }
    qhat_inv_[i] = qi.Inv(prod);
    qhat_inv_shoup_[i] = qi.ShoupPrecompute(qhat_inv_[i]);
    inv_q_[i] = 1.0 / static_cast<double>(qi.value());
  }
  qhat_mod_to_.resize(to_.size() * l);
  q_mod_to_.resize(to_.size());
  for (size_t j = 0; j < to_.size(); ++j) {
    const Modulus& pj = to_[j];
    uint64_t full = 1;
    for (size_t i = 0; i < l; ++i) {
      uint64_t prod = 1;
      for (size_t k = 0; k < l; ++k) {
        if (k != i) prod = pj.Mul(prod, pj.ReduceU64(from_[k].value()));
      }
      qhat_mod_to_[j * l + i] = prod;
      full = pj.Mul(full, pj.ReduceU64(from_[i].value()));
    }
    q_mod_to_[j] = full;
  }
}

void BaseConverter::FastConvert(const uint64_t* const* in, uint64_t* const* out,
                                size_t n) const {
  const size_t l = from_.size();
  std::vector<uint64_t> y(l);
  for (size_t c = 0; c < n; ++c) {
    for (size_t i = 0; i < l; ++i) {
      y[i] = from_[i].MulShoup(in[i][c], qhat_inv_[i], qhat_inv_shoup_[i]);
    }
    for (size_t j = 0; j < to_.size(); ++j) {
      const Modulus& pj = to_[j];
      uint64_t acc = 0;
      for (size_t i = 0; i < l; ++i) {
        const uint64_t yi = y[i] < pj.value() ? y[i] : pj.ReduceU64(y[i]);
        acc = pj.Add(acc, pj.Mul(yi, qhat_mod_to_[j * l + i]));
      }
      out[j][c] = acc;
    }
  }
}

void BaseConverter::ExactConvertCentered(const uint64_t* const* in, uint64_t* const* out,
                                         size_t n) const {
  const size_t l = from_.size();
  std::vector<uint64_t> y(l);
  for (size_t c = 0; c < n; ++c) {
    double frac = 0.0;
    for (size_t i = 0; i < l; ++i) {
      y[i] = from_[i].MulShoup(in[i][c], qhat_inv_[i], qhat_inv_shoup_[i]);
      frac += static_cast<double>(y[i]) * inv_q_[i];
    }
    // sum_i y_i * Q/q_i = x + k*Q with k = round(frac) for the centered lift.
    const uint64_t k = static_cast<uint64_t>(std::llround(frac));
    for (size_t j = 0; j < to_.size(); ++j) {
      const Modulus& pj = to_[j];
      uint64_t acc = 0;
      for (size_t i = 0; i < l; ++i) {
        const uint64_t yi = y[i] < pj.value() ? y[i] : pj.ReduceU64(y[i]);
        acc = pj.Add(acc, pj.Mul(yi, qhat_mod_to_[j * l + i]));
      }
      out[j][c] = pj.Sub(acc, pj.Mul(pj.ReduceU64(k), q_mod_to_[j]));
    }
  }
}

RingPoly fast_base_convert(const RingPoly& p, const std::vector<Modulus>& target) {
  if (p.form() != PolyForm::kCoefficient) {
    throw UsageError("fast_base_convert: coefficient form required");
  }
  if (target.empty()) throw UsageError("fast_base_convert: empty target basis");
  BaseConverter conv(p.limbs(), target);
  RingPoly out(p.degree(), target, PolyForm::kCoefficient);
  std::vector<const uint64_t*> in(p.num_limbs());
  std::vector<uint64_t*> dst(target.size());
  for (size_t i = 0; i < in.size(); ++i) in[i] = p.limb(i);
  for (size_t j = 0; j < dst.size(); ++j) dst[j] = out.limb(j);
  conv.FastConvert(in.data(), dst.data(), p.degree());
  return out;
}

BigInt ProductOf(const std::vector<Modulus>& limbs) {
  BigInt q = 1;
  for (const Modulus& m : limbs) q *= m.value();
  return q;
}

double Log2Product(const std::vector<Modulus>& limbs) {
  double s = 0;
  for (const Modulus& m : limbs) s += std::log2(static_cast<double>(m.value()));
  return s;
}

double Log2Big(const BigInt& v) {
  if (v <= 0) return -INFINITY;
  const unsigned msb = boost::multiprecision::msb(v);
  if (msb < 60) return std::log2(v.convert_to<double>());
  BigInt top = v >> (msb - 52);
  return std::log2(top.convert_to<double>()) + static_cast<double>(msb - 52);
}

std::vector<BigInt> crt_reconstruct(const RingPoly& p) {
  if (p.form() != PolyForm::kCoefficient) {
    throw UsageError("crt_reconstruct: coefficient form required");
  }
  const size_t l = p.num_limbs();
  const BigInt q = ProductOf(p.limbs());
  std::vector<BigInt> basis(l);
  for (size_t i = 0; i < l; ++i) {
    const Modulus& qi = p.limb_modulus(i);
    const BigInt qhat = q / qi.value();
    const uint64_t r = static_cast<uint64_t>(qhat % qi.value());
    basis[i] = qhat * qi.Inv(r);
  }
  std::vector<BigInt> out(p.degree());
  for (size_t c = 0; c < p.degree(); ++c) {
    BigInt acc = 0;
    for (size_t i = 0; i < l; ++i) acc += basis[i] * p.at(i, c);
    out[c] = acc % q;
  }
  return out;
}

}  // namespace psearch
