// Copyright 2026 The psearch Authors.
// SPDX-License-Identifier: Apache-2.0

#include "psearch/ring/ring_poly.h"

#include <bit>
#include <utility>

#include "psearch/common/error.h"
#include "psearch/ring/ntt.h"

namespace psearch {

RingPoly::RingPoly(size_t n, std::vector<Modulus> limbs, PolyForm form)
    : n_(n), limbs_(std::move(limbs)), form_(form), data_(n_ * limbs_.size(), 0) {
  if (n_ == 0 || !std::has_single_bit(n_)) throw ValidationError("degree must be a power of two");
}

RingPoly RingPoly::FromSigned(size_t n, std::vector<Modulus> limbs,
                              const std::vector<int64_t>& coeffs) {
  if (coeffs.size() != n) throw UsageError("FromSigned: coefficient count mismatch");
  RingPoly p(n, std::move(limbs));
  for (size_t i = 0; i < p.num_limbs(); ++i) {
    const Modulus& q = p.limbs_[i];
    uint64_t* dst = p.limb(i);
    for (size_t j = 0; j < n; ++j) dst[j] = q.FromSigned(coeffs[j]);
  }
  return p;
}

void RingPoly::NttForward() {
  if (form_ != PolyForm::kCoefficient) throw UsageError("ntt_forward: not in coefficient form");
  for (size_t i = 0; i < limbs_.size(); ++i) {
    GetNttTables(n_, limbs_[i].value()).Forward(limb(i));
  }
  form_ = PolyForm::kEvaluation;
}

void RingPoly::NttInverse() {
  if (form_ != PolyForm::kEvaluation) throw UsageError("ntt_inverse: not in evaluation form");
  for (size_t i = 0; i < limbs_.size(); ++i) {
    GetNttTables(n_, limbs_[i].value()).Inverse(limb(i));
  }
  form_ = PolyForm::kCoefficient;
}

bool RingPoly::SameShape(const RingPoly& o) const {
  return n_ == o.n_ && limbs_ == o.limbs_ && form_ == o.form_;
}

void RingPoly::CheckCompatible(const RingPoly& o, const char* op) const {
  if (n_ != o.n_ || limbs_ != o.limbs_) {
    throw UsageError(std::string(op) + ": degree or limb mismatch");
  }
  if (form_ != o.form_) throw UsageError(std::string(op) + ": form mismatch");
}

RingPoly& RingPoly::operator+=(const RingPoly& o) {
  CheckCompatible(o, "add");
  for (size_t i = 0; i < limbs_.size(); ++i) {
    const Modulus& q = limbs_[i];
    uint64_t* a = limb(i);
    const uint64_t* b = o.limb(i);
    for (size_t j = 0; j < n_; ++j) a[j] = q.Add(a[j], b[j]);
  }
  return *this;
}

RingPoly& RingPoly::operator-=(const RingPoly& o) {
  CheckCompatible(o, "sub");
  for (size_t i = 0; i < limbs_.size(); ++i) {
    const Modulus& q = limbs_[i];
    uint64_t* a = limb(i);
    const uint64_t* b = o.limb(i);
    for (size_t j = 0; j < n_; ++j) a[j] = q.Sub(a[j], b[j]);
  }
  return *this;
}

RingPoly& RingPoly::operator*=(const RingPoly& o) {
  CheckCompatible(o, "mul");
  if (form_ != PolyForm::kEvaluation) throw UsageError("mul: operands must be in evaluation form");
  for (size_t i = 0; i < limbs_.size(); ++i) {
    const Modulus& q = limbs_[i];
    uint64_t* a = limb(i);
    const uint64_t* b = o.limb(i);
    for (size_t j = 0; j < n_; ++j) a[j] = q.Mul(a[j], b[j]);
  }
  return *this;
}

void RingPoly::AddProduct(const RingPoly& a, const RingPoly& b) {
  CheckCompatible(a, "add_product");
  CheckCompatible(b, "add_product");
  if (form_ != PolyForm::kEvaluation) throw UsageError("add_product: evaluation form required");
  for (size_t i = 0; i < limbs_.size(); ++i) {
    const Modulus& q = limbs_[i];
    uint64_t* d = limb(i);
    const uint64_t* x = a.limb(i);
    const uint64_t* y = b.limb(i);
    for (size_t j = 0; j < n_; ++j) d[j] = q.Add(d[j], q.Mul(x[j], y[j]));
  }
}

void RingPoly::Negate() {
  for (size_t i = 0; i < limbs_.size(); ++i) {
    const Modulus& q = limbs_[i];
    uint64_t* a = limb(i);
    for (size_t j = 0; j < n_; ++j) a[j] = q.Neg(a[j]);
  }
}

void RingPoly::MulScalarPerLimb(const std::vector<uint64_t>& scalars) {
  if (scalars.size() != limbs_.size()) throw UsageError("scalar count mismatch");
  for (size_t i = 0; i < limbs_.size(); ++i) {
    const Modulus& q = limbs_[i];
    const uint64_t w = scalars[i];
    const uint64_t ws = q.ShoupPrecompute(w);
    uint64_t* a = limb(i);
    for (size_t j = 0; j < n_; ++j) a[j] = q.MulShoup(a[j], w, ws);
  }
}

RingPoly RingPoly::Prefix(size_t count) const { return Slice(0, count); }

RingPoly RingPoly::Slice(size_t begin, size_t end) const {
  if (begin > end || end > limbs_.size()) throw UsageError("limb slice out of range");
  RingPoly out(n_, std::vector<Modulus>(limbs_.begin() + begin, limbs_.begin() + end), form_);
  std::copy(data_.begin() + begin * n_, data_.begin() + end * n_, out.data_.begin());
  return out;
}

RingPoly RingPoly::Concat(const RingPoly& a, const RingPoly& b) {
  if (a.n_ != b.n_ || a.form_ != b.form_) throw UsageError("concat: shape mismatch");
  std::vector<Modulus> limbs = a.limbs_;
  limbs.insert(limbs.end(), b.limbs_.begin(), b.limbs_.end());
  RingPoly out(a.n_, std::move(limbs), a.form_);
  std::copy(a.data_.begin(), a.data_.end(), out.data_.begin());
  std::copy(b.data_.begin(), b.data_.end(), out.data_.begin() + a.data_.size());
  return out;
}

bool RingPoly::operator==(const RingPoly& o) const {
  return SameShape(o) && data_ == o.data_;
}

void RingPoly::Serialize(ByteWriter& w) const {
  w.U32(static_cast<uint32_t>(n_));
  w.U8(static_cast<uint8_t>(limbs_.size()));
  for (const Modulus& q : limbs_) w.U64(q.value());
  w.U8(static_cast<uint8_t>(form_));
  for (uint64_t v : data_) w.U64(v);
}

RingPoly RingPoly::Deserialize(ByteReader& r) {
  const size_t n = r.U32();
  const size_t count = r.U8();
  std::vector<Modulus> limbs;
  for (size_t i = 0; i < count; ++i) limbs.emplace_back(r.U64());
  const uint8_t form = r.U8();
  if (form > 1) throw RuntimeFailure("bad polynomial form tag");
  RingPoly p(n, std::move(limbs), static_cast<PolyForm>(form));
  for (size_t i = 0; i < count; ++i) {
    const uint64_t q = p.limbs_[i].value();
    for (size_t j = 0; j < n; ++j) {
      uint64_t v = r.U64();
      if (v >= q) throw RuntimeFailure("residue out of range");
      p.at(i, j) = v;
    }
  }
  return p;
}

RingPoly ntt_forward(RingPoly p) {
  p.NttForward();
  return p;
}

RingPoly ntt_inverse(RingPoly p) {
  p.NttInverse();
  return p;
}

RingPoly poly_op(const RingPoly& a, const RingPoly& b, PolyOpKind op) {
  RingPoly out = a;
  switch (op) {
    case PolyOpKind::kAdd:
      out += b;
      break;
    case PolyOpKind::kSub:
      out -= b;
      break;
    case PolyOpKind::kMul:
      out *= b;
      break;
  }
  return out;
}

RingPoly ApplyGaloisCoeff(const RingPoly& p, uint64_t galois_elt) {
  if (p.form() != PolyForm::kCoefficient) throw UsageError("galois: coefficient form required");
  const size_t n = p.degree();
  const uint64_t two_n = 2 * n;
  if (galois_elt % 2 == 0) throw ValidationError("galois element must be odd");
  galois_elt %= two_n;
  RingPoly out(n, p.limbs(), PolyForm::kCoefficient);
  for (size_t i = 0; i < p.num_limbs(); ++i) {
    const Modulus& q = p.limb_modulus(i);
    const uint64_t* src = p.limb(i);
    uint64_t* dst = out.limb(i);
    for (size_t j = 0; j < n; ++j) {
      const uint64_t idx = (j * galois_elt) % two_n;
      if (idx < n) {
        dst[idx] = src[j];
      } else {
        dst[idx - n] = q.Neg(src[j]);
      }
    }
  }
  return out;
}

RingPoly ApplyGaloisEval(const RingPoly& p, uint64_t galois_elt) {
  if (p.form() != PolyForm::kEvaluation) throw UsageError("galois: evaluation form required");
  const size_t n = p.degree();
  const uint64_t two_n = 2 * n;
  if (galois_elt % 2 == 0) throw ValidationError("galois element must be odd");
  galois_elt %= two_n;
  RingPoly out(n, p.limbs(), PolyForm::kEvaluation);
  for (size_t i = 0; i < p.num_limbs(); ++i) {
    const NttTables& tables = GetNttTables(n, p.limb_modulus(i).value());
    const uint64_t* src = p.limb(i);
    uint64_t* dst = out.limb(i);
    for (size_t j = 0; j < n; ++j) {
      dst[j] = src[tables.index_of_exponent((tables.exponent(j) * galois_elt) % two_n)];
    }
  }
  return out;
}

}  // namespace psearch
