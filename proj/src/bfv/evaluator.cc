// Copyright 2026 The psearch Authors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <utility>

#include "psearch/bfv/bfv.h"
#include "psearch/common/error.h"
#include "psearch/ring/ntt.h"
#include "psearch/ring/rns.h"
#include "sampling.h"

namespace psearch {
namespace {

double LogSum2(double a, double b) {
  const double hi = std::max(a, b), lo = std::min(a, b);
  if (std::isinf(lo)) return hi;
  return hi + std::log2(1.0 + std::exp2(lo - hi));
}

void Require(bool cond, const char* msg) {
  if (!cond) throw UsageError(msg);
}

std::vector<RingPoly> EvalParts(const Ciphertext& ct) {
  std::vector<RingPoly> out = ct.parts;
  for (RingPoly& p : out) {
    if (p.form() == PolyForm::kCoefficient) p.NttForward();
  }
  return out;
}

// Per-coefficient results of scaling x in [0, Q) by t/Q.
struct Scaled {
  std::vector<uint64_t> message;  // round(t*x/Q) mod t
  double max_residual_log2;       // log2 max |[t*x]_Q|
};

// Garner reconstruction into 128 bits when Q*t fits, big integers otherwise.
Scaled ScaleByTOverQ(const RingPoly& x, uint64_t t) {
  const size_t n = x.degree();
  const auto& limbs = x.limbs();
  const double log_q = Log2Product(limbs);
  const double log_t = std::log2(static_cast<double>(t));
  Scaled out{std::vector<uint64_t>(n), -INFINITY};
  if (log_q + log_t < 125.0) {
    const size_t l = limbs.size();
    std::vector<uint64_t> inv(l, 0);  // (q_0...q_{i-1})^-1 mod q_i
    u128 big_q = 1;
    for (size_t i = 0; i < l; ++i) {
      if (i > 0) inv[i] = limbs[i].Inv(static_cast<uint64_t>(big_q % limbs[i].value()));
      big_q *= limbs[i].value();
    }
    const u128 half = big_q / 2;
    u128 max_r = 0;
    for (size_t c = 0; c < n; ++c) {
      u128 acc = x.at(0, c), m = limbs[0].value();
      for (size_t i = 1; i < l; ++i) {
        const Modulus& qi = limbs[i];
        const uint64_t cur = static_cast<uint64_t>(acc % qi.value());
        const uint64_t y = qi.Mul(qi.Sub(x.at(i, c), cur), inv[i]);
        acc += static_cast<u128>(y) * m;
        m *= qi.value();
      }
      const u128 tx = acc * t;
      out.message[c] = static_cast<uint64_t>(((tx + half) / big_q) % t);
      const u128 r = tx % big_q;
      const u128 mag = r > half ? big_q - r : r;
      max_r = std::max(max_r, mag);
    }
    out.max_residual_log2 =
        max_r == 0 ? -INFINITY
                   : std::log2(static_cast<double>(static_cast<uint64_t>(max_r >> 64)) *
                                   18446744073709551616.0 +
                               static_cast<double>(static_cast<uint64_t>(max_r)));
    return out;
  }
  const std::vector<BigInt> values = crt_reconstruct(x);
  const BigInt big_q = ProductOf(limbs);
  const BigInt half = big_q / 2;
  BigInt max_r = 0;
  for (size_t c = 0; c < n; ++c) {
    const BigInt tx = values[c] * t;
    out.message[c] = static_cast<uint64_t>(((tx + half) / big_q) % t);
    BigInt r = tx % big_q;
    if (r > half) r = big_q - r;
    if (r > max_r) max_r = r;
  }
  out.max_residual_log2 = Log2Big(max_r);
  return out;
}

// c(s) = sum_k parts[k] * s^k in coefficient form.
RingPoly EvaluateAtSecret(const SecretKey& sk, const Ciphertext& ct) {
  std::vector<RingPoly> parts = EvalParts(ct);
  const size_t level = parts[0].num_limbs();
  RingPoly s = sk.s.Prefix(level);
  Require(s.limbs() == parts[0].limbs(), "ciphertext limbs do not match the secret key");
  RingPoly acc = parts[0];
  RingPoly power = s;
  for (size_t k = 1; k < parts.size(); ++k) {
    acc.AddProduct(parts[k], power);
    if (k + 1 < parts.size()) power *= s;
  }
  acc.NttInverse();
  return acc;
}

// Lifts the centered residues of limb `src_limb` of `src` onto `dst_mod`.
void LiftCentered(const uint64_t* src, const Modulus& src_mod, const Modulus& dst_mod,
                  uint64_t* dst, size_t n) {
  for (size_t c = 0; c < n; ++c) dst[c] = dst_mod.FromSigned(src_mod.Center(src[c]));
}

}  // namespace

void Evaluator::CheckKey(uint64_t key_id) const {
  Require(key_id == ctx_.key_id(), "key material belongs to another parameter set");
}

void Evaluator::CheckPair(const Ciphertext& a, const Ciphertext& b) const {
  Require(!a.compressed && !b.compressed, "compressed ciphertexts are decrypt-only");
  Require(a.t == b.t, "plaintext modulus mismatch");
  Require(a.level() == b.level(), "ciphertext level mismatch");
}

Ciphertext Evaluator::Encrypt(const SecretKey& sk, const Plaintext& pt, Prng& rng) const {
  CheckKey(sk.key_id);
  Require(pt.t == ctx_.t() && pt.coeffs.size() == ctx_.n(), "plaintext shape mismatch");
  const size_t n = ctx_.n();
  const size_t level = ctx_.max_level();
  const std::vector<Modulus> limbs = ctx_.LimbsAt(level);
  const std::vector<uint64_t>& delta = ctx_.DeltaAt(level);

  RingPoly a = internal::SampleUniform(n, limbs, rng);
  RingPoly c0 = RingPoly::FromSigned(n, limbs, internal::SampleCbd(n, rng));
  for (size_t i = 0; i < level; ++i) {
    const Modulus& qi = limbs[i];
    uint64_t* dst = c0.limb(i);
    for (size_t j = 0; j < n; ++j) dst[j] = qi.Add(dst[j], qi.Mul(delta[i], pt.coeffs[j]));
  }
  c0.NttForward();
  RingPoly as = a;
  as *= sk.s.Prefix(level);
  c0 -= as;

  Ciphertext ct;
  ct.parts.push_back(std::move(c0));
  ct.parts.push_back(std::move(a));
  ct.t = ctx_.t();
  ct.noise_log2 = ctx_.FreshNoiseLog2();
  return ct;
}

DecryptResult Evaluator::Decrypt(const SecretKey& sk, const Ciphertext& ct) const {
  CheckKey(sk.key_id);
  Require(!ct.parts.empty(), "empty ciphertext");
  Require(ct.t == ctx_.t(), "plaintext modulus mismatch");
  Scaled s = ScaleByTOverQ(EvaluateAtSecret(sk, ct), ct.t);
  DecryptResult out;
  out.plaintext = Plaintext{std::move(s.message), ct.t};
  out.reliable = ct.budget_estimate() > 0;
  return out;
}

double Evaluator::NoiseBudget(const SecretKey& sk, const Ciphertext& ct) const {
  CheckKey(sk.key_id);
  Require(!ct.parts.empty(), "empty ciphertext");
  RingPoly x = EvaluateAtSecret(sk, ct);
  const double log_q = Log2Product(x.limbs());
  const Scaled s = ScaleByTOverQ(x, ct.t);
  if (std::isinf(s.max_residual_log2)) return log_q - 1;
  return log_q - 1 - s.max_residual_log2;
}

Ciphertext Evaluator::Add(const Ciphertext& a, const Ciphertext& b) const {
  Ciphertext out = a;
  AddInPlace(out, b);
  return out;
}

void Evaluator::AddInPlace(Ciphertext& a, const Ciphertext& b) const {
  CheckPair(a, b);
  if (a.size() < b.size()) {
    for (size_t k = a.size(); k < b.size(); ++k) {
      a.parts.emplace_back(ctx_.n(), a.parts[0].limbs(), PolyForm::kEvaluation);
    }
  }
  for (size_t k = 0; k < b.size(); ++k) a.parts[k] += b.parts[k];
  a.noise_log2 = LogSum2(a.noise_log2, b.noise_log2);
  ++counters_.ct_adds;
}

Ciphertext Evaluator::Sub(const Ciphertext& a, const Ciphertext& b) const {
  Ciphertext nb = b;
  for (RingPoly& p : nb.parts) p.Negate();
  return Add(a, nb);
}

Ciphertext Evaluator::AddPlain(const Ciphertext& a, const Plaintext& pt) const {
  Require(!a.compressed, "compressed ciphertexts are decrypt-only");
  Require(pt.t == a.t && pt.coeffs.size() == ctx_.n(), "plaintext shape mismatch");
  const size_t level = a.level();
  const std::vector<uint64_t>& delta = ctx_.DeltaAt(level);
  RingPoly scaled(ctx_.n(), a.parts[0].limbs(), PolyForm::kCoefficient);
  for (size_t i = 0; i < level; ++i) {
    const Modulus& qi = scaled.limb_modulus(i);
    uint64_t* dst = scaled.limb(i);
    for (size_t j = 0; j < ctx_.n(); ++j) dst[j] = qi.Mul(delta[i], pt.coeffs[j]);
  }
  scaled.NttForward();
  Ciphertext out = a;
  out.parts[0] += scaled;
  out.noise_log2 = LogSum2(a.noise_log2, std::log2(static_cast<double>(a.t)));
  ++counters_.pt_adds;
  return out;
}

RingPoly Evaluator::LiftPlain(const Plaintext& pt, size_t level) const {
  Require(pt.t == ctx_.t() && pt.coeffs.size() == ctx_.n(), "plaintext shape mismatch");
  std::vector<int64_t> centered(ctx_.n());
  for (size_t j = 0; j < ctx_.n(); ++j) centered[j] = ctx_.t_modulus().Center(pt.coeffs[j]);
  RingPoly p = RingPoly::FromSigned(ctx_.n(), ctx_.LimbsAt(level), centered);
  p.NttForward();
  return p;
}

Ciphertext Evaluator::MulPlain(const Ciphertext& a, const Plaintext& pt) const {
  return MulPlain(a, LiftPlain(pt, a.level()));
}

namespace {
double PlainMulGrowth(const BfvContext& ctx) {
  return std::log2(static_cast<double>(ctx.t()) / 2) +
         0.5 * std::log2(static_cast<double>(ctx.n())) + 2;
}
}  // namespace

Ciphertext Evaluator::MulPlain(const Ciphertext& a, const RingPoly& lifted) const {
  Require(!a.compressed, "compressed ciphertexts are decrypt-only");
  Ciphertext out = a;
  for (RingPoly& p : out.parts) p *= lifted;
  out.noise_log2 = a.noise_log2 + PlainMulGrowth(ctx_);
  ++counters_.pt_mults;
  return out;
}

void Evaluator::MulPlainAccumulate(Ciphertext& acc, const Ciphertext& a,
                                   const RingPoly& lifted) const {
  Require(!a.compressed, "compressed ciphertexts are decrypt-only");
  const double noise = a.noise_log2 + PlainMulGrowth(ctx_);
  if (acc.parts.empty()) {
    acc.t = a.t;
    for (size_t k = 0; k < a.size(); ++k) {
      acc.parts.emplace_back(ctx_.n(), a.parts[k].limbs(), PolyForm::kEvaluation);
    }
    acc.noise_log2 = -INFINITY;
  }
  CheckPair(acc, a);
  Require(acc.size() == a.size(), "ciphertext size mismatch");
  for (size_t k = 0; k < a.size(); ++k) acc.parts[k].AddProduct(a.parts[k], lifted);
  acc.noise_log2 = LogSum2(acc.noise_log2, noise);
  ++counters_.pt_mults;
}

void Evaluator::KeySwitch(const RingPoly& c, const KSwitchKey& key, RingPoly& k0,
                          RingPoly& k1) const {
  const size_t n = ctx_.n();
  const size_t level = c.num_limbs();
  const size_t aux_index = ctx_.max_level();
  Require(c.form() == PolyForm::kCoefficient, "key switch input must be in coefficient form");
  Require(key.b.size() >= level && key.a.size() >= level, "key switching key too short");
  std::vector<Modulus> ext = ctx_.LimbsAt(level);
  ext.push_back(ctx_.aux());
  const size_t ext_size = ext.size();
  auto key_limb = [&](size_t j) { return j + 1 == ext_size ? aux_index : j; };

  RingPoly acc0(n, ext, PolyForm::kEvaluation), acc1(n, ext, PolyForm::kEvaluation);
  std::vector<uint64_t> digit(n);
  for (size_t i = 0; i < level; ++i) {
    const Modulus& qi = c.limb_modulus(i);
    const uint64_t* src = c.limb(i);
    const RingPoly& kb = key.b[i];
    const RingPoly& ka = key.a[i];
    for (size_t j = 0; j < ext_size; ++j) {
      const Modulus& mj = ext[j];
      if (j == i) {
        std::copy(src, src + n, digit.begin());
      } else {
        LiftCentered(src, qi, mj, digit.data(), n);
      }
      GetNttTables(n, mj.value()).Forward(digit.data());
      const uint64_t* b = kb.limb(key_limb(j));
      const uint64_t* a = ka.limb(key_limb(j));
      uint64_t* d0 = acc0.limb(j);
      uint64_t* d1 = acc1.limb(j);
      for (size_t x = 0; x < n; ++x) {
        d0[x] = mj.Add(d0[x], mj.Mul(digit[x], b[x]));
        d1[x] = mj.Add(d1[x], mj.Mul(digit[x], a[x]));
      }
    }
  }

  // Divide by P with rounding: (acc - centered[acc]_P) * P^-1 over Q_level.
  const Modulus& aux = ctx_.aux();
  const NttTables& aux_tables = GetNttTables(n, aux.value());
  std::vector<uint64_t> tail(n), lift(n);
  auto mod_down = [&](RingPoly& acc, RingPoly& out) {
    out = RingPoly(n, ctx_.LimbsAt(level), PolyForm::kEvaluation);
    std::copy(acc.limb(level), acc.limb(level) + n, tail.begin());
    aux_tables.Inverse(tail.data());
    for (size_t j = 0; j < level; ++j) {
      const Modulus& qj = ext[j];
      LiftCentered(tail.data(), aux, qj, lift.data(), n);
      GetNttTables(n, qj.value()).Forward(lift.data());
      const uint64_t p_inv = qj.Inv(qj.ReduceU64(aux.value()));
      const uint64_t p_inv_shoup = qj.ShoupPrecompute(p_inv);
      const uint64_t* src = acc.limb(j);
      uint64_t* dst = out.limb(j);
      for (size_t x = 0; x < n; ++x) dst[x] = qj.MulShoup(qj.Sub(src[x], lift[x]), p_inv, p_inv_shoup);
    }
  };
  mod_down(acc0, k0);
  mod_down(acc1, k1);
  ++counters_.key_switches;
}

Ciphertext Evaluator::ApplyGalois(const Ciphertext& a, uint64_t elt,
                                  const EvaluationKey& evk) const {
  Require(!a.compressed, "compressed ciphertexts are decrypt-only");
  Require(a.size() == 2, "Galois automorphisms need a relinearized ciphertext");
  CheckKey(evk.key_id);
  auto it = evk.galois.find(elt);
  if (it == evk.galois.end()) throw UsageError("missing Galois key for element " + std::to_string(elt));
  RingPoly c0 = ApplyGaloisEval(a.parts[0], elt);
  RingPoly c1 = ApplyGaloisEval(a.parts[1], elt);
  c1.NttInverse();
  RingPoly k0, k1;
  KeySwitch(c1, it->second, k0, k1);
  c0 += k0;
  Ciphertext out;
  out.parts.push_back(std::move(c0));
  out.parts.push_back(std::move(k1));
  out.t = a.t;
  out.noise_log2 = LogSum2(a.noise_log2, ctx_.KeySwitchNoiseLog2(a.level()));
  return out;
}

Ciphertext Evaluator::Rotate(const Ciphertext& a, long steps, const EvaluationKey& evk) const {
  const long row = static_cast<long>(ctx_.n() / 2);
  if (((steps % row) + row) % row == 0) return a;
  Ciphertext out = ApplyGalois(a, ctx_.GaloisElt(steps), evk);
  ++counters_.rotations;
  return out;
}

Ciphertext Evaluator::Conjugate(const Ciphertext& a, const EvaluationKey& evk) const {
  Ciphertext out = ApplyGalois(a, ctx_.ConjugationElt(), evk);
  ++counters_.rotations;
  return out;
}

Ciphertext Evaluator::Substitute(const Ciphertext& a, uint64_t k, const EvaluationKey& evk) const {
  if (k % 2 == 0) throw ValidationError("substitution exponent must be odd");
  k %= 2 * ctx_.n();
  if (k == 1) return a;
  Ciphertext out = ApplyGalois(a, k, evk);
  ++counters_.substitutions;
  return out;
}

TensorCiphertext Evaluator::Tensor(const Ciphertext& a, const Ciphertext& b) const {
  CheckPair(a, b);
  Require(a.size() == 2 && b.size() == 2, "tensor needs two-part ciphertexts");
  const size_t n = ctx_.n();
  const size_t level = a.level();
  const auto& ld = ctx_.level_data(level);
  const auto& bb = ctx_.mult_basis();

  // Each input over Q_level + B in evaluation form; the B part carries the
  // centered lift of x. A fast (offset) lift also works but inflates the
  // product noise by about 6 bits through the k*Q offsets.
  auto extend = [&](const RingPoly& p) {
    RingPoly coeff = ntt_inverse(p);
    RingPoly ext(n, bb, PolyForm::kCoefficient);
    std::vector<const uint64_t*> in(level);
    std::vector<uint64_t*> out(bb.size());
    for (size_t i = 0; i < level; ++i) in[i] = coeff.limb(i);
    for (size_t j = 0; j < bb.size(); ++j) out[j] = ext.limb(j);
    ld.q_to_b->ExactConvertCentered(in.data(), out.data(), n);
    ext.NttForward();
    return RingPoly::Concat(p, ext);
  };
  RingPoly a0 = extend(a.parts[0]), a1 = extend(a.parts[1]);
  RingPoly b0 = extend(b.parts[0]), b1 = extend(b.parts[1]);

  TensorCiphertext out;
  RingPoly d0 = a0;
  d0 *= b0;
  RingPoly d1 = a0;
  d1 *= b1;
  d1.AddProduct(a1, b0);
  RingPoly d2 = a1;
  d2 *= b1;
  out.parts = {std::move(d0), std::move(d1), std::move(d2)};
  out.level = level;
  out.t = a.t;
  out.noise_log2 = std::max(a.noise_log2, b.noise_log2) + std::log2(static_cast<double>(a.t)) +
                   std::log2(static_cast<double>(n)) + 3;
  out.terms = 1;
  ++counters_.tensors;
  return out;
}

void Evaluator::AddTensorInPlace(TensorCiphertext& acc, const TensorCiphertext& b) const {
  if (acc.parts.empty()) {
    acc = b;
    return;
  }
  Require(acc.level == b.level && acc.t == b.t, "tensor shape mismatch");
  for (size_t k = 0; k < 3; ++k) acc.parts[k] += b.parts[k];
  acc.noise_log2 = LogSum2(acc.noise_log2, b.noise_log2);
  acc.terms += b.terms;
}

Ciphertext Evaluator::Rescale(const TensorCiphertext& x) const {
  Require(x.parts.size() == 3, "rescale needs a tensor");
  if (x.terms > ctx_.params().max_lazy_terms) {
    throw UsageError("too many lazily accumulated tensors for the extension basis");
  }
  const size_t n = ctx_.n();
  const size_t level = x.level;
  const auto& ld = ctx_.level_data(level);
  const auto& bb = ctx_.mult_basis();
  const std::vector<Modulus> limbs = ctx_.LimbsAt(level);
  const uint64_t t = x.t;

  Ciphertext out;
  out.t = t;
  for (const RingPoly& part : x.parts) {
    RingPoly coeff = ntt_inverse(part);
    // r = [t*x]_Q, then its centered value in B.
    std::vector<std::vector<uint64_t>> r_q(level, std::vector<uint64_t>(n));
    std::vector<const uint64_t*> rq_ptr(level);
    for (size_t i = 0; i < level; ++i) {
      const Modulus& qi = limbs[i];
      const uint64_t tq = qi.ReduceU64(t);
      const uint64_t* src = coeff.limb(i);
      for (size_t c = 0; c < n; ++c) r_q[i][c] = qi.Mul(src[c], tq);
      rq_ptr[i] = r_q[i].data();
    }
    std::vector<std::vector<uint64_t>> r_b(bb.size(), std::vector<uint64_t>(n));
    std::vector<uint64_t*> rb_ptr(bb.size());
    for (size_t k = 0; k < bb.size(); ++k) rb_ptr[k] = r_b[k].data();
    ld.q_to_b->ExactConvertCentered(rq_ptr.data(), rb_ptr.data(), n);
    // y = (t*x - r) / Q, exact in B.
    std::vector<const uint64_t*> y_ptr(bb.size());
    for (size_t k = 0; k < bb.size(); ++k) {
      const Modulus& bk = bb[k];
      const uint64_t tb = bk.ReduceU64(t);
      const uint64_t* src = coeff.limb(level + k);
      for (size_t c = 0; c < n; ++c) {
        r_b[k][c] = bk.Mul(bk.Sub(bk.Mul(src[c], tb), r_b[k][c]), ld.q_inv_mod_b[k]);
      }
      y_ptr[k] = r_b[k].data();
    }
    RingPoly y(n, limbs, PolyForm::kCoefficient);
    std::vector<uint64_t*> yq_ptr(level);
    for (size_t i = 0; i < level; ++i) yq_ptr[i] = y.limb(i);
    ld.b_to_q->ExactConvertCentered(y_ptr.data(), yq_ptr.data(), n);
    y.NttForward();
    out.parts.push_back(std::move(y));
  }
  out.noise_log2 = LogSum2(x.noise_log2, ctx_.ModSwitchRoundingLog2());
  ++counters_.rescales;
  return out;
}

Ciphertext Evaluator::Relinearize(const Ciphertext& a, const EvaluationKey& evk) const {
  Require(!a.compressed, "compressed ciphertexts are decrypt-only");
  if (a.size() == 2) return a;
  Require(a.size() == 3, "relinearization expects three parts");
  CheckKey(evk.key_id);
  if (!evk.relin) throw UsageError("missing relinearization key");
  RingPoly c2 = ntt_inverse(a.parts[2]);
  RingPoly k0, k1;
  KeySwitch(c2, *evk.relin, k0, k1);
  Ciphertext out;
  out.parts = {a.parts[0], a.parts[1]};
  out.parts[0] += k0;
  out.parts[1] += k1;
  out.t = a.t;
  out.noise_log2 = LogSum2(a.noise_log2, ctx_.KeySwitchNoiseLog2(a.level()));
  ++counters_.relinearizations;
  return out;
}

Ciphertext Evaluator::Multiply(const Ciphertext& a, const Ciphertext& b,
                               const EvaluationKey& evk) const {
  CheckKey(evk.key_id);
  if (!evk.relin) throw UsageError("missing relinearization key");
  return Relinearize(Rescale(Tensor(a, b)), evk);
}

Ciphertext Evaluator::ModSwitch(const Ciphertext& a) const {
  Require(!a.compressed, "compressed ciphertexts are decrypt-only");
  const size_t level = a.level();
  if (level < 2) throw UsageError("mod_switch: already at the last limb");
  const size_t n = ctx_.n();
  const Modulus& q_last = ctx_.q_limbs()[level - 1];
  const NttTables& last_tables = GetNttTables(n, q_last.value());
  std::vector<uint64_t> tail(n), lift(n);
  Ciphertext out;
  out.t = a.t;
  for (const RingPoly& part : a.parts) {
    RingPoly res = part.Prefix(level - 1);
    std::copy(part.limb(level - 1), part.limb(level - 1) + n, tail.begin());
    last_tables.Inverse(tail.data());
    for (size_t j = 0; j + 1 < level; ++j) {
      const Modulus& qj = res.limb_modulus(j);
      LiftCentered(tail.data(), q_last, qj, lift.data(), n);
      GetNttTables(n, qj.value()).Forward(lift.data());
      const uint64_t inv = qj.Inv(qj.ReduceU64(q_last.value()));
      const uint64_t inv_shoup = qj.ShoupPrecompute(inv);
      uint64_t* dst = res.limb(j);
      for (size_t x = 0; x < n; ++x) dst[x] = qj.MulShoup(qj.Sub(dst[x], lift[x]), inv, inv_shoup);
    }
    out.parts.push_back(std::move(res));
  }
  out.noise_log2 = LogSum2(a.noise_log2 - std::log2(static_cast<double>(q_last.value())),
                           ctx_.ModSwitchRoundingLog2());
  ++counters_.mod_switches;
  return out;
}

Ciphertext Evaluator::ModSwitchTo(const Ciphertext& a, size_t level) const {
  Require(level >= 1 && level <= a.level(), "target level out of range");
  Ciphertext out = a;
  while (out.level() > level) out = ModSwitch(out);
  return out;
}

bool Evaluator::DropAllowed(uint64_t q_last, int l0, int l1) const {
  if (l0 < 0 || l1 < 0 || l0 >= 62 || l1 >= 62) return false;
  return ctx_.DropNoise(l0, l1) <
         static_cast<double>(q_last) / static_cast<double>(ctx_.t());
}

Ciphertext Evaluator::DropLsbs(const Ciphertext& a, int l0, int l1) const {
  Require(!a.compressed, "ciphertext already compressed");
  Require(a.level() == 1, "drop_lsbs needs a single-limb ciphertext");
  Require(a.size() == 2, "drop_lsbs needs a two-part ciphertext");
  const Modulus& q = a.parts[0].limb_modulus(0);
  if (!DropAllowed(q.value(), l0, l1)) {
    throw ValidationError("drop_lsbs: (l0, l1) violate the decryption bound");
  }
  Require(l0 < q.bits() && l1 < q.bits(), "drop width exceeds modulus size");
  const int drops[2] = {l0, l1};
  Ciphertext out;
  out.t = a.t;
  out.compressed = true;
  out.drop0 = static_cast<uint8_t>(l0);
  out.drop1 = static_cast<uint8_t>(l1);
  for (size_t k = 0; k < 2; ++k) {
    RingPoly p = ntt_inverse(a.parts[k]);
    const int l = drops[k];
    if (l > 0) {
      uint64_t* d = p.limb(0);
      const uint64_t half = uint64_t{1} << (l - 1);
      for (size_t x = 0; x < p.degree(); ++x) {
        // Nearest multiple of 2^l; a value rounding up to >= q wraps to 0.
        const uint64_t r = ((d[x] + half) >> l) << l;
        d[x] = r >= q.value() ? 0 : r;
      }
    }
    out.parts.push_back(std::move(p));
  }
  out.noise_log2 = LogSum2(a.noise_log2, std::log2(ctx_.DropNoise(l0, l1)));
  return out;
}

Ciphertext mod_switch(const Evaluator& ev, const Ciphertext& ct) { return ev.ModSwitch(ct); }

Ciphertext drop_lsbs(const Evaluator& ev, const Ciphertext& ct, int l0, int l1) {
  return ev.DropLsbs(ct, l0, l1);
}

double noise_budget(const Evaluator& ev, const Ciphertext& ct, const SecretKey& sk) {
  return ev.NoiseBudget(sk, ct);
}

}  // namespace psearch
