// Copyright 2026 The psearch Authors.
// SPDX-License-Identifier: Apache-2.0

#include "psearch/common/prng.h"

#include <sodium.h>

#include <cstring>
#include <stdexcept>

namespace psearch {
namespace {

void EnsureSodium() {
  static const bool ok = sodium_init() >= 0;
  if (!ok) throw std::runtime_error("libsodium initialization failed");
}

Prng::Key Derive(const uint8_t* material, size_t len) {
  EnsureSodium();
  Prng::Key key;
  crypto_generichash(key.data(), key.size(), material, len, nullptr, 0);
  return key;
}

}  // namespace

Prng::Prng(uint64_t seed, std::string_view domain) {
  std::string material(domain);
  material.push_back('\0');
  for (int i = 0; i < 8; ++i) material.push_back(static_cast<char>(seed >> (8 * i)));
  key_ = Derive(reinterpret_cast<const uint8_t*>(material.data()), material.size());
}

Prng::Prng(const Key& key) : key_(key) { EnsureSodium(); }

void Prng::Refill() {
  uint8_t nonce[crypto_stream_chacha20_NONCEBYTES] = {};
  for (int i = 0; i < 8; ++i) nonce[i] = static_cast<uint8_t>(block_ >> (8 * i));
  crypto_stream_chacha20(buf_.data(), buf_.size(), nonce, key_.data());
  ++block_;
  pos_ = 0;
}

Prng::result_type Prng::operator()() {
  if (pos_ + 8 > kBufferBytes) Refill();
  uint64_t v;
  std::memcpy(&v, buf_.data() + pos_, 8);
  pos_ += 8;
  return v;
}

uint64_t Prng::UniformBelow(uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("UniformBelow: zero bound");
  // Rejection keeps the result exactly uniform.
  const uint64_t limit = max() - max() % bound;
  uint64_t v;
  do {
    v = (*this)();
  } while (v >= limit);
  return v % bound;
}

double Prng::UniformDouble() {
  return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

void Prng::Fill(uint8_t* out, size_t len) {
  while (len > 0) {
    if (pos_ == kBufferBytes) Refill();
    size_t take = std::min(len, kBufferBytes - pos_);
    std::memcpy(out, buf_.data() + pos_, take);
    pos_ += take;
    out += take;
    len -= take;
  }
}

Prng Prng::Fork(std::string_view label, uint64_t index) const {
  std::string material(reinterpret_cast<const char*>(key_.data()), key_.size());
  material.append(label);
  material.push_back('\0');
  for (int i = 0; i < 8; ++i) material.push_back(static_cast<char>(index >> (8 * i)));
  return Prng(Derive(reinterpret_cast<const uint8_t*>(material.data()), material.size()));
}

}  // namespace psearch
