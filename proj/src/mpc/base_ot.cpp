#include <sodium.h>

#include <cstring>

#include "pti/error.hpp"
#include "pti/ot.hpp"
#include "pti/session.hpp"

namespace pti::mpc {

namespace {

constexpr std::size_t kPoint = crypto_core_ristretto255_BYTES;
constexpr std::size_t kScalar = crypto_core_ristretto255_SCALARBYTES;

void ensure_sodium() {
  static const int rc = sodium_init();
  if (rc < 0) throw Error(ErrorKind::kInternal, "libsodium initialisation failed");
}

void random_scalar(Prg& prg, unsigned char* out) {
  unsigned char wide[crypto_core_ristretto255_NONREDUCEDSCALARBYTES];
  prg.fill({wide, sizeof(wide)});
  crypto_core_ristretto255_scalar_reduce(out, wide);
}

Block derive_key(const unsigned char* a, const unsigned char* b, const unsigned char* shared, std::uint64_t index) {
  crypto_generichash_state st;
  crypto_generichash_init(&st, nullptr, 0, 16);
  crypto_generichash_update(&st, a, kPoint);
  crypto_generichash_update(&st, b, kPoint);
  crypto_generichash_update(&st, shared, kPoint);
  unsigned char idx[8];
  for (int i = 0; i < 8; ++i) idx[i] = static_cast<unsigned char>(index >> (8 * i));
  crypto_generichash_update(&st, idx, sizeof(idx));
  unsigned char out[16];
  crypto_generichash_final(&st, out, sizeof(out));
  Block k;
  std::memcpy(&k.lo, out, 8);
  std::memcpy(&k.hi, out + 8, 8);
  return k;
}

void check_point(const unsigned char* p) {
  if (crypto_core_ristretto255_is_valid_point(p) != 1) {
    throw DesyncError("malformed group element in base OT");
  }
}

void scalarmult(unsigned char* out, const unsigned char* k, const unsigned char* p) {
  if (crypto_scalarmult_ristretto255(out, k, p) != 0) throw DesyncError("degenerate group element in base OT");
}

std::vector<std::uint8_t> expand(Block key, std::size_t len) {
  std::vector<std::uint8_t> out(len);
  Prg(key).fill(out);
  return out;
}

}  // namespace

std::vector<std::array<Block, 2>> base_rot_send(Session& s, std::size_t count) {
  ensure_sodium();
  unsigned char a[kScalar], big_a[kPoint];
  random_scalar(s.prg(), a);
  crypto_scalarmult_ristretto255_base(big_a, a);
  s.send(Tag::kOt, {big_a, kPoint});

  const auto payload = s.recv(Tag::kOt);
  if (payload.size() != count * kPoint) throw DesyncError("base OT: unexpected receiver message size");

  // T = a·A lets the sender compute a·(B - A) as a·B - T.
  unsigned char t[kPoint];
  scalarmult(t, a, big_a);
  std::vector<std::array<Block, 2>> keys(count);
  for (std::size_t i = 0; i < count; ++i) {
    const unsigned char* b = payload.data() + i * kPoint;
    check_point(b);
    unsigned char k0[kPoint], k1[kPoint];
    scalarmult(k0, a, b);
    crypto_core_ristretto255_sub(k1, k0, t);
    keys[i][0] = derive_key(big_a, b, k0, i);
    keys[i][1] = derive_key(big_a, b, k1, i);
  }
  return keys;
}

std::vector<Block> base_rot_recv(Session& s, std::span<const std::uint8_t> choices) {
  ensure_sodium();
  const auto first = s.recv(Tag::kOt);
  if (first.size() != kPoint) throw DesyncError("base OT: unexpected sender message size");
  const unsigned char* big_a = first.data();
  check_point(big_a);

  std::vector<std::uint8_t> msg(choices.size() * kPoint);
  std::vector<std::array<unsigned char, kScalar>> scalars(choices.size());
  for (std::size_t i = 0; i < choices.size(); ++i) {
    random_scalar(s.prg(), scalars[i].data());
    unsigned char* b = msg.data() + i * kPoint;
    crypto_scalarmult_ristretto255_base(b, scalars[i].data());
    if (choices[i] & 1) crypto_core_ristretto255_add(b, b, big_a);
  }
  s.send(Tag::kOt, msg);

  std::vector<Block> keys(choices.size());
  for (std::size_t i = 0; i < choices.size(); ++i) {
    unsigned char k[kPoint];
    scalarmult(k, scalars[i].data(), big_a);
    keys[i] = derive_key(big_a, msg.data() + i * kPoint, k, i);
  }
  return keys;
}

void base_ot_send(Session& s, std::span<const std::vector<std::uint8_t>> m0,
                  std::span<const std::vector<std::uint8_t>> m1) {
  if (m0.size() != m1.size()) throw ShapeError("base OT: message list lengths differ");
  const std::size_t len = m0.empty() ? 0 : m0[0].size();
  for (std::size_t i = 0; i < m0.size(); ++i) {
    if (m0[i].size() != len || m1[i].size() != len) throw ShapeError("base OT: messages must share one length");
  }
  const auto keys = base_rot_send(s, m0.size());
  std::vector<std::uint8_t> out;
  out.reserve(2 * len * m0.size());
  for (std::size_t i = 0; i < m0.size(); ++i) {
    for (int b = 0; b < 2; ++b) {
      const auto& m = b ? m1[i] : m0[i];
      const auto pad = expand(keys[i][b], len);
      for (std::size_t j = 0; j < len; ++j) out.push_back(m[j] ^ pad[j]);
    }
  }
  s.send(Tag::kOt, out);
}

std::vector<std::vector<std::uint8_t>> base_ot_recv(Session& s, std::span<const std::uint8_t> choices,
                                                    std::size_t length) {
  const auto keys = base_rot_recv(s, choices);
  const auto ct = s.recv(Tag::kOt);
  if (ct.size() != 2 * length * choices.size()) throw DesyncError("base OT: unexpected ciphertext size");
  std::vector<std::vector<std::uint8_t>> out(choices.size());
  for (std::size_t i = 0; i < choices.size(); ++i) {
    const auto pad = expand(keys[i], length);
    const std::uint8_t* c = ct.data() + (2 * i + (choices[i] & 1)) * length;
    out[i].resize(length);
    for (std::size_t j = 0; j < length; ++j) out[i][j] = c[j] ^ pad[j];
  }
  return out;
}

}  // namespace pti::mpc
