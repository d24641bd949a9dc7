#include <cstring>

#include "pti/bfv.hpp"
#include "pti/error.hpp"

namespace pti::he {
namespace {

constexpr std::uint8_t kFlagCompressed = 0x01;
constexpr std::size_t kHeaderBytes = 6;

void put_le(std::uint8_t* dst, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) dst[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

std::uint64_t get_le(const std::uint8_t* src, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(src[i]) << (8 * i);
  return v;
}

}  // namespace

std::size_t serialized_size(std::size_t n, std::size_t primes, std::size_t retained) {
  if (retained >= n) return kHeaderBytes + 2 * n * primes * 8;
  return kHeaderBytes + n * primes * 8 + (n + 7) / 8 + retained * primes * 8;
}

std::vector<std::uint8_t> serialize(const BfvContext& ctx, const RlweCiphertext& ct_in) {
  const RlweCiphertext* ct = &ct_in;
  RlweCiphertext tmp;
  if (ct_in.ntt_form) {
    tmp = ct_in;
    from_ntt(ctx, tmp);
    ct = &tmp;
  }
  const std::size_t n = ctx.n(), k = ctx.prime_count();
  std::size_t retained = n;
  if (ct->compressed()) {
    retained = 0;
    for (auto b : ct->retained) retained += b;
  }
  const bool compressed = ct->compressed();
  std::vector<std::uint8_t> out(compressed ? kHeaderBytes + n * k * 8 + (n + 7) / 8 + retained * k * 8
                                           : kHeaderBytes + 2 * n * k * 8);
  std::uint8_t* p = out.data();
  put_le(p, n, 4);
  p[4] = static_cast<std::uint8_t>(k);
  p[5] = compressed ? kFlagCompressed : 0;
  p += kHeaderBytes;
  for (std::size_t i = 0; i < n * k; ++i, p += 8) put_le(p, ct->c1[i], 8);
  if (!compressed) {
    for (std::size_t i = 0; i < n * k; ++i, p += 8) put_le(p, ct->c0[i], 8);
    return out;
  }
  std::memset(p, 0, (n + 7) / 8);
  for (std::size_t j = 0; j < n; ++j) {
    if (ct->retained[j]) p[j / 8] |= static_cast<std::uint8_t>(1u << (j % 8));
  }
  p += (n + 7) / 8;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (!ct->retained[j]) continue;
      put_le(p, ct->c0[i * n + j], 8);
      p += 8;
    }
  }
  return out;
}

RlweCiphertext deserialize(const BfvContext& ctx, std::span<const std::uint8_t> bytes) {
  const std::size_t n = ctx.n(), k = ctx.prime_count();
  if (bytes.size() < kHeaderBytes) throw ShapeError("ciphertext: truncated header");
  if (get_le(bytes.data(), 4) != n || bytes[4] != k) {
    throw ShapeError("ciphertext: header does not match the parameter set");
  }
  const bool compressed = (bytes[5] & kFlagCompressed) != 0;
  const std::uint8_t* p = bytes.data() + kHeaderBytes;
  const std::uint8_t* end = bytes.data() + bytes.size();
  auto need = [&](std::size_t count) {
    if (static_cast<std::size_t>(end - p) < count) throw ShapeError("ciphertext: truncated body");
  };
  RlweCiphertext ct;
  ct.c0.assign(n * k, 0);
  ct.c1.resize(n * k);
  need(n * k * 8);
  for (std::size_t i = 0; i < n * k; ++i, p += 8) ct.c1[i] = get_le(p, 8);
  if (!compressed) {
    need(n * k * 8);
    for (std::size_t i = 0; i < n * k; ++i, p += 8) ct.c0[i] = get_le(p, 8);
    return ct;
  }
  need((n + 7) / 8);
  ct.retained.assign(n, 0);
  for (std::size_t j = 0; j < n; ++j) ct.retained[j] = (p[j / 8] >> (j % 8)) & 1;
  p += (n + 7) / 8;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (!ct.retained[j]) continue;
      need(8);
      ct.c0[i * n + j] = get_le(p, 8);
      p += 8;
    }
  }
  return ct;
}

PlainPoly polymul_reference(const PlainPoly& a, const PlainPoly& b, const FixedPointParams& plain) {
  const std::size_t n = a.coeffs.size();
  if (b.coeffs.size() != n) throw ShapeError("polymul_reference: degree mismatch");
  std::vector<std::uint64_t> acc(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t ai = a.coeffs[i];
    if (ai == 0) continue;
    for (std::size_t j = 0; j < n; ++j) {
      const std::uint64_t prod = ai * b.coeffs[j];
      const std::size_t e = i + j;
      if (e < n) {
        acc[e] += prod;
      } else {
        acc[e - n] -= prod;  // X^N = -1
      }
    }
  }
  PlainPoly out(n);
  for (std::size_t i = 0; i < n; ++i) out.coeffs[i] = plain.reduce(acc[i]);
  return out;
}

}  // namespace pti::he
