#pragma once

#include <cstdint>

namespace pti::he {

using u128 = unsigned __int128;

inline std::uint64_t add_mod(std::uint64_t a, std::uint64_t b, std::uint64_t p) {
  const std::uint64_t s = a + b;
  return s >= p ? s - p : s;
}

inline std::uint64_t sub_mod(std::uint64_t a, std::uint64_t b, std::uint64_t p) {
  return a >= b ? a - b : a + p - b;
}

inline std::uint64_t mul_mod(std::uint64_t a, std::uint64_t b, std::uint64_t p) {
  return static_cast<std::uint64_t>(static_cast<u128>(a) * b % p);
}

std::uint64_t pow_mod(std::uint64_t base, std::uint64_t exp, std::uint64_t p);
std::uint64_t inv_mod(std::uint64_t a, std::uint64_t p);
bool is_prime(std::uint64_t n);

/// Precomputed quotient for multiplying by a fixed operand w modulo p (Shoup).
inline std::uint64_t shoup_precompute(std::uint64_t w, std::uint64_t p) {
  return static_cast<std::uint64_t>((static_cast<u128>(w) << 64) / p);
}

inline std::uint64_t mul_shoup(std::uint64_t x, std::uint64_t w, std::uint64_t w_shoup, std::uint64_t p) {
  const auto q = static_cast<std::uint64_t>((static_cast<u128>(x) * w_shoup) >> 64);
  const std::uint64_t r = x * w - q * p;
  return r >= p ? r - p : r;
}

}  // namespace pti::he
