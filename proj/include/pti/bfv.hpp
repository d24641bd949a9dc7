#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "pti/fixed_point.hpp"
#include "pti/prg.hpp"

namespace pti::he {

/// Polynomial degree, RNS primes and plaintext modulus t = 2^ell.
struct BfvParams {
  std::size_t poly_degree = 8192;
  std::vector<std::uint64_t> primes;
  int plain_bits = 41;

  /// Three ~60-bit primes congruent to 1 mod 2N.
  static BfvParams make(std::size_t poly_degree, int plain_bits, std::size_t prime_count = 3);
};

/// Plaintext polynomial over Z_t, exactly N coefficients.
struct PlainPoly {
  std::vector<FieldElement> coeffs;

  PlainPoly() = default;
  explicit PlainPoly(std::size_t n) : coeffs(n, 0) {}
  bool operator==(const PlainPoly&) const = default;
};

struct SecretKey {
  std::uint64_t seed = 0;
  std::vector<std::int8_t> s;           // ternary coefficients
  std::vector<std::uint64_t> s_ntt;     // per-prime NTT image, prime-major
};

/// (c0, c1) over Z_q in RNS form, prime-major. When `retained` is non-empty
/// the ciphertext is compressed: only c0 entries with retained[i] != 0 are
/// meaningful, c1 is always complete.
struct RlweCiphertext {
  std::vector<std::uint64_t> c0;
  std::vector<std::uint64_t> c1;
  std::vector<std::uint8_t> retained;
  bool ntt_form = false;
  int mul_depth = 0;

  bool compressed() const { return !retained.empty(); }
};

class NttTables;

/// Precomputed per-parameter-set state (NTT tables, RNS constants).
class BfvContext {
 public:
  explicit BfvContext(BfvParams params);
  ~BfvContext();
  BfvContext(const BfvContext&) = delete;
  BfvContext& operator=(const BfvContext&) = delete;

  const BfvParams& params() const { return params_; }
  std::size_t n() const { return params_.poly_degree; }
  std::size_t prime_count() const { return params_.primes.size(); }
  const FixedPointParams& plain() const { return plain_; }

  void ntt_forward(std::span<std::uint64_t> poly, std::size_t prime_index) const;
  void ntt_inverse(std::span<std::uint64_t> poly, std::size_t prime_index) const;

  /// delta_mod[i] = floor(q / t) mod p_i
  std::uint64_t delta_mod(std::size_t i) const { return delta_mod_[i]; }
  std::uint64_t qhat_inv(std::size_t i) const { return qhat_inv_[i]; }

 private:
  BfvParams params_;
  FixedPointParams plain_;
  std::vector<std::unique_ptr<NttTables>> tables_;
  std::vector<std::uint64_t> delta_mod_;
  std::vector<std::uint64_t> qhat_inv_;
};

SecretKey keygen(const BfvContext& ctx, std::uint64_t seed);

RlweCiphertext encrypt(const BfvContext& ctx, const PlainPoly& m, const SecretKey& sk, Prg& prg);

/// Positions outside a compressed ciphertext's retained set decrypt to 0.
PlainPoly decrypt(const BfvContext& ctx, const RlweCiphertext& ct, const SecretKey& sk);

RlweCiphertext he_add(const BfvContext& ctx, const RlweCiphertext& a, const RlweCiphertext& b);
RlweCiphertext he_add_plain(const BfvContext& ctx, const RlweCiphertext& a, const PlainPoly& p);
RlweCiphertext he_sub_plain(const BfvContext& ctx, const RlweCiphertext& a, const PlainPoly& p);

/// Negacyclic plaintext product. Throws DecryptionError once the
/// multiplicative depth would exceed one.
RlweCiphertext he_mul_plain(const BfvContext& ctx, const RlweCiphertext& ct, const PlainPoly& p);

void to_ntt(const BfvContext& ctx, RlweCiphertext& ct);
void from_ntt(const BfvContext& ctx, RlweCiphertext& ct);

/// Drops every c0 coefficient whose index is not in `keep`.
void compress(const BfvContext& ctx, RlweCiphertext& ct, std::span<const std::size_t> keep);

/// Wire form: header {N:u32, primes:u8, flags:u8}, c1 per prime, then either
/// the full c0 (flags bit 0 clear) or a ceil(N/8)-byte bitmap followed by the
/// retained c0 coefficients per prime. All integers little-endian.
std::vector<std::uint8_t> serialize(const BfvContext& ctx, const RlweCiphertext& ct);
RlweCiphertext deserialize(const BfvContext& ctx, std::span<const std::uint8_t> bytes);
std::size_t serialized_size(std::size_t n, std::size_t primes, std::size_t retained);

/// Schoolbook negacyclic product mod t.
PlainPoly polymul_reference(const PlainPoly& a, const PlainPoly& b, const FixedPointParams& plain);

}  // namespace pti::he
