#include "pti/bfv.hpp"

#include <algorithm>
#include <cstring>
#include <string>

#include "modarith.hpp"
#include "pti/error.hpp"

namespace pti::he {
namespace {

std::size_t log2_exact(std::size_t n) {
  std::size_t l = 0;
  while ((std::size_t{1} << l) < n) ++l;
  return l;
}

std::size_t bit_reverse(std::size_t x, std::size_t bits) {
  std::size_t r = 0;
  for (std::size_t i = 0; i < bits; ++i) {
    r = (r << 1) | (x & 1);
    x >>= 1;
  }
  return r;
}

std::uint64_t find_psi(std::uint64_t p, std::size_t n) {
  const std::uint64_t order = 2 * n;
  for (std::uint64_t g = 2;; ++g) {
    const std::uint64_t psi = pow_mod(g, (p - 1) / order, p);
    if (pow_mod(psi, n, p) == p - 1) return psi;
  }
}

// Centered binomial with eta = 21: variance 10.5, sigma ~ 3.24.
std::int64_t sample_cbd(Prg& prg) {
  const std::uint64_t r = prg.next_u64();
  const int a = __builtin_popcountll(r & 0x1fffffULL);
  const int b = __builtin_popcountll((r >> 21) & 0x1fffffULL);
  return a - b;
}

std::uint64_t lift(std::int64_t v, std::uint64_t p) {
  return v >= 0 ? static_cast<std::uint64_t>(v) % p
                : p - (static_cast<std::uint64_t>(-v) % p) % p;
}

}  // namespace

class NttTables {
 public:
  NttTables(std::uint64_t p, std::size_t n) : p_(p), n_(n), roots_(n), roots_shoup_(n), inv_roots_(n), inv_roots_shoup_(n) {
    const std::size_t logn = log2_exact(n);
    const std::uint64_t psi = find_psi(p, n);
    const std::uint64_t psi_inv = inv_mod(psi, p);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t e = bit_reverse(i, logn);
      roots_[i] = pow_mod(psi, e, p);
      inv_roots_[i] = pow_mod(psi_inv, e, p);
      roots_shoup_[i] = shoup_precompute(roots_[i], p);
      inv_roots_shoup_[i] = shoup_precompute(inv_roots_[i], p);
    }
    n_inv_ = inv_mod(n % p, p);
    n_inv_shoup_ = shoup_precompute(n_inv_, p);
  }

  void forward(std::uint64_t* a) const {
    std::size_t t = n_;
    for (std::size_t m = 1; m < n_; m <<= 1) {
      t >>= 1;
      for (std::size_t i = 0; i < m; ++i) {
        const std::size_t j1 = 2 * i * t;
        const std::uint64_t w = roots_[m + i], ws = roots_shoup_[m + i];
        for (std::size_t j = j1; j < j1 + t; ++j) {
          const std::uint64_t u = a[j];
          const std::uint64_t v = mul_shoup(a[j + t], w, ws, p_);
          a[j] = add_mod(u, v, p_);
          a[j + t] = sub_mod(u, v, p_);
        }
      }
    }
  }

  void inverse(std::uint64_t* a) const {
    std::size_t t = 1;
    for (std::size_t m = n_; m > 1; m >>= 1) {
      const std::size_t h = m >> 1;
      std::size_t j1 = 0;
      for (std::size_t i = 0; i < h; ++i) {
        const std::uint64_t w = inv_roots_[h + i], ws = inv_roots_shoup_[h + i];
        for (std::size_t j = j1; j < j1 + t; ++j) {
          const std::uint64_t u = a[j];
          const std::uint64_t v = a[j + t];
          a[j] = add_mod(u, v, p_);
          a[j + t] = mul_shoup(sub_mod(u, v, p_), w, ws, p_);
        }
        j1 += 2 * t;
      }
      t <<= 1;
    }
    for (std::size_t j = 0; j < n_; ++j) a[j] = mul_shoup(a[j], n_inv_, n_inv_shoup_, p_);
  }

 private:
  std::uint64_t p_;
  std::size_t n_;
  std::vector<std::uint64_t> roots_, roots_shoup_, inv_roots_, inv_roots_shoup_;
  std::uint64_t n_inv_ = 0, n_inv_shoup_ = 0;
};

BfvParams BfvParams::make(std::size_t poly_degree, int plain_bits, std::size_t prime_count) {
  if (poly_degree < 16 || (poly_degree & (poly_degree - 1)) != 0 || poly_degree > 32768) {
    throw ConfigError("polynomial degree must be a power of two in [16, 32768], got " +
                      std::to_string(poly_degree));
  }
  if (plain_bits < 16 || plain_bits > 62) throw ConfigError("plaintext bits out of range");
  BfvParams params;
  params.poly_degree = poly_degree;
  params.plain_bits = plain_bits;
  const std::uint64_t step = 2 * poly_degree;
  std::uint64_t candidate = (std::uint64_t{1} << 60) - ((std::uint64_t{1} << 60) % step) + 1;
  while (params.primes.size() < prime_count) {
    candidate -= step;
    if (is_prime(candidate)) params.primes.push_back(candidate);
  }
  return params;
}

BfvContext::BfvContext(BfvParams params) : params_(std::move(params)) {
  plain_ = FixedPointParams{params_.plain_bits, 0};
  const std::size_t k = params_.primes.size();
  for (auto p : params_.primes) tables_.push_back(std::make_unique<NttTables>(p, params_.poly_degree));

  // q mod t, computed by wrapping multiplication since t is a power of two.
  std::uint64_t q_mod_t = 1;
  for (auto p : params_.primes) q_mod_t *= p;
  q_mod_t &= plain_.mask();

  delta_mod_.resize(k);
  qhat_inv_.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    const std::uint64_t p = params_.primes[i];
    const std::uint64_t t_inv = inv_mod(plain_.modulus() % p, p);
    delta_mod_[i] = mul_mod(sub_mod(0, q_mod_t % p, p), t_inv, p);
    std::uint64_t qhat = 1;
    for (std::size_t j = 0; j < k; ++j) {
      if (j != i) qhat = mul_mod(qhat, params_.primes[j] % p, p);
    }
    qhat_inv_[i] = inv_mod(qhat, p);
  }
}

BfvContext::~BfvContext() = default;

void BfvContext::ntt_forward(std::span<std::uint64_t> poly, std::size_t prime_index) const {
  tables_[prime_index]->forward(poly.data());
}

void BfvContext::ntt_inverse(std::span<std::uint64_t> poly, std::size_t prime_index) const {
  tables_[prime_index]->inverse(poly.data());
}

SecretKey keygen(const BfvContext& ctx, std::uint64_t seed) {
  const std::size_t n = ctx.n(), k = ctx.prime_count();
  SecretKey sk;
  sk.seed = seed;
  sk.s.resize(n);
  Prg prg(seed, 0x6b657967656eULL);
  for (auto& c : sk.s) c = static_cast<std::int8_t>(static_cast<int>(prg.uniform(3)) - 1);
  sk.s_ntt.resize(n * k);
  for (std::size_t i = 0; i < k; ++i) {
    const std::uint64_t p = ctx.params().primes[i];
    std::uint64_t* dst = &sk.s_ntt[i * n];
    for (std::size_t j = 0; j < n; ++j) dst[j] = lift(sk.s[j], p);
    ctx.ntt_forward({dst, n}, i);
  }
  return sk;
}

RlweCiphertext encrypt(const BfvContext& ctx, const PlainPoly& m, const SecretKey& sk, Prg& prg) {
  const std::size_t n = ctx.n(), k = ctx.prime_count();
  if (m.coeffs.size() != n) throw ShapeError("plaintext length must equal the polynomial degree");
  RlweCiphertext ct;
  ct.c0.resize(n * k);
  ct.c1.resize(n * k);
  std::vector<std::int64_t> e(n);
  for (auto& v : e) v = sample_cbd(prg);
  for (std::size_t i = 0; i < k; ++i) {
    const std::uint64_t p = ctx.params().primes[i];
    std::uint64_t* c0 = &ct.c0[i * n];
    std::uint64_t* c1 = &ct.c1[i * n];
    const std::uint64_t* s = &sk.s_ntt[i * n];
    for (std::size_t j = 0; j < n; ++j) {
      c1[j] = prg.uniform(p);  // uniform in the NTT domain
      c0[j] = sub_mod(0, mul_mod(c1[j], s[j], p), p);
    }
    ctx.ntt_inverse({c1, n}, i);
    ctx.ntt_inverse({c0, n}, i);
    const std::uint64_t delta = ctx.delta_mod(i);
    for (std::size_t j = 0; j < n; ++j) {
      const std::uint64_t scaled = mul_mod(delta, m.coeffs[j] % p, p);
      c0[j] = add_mod(add_mod(c0[j], lift(e[j], p), p), scaled, p);
    }
  }
  return ct;
}

void to_ntt(const BfvContext& ctx, RlweCiphertext& ct) {
  if (ct.ntt_form) return;
  if (ct.compressed()) throw ShapeError("compressed ciphertexts cannot be transformed");
  const std::size_t n = ctx.n();
  for (std::size_t i = 0; i < ctx.prime_count(); ++i) {
    ctx.ntt_forward({&ct.c0[i * n], n}, i);
    ctx.ntt_forward({&ct.c1[i * n], n}, i);
  }
  ct.ntt_form = true;
}

void from_ntt(const BfvContext& ctx, RlweCiphertext& ct) {
  if (!ct.ntt_form) return;
  const std::size_t n = ctx.n();
  for (std::size_t i = 0; i < ctx.prime_count(); ++i) {
    ctx.ntt_inverse({&ct.c0[i * n], n}, i);
    ctx.ntt_inverse({&ct.c1[i * n], n}, i);
  }
  ct.ntt_form = false;
}

PlainPoly decrypt(const BfvContext& ctx, const RlweCiphertext& ct_in, const SecretKey& sk) {
  const std::size_t n = ctx.n(), k = ctx.prime_count();
  if (ct_in.c0.size() != n * k || ct_in.c1.size() != n * k) {
    throw ShapeError("ciphertext does not match the parameter set");
  }
  std::vector<std::uint64_t> c1 = ct_in.c1;
  std::vector<std::uint64_t> c0 = ct_in.c0;
  if (ct_in.ntt_form) {
    for (std::size_t i = 0; i < k; ++i) ctx.ntt_inverse({&c0[i * n], n}, i);
  } else {
    for (std::size_t i = 0; i < k; ++i) ctx.ntt_forward({&c1[i * n], n}, i);
  }
  // x = c0 + c1 * s per prime, coefficient domain.
  for (std::size_t i = 0; i < k; ++i) {
    const std::uint64_t p = ctx.params().primes[i];
    std::uint64_t* a = &c1[i * n];
    const std::uint64_t* s = &sk.s_ntt[i * n];
    for (std::size_t j = 0; j < n; ++j) a[j] = mul_mod(a[j], s[j], p);
    ctx.ntt_inverse({a, n}, i);
    const std::uint64_t* b = &c0[i * n];
    for (std::size_t j = 0; j < n; ++j) a[j] = add_mod(a[j], b[j], p);
  }
  // round(t * x / q) mod t = sum_i round-split(y_i * t / p_i), y_i = x_i * qhat_inv_i.
  const FixedPointParams& plain = ctx.plain();
  PlainPoly out(n);
  for (std::size_t j = 0; j < n; ++j) {
    if (ct_in.compressed() && ct_in.retained[j] == 0) continue;
    std::uint64_t integral = 0;
    long double frac = 0.0L;
    for (std::size_t i = 0; i < k; ++i) {
      const std::uint64_t p = ctx.params().primes[i];
      const std::uint64_t y = mul_mod(c1[i * n + j], ctx.qhat_inv(i), p);
      const u128 num = static_cast<u128>(y) << plain.ell;
      integral += static_cast<std::uint64_t>(num / p);
      frac += static_cast<long double>(static_cast<std::uint64_t>(num % p)) / static_cast<long double>(p);
    }
    const auto rounded = static_cast<std::uint64_t>(frac + 0.5L);
    out.coeffs[j] = plain.reduce(integral + rounded);
  }
  return out;
}

namespace {

void check_compatible(const RlweCiphertext& a, const RlweCiphertext& b) {
  if (a.c0.size() != b.c0.size() || a.c1.size() != b.c1.size()) {
    throw ShapeError("he_add: ciphertext shapes differ");
  }
  if (a.compressed() || b.compressed()) throw ShapeError("he_add: compressed operand");
}

void add_scaled_plain(const BfvContext& ctx, RlweCiphertext& ct, const PlainPoly& p, bool subtract) {
  const std::size_t n = ctx.n();
  if (p.coeffs.size() != n) throw ShapeError("plaintext length must equal the polynomial degree");
  from_ntt(ctx, ct);
  for (std::size_t i = 0; i < ctx.prime_count(); ++i) {
    const std::uint64_t q = ctx.params().primes[i];
    const std::uint64_t delta = ctx.delta_mod(i);
    std::uint64_t* c0 = &ct.c0[i * n];
    for (std::size_t j = 0; j < n; ++j) {
      const std::uint64_t v = mul_mod(delta, p.coeffs[j] % q, q);
      c0[j] = subtract ? sub_mod(c0[j], v, q) : add_mod(c0[j], v, q);
    }
  }
}

}  // namespace

RlweCiphertext he_add(const BfvContext& ctx, const RlweCiphertext& a, const RlweCiphertext& b) {
  check_compatible(a, b);
  RlweCiphertext out = a;
  RlweCiphertext rhs_copy;
  const RlweCiphertext* rhs = &b;
  if (a.ntt_form != b.ntt_form) {
    rhs_copy = b;
    if (a.ntt_form) {
      to_ntt(ctx, rhs_copy);
    } else {
      from_ntt(ctx, rhs_copy);
    }
    rhs = &rhs_copy;
  }
  const std::size_t n = ctx.n();
  for (std::size_t i = 0; i < ctx.prime_count(); ++i) {
    const std::uint64_t p = ctx.params().primes[i];
    for (std::size_t j = i * n; j < (i + 1) * n; ++j) {
      out.c0[j] = add_mod(out.c0[j], rhs->c0[j], p);
      out.c1[j] = add_mod(out.c1[j], rhs->c1[j], p);
    }
  }
  out.mul_depth = std::max(a.mul_depth, b.mul_depth);
  return out;
}

RlweCiphertext he_add_plain(const BfvContext& ctx, const RlweCiphertext& a, const PlainPoly& p) {
  RlweCiphertext out = a;
  add_scaled_plain(ctx, out, p, false);
  return out;
}

RlweCiphertext he_sub_plain(const BfvContext& ctx, const RlweCiphertext& a, const PlainPoly& p) {
  RlweCiphertext out = a;
  add_scaled_plain(ctx, out, p, true);
  return out;
}

RlweCiphertext he_mul_plain(const BfvContext& ctx, const RlweCiphertext& ct, const PlainPoly& p) {
  const std::size_t n = ctx.n();
  if (p.coeffs.size() != n) throw ShapeError("plaintext length must equal the polynomial degree");
  if (ct.compressed()) throw ShapeError("he_mul_plain: compressed operand");
  if (ct.mul_depth >= 1) {
    throw DecryptionError("he_mul_plain: multiplicative depth 1 exceeded, noise budget insufficient");
  }
  RlweCiphertext out = ct;
  to_ntt(ctx, out);
  const FixedPointParams& plain = ctx.plain();
  std::vector<std::uint64_t> pt(n);
  for (std::size_t i = 0; i < ctx.prime_count(); ++i) {
    const std::uint64_t q = ctx.params().primes[i];
    for (std::size_t j = 0; j < n; ++j) pt[j] = lift(plain.to_signed(p.coeffs[j]), q);
    ctx.ntt_forward(pt, i);
    std::uint64_t* c0 = &out.c0[i * n];
    std::uint64_t* c1 = &out.c1[i * n];
    for (std::size_t j = 0; j < n; ++j) {
      c0[j] = mul_mod(c0[j], pt[j], q);
      c1[j] = mul_mod(c1[j], pt[j], q);
    }
  }
  out.mul_depth = ct.mul_depth + 1;
  return out;
}

void compress(const BfvContext& ctx, RlweCiphertext& ct, std::span<const std::size_t> keep) {
  if (ct.ntt_form) throw ShapeError("compress: ciphertext must be in coefficient form");
  const std::size_t n = ctx.n();
  std::vector<std::uint8_t> mask(n, 0);
  for (auto idx : keep) {
    if (idx >= n) throw ShapeError("compress: index beyond polynomial degree");
    mask[idx] = 1;
  }
  if (ct.compressed()) {
    for (std::size_t j = 0; j < n; ++j) mask[j] &= ct.retained[j];
  }
  for (std::size_t i = 0; i < ctx.prime_count(); ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (mask[j] == 0) ct.c0[i * n + j] = 0;
    }
  }
  ct.retained = std::move(mask);
}

}  // namespace pti::he
