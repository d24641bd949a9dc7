#include <random>

#include "doctest.h"
#include "pti/bfv.hpp"
#include "pti/error.hpp"

using namespace pti;
using namespace pti::he;

namespace {

PlainPoly random_poly(std::size_t n, const FixedPointParams& plain, std::mt19937_64& rng) {
  PlainPoly p(n);
  for (auto& c : p.coeffs) c = plain.reduce(rng());
  return p;
}

struct Fixture {
  explicit Fixture(std::size_t n) : ctx(BfvParams::make(n, 41)), sk(keygen(ctx, 42)), prg(1, 2) {}
  BfvContext ctx;
  SecretKey sk;
  Prg prg;
};

}  // namespace

TEST_CASE("parameter generation") {
  const auto params = BfvParams::make(8192, 41);
  REQUIRE(params.primes.size() == 3);
  for (auto p : params.primes) {
    CHECK(p % (2 * 8192) == 1);
    CHECK(p > (std::uint64_t{1} << 59));
  }
  CHECK_THROWS_AS(BfvParams::make(1000, 41), ConfigError);
}

TEST_CASE("keygen is deterministic and ternary") {
  BfvContext ctx(BfvParams::make(1024, 41));
  const auto a = keygen(ctx, 5), b = keygen(ctx, 5);
  CHECK(a.s == b.s);
  for (auto c : a.s) CHECK((c >= -1 && c <= 1));
  int differing_pairs = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    if (keygen(ctx, 2 * seed).s != keygen(ctx, 2 * seed + 1).s) ++differing_pairs;
  }
  CHECK(differing_pairs == 100);
}

TEST_CASE("NTT round trip") {
  BfvContext ctx(BfvParams::make(2048, 41));
  std::mt19937_64 rng(9);
  for (std::size_t i = 0; i < ctx.prime_count(); ++i) {
    std::vector<std::uint64_t> a(2048);
    for (auto& v : a) v = rng() % ctx.params().primes[i];
    auto b = a;
    ctx.ntt_forward(b, i);
    CHECK(b != a);
    ctx.ntt_inverse(b, i);
    CHECK(b == a);
  }
}

TEST_CASE("encrypt/decrypt round trips") {
  Fixture f(4096);
  const auto& plain = f.ctx.plain();
  std::mt19937_64 rng(17);
  PlainPoly zero(4096);
  CHECK(decrypt(f.ctx, encrypt(f.ctx, zero, f.sk, f.prg), f.sk) == zero);
  for (int i = 0; i < 100; ++i) {
    const auto m = random_poly(4096, plain, rng);
    CHECK(decrypt(f.ctx, encrypt(f.ctx, m, f.sk, f.prg), f.sk) == m);
  }
}

TEST_CASE("homomorphic addition") {
  Fixture f(1024);
  const auto& plain = f.ctx.plain();
  std::mt19937_64 rng(23);
  const auto m1 = random_poly(1024, plain, rng), m2 = random_poly(1024, plain, rng);
  const auto c1 = encrypt(f.ctx, m1, f.sk, f.prg), c2 = encrypt(f.ctx, m2, f.sk, f.prg);
  const auto c0 = encrypt(f.ctx, PlainPoly(1024), f.sk, f.prg);
  CHECK(decrypt(f.ctx, he_add(f.ctx, c1, c0), f.sk) == m1);
  PlainPoly sum(1024);
  for (std::size_t i = 0; i < 1024; ++i) sum.coeffs[i] = plain.add(m1.coeffs[i], m2.coeffs[i]);
  CHECK(decrypt(f.ctx, he_add(f.ctx, c1, c2), f.sk) == sum);
  CHECK(decrypt(f.ctx, he_add(f.ctx, c2, c1), f.sk) == decrypt(f.ctx, he_add(f.ctx, c1, c2), f.sk));
  CHECK(decrypt(f.ctx, he_add_plain(f.ctx, c1, m2), f.sk) == sum);
  CHECK(decrypt(f.ctx, he_sub_plain(f.ctx, he_add_plain(f.ctx, c1, m2), m2), f.sk) == m1);
  auto ntt_copy = c2;
  to_ntt(f.ctx, ntt_copy);
  CHECK(decrypt(f.ctx, he_add(f.ctx, c1, ntt_copy), f.sk) == sum);
}

TEST_CASE("polymul_reference examples") {
  const FixedPointParams plain{41, 0};
  PlainPoly a(8), one(8), x(8), xn1(8);
  a.coeffs[0] = 1;
  a.coeffs[1] = 1;
  one.coeffs[0] = 1;
  x.coeffs[1] = 1;
  xn1.coeffs[7] = 1;
  CHECK(polymul_reference(a, one, plain) == a);
  const auto wrapped = polymul_reference(xn1, x, plain);
  CHECK(wrapped.coeffs[0] == plain.modulus() - 1);
}

TEST_CASE("plaintext multiplication matches the schoolbook oracle") {
  for (std::size_t n : {1024u, 2048u}) {
    Fixture f(n);
    const auto& plain = f.ctx.plain();
    std::mt19937_64 rng(31 + n);
    const int trials = n == 2048 ? 10 : 50;
    for (int i = 0; i < trials; ++i) {
      const auto p = random_poly(n, plain, rng), m = random_poly(n, plain, rng);
      const auto ct = he_mul_plain(f.ctx, encrypt(f.ctx, m, f.sk, f.prg), p);
      CHECK(decrypt(f.ctx, ct, f.sk) == polymul_reference(p, m, plain));
    }
  }
}

TEST_CASE("plaintext multiplication edge cases") {
  Fixture f(1024);
  const auto& plain = f.ctx.plain();
  std::mt19937_64 rng(3);
  const auto m = random_poly(1024, plain, rng);
  PlainPoly one(1024), x(1024), xn1(1024);
  one.coeffs[0] = 1;
  x.coeffs[1] = 1;
  xn1.coeffs[1023] = 12345;
  const auto ct = encrypt(f.ctx, m, f.sk, f.prg);
  CHECK(decrypt(f.ctx, he_mul_plain(f.ctx, ct, one), f.sk) == m);
  const auto wrapped = decrypt(f.ctx, he_mul_plain(f.ctx, encrypt(f.ctx, xn1, f.sk, f.prg), x), f.sk);
  CHECK(wrapped.coeffs[0] == plain.modulus() - 12345);
  // Ternary-bounded plaintext, then a second product must be refused.
  PlainPoly tern(1024);
  for (auto& c : tern.coeffs) c = plain.from_signed(static_cast<std::int64_t>(rng() % 3) - 1);
  const auto once = he_mul_plain(f.ctx, ct, tern);
  CHECK(decrypt(f.ctx, once, f.sk) == polymul_reference(tern, m, plain));
  CHECK_THROWS_AS(he_mul_plain(f.ctx, once, tern), DecryptionError);
}

TEST_CASE("compression keeps the retained coefficients and the wire format") {
  Fixture f(2048);
  const auto& plain = f.ctx.plain();
  std::mt19937_64 rng(77);
  const auto m = random_poly(2048, plain, rng), p = random_poly(2048, plain, rng);
  auto ct = he_mul_plain(f.ctx, encrypt(f.ctx, m, f.sk, f.prg), p);
  from_ntt(f.ctx, ct);
  const auto full = decrypt(f.ctx, ct, f.sk);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<std::size_t> keep;
    for (std::size_t j = 0; j < 2048; ++j) {
      if (rng() % 7 == 0) keep.push_back(j);
    }
    auto small = ct;
    compress(f.ctx, small, keep);
    const auto bytes = serialize(f.ctx, small);
    CHECK(bytes.size() == serialized_size(2048, 3, keep.size()));
    const auto back = deserialize(f.ctx, bytes);
    const auto part = decrypt(f.ctx, back, f.sk);
    for (auto j : keep) CHECK(part.coeffs[j] == full.coeffs[j]);
  }
  const auto bytes = serialize(f.ctx, ct);
  CHECK(bytes.size() == 6 + 2 * 2048 * 3 * 8);
  CHECK(bytes[0] == 0x00);
  CHECK(bytes[1] == 0x08);
  CHECK(bytes[4] == 3);
  CHECK(bytes[5] == 0);
  CHECK(decrypt(f.ctx, deserialize(f.ctx, bytes), f.sk) == full);
  CHECK_THROWS_AS(deserialize(f.ctx, std::span<const std::uint8_t>(bytes.data(), 100)), ShapeError);
}
