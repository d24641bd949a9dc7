#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace pti {

/// 128-bit value used for OT keys and PRG seeds.
struct Block {
  std::uint64_t lo = 0;
  std::uint64_t hi = 0;

  Block operator^(const Block& o) const { return {lo ^ o.lo, hi ^ o.hi}; }
  Block& operator^=(const Block& o) {
    lo ^= o.lo;
    hi ^= o.hi;
    return *this;
  }
  bool operator==(const Block&) const = default;
};

/// Deterministic AES-128-CTR stream generator.
class Prg {
 public:
  explicit Prg(Block key);
  /// Derives the key from a 64-bit seed and a stream label, so two parties
  /// (or two purposes) seeded from the same number get independent streams.
  Prg(std::uint64_t seed, std::uint64_t stream);
  ~Prg();
  Prg(Prg&&) noexcept;
  Prg& operator=(Prg&&) noexcept;
  Prg(const Prg&) = delete;
  Prg& operator=(const Prg&) = delete;

  void fill(std::span<std::uint8_t> out);
  std::uint64_t next_u64();
  Block next_block();
  /// Uniform in [0, bound) by rejection.
  std::uint64_t uniform(std::uint64_t bound);
  /// Uniform over the low `bits` bits.
  std::uint64_t bits(int bits) { return bits >= 64 ? next_u64() : next_u64() & ((std::uint64_t{1} << bits) - 1); }

 private:
  void refill();

  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::vector<std::uint8_t> buffer_;
  std::size_t pos_ = 0;
};

/// Correlation-robust hash built from fixed-key AES: H(x, i) = AES(x^i) ^ (x^i).
/// Batched because OT extension hashes millions of rows.
class AesHash {
 public:
  AesHash();
  ~AesHash();
  AesHash(const AesHash&) = delete;
  AesHash& operator=(const AesHash&) = delete;

  /// out[k] = H(in[k], tweak0 + k)
  void hash(std::span<const Block> in, std::uint64_t tweak0, std::span<Block> out) const;
  Block hash_one(Block in, std::uint64_t tweak) const;
  /// out[k] = AES(in[k]) ^ in[k]; callers mix their own tweaks into the input.
  void hash_untweaked(std::span<const Block> in, std::span<Block> out) const;

 private:
  void run(std::span<const Block> in, std::uint64_t tweak0, std::uint64_t step, std::span<Block> out) const;

  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace pti
