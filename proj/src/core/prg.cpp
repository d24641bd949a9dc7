#include "pti/prg.hpp"

#include <openssl/evp.h>

#include <cstring>
#include <stdexcept>

namespace pti {
namespace {

constexpr std::size_t kBufferBytes = 1 << 14;

EVP_CIPHER_CTX* new_ctx(const EVP_CIPHER* cipher, const std::uint8_t* key, const std::uint8_t* iv) {
  EVP_CIPHER_CTX* ctx = EVP_CIPHER_CTX_new();
  if (ctx == nullptr || EVP_EncryptInit_ex(ctx, cipher, nullptr, key, iv) != 1) {
    throw std::runtime_error("AES context initialisation failed");
  }
  EVP_CIPHER_CTX_set_padding(ctx, 0);
  return ctx;
}

// splitmix64 finaliser; only used to spread a 64-bit seed over a 128-bit key.
std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

struct Prg::Impl {
  EVP_CIPHER_CTX* ctx = nullptr;
  ~Impl() { EVP_CIPHER_CTX_free(ctx); }
};

Prg::Prg(Block key) : impl_(std::make_unique<Impl>()), buffer_(kBufferBytes), pos_(kBufferBytes) {
  std::uint8_t k[16];
  std::memcpy(k, &key.lo, 8);
  std::memcpy(k + 8, &key.hi, 8);
  const std::uint8_t iv[16] = {};
  impl_->ctx = new_ctx(EVP_aes_128_ctr(), k, iv);
}

Prg::Prg(std::uint64_t seed, std::uint64_t stream)
    : Prg(Block{mix64(seed ^ mix64(stream)), mix64(mix64(seed) + stream + 0x5bd1e995ULL)}) {}

Prg::~Prg() = default;
Prg::Prg(Prg&&) noexcept = default;
Prg& Prg::operator=(Prg&&) noexcept = default;

void Prg::refill() {
  std::memset(buffer_.data(), 0, buffer_.size());
  int outl = 0;
  EVP_EncryptUpdate(impl_->ctx, buffer_.data(), &outl, buffer_.data(), static_cast<int>(buffer_.size()));
  pos_ = 0;
}

void Prg::fill(std::span<std::uint8_t> out) {
  std::size_t done = 0;
  while (done < out.size()) {
    if (pos_ == buffer_.size()) refill();
    const std::size_t n = std::min(out.size() - done, buffer_.size() - pos_);
    std::memcpy(out.data() + done, buffer_.data() + pos_, n);
    pos_ += n;
    done += n;
  }
}

std::uint64_t Prg::next_u64() {
  if (buffer_.size() - pos_ < 8) refill();
  std::uint64_t v;
  std::memcpy(&v, buffer_.data() + pos_, 8);
  pos_ += 8;
  return v;
}

Block Prg::next_block() {
  Block b;
  b.lo = next_u64();
  b.hi = next_u64();
  return b;
}

std::uint64_t Prg::uniform(std::uint64_t bound) {
  if (bound == 0) return next_u64();
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  for (;;) {
    const std::uint64_t v = next_u64();
    if (v < limit) return v % bound;
  }
}

struct AesHash::Impl {
  EVP_CIPHER_CTX* ctx = nullptr;
  ~Impl() { EVP_CIPHER_CTX_free(ctx); }
};

AesHash::AesHash() : impl_(std::make_unique<Impl>()) {
  static const std::uint8_t kFixedKey[16] = {0x61, 0x7e, 0x8d, 0xa2, 0xa0, 0x51, 0x1e, 0x96,
                                             0x5e, 0x41, 0xc2, 0x9b, 0x15, 0x3f, 0xc7, 0x7a};
  impl_->ctx = new_ctx(EVP_aes_128_ecb(), kFixedKey, nullptr);
}

AesHash::~AesHash() = default;

void AesHash::hash(std::span<const Block> in, std::uint64_t tweak0, std::span<Block> out) const {
  run(in, tweak0, 1, out);
}

void AesHash::hash_untweaked(std::span<const Block> in, std::span<Block> out) const { run(in, 0, 0, out); }

void AesHash::run(std::span<const Block> in, std::uint64_t tweak0, std::uint64_t step, std::span<Block> out) const {
  constexpr std::size_t kChunk = 4096;
  std::vector<Block> tmp(std::min(in.size(), kChunk));
  for (std::size_t base = 0; base < in.size(); base += kChunk) {
    const std::size_t n = std::min(kChunk, in.size() - base);
    for (std::size_t k = 0; k < n; ++k) {
      tmp[k] = in[base + k];
      tmp[k].lo ^= tweak0 + step * (base + k);
    }
    int outl = 0;
    auto* bytes = reinterpret_cast<std::uint8_t*>(out.data() + base);
    EVP_EncryptUpdate(impl_->ctx, bytes, &outl, reinterpret_cast<const std::uint8_t*>(tmp.data()),
                      static_cast<int>(n * sizeof(Block)));
    for (std::size_t k = 0; k < n; ++k) out[base + k] ^= tmp[k];
  }
}

Block AesHash::hash_one(Block in, std::uint64_t tweak) const {
  Block out;
  hash(std::span<const Block>(&in, 1), tweak, std::span<Block>(&out, 1));
  return out;
}

}  // namespace pti
