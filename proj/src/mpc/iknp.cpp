#include <emmintrin.h>

#include <cstring>

#include "bits.hpp"
#include "pti/error.hpp"
#include "pti/ot.hpp"
#include "pti/session.hpp"

namespace pti::mpc {

namespace {

constexpr std::size_t kRows = OtExtension::kBaseCount;

const AesHash& row_hash() {
  static const AesHash h;
  return h;
}

Block load_block(const std::uint8_t* p) {
  Block b;
  std::memcpy(&b.lo, p, 8);
  std::memcpy(&b.hi, p + 8, 8);
  return b;
}

bool block_bit(const Block& b, std::size_t j) { return ((j < 64 ? b.lo >> j : b.hi >> (j - 64)) & 1) != 0; }

std::size_t padded(std::size_t count) { return (count + 127) / 128 * 128; }

}  // namespace

void transpose_128(const std::uint8_t* in, std::uint8_t* out, std::size_t ncols) {
  const std::size_t in_stride = ncols / 8;
  for (std::size_t rr = 0; rr < kRows; rr += 16) {
    for (std::size_t cc = 0; cc < ncols; cc += 8) {
      alignas(16) std::uint8_t tmp[16];
      for (std::size_t i = 0; i < 16; ++i) tmp[i] = in[(rr + i) * in_stride + cc / 8];
      __m128i x = _mm_load_si128(reinterpret_cast<const __m128i*>(tmp));
      for (int i = 7; i >= 0; --i) {
        const auto mask = static_cast<std::uint16_t>(_mm_movemask_epi8(x));
        std::memcpy(out + (cc + static_cast<std::size_t>(i)) * (kRows / 8) + rr / 8, &mask, 2);
        x = _mm_slli_epi64(x, 1);
      }
    }
  }
}

std::unique_ptr<OtExtension> OtExtension::make_sender(Session& s) {
  std::unique_ptr<OtExtension> ot(new OtExtension());
  ot->sender_ = true;
  ot->delta_ = s.prg().next_block();
  std::vector<std::uint8_t> choices(kRows);
  for (std::size_t j = 0; j < kRows; ++j) choices[j] = block_bit(ot->delta_, j) ? 1 : 0;
  const auto keys = base_rot_recv(s, choices);
  for (const auto& k : keys) ot->column_prg_.emplace_back(k);
  return ot;
}

std::unique_ptr<OtExtension> OtExtension::make_receiver(Session& s) {
  std::unique_ptr<OtExtension> ot(new OtExtension());
  const auto keys = base_rot_send(s, kRows);
  for (const auto& pair : keys) {
    ot->column_prg_.emplace_back(pair[0]);
    ot->column_prg_.emplace_back(pair[1]);
  }
  return ot;
}

std::vector<Block> OtExtension::receive(Session& s, Tag tag, std::span<const std::uint8_t> choices) {
  if (sender_) throw Error(ErrorKind::kInternal, "OT extension: receive called on sender instance");
  if (choices.empty()) return {};
  const std::size_t m = padded(choices.size());
  const std::size_t stride = m / 8;

  std::vector<std::uint8_t> r(stride, 0);
  for (std::size_t i = 0; i < choices.size(); ++i) r[i / 8] |= static_cast<std::uint8_t>((choices[i] & 1) << (i % 8));

  std::vector<std::uint8_t> t(kRows * stride);
  std::vector<std::uint8_t> u(kRows * stride);
  std::vector<std::uint8_t> g1(stride);
  for (std::size_t j = 0; j < kRows; ++j) {
    std::span<std::uint8_t> tj(t.data() + j * stride, stride);
    column_prg_[2 * j].fill(tj);
    column_prg_[2 * j + 1].fill(g1);
    std::uint8_t* uj = u.data() + j * stride;
    for (std::size_t b = 0; b < stride; ++b) uj[b] = tj[b] ^ g1[b] ^ r[b];
  }
  s.send(tag, u);

  std::vector<std::uint8_t> rows(m * 16);
  transpose_128(t.data(), rows.data(), m);
  std::vector<Block> in(choices.size());
  for (std::size_t i = 0; i < choices.size(); ++i) in[i] = load_block(rows.data() + 16 * i);
  std::vector<Block> keys(choices.size());
  row_hash().hash(in, counter_, keys);
  counter_ += m;
  return keys;
}

std::vector<std::array<Block, 2>> OtExtension::send(Session& s, Tag tag, std::size_t count) {
  if (!sender_) throw Error(ErrorKind::kInternal, "OT extension: send called on receiver instance");
  if (count == 0) return {};
  const std::size_t m = padded(count);
  const std::size_t stride = m / 8;

  const auto u = s.recv(tag);
  if (u.size() != kRows * stride) throw DesyncError("OT extension: matrix size mismatch");
  std::vector<std::uint8_t> q(kRows * stride);
  for (std::size_t j = 0; j < kRows; ++j) {
    std::span<std::uint8_t> qj(q.data() + j * stride, stride);
    column_prg_[j].fill(qj);
    if (block_bit(delta_, j)) {
      const std::uint8_t* uj = u.data() + j * stride;
      for (std::size_t b = 0; b < stride; ++b) qj[b] ^= uj[b];
    }
  }

  std::vector<std::uint8_t> rows(m * 16);
  transpose_128(q.data(), rows.data(), m);
  std::vector<Block> in0(count), in1(count);
  for (std::size_t i = 0; i < count; ++i) {
    in0[i] = load_block(rows.data() + 16 * i);
    in1[i] = in0[i] ^ delta_;
  }
  std::vector<Block> y0(count), y1(count);
  row_hash().hash(in0, counter_, y0);
  row_hash().hash(in1, counter_, y1);
  counter_ += m;

  std::vector<std::array<Block, 2>> keys(count);
  for (std::size_t i = 0; i < count; ++i) keys[i] = {y0[i], y1[i]};
  return keys;
}

CotResult cot_exchange(Session& s, Tag tag, std::span<const std::uint64_t> deltas,
                       std::span<const std::uint8_t> send_widths, std::span<const std::uint8_t> choices,
                       std::span<const std::uint8_t> recv_widths) {
  if (deltas.size() != send_widths.size() || choices.size() != recv_widths.size()) {
    throw ShapeError("correlated OT: width list length mismatch");
  }
  CotResult out;
  std::vector<Block> rkeys;
  std::vector<std::array<Block, 2>> skeys;
  if (!choices.empty()) rkeys = s.ot_receiver().receive(s, tag, choices);
  if (!deltas.empty()) skeys = s.ot_sender().send(s, tag, deltas.size());

  if (!deltas.empty()) {
    BitWriter w;
    out.as_sender.resize(deltas.size());
    for (std::size_t i = 0; i < deltas.size(); ++i) {
      const int width = send_widths[i];
      const std::uint64_t y = low_bits(skeys[i][0].lo, width);
      w.put(low_bits(y + deltas[i] - skeys[i][1].lo, width), width);
      out.as_sender[i] = low_bits(0 - y, width);
    }
    s.send(tag, w.bytes());
  }
  if (!choices.empty()) {
    const auto payload = s.recv(tag);
    std::size_t bits = 0;
    for (auto w : recv_widths) bits += w;
    if (payload.size() != (bits + 7) / 8) throw DesyncError("correlated OT: correction size mismatch");
    BitReader r(payload);
    out.as_receiver.resize(choices.size());
    for (std::size_t i = 0; i < choices.size(); ++i) {
      const int width = recv_widths[i];
      const std::uint64_t corr = r.get(width);
      out.as_receiver[i] = low_bits(rkeys[i].lo + ((choices[i] & 1) ? corr : 0), width);
    }
  }
  return out;
}

}  // namespace pti::mpc
