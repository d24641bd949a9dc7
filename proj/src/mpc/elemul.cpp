#include "bits.hpp"
#include "pti/error.hpp"
#include "pti/ot.hpp"
#include "pti/primitives.hpp"
#include "pti/session.hpp"

namespace pti::mpc {

BeaverTriple generate_triples(Session& s, std::size_t count, Tag tag) {
  const auto& p = s.fp();
  const int ell = p.ell;
  BeaverTriple t{zeros(s, {count}), zeros(s, {count}), zeros(s, {count})};
  for (std::size_t i = 0; i < count; ++i) {
    t.a[i] = s.prg().bits(ell);
    t.b[i] = s.prg().bits(ell);
  }

  // Cross terms a_own·b_peer and a_peer·b_own by bit-decomposing b: bit k of b
  // selects a·2^k, and only the low ell-k bits of that correlation matter.
  const std::size_t m = count * static_cast<std::size_t>(ell);
  std::vector<std::uint64_t> deltas(m);
  std::vector<std::uint8_t> widths(m), choices(m);
  for (std::size_t i = 0; i < count; ++i) {
    for (int k = 0; k < ell; ++k) {
      const std::size_t j = i * static_cast<std::size_t>(ell) + static_cast<std::size_t>(k);
      deltas[j] = low_bits(t.a[i], ell - k);
      widths[j] = static_cast<std::uint8_t>(ell - k);
      choices[j] = static_cast<std::uint8_t>((t.b[i] >> k) & 1);
    }
  }
  const auto cot = cot_exchange(s, tag, deltas, widths, choices, widths);

  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t acc = t.a[i] * t.b[i];
    for (int k = 0; k < ell; ++k) {
      const std::size_t j = i * static_cast<std::size_t>(ell) + static_cast<std::size_t>(k);
      acc += (cot.as_sender[j] + cot.as_receiver[j]) << k;
    }
    t.c[i] = p.reduce(acc);
  }
  return t;
}

ShareTensor p_elemul(Session& s, const ShareTensor& x, const ShareTensor& y, Tag tag) {
  if (x.shape() != y.shape()) throw ShapeError("elemul: operand shapes differ");
  Session::Scope scope(s, Category::kEleMul);
  const auto& p = s.fp();
  if (s.backend() == Backend::kIdeal) {
    return ideal_eval(s, tag, {&x, &y}, x.shape(), [&](const std::vector<PlainTensor>& in) {
      std::vector<FieldElement> out(in[0].size());
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = p.mul(in[0].data[i], in[1].data[i]);
      return out;
    });
  }
  const std::size_t n = x.size();
  if (n == 0) return x;
  const auto t = generate_triples(s, n, tag);

  std::vector<std::uint64_t> open(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    open[i] = p.sub(x[i], t.a[i]);
    open[n + i] = p.sub(y[i], t.b[i]);
  }
  s.send(tag, pack_values(open, p.ell));
  const auto peer = unpack_values(s.recv(tag), 2 * n, p.ell);

  ShareTensor z = x;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t e = open[i] + peer[i];
    const std::uint64_t f = open[n + i] + peer[n + i];
    std::uint64_t v = t.c[i] + e * t.b[i] + f * t.a[i];
    if (s.party() == 0) v += e * f;
    z[i] = p.reduce(v);
  }
  return z;
}

ShareTensor p_trunc(Session& s, const ShareTensor& x, int shift, Tag tag) {
  const auto& p = s.fp();
  if (shift == 0) return x;
  if (shift < 0 || shift >= p.ell - 2) throw ConfigError("truncation shift out of range");
  Session::Scope scope(s, Category::kTruncation);
  if (s.backend() == Backend::kIdeal) {
    return ideal_eval(s, tag, {&x}, x.shape(), [&](const std::vector<PlainTensor>& in) {
      std::vector<FieldElement> out(in[0].size());
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = truncate_plain(in[0].data[i], shift, p);
      return out;
    });
  }
  const std::size_t n = x.size();
  const std::uint64_t offset = std::uint64_t{1} << (p.ell - 2);

  // With the public offset the true value has MSB 0, so the shares wrap
  // exactly when either share's MSB is set: w = msb0 OR msb1.
  std::vector<std::uint64_t> shifted(n), msb(n);
  for (std::size_t i = 0; i < n; ++i) {
    shifted[i] = s.party() == 0 ? p.add(x[i], offset) : x[i];
    msb[i] = shifted[i] >> (p.ell - 1);
  }
  std::vector<std::uint8_t> widths(n, static_cast<std::uint8_t>(shift));
  std::vector<std::uint8_t> bits(n);
  for (std::size_t i = 0; i < n; ++i) bits[i] = static_cast<std::uint8_t>(msb[i]);
  const std::span<const std::uint8_t> none;
  CotResult cot = s.party() == 0 ? cot_exchange(s, tag, msb, widths, none, none)
                                 : cot_exchange(s, tag, {}, none, bits, widths);
  const auto& prod = s.party() == 0 ? cot.as_sender : cot.as_receiver;

  ShareTensor out = x;
  const std::uint64_t high = std::uint64_t{1} << (p.ell - shift);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t w = msb[i] - prod[i];
    std::uint64_t v = (shifted[i] >> shift) - high * w;
    // floor(x0/2^k) + floor(x1/2^k) loses a carry exactly when the low parts
    // overflow, which is almost certain for multiples of 2^k; the +1 moves the
    // result into {floor, floor + 1}.
    if (s.party() == 0) v = v - (offset >> shift) + 1;
    out[i] = p.reduce(v);
  }
  return out;
}

ShareTensor p_mul_trunc(Session& s, const ShareTensor& x, const ShareTensor& y, int shift, Tag tag) {
  return p_trunc(s, p_elemul(s, x, y, tag), shift, tag == Tag::kElemul ? Tag::kTrunc : tag);
}

}  // namespace pti::mpc
