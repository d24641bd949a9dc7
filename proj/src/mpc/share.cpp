#include "pti/share.hpp"

#include "bits.hpp"
#include "pti/error.hpp"
#include "pti/primitives.hpp"
#include "pti/session.hpp"

namespace pti::mpc {

namespace {

void require_same_shape(const ShareTensor& a, const ShareTensor& b, const char* what) {
  if (a.shape() != b.shape()) throw ShapeError(std::string(what) + ": share shapes differ");
}

template <typename F>
ShareTensor map(const ShareTensor& a, F f) {
  ShareTensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.params.reduce(f(i, a[i]));
  return out;
}

}  // namespace

std::pair<ShareTensor, ShareTensor> share_secret(const PlainTensor& x, Prg& rng, const FixedPointParams& p) {
  PlainTensor s0(x.shape), s1(x.shape);
  for (std::size_t i = 0; i < x.size(); ++i) {
    s0.data[i] = rng.bits(p.ell);
    s1.data[i] = p.sub(x.data[i], s0.data[i]);
  }
  return {ShareTensor(std::move(s0), 0, p), ShareTensor(std::move(s1), 1, p)};
}

PlainTensor reconstruct(const ShareTensor& a, const ShareTensor& b) {
  require_same_shape(a, b, "reconstruct");
  PlainTensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = a.params.add(a[i], b[i]);
  return out;
}

ShareTensor truncate_local(const ShareTensor& x, int shift) {
  const auto& p = x.params;
  if (x.party == 0) return map(x, [&](std::size_t, FieldElement v) { return v >> shift; });
  return map(x, [&](std::size_t, FieldElement v) { return p.modulus() - (p.sub(0, v) >> shift); });
}

std::pair<ShareTensor, ShareTensor> truncate_shares(const ShareTensor& s0, const ShareTensor& s1, int shift) {
  require_same_shape(s0, s1, "truncate_shares");
  return {truncate_local(s0, shift), truncate_local(s1, shift)};
}

ShareTensor zeros_like(const ShareTensor& x) {
  ShareTensor out = x;
  std::fill(out.local.data.begin(), out.local.data.end(), 0);
  return out;
}

ShareTensor zeros(const Session& s, std::vector<std::size_t> shape) {
  return ShareTensor(PlainTensor(std::move(shape)), s.party(), s.fp());
}

ShareTensor add(const ShareTensor& a, const ShareTensor& b) {
  require_same_shape(a, b, "add");
  return map(a, [&](std::size_t i, FieldElement v) { return v + b[i]; });
}

ShareTensor sub(const ShareTensor& a, const ShareTensor& b) {
  require_same_shape(a, b, "sub");
  return map(a, [&](std::size_t i, FieldElement v) { return v - b[i]; });
}

ShareTensor neg(const ShareTensor& a) {
  return map(a, [](std::size_t, FieldElement v) { return 0 - v; });
}

ShareTensor mul_public(const ShareTensor& a, FieldElement c) {
  return map(a, [&](std::size_t, FieldElement v) { return v * c; });
}

ShareTensor mul_public(const ShareTensor& a, const std::vector<FieldElement>& c) {
  if (c.empty()) throw ShapeError("mul_public: empty scalar vector");
  return map(a, [&](std::size_t i, FieldElement v) { return v * c[i % c.size()]; });
}

ShareTensor add_public(const ShareTensor& a, FieldElement c) {
  if (a.party == 0) return a;
  return map(a, [&](std::size_t, FieldElement v) { return v + c; });
}

ShareTensor add_public(const ShareTensor& a, const std::vector<FieldElement>& c) {
  if (c.empty()) throw ShapeError("add_public: empty constant vector");
  if (a.party == 0) return a;
  return map(a, [&](std::size_t i, FieldElement v) { return v + c[i % c.size()]; });
}

ShareTensor rescale(Session& s, const ShareTensor& a, int from_frac, int to_frac, Tag tag) {
  if (to_frac == from_frac) return a;
  if (to_frac > from_frac) return mul_public(a, FieldElement{1} << (to_frac - from_frac));
  return p_trunc(s, a, from_frac - to_frac, tag);
}

ShareTensor row_sum(const ShareTensor& a) {
  const std::size_t cols = a.shape().empty() ? 1 : a.shape().back();
  const std::size_t rows = cols == 0 ? 0 : a.size() / cols;
  ShareTensor out(PlainTensor({rows}), a.party, a.params);
  for (std::size_t r = 0; r < rows; ++r) {
    FieldElement acc = 0;
    for (std::size_t c = 0; c < cols; ++c) acc += a[r * cols + c];
    out[r] = a.params.reduce(acc);
  }
  return out;
}

ShareTensor broadcast_rows(const ShareTensor& a, std::size_t cols) {
  ShareTensor out(PlainTensor({a.size(), cols}), a.party, a.params);
  for (std::size_t r = 0; r < a.size(); ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = a[r];
  }
  return out;
}

ShareTensor reshape(ShareTensor a, std::vector<std::size_t> shape) {
  if (PlainTensor::count(shape) != a.size()) throw ShapeError("reshape: element count changes");
  a.local.shape = std::move(shape);
  return a;
}

ShareTensor share_input(Session& s, int owner, const PlainTensor& x, std::vector<std::size_t> shape) {
  const auto& p = s.fp();
  const std::size_t n = PlainTensor::count(shape);
  ShareTensor out(PlainTensor(shape), s.party(), p);
  if (s.party() == owner) {
    if (x.size() != n) throw ShapeError("share_input: input does not match the declared shape");
    std::vector<std::uint64_t> mask(n);
    for (std::size_t i = 0; i < n; ++i) {
      mask[i] = s.prg().bits(p.ell);
      out[i] = p.sub(x.data[i], mask[i]);
    }
    s.send(Tag::kControl, pack_values(mask, p.ell));
  } else {
    const auto payload = s.recv(Tag::kControl);
    const auto mask = unpack_values(payload, n, p.ell);
    for (std::size_t i = 0; i < n; ++i) out[i] = mask[i];
  }
  return out;
}

PlainTensor reveal(Session& s, const ShareTensor& x, int to) {
  const auto& p = x.params;
  auto exchange_from = [&](int sender) -> PlainTensor {
    if (s.party() == sender) {
      s.send(Tag::kControl, pack_values(x.local.data, p.ell));
      return {};
    }
    const auto other = unpack_values(s.recv(Tag::kControl), x.size(), p.ell);
    PlainTensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = p.add(x[i], other[i]);
    return out;
  };
  if (to >= 0) return exchange_from(1 - to);
  PlainTensor r0 = exchange_from(1);
  PlainTensor r1 = exchange_from(0);
  return s.party() == 0 ? r0 : r1;
}

}  // namespace pti::mpc
