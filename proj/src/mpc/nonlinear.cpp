#include <algorithm>
#include <cmath>

#include "pti/error.hpp"
#include "pti/primitives.hpp"
#include "pti/session.hpp"

namespace pti::mpc {

namespace {

// Largest magnitude (in bits) an intermediate may reach before truncation,
// one bit below the truncation protocol's t/4 precondition.
int magnitude_budget(const FixedPointParams& p) { return p.ell - 3; }

int resolve(int frac, const Session& s) { return frac < 0 ? s.fp().frac_bits : frac; }

FieldElement constant(double v, int frac, const FixedPointParams& p) { return encode_round(v, frac, p); }

ShareTensor ideal_unary(Session& s, Tag tag, const ShareTensor& x, int in_frac, int out_frac,
                        const std::function<double(double)>& fn) {
  const auto& p = s.fp();
  return ideal_eval(s, tag, {&x}, x.shape(), [&](const std::vector<PlainTensor>& in) {
    std::vector<FieldElement> out(in[0].size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double v = std::ldexp(static_cast<double>(p.to_signed(in[0].data[i])), -in_frac);
      out[i] = p.from_signed(static_cast<std::int64_t>(std::floor(std::ldexp(fn(v), out_frac))));
    }
    return out;
  });
}

}  // namespace

int recip_iterations(double lo, double hi, int frac_bits) {
  if (!(lo > 0) || hi < lo) throw ConfigError("reciprocal range must satisfy 0 < lo <= hi");
  const double e0 = (hi - lo) / (hi + lo);
  if (e0 <= 0) return 1;
  const double k = std::log2(frac_bits * std::log(2.0) / std::fabs(std::log(e0)));
  return std::max(1, static_cast<int>(std::ceil(k)) + 2);
}

int recip_internal_frac(double lo, double hi, int in_frac) {
  (void)hi;
  const int budget = 38;
  const double inv_lo_bits = std::max(0.0, std::log2(1.0 / lo));
  const int a = budget - 1 - in_frac;
  const int b = static_cast<int>(std::floor((budget - 1 - inv_lo_bits) / 2));
  return std::max(1, std::min({24, a, b}));
}

int rsqrt_internal_frac(double lo, double hi, int in_frac) {
  const int budget = 38;
  const int a = static_cast<int>(std::floor(budget - in_frac - std::max(0.0, 0.5 * std::log2(hi))));
  const int b = static_cast<int>(std::floor((budget - std::log2(3.0 / std::sqrt(lo))) / 2));
  return std::max(1, std::min({18, a, b}));
}

ShareTensor p_exp(Session& s, const ShareTensor& x, Precision prec, double bound) {
  const int in = resolve(prec.in_frac, s);
  const int out = resolve(prec.out_frac, s);
  if (s.backend() == Backend::kIdeal) return ideal_unary(s, Tag::kExp, x, in, out, [](double v) { return std::exp(v); });
  const auto& p = s.fp();
  const int d = std::max(0, static_cast<int>(std::ceil(std::log2(bound))));
  const int f = std::min(19, magnitude_budget(p) / 2);

  // y = x / 2^d in [-1, 0], held at f fractional bits.
  const ShareTensor y = rescale(s, x, in, f - d, Tag::kExp);

  // Horner form of 1 + y + y^2/2 + y^3/6.
  ShareTensor h = p_trunc(s, mul_public(y, constant(1.0 / 6.0, f, p)), f, Tag::kExp);
  h = add_public(h, constant(0.5, f, p));
  h = add_public(p_mul_trunc(s, y, h, f, Tag::kExp), constant(1.0, f, p));
  h = add_public(p_mul_trunc(s, y, h, f, Tag::kExp), constant(1.0, f, p));
  for (int i = 0; i < d; ++i) h = p_mul_trunc(s, h, h, f, Tag::kExp);
  return rescale(s, h, f, out, Tag::kExp);
}

ShareTensor p_recip(Session& s, const ShareTensor& x, double lo, double hi, Precision prec, int iterations) {
  const int in = resolve(prec.in_frac, s);
  const int out = resolve(prec.out_frac, s);
  if (!(lo > 0) || hi < lo) throw ConfigError("reciprocal range must satisfy 0 < lo <= hi");
  if (s.backend() == Backend::kIdeal) return ideal_unary(s, Tag::kRecip, x, in, out, [](double v) { return 1.0 / v; });
  const auto& p = s.fp();
  const int f = recip_internal_frac(lo, hi, in);
  const int k = iterations > 0 ? iterations : recip_iterations(lo, hi, std::max(out, p.frac_bits));
  const FieldElement two = constant(2.0, f, p);

  // The starting point is public, so the first step needs no multiplication
  // protocol.
  const FieldElement y0 = constant(2.0 / (hi + lo), f, p);
  ShareTensor u = p_trunc(s, mul_public(x, y0), in, Tag::kRecip);
  ShareTensor y = p_trunc(s, mul_public(add_public(neg(u), two), y0), f, Tag::kRecip);
  for (int i = 1; i < k; ++i) {
    u = p_mul_trunc(s, x, y, in, Tag::kRecip);
    y = p_mul_trunc(s, add_public(neg(u), two), y, f, Tag::kRecip);
  }
  return rescale(s, y, f, out, Tag::kRecip);
}

ShareTensor p_rsqrt(Session& s, const ShareTensor& x, double lo, double hi, Precision prec, int iterations) {
  const int in = resolve(prec.in_frac, s);
  const int out = resolve(prec.out_frac, s);
  if (!(lo > 0) || hi < lo) throw ConfigError("rsqrt range must satisfy 0 < lo <= hi");
  if (s.backend() == Backend::kIdeal) {
    return ideal_unary(s, Tag::kRsqrt, x, in, out, [](double v) { return 1.0 / std::sqrt(v); });
  }
  const auto& p = s.fp();
  const int f = rsqrt_internal_frac(lo, hi, in);
  const FieldElement three = constant(3.0, f, p);

  const FieldElement y0 = constant(1.0 / std::sqrt(hi), f, p);
  ShareTensor u = p_trunc(s, mul_public(x, y0), in, Tag::kRsqrt);
  ShareTensor v = p_trunc(s, mul_public(u, y0), f, Tag::kRsqrt);
  ShareTensor y = p_trunc(s, mul_public(add_public(neg(v), three), y0), f + 1, Tag::kRsqrt);
  for (int i = 1; i < iterations; ++i) {
    u = p_mul_trunc(s, x, y, in, Tag::kRsqrt);
    v = p_mul_trunc(s, u, y, f, Tag::kRsqrt);
    y = p_mul_trunc(s, add_public(neg(v), three), y, f + 1, Tag::kRsqrt);
  }
  return rescale(s, y, f, out, Tag::kRsqrt);
}

ShareTensor p_tanh(Session& s, const ShareTensor& x, Precision prec) {
  const int in = resolve(prec.in_frac, s);
  const int out = resolve(prec.out_frac, s);
  if (s.backend() == Backend::kIdeal) return ideal_unary(s, Tag::kTanh, x, in, out, [](double v) { return std::tanh(v); });
  const auto& p = s.fp();
  constexpr int g = 16;

  // |x| = 2·drelu(x)·x - x, then clamp to 16 so that e^{-2|x|} stays in the
  // exponential's domain.
  const ShareTensor d = p_drelu(s, x, Tag::kTanh);
  const ShareTensor abs = sub(mul_public(p_elemul(s, d, x, Tag::kTanh), 2), x);
  const ShareTensor over = add_public(abs, p.neg(constant(16.0, in, p)));
  const ShareTensor clamped = sub(abs, p_relu(s, over, Tag::kTanh));

  const ShareTensor u = p_exp(s, neg(mul_public(clamped, 2)), {in, g});
  const FieldElement one = constant(1.0, g, p);
  const ShareTensor num = add_public(neg(u), one);
  const ShareTensor den = add_public(u, one);
  const ShareTensor r = p_recip(s, den, 1.0, 2.0, {g, g});
  const ShareTensor t = p_mul_trunc(s, num, r, g, Tag::kTanh);

  // Restore the sign: (2d - 1)·t.
  const ShareTensor signed_t = sub(mul_public(p_elemul(s, d, t, Tag::kTanh), 2), t);
  return rescale(s, signed_t, g, out, Tag::kTanh);
}

}  // namespace pti::mpc
