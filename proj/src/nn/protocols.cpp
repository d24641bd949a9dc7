#include <cmath>

#include "pti/error.hpp"
#include "pti/matmul.hpp"
#include "pti/nn.hpp"
#include "pti/primitives.hpp"
#include "pti/session.hpp"

namespace pti::nn {

using mpc::Category;
using mpc::Tag;

const char* to_string(Activation a) { return a == Activation::kGelu ? "gelu" : "relu"; }
const char* to_string(AttentionNorm a) { return a == AttentionNorm::kSoftmax ? "softmax" : "softmax_sub"; }
const char* to_string(Norm n) { return n == Norm::kLayerNorm ? "layernorm" : "layernorm_sub"; }

Activation parse_activation(const std::string& s) {
  if (s == "gelu") return Activation::kGelu;
  if (s == "relu") return Activation::kRelu;
  throw ConfigError("unknown activation '" + s + "'");
}

AttentionNorm parse_attention_norm(const std::string& s) {
  if (s == "softmax") return AttentionNorm::kSoftmax;
  if (s == "softmax_sub") return AttentionNorm::kSoftmaxSub;
  throw ConfigError("unknown attention normalization '" + s + "'");
}

Norm parse_norm(const std::string& s) {
  if (s == "layernorm") return Norm::kLayerNorm;
  if (s == "layernorm_sub") return Norm::kLayerNormSub;
  throw ConfigError("unknown layer normalization '" + s + "'");
}

namespace {

// Row means multiply by round(2^k / E) and shift k bits back out.
constexpr int kAverageBits = 16;
// Extra fractional bits carried by the centered values of LayerNorm'.
constexpr int kCenterExtraBits = 4;

std::size_t last_dim(const ShareTensor& x) { return x.shape().empty() ? 1 : x.shape().back(); }

ShareTensor as_matrix(const ShareTensor& x) {
  const std::size_t cols = last_dim(x);
  return mpc::reshape(x, {x.size() / cols, cols});
}

FieldElement encoded_epsilon(double eps, const FixedPointParams& p) {
  const auto v = static_cast<std::int64_t>(std::llround(std::ldexp(eps, p.frac_bits)));
  return static_cast<FieldElement>(std::max<std::int64_t>(1, v));
}

/// Row means at `frac + extra` bits, rounded to nearest.
ShareTensor row_mean(Session& s, const ShareTensor& x, int extra) {
  const auto& p = s.fp();
  const std::size_t cols = last_dim(x);
  const int shift = kAverageBits - extra;
  const FieldElement inv = encode_round(1.0 / static_cast<double>(cols), kAverageBits, p);
  ShareTensor scaled = mpc::mul_public(mpc::row_sum(x), inv);
  scaled = mpc::add_public(scaled, FieldElement{1} << (shift - 1));
  return mpc::p_trunc(s, scaled, shift);
}

/// Server's gamma as a share tensor shaped like x (zeros on the client).
ShareTensor gamma_share(const Session& s, const ShareTensor& x, const std::vector<FieldElement>& gamma) {
  const std::size_t cols = last_dim(x);
  ShareTensor g = mpc::zeros_like(x);
  if (s.party() == 1) {
    if (gamma.size() != cols) throw ShapeError("layer norm: gamma length must equal the embedding dim");
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = gamma[i % cols];
  }
  return g;
}

const std::vector<FieldElement>& checked_beta(const Session& s, const ShareTensor& x, const AffineParams& a) {
  if (s.party() == 1 && a.beta.size() != last_dim(x)) {
    throw ShapeError("layer norm: beta length must equal the embedding dim");
  }
  static const std::vector<FieldElement> kZero{0};
  return s.party() == 1 ? a.beta : kZero;
}

PlainTensor add_plain(const PlainTensor& a, const PlainTensor& b, const FixedPointParams& p) {
  PlainTensor out(a.shape);
  for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = p.add(a.data[i], b.data[i]);
  return out;
}

}  // namespace

ShareTensor fc_forward(Session& s, const PlainTensor& w, const PlainTensor& b, const ShareTensor& x,
                       std::size_t out_dim) {
  Session::Scope scope(s, Category::kMatMul);
  const auto& p = s.fp();
  const ShareTensor xm = as_matrix(x);
  const std::size_t rows = xm.rows(), in = xm.cols();

  PlainTensor c;
  if (s.is_client()) {
    c = linear::run_matmul_protocol(s, {}, transpose(xm.local), out_dim, in, rows, s.compress());
  } else {
    if (w.rows() != out_dim || w.cols() != in) throw ShapeError("fc: weight must be [out x in]");
    if (b.size() != out_dim) throw ShapeError("fc: bias length must equal the output dim");
    c = linear::run_matmul_protocol(s, w, {}, out_dim, in, rows, s.compress());
    c = add_plain(c, plain_matmul(w, transpose(xm.local), p), p);
    for (std::size_t o = 0; o < out_dim; ++o) {
      const FieldElement bias = p.mul(b.data[o], FieldElement{1} << p.frac_bits);
      for (std::size_t r = 0; r < rows; ++r) c.at(o, r) = p.add(c.at(o, r), bias);
    }
  }
  ShareTensor y(transpose(c), s.party(), p);
  return mpc::p_trunc(s, y, p.frac_bits);
}

ShareTensor shared_matmul(Session& s, const ShareTensor& x, const ShareTensor& y) {
  Session::Scope scope(s, Category::kMatMul);
  const auto& p = s.fp();
  const std::size_t m = x.rows(), r = x.cols(), n = y.cols();
  if (y.rows() != r) throw ShapeError("shared matmul: inner dimensions differ");

  // Cross terms: <X>_1<Y>_0 directly and <X>_0<Y>_1 as (<Y>_1^T <X>_0^T)^T,
  // so the client always encrypts and decrypts.
  PlainTensor cross1, cross2;
  if (s.is_client()) {
    cross1 = linear::run_matmul_protocol(s, {}, y.local, m, r, n, s.compress());
    cross2 = linear::run_matmul_protocol(s, {}, transpose(x.local), n, r, m, s.compress());
  } else {
    cross1 = linear::run_matmul_protocol(s, x.local, {}, m, r, n, s.compress());
    cross2 = linear::run_matmul_protocol(s, transpose(y.local), {}, n, r, m, s.compress());
  }
  PlainTensor z = plain_matmul(x.local, y.local, p);
  z = add_plain(add_plain(z, cross1, p), transpose(cross2), p);
  return mpc::p_trunc(s, ShareTensor(std::move(z), s.party(), p), p.frac_bits);
}

ShareTensor gelu_protocol(Session& s, const ShareTensor& x) {
  Session::Scope scope(s, Category::kGelu);
  const auto& p = s.fp();
  const int f = p.frac_bits;
  const ShareTensor x2 = mpc::p_mul_trunc(s, x, x, f);
  const ShareTensor x3 = mpc::p_mul_trunc(s, x, x2, f);
  const ShareTensor cubic = mpc::p_trunc(s, mpc::mul_public(x3, encode_round(0.044715, f, p)), f);
  const ShareTensor inner =
      mpc::p_trunc(s, mpc::mul_public(mpc::add(x, cubic), encode_round(std::sqrt(2.0 / M_PI), f, p)), f);
  const ShareTensor th = mpc::add_public(mpc::p_tanh(s, inner), FieldElement{1} << f);
  return mpc::p_mul_trunc(s, x, th, f + 1);
}

ShareTensor relu_activation(Session& s, const ShareTensor& x) {
  Session::Scope scope(s, Category::kGelu);
  return mpc::p_relu(s, x);
}

ShareTensor activation_protocol(Session& s, const ShareTensor& x, Activation a) {
  return a == Activation::kGelu ? gelu_protocol(s, x) : relu_activation(s, x);
}

ShareTensor softmax_protocol(Session& s, const ShareTensor& x) {
  Session::Scope scope(s, Category::kSoftmax);
  const auto& p = s.fp();
  const std::size_t n = last_dim(x);
  const ShareTensor xm = as_matrix(x);
  const ShareTensor shifted = mpc::sub(xm, mpc::broadcast_rows(mpc::p_max(s, xm), n));
  const ShareTensor e = mpc::p_exp(s, shifted);
  const double hi = static_cast<double>(n);
  const int fr = mpc::recip_internal_frac(1.0, hi, p.frac_bits);
  const ShareTensor inv = mpc::p_recip(s, mpc::row_sum(e), 1.0, hi, {p.frac_bits, fr});
  const ShareTensor y = mpc::p_mul_trunc(s, e, mpc::broadcast_rows(inv, n), fr);
  return mpc::reshape(y, x.shape());
}

ShareTensor softmax_sub_protocol(Session& s, const ShareTensor& x, double bound, double epsilon) {
  Session::Scope scope(s, Category::kSoftmax);
  const auto& p = s.fp();
  const std::size_t n = last_dim(x);
  const ShareTensor xm = as_matrix(x);
  const ShareTensor r = mpc::p_relu(s, xm);
  const FieldElement eps = encoded_epsilon(epsilon, p);
  const ShareTensor sum = mpc::add_public(mpc::row_sum(r), eps);
  const double lo = std::ldexp(static_cast<double>(eps), -p.frac_bits);
  const double hi = static_cast<double>(n) * bound + lo;
  const int fr = mpc::recip_internal_frac(lo, hi, p.frac_bits);
  const ShareTensor inv = mpc::p_recip(s, sum, lo, hi, {p.frac_bits, fr});
  const ShareTensor y = mpc::p_mul_trunc(s, r, mpc::broadcast_rows(inv, n), fr);
  return mpc::reshape(y, x.shape());
}

ShareTensor attention_norm_protocol(Session& s, const ShareTensor& x, AttentionNorm a) {
  return a == AttentionNorm::kSoftmax ? softmax_protocol(s, x) : softmax_sub_protocol(s, x);
}

ShareTensor layernorm_protocol(Session& s, const ShareTensor& x, const AffineParams& affine, double bound) {
  Session::Scope scope(s, Category::kLayerNorm);
  const auto& p = s.fp();
  const int f = p.frac_bits;
  const std::size_t n = last_dim(x);
  const ShareTensor xm = as_matrix(x);

  const ShareTensor centered = mpc::sub(xm, mpc::broadcast_rows(row_mean(s, xm, 0), n));
  const ShareTensor var = row_mean(s, mpc::p_mul_trunc(s, centered, centered, f), 0);
  const FieldElement eps = encoded_epsilon(affine.epsilon_ln, p);
  const double lo = std::ldexp(static_cast<double>(eps), -f);
  const double hi = bound * bound + lo;
  const int fr = mpc::rsqrt_internal_frac(lo, hi, f);
  const ShareTensor v = mpc::p_rsqrt(s, mpc::add_public(var, eps), lo, hi, {f, fr});
  const ShareTensor normed = mpc::p_mul_trunc(s, centered, mpc::broadcast_rows(v, n), fr);
  ShareTensor y = mpc::p_mul_trunc(s, normed, gamma_share(s, xm, affine.gamma), f);
  y = mpc::add_public(y, checked_beta(s, xm, affine));
  return mpc::reshape(y, x.shape());
}

ShareTensor layernorm_sub_protocol(Session& s, const ShareTensor& x, const AffineParams& affine) {
  Session::Scope scope(s, Category::kLayerNorm);
  const auto& p = s.fp();
  const std::size_t n = last_dim(x);
  const ShareTensor xm = as_matrix(x);
  const ShareTensor hi_res = mpc::mul_public(xm, FieldElement{1} << kCenterExtraBits);
  const ShareTensor centered = mpc::sub(hi_res, mpc::broadcast_rows(row_mean(s, xm, kCenterExtraBits), n));
  ShareTensor y = mpc::p_mul_trunc(s, centered, gamma_share(s, xm, affine.gamma), p.frac_bits + kCenterExtraBits);
  y = mpc::add_public(y, checked_beta(s, xm, affine));
  return mpc::reshape(y, x.shape());
}

ShareTensor norm_protocol(Session& s, const ShareTensor& x, const AffineParams& affine, Norm n) {
  return n == Norm::kLayerNorm ? layernorm_protocol(s, x, affine) : layernorm_sub_protocol(s, x, affine);
}

}  // namespace pti::nn
