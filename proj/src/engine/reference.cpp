#include <algorithm>
#include <cmath>
#include <functional>

#include "pti/engine.hpp"
#include "pti/error.hpp"
#include "pti/nn.hpp"

namespace pti::engine {

namespace {

using Int = __int128;
using RowFn = std::function<void(std::vector<double>&)>;

double gelu(double x) {
  return 0.5 * x * (1.0 + std::tanh(std::sqrt(2.0 / M_PI) * (x + 0.044715 * x * x * x)));
}

void softmax_row(std::vector<double>& r) {
  const double m = *std::max_element(r.begin(), r.end());
  double sum = 0.0;
  for (auto& v : r) sum += (v = std::exp(v - m));
  for (auto& v : r) v /= sum;
}

void softmax_sub_row(std::vector<double>& r, double eps) {
  double sum = eps;
  for (auto& v : r) sum += (v = std::max(v, 0.0));
  for (auto& v : r) v /= sum;
}

double row_mean(const std::vector<double>& r) {
  double m = 0.0;
  for (double v : r) m += v;
  return m / static_cast<double>(r.size());
}

double row_var(const std::vector<double>& r, double mean) {
  double var = 0.0;
  for (double v : r) var += (v - mean) * (v - mean);
  return var / static_cast<double>(r.size());
}

/// Fixed-point evaluator mirroring the private forward's ring arithmetic.
class FixedRef {
 public:
  explicit FixedRef(const ModelBundle& b)
      : b_(b), p_(b.config().fp), limit_(Int{1} << (p_.ell - 2)), ulp_(std::ldexp(1.0, -p_.frac_bits)) {}

  PlainTensor block(std::size_t i, const PlainTensor& x) {
    const ModelConfig& c = b_.config();
    const nn::OperatorVariant& var = c.variant(i);
    const std::string pre = "blocks." + std::to_string(i) + ".";
    const std::size_t seq = x.rows(), e = c.embed_dim, dh = c.head_dim();
    if (x.shape.size() != 2 || x.cols() != e) throw ShapeError("reference: input must be [S x E]");

    const PlainTensor q = fc(x, pre + "attn.q");
    const PlainTensor k = fc(x, pre + "attn.k");
    const PlainTensor v = fc(x, pre + "attn.v");
    const FieldElement scale = encode_round(1.0 / std::sqrt(static_cast<double>(dh)), p_.frac_bits, p_);
    PlainTensor heads({seq, e});
    for (std::size_t h = 0; h < c.n_heads; ++h) {
      const std::string stage = pre + "attn.head" + std::to_string(h);
      PlainTensor scores = matmul(cols(q, h * dh, dh), transpose(cols(k, h * dh, dh)), stage + ".scores");
      for (auto& s : scores.data) s = shift(Int{p_.to_signed(s)} * p_.to_signed(scale), p_.frac_bits, stage);
      const PlainTensor probs = var.attention_norm == nn::AttentionNorm::kSoftmax
                                    ? rows(scores, [&](auto& r) { check_exp_domain(r, stage); softmax_row(r); })
                                    : rows(scores, [&](auto& r) {
                                        check_recip_domain(r, stage);
                                        softmax_sub_row(r, ulp_);
                                      });
      const PlainTensor out = matmul(probs, cols(v, h * dh, dh), stage + ".values");
      for (std::size_t r = 0; r < seq; ++r) {
        for (std::size_t cc = 0; cc < dh; ++cc) heads.at(r, h * dh + cc) = out.at(r, cc);
      }
    }
    const PlainTensor x1 = norm(add(x, fc(heads, pre + "attn.o")), pre + "ln1", var.ln1);
    PlainTensor h1 = fc(x1, pre + "ffn.fc1");
    if (var.activation == nn::Activation::kGelu) {
      gelu_checks(h1, pre + "ffn.gelu");
      h1 = map(h1, gelu);
    } else {
      h1 = map(h1, [](double v) { return std::max(v, 0.0); });
    }
    return norm(add(x1, fc(h1, pre + "ffn.fc2")), pre + "ln2", var.ln2);
  }

  PlainTensor head(const PlainTensor& h) {
    PlainTensor pooled({1, h.cols()});
    std::copy_n(h.data.begin(), h.cols(), pooled.data.begin());
    PlainTensor logits = fc(pooled, "head");
    logits.shape = {logits.size()};
    return logits;
  }

 private:
  FieldElement shift(Int acc, int bits, const std::string& stage) const {
    if (acc >= limit_ || acc <= -limit_) {
      throw OverflowError("overflow in " + stage + ": intermediate exceeds the truncation headroom");
    }
    return p_.from_signed(static_cast<std::int64_t>(acc >> bits));
  }

  PlainTensor matmul(const PlainTensor& a, const PlainTensor& b, const std::string& stage) const {
    PlainTensor out({a.rows(), b.cols()});
    for (std::size_t i = 0; i < a.rows(); ++i) {
      for (std::size_t j = 0; j < b.cols(); ++j) {
        Int acc = 0;
        for (std::size_t k = 0; k < a.cols(); ++k) acc += Int{p_.to_signed(a.at(i, k))} * p_.to_signed(b.at(k, j));
        out.at(i, j) = shift(acc, p_.frac_bits, stage);
      }
    }
    return out;
  }

  PlainTensor fc(const PlainTensor& x, const std::string& name) const {
    const PlainTensor& w = b_.encoded(name + ".weight");
    const PlainTensor& bias = b_.encoded(name + ".bias");
    PlainTensor out({x.rows(), w.rows()});
    for (std::size_t r = 0; r < x.rows(); ++r) {
      for (std::size_t o = 0; o < w.rows(); ++o) {
        Int acc = Int{p_.to_signed(bias.data[o])} << p_.frac_bits;
        for (std::size_t k = 0; k < x.cols(); ++k) acc += Int{p_.to_signed(x.at(r, k))} * p_.to_signed(w.at(o, k));
        out.at(r, o) = shift(acc, p_.frac_bits, name);
      }
    }
    return out;
  }

  static PlainTensor cols(const PlainTensor& a, std::size_t begin, std::size_t width) {
    PlainTensor out({a.rows(), width});
    for (std::size_t r = 0; r < a.rows(); ++r) {
      for (std::size_t c = 0; c < width; ++c) out.at(r, c) = a.at(r, begin + c);
    }
    return out;
  }

  PlainTensor add(const PlainTensor& a, const PlainTensor& b) const {
    PlainTensor out(a.shape);
    for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = p_.add(a.data[i], b.data[i]);
    return out;
  }

  PlainTensor map(const PlainTensor& a, double (*fn)(double)) const {
    PlainTensor out(a.shape);
    for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = encode_fixed(fn(decode_fixed(a.data[i], p_)), p_);
    return out;
  }

  PlainTensor rows(const PlainTensor& a, const RowFn& fn) const {
    PlainTensor out(a.shape);
    std::vector<double> row(a.cols());
    for (std::size_t r = 0; r < a.rows(); ++r) {
      for (std::size_t c = 0; c < a.cols(); ++c) row[c] = decode_fixed(a.at(r, c), p_);
      fn(row);
      for (std::size_t c = 0; c < a.cols(); ++c) out.at(r, c) = encode_fixed(row[c], p_);
    }
    return out;
  }

  void check_exp_domain(const std::vector<double>& r, const std::string& stage) const {
    const auto [lo, hi] = std::minmax_element(r.begin(), r.end());
    if (*hi - *lo > 2.0 * nn::kActivationBound) {
      throw OverflowError("overflow in " + stage + ": attention scores exceed the softmax range");
    }
  }

  void check_recip_domain(const std::vector<double>& r, const std::string& stage) const {
    double sum = 0.0;
    for (double v : r) sum += std::max(v, 0.0);
    if (sum > static_cast<double>(r.size()) * nn::kActivationBound) {
      throw OverflowError("overflow in " + stage + ": attention weights exceed the normalizer range");
    }
  }

  void gelu_checks(const PlainTensor& h, const std::string& stage) const {
    for (FieldElement x : h.data) {
      const Int xs = p_.to_signed(x);
      const FieldElement x2 = shift(xs * xs, p_.frac_bits, stage);
      shift(xs * p_.to_signed(x2), p_.frac_bits, stage);
    }
  }

  PlainTensor norm(const PlainTensor& x, const std::string& name, nn::Norm kind) const {
    const std::vector<double> gamma = decode_tensor(b_.encoded(name + ".gamma"), p_);
    const std::vector<double> beta = decode_tensor(b_.encoded(name + ".beta"), p_);
    const double eps = std::max(ulp_, std::ldexp(std::round(std::ldexp(1e-5, p_.frac_bits)), -p_.frac_bits));
    const double max_dev = std::ldexp(1.0, (p_.ell - 2 - 2 * p_.frac_bits) / 2);
    const double bound2 = nn::kActivationBound * nn::kActivationBound;
    return rows(x, [&](std::vector<double>& r) {
      const double mean = row_mean(r);
      double scale = 1.0;
      if (kind == nn::Norm::kLayerNorm) {
        const double var = row_var(r, mean);
        for (double v : r) {
          if (std::abs(v - mean) >= max_dev) throw OverflowError("overflow in " + name + ": deviation too large");
        }
        if (var > bound2) throw OverflowError("overflow in " + name + ": variance exceeds the bound");
        scale = 1.0 / std::sqrt(var + eps);
      }
      for (std::size_t c = 0; c < r.size(); ++c) r[c] = (r[c] - mean) * scale * gamma[c] + beta[c];
    });
  }

  const ModelBundle& b_;
  const FixedPointParams& p_;
  Int limit_;
  double ulp_;
};

/// Double-precision forward on the raw weights.
class FloatRef {
 public:
  explicit FloatRef(const ModelBundle& b) : b_(b), eps_sm_(std::ldexp(1.0, -b.config().fp.frac_bits)) {}

  std::vector<double> block(std::size_t i, const std::vector<double>& x, std::size_t seq) const {
    const ModelConfig& c = b_.config();
    const nn::OperatorVariant& var = c.variant(i);
    const std::string pre = "blocks." + std::to_string(i) + ".";
    const std::size_t e = c.embed_dim, dh = c.head_dim();
    if (x.size() != seq * e) throw ShapeError("float reference: input must be [S x E]");

    const auto q = fc(x, seq, pre + "attn.q");
    const auto k = fc(x, seq, pre + "attn.k");
    const auto v = fc(x, seq, pre + "attn.v");
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<double> heads(seq * e, 0.0);
    for (std::size_t h = 0; h < c.n_heads; ++h) {
      for (std::size_t r = 0; r < seq; ++r) {
        std::vector<double> row(seq);
        for (std::size_t t = 0; t < seq; ++t) {
          double acc = 0.0;
          for (std::size_t d = 0; d < dh; ++d) acc += q[r * e + h * dh + d] * k[t * e + h * dh + d];
          row[t] = acc * scale;
        }
        if (var.attention_norm == nn::AttentionNorm::kSoftmax) {
          softmax_row(row);
        } else {
          softmax_sub_row(row, eps_sm_);
        }
        for (std::size_t d = 0; d < dh; ++d) {
          double acc = 0.0;
          for (std::size_t t = 0; t < seq; ++t) acc += row[t] * v[t * e + h * dh + d];
          heads[r * e + h * dh + d] = acc;
        }
      }
    }
    auto x1 = norm(add(x, fc(heads, seq, pre + "attn.o")), pre + "ln1", var.ln1);
    auto h1 = fc(x1, seq, pre + "ffn.fc1");
    for (auto& val : h1) val = var.activation == nn::Activation::kGelu ? gelu(val) : std::max(val, 0.0);
    return norm(add(x1, fc(h1, seq, pre + "ffn.fc2")), pre + "ln2", var.ln2);
  }

  std::vector<double> head(const std::vector<double>& h) const {
    return fc(std::vector<double>(h.begin(), h.begin() + static_cast<std::ptrdiff_t>(b_.config().embed_dim)), 1,
              "head");
  }

 private:
  std::vector<double> fc(const std::vector<double>& x, std::size_t seq, const std::string& name) const {
    const FloatTensor& w = b_.raw(name + ".weight");
    const FloatTensor& bias = b_.raw(name + ".bias");
    const std::size_t out = w.shape[0], in = w.shape[1];
    std::vector<double> y(seq * out);
    for (std::size_t r = 0; r < seq; ++r) {
      for (std::size_t o = 0; o < out; ++o) {
        double acc = bias.values[o];
        for (std::size_t k = 0; k < in; ++k) acc += x[r * in + k] * w.values[o * in + k];
        y[r * out + o] = acc;
      }
    }
    return y;
  }

  static std::vector<double> add(std::vector<double> a, const std::vector<double>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    return a;
  }

  std::vector<double> norm(std::vector<double> x, const std::string& name, nn::Norm kind) const {
    const FloatTensor& gamma = b_.raw(name + ".gamma");
    const FloatTensor& beta = b_.raw(name + ".beta");
    const std::size_t e = gamma.values.size();
    for (std::size_t r = 0; r < x.size() / e; ++r) {
      std::vector<double> row(x.begin() + static_cast<std::ptrdiff_t>(r * e),
                              x.begin() + static_cast<std::ptrdiff_t>((r + 1) * e));
      const double mean = row_mean(row);
      const double scale = kind == nn::Norm::kLayerNorm ? 1.0 / std::sqrt(row_var(row, mean) + 1e-5) : 1.0;
      for (std::size_t c = 0; c < e; ++c) x[r * e + c] = (row[c] - mean) * scale * gamma.values[c] + beta.values[c];
    }
    return x;
  }

  const ModelBundle& b_;
  double eps_sm_;
};

void require_weights(const ModelBundle& b) {
  if (!b.has_weights()) throw ModelError("reference forward needs model weights");
}

}  // namespace

PlainTensor reference_block_forward(const ModelBundle& bundle, std::size_t block, const PlainTensor& x) {
  require_weights(bundle);
  return FixedRef(bundle).block(block, x);
}

PlainTensor reference_forward(const ModelBundle& bundle, const PlainTensor& x) {
  require_weights(bundle);
  const ModelConfig& c = bundle.config();
  if (x.rows() > c.max_seq_len) throw ConfigError("sequence longer than the model's max_seq_len");
  FixedRef ref(bundle);
  PlainTensor h = x;
  for (std::size_t b = 0; b < c.n_blocks; ++b) h = ref.block(b, h);
  return c.n_labels == 0 ? h : ref.head(h);
}

std::vector<double> float_block_forward(const ModelBundle& bundle, std::size_t block, const std::vector<double>& x,
                                        std::size_t rows) {
  require_weights(bundle);
  return FloatRef(bundle).block(block, x, rows);
}

std::vector<double> float_forward(const ModelBundle& bundle, const std::vector<double>& x, std::size_t rows) {
  require_weights(bundle);
  const ModelConfig& c = bundle.config();
  FloatRef ref(bundle);
  std::vector<double> h = x;
  for (std::size_t b = 0; b < c.n_blocks; ++b) h = ref.block(b, h, rows);
  return c.n_labels == 0 ? h : ref.head(h);
}

}  // namespace pti::engine
