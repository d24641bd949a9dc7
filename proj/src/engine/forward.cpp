#include <cmath>

#include "pti/engine.hpp"
#include "pti/error.hpp"
#include "pti/nn.hpp"
#include "pti/primitives.hpp"

namespace pti::engine {

namespace {

std::string block_prefix(std::size_t block) { return "blocks." + std::to_string(block) + "."; }

/// Server weights by name; the client sees empty tensors.
class Weights {
 public:
  Weights(const Session& s, const ModelBundle& b, std::string prefix)
      : server_(!s.is_client()), bundle_(b), prefix_(std::move(prefix)) {}

  const PlainTensor& operator()(const std::string& name) const {
    static const PlainTensor kEmpty;
    return server_ ? bundle_.encoded(prefix_ + name) : kEmpty;
  }
  nn::AffineParams affine(const std::string& name) const {
    return server_ ? bundle_.affine(prefix_ + name) : nn::AffineParams{};
  }

 private:
  bool server_;
  const ModelBundle& bundle_;
  std::string prefix_;
};

PlainTensor slice_cols(const PlainTensor& a, std::size_t begin, std::size_t width) {
  PlainTensor out({a.rows(), width});
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < width; ++c) out.at(r, c) = a.at(r, begin + c);
  }
  return out;
}

void place_cols(PlainTensor& dst, const PlainTensor& src, std::size_t begin) {
  for (std::size_t r = 0; r < src.rows(); ++r) {
    for (std::size_t c = 0; c < src.cols(); ++c) dst.at(r, begin + c) = src.at(r, c);
  }
}

ShareTensor slice_cols(const ShareTensor& a, std::size_t begin, std::size_t width) {
  return ShareTensor(slice_cols(a.local, begin, width), a.party, a.params);
}

}  // namespace

ShareTensor encoder_block_forward(Session& s, const ModelBundle& bundle, std::size_t block, const ShareTensor& x) {
  const ModelConfig& c = bundle.config();
  if (block >= c.n_blocks) throw ConfigError("block index out of range");
  const std::size_t seq = x.rows(), e = c.embed_dim, dh = c.head_dim();
  if (x.shape().size() != 2 || x.cols() != e) throw ShapeError("encoder block: input must be [S x E]");
  const nn::OperatorVariant& variant = c.variant(block);
  const Weights w(s, bundle, block_prefix(block));
  const auto& p = s.fp();

  const ShareTensor q = nn::fc_forward(s, w("attn.q.weight"), w("attn.q.bias"), x, e);
  const ShareTensor k = nn::fc_forward(s, w("attn.k.weight"), w("attn.k.bias"), x, e);
  const ShareTensor v = nn::fc_forward(s, w("attn.v.weight"), w("attn.v.bias"), x, e);

  const FieldElement scale = encode_round(1.0 / std::sqrt(static_cast<double>(dh)), p.frac_bits, p);
  PlainTensor heads({seq, e});
  for (std::size_t h = 0; h < c.n_heads; ++h) {
    const ShareTensor qh = slice_cols(q, h * dh, dh);
    const ShareTensor kt(transpose(slice_cols(k.local, h * dh, dh)), s.party(), p);
    const ShareTensor scores = nn::shared_matmul(s, qh, kt);
    const ShareTensor scaled = mpc::p_trunc(s, mpc::mul_public(scores, scale), p.frac_bits);
    const ShareTensor probs = nn::attention_norm_protocol(s, scaled, variant.attention_norm);
    place_cols(heads, nn::shared_matmul(s, probs, slice_cols(v, h * dh, dh)).local, h * dh);
  }
  const ShareTensor attn =
      nn::fc_forward(s, w("attn.o.weight"), w("attn.o.bias"), ShareTensor(std::move(heads), s.party(), p), e);
  const ShareTensor x1 = nn::norm_protocol(s, mpc::add(x, attn), w.affine("ln1"), variant.ln1);

  const ShareTensor h1 = nn::fc_forward(s, w("ffn.fc1.weight"), w("ffn.fc1.bias"), x1, c.ffn_dim);
  const ShareTensor act = nn::activation_protocol(s, h1, variant.activation);
  const ShareTensor h2 = nn::fc_forward(s, w("ffn.fc2.weight"), w("ffn.fc2.bias"), act, e);
  return nn::norm_protocol(s, mpc::add(x1, h2), w.affine("ln2"), variant.ln2);
}

ShareTensor model_forward(Session& s, const ModelBundle& bundle, const ShareTensor& x) {
  const ModelConfig& c = bundle.config();
  if (x.rows() > c.max_seq_len) throw ConfigError("sequence longer than the model's max_seq_len");
  s.setup_ot();
  ShareTensor h = x;
  for (std::size_t b = 0; b < c.n_blocks; ++b) h = encoder_block_forward(s, bundle, b, h);
  if (c.n_labels == 0) return h;

  const Weights w(s, bundle, "");
  const ShareTensor pooled = slice_cols(mpc::reshape(h, {1, h.size()}), 0, c.embed_dim);
  const ShareTensor logits = nn::fc_forward(s, w("head.weight"), w("head.bias"), pooled, c.n_labels);
  return mpc::reshape(logits, {c.n_labels});
}

}  // namespace pti::engine
