#pragma once

#include <string>
#include <vector>

#include "pti/fixed_point.hpp"
#include "pti/share.hpp"

namespace pti::nn {

using mpc::Session;
using mpc::ShareTensor;

enum class Activation { kGelu, kRelu };
enum class AttentionNorm { kSoftmax, kSoftmaxSub };
enum class Norm { kLayerNorm, kLayerNormSub };

struct OperatorVariant {
  Activation activation = Activation::kGelu;
  AttentionNorm attention_norm = AttentionNorm::kSoftmax;
  Norm ln1 = Norm::kLayerNorm;
  Norm ln2 = Norm::kLayerNorm;

  bool operator==(const OperatorVariant&) const = default;
};

const char* to_string(Activation a);
const char* to_string(AttentionNorm a);
const char* to_string(Norm n);
/// Parse the lowercase names used in model manifests; throws ConfigError.
Activation parse_activation(const std::string& s);
AttentionNorm parse_attention_norm(const std::string& s);
Norm parse_norm(const std::string& s);

/// Server-held affine parameters of a normalization layer, encoded at f bits.
/// The client passes vectors of zeros of the same length.
struct AffineParams {
  std::vector<FieldElement> gamma;
  std::vector<FieldElement> beta;
  double epsilon_ln = 1e-5;
};

/// Public bound on activations after bound-controlled fine-tuning.
inline constexpr double kActivationBound = 16.0;

/// y = x W^T + b for x of shape [S x in]. W ([out x in]) and b ([out]) are the
/// server's; the client passes empty tensors.
ShareTensor fc_forward(Session& s, const PlainTensor& w, const PlainTensor& b, const ShareTensor& x,
                       std::size_t out_dim);

/// Z = X Y for two shared operands, truncated once.
ShareTensor shared_matmul(Session& s, const ShareTensor& x, const ShareTensor& y);

ShareTensor gelu_protocol(Session& s, const ShareTensor& x);
/// ReLU used as the substitute activation; charged to the activation category.
ShareTensor relu_activation(Session& s, const ShareTensor& x);
ShareTensor activation_protocol(Session& s, const ShareTensor& x, Activation a);

/// Row-wise softmax over the last axis.
ShareTensor softmax_protocol(Session& s, const ShareTensor& x);
/// ReLU(x_i) / (sum_j ReLU(x_j) + eps) along the last axis; eps <= 0 means
/// one ulp.
ShareTensor softmax_sub_protocol(Session& s, const ShareTensor& x, double bound = kActivationBound,
                                 double epsilon = 0.0);
ShareTensor attention_norm_protocol(Session& s, const ShareTensor& x, AttentionNorm a);

ShareTensor layernorm_protocol(Session& s, const ShareTensor& x, const AffineParams& affine,
                               double bound = kActivationBound);
/// (x - mean(x)) * gamma + beta.
ShareTensor layernorm_sub_protocol(Session& s, const ShareTensor& x, const AffineParams& affine);
ShareTensor norm_protocol(Session& s, const ShareTensor& x, const AffineParams& affine, Norm n);

}  // namespace pti::nn
