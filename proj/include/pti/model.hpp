#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pti/fixed_point.hpp"
#include "pti/nn.hpp"

namespace pti::engine {

inline constexpr std::uint32_t kPtifVersion = 1;

struct ModelConfig {
  std::size_t n_blocks = 2;
  std::size_t embed_dim = 128;
  std::size_t n_heads = 2;
  std::size_t ffn_dim = 512;
  std::size_t max_seq_len = 128;
  /// Classifier outputs; zero means no head (the forward returns the last
  /// block's output).
  std::size_t n_labels = 2;
  std::vector<nn::OperatorVariant> variants;
  FixedPointParams fp{};

  std::size_t head_dim() const { return embed_dim / n_heads; }
  const nn::OperatorVariant& variant(std::size_t block) const { return variants.at(block); }
  /// Throws ConfigError on inconsistent dimensions.
  void validate() const;

  /// n=2, E=128, H=2, ffn=512, seq=128, all operators original.
  static ModelConfig bert_tiny();

  bool operator==(const ModelConfig&) const = default;
};

/// Serialized form used in model manifests and the client handshake.
std::string config_to_json(const ModelConfig& c);
ModelConfig config_from_json(const std::string& text);

struct FloatTensor {
  std::vector<std::size_t> shape;
  std::vector<float> values;

  bool operator==(const FloatTensor&) const = default;
};

/// Names and shapes of every tensor a config requires, in manifest order.
std::vector<std::pair<std::string, std::vector<std::size_t>>> expected_tensors(const ModelConfig& c);

class ModelBundle {
 public:
  ModelBundle() = default;
  /// Validates tensor names and dimensions, then encodes to fixed point.
  ModelBundle(ModelConfig config, std::map<std::string, FloatTensor> tensors);
  /// Config without weights, as held by the client.
  static ModelBundle public_view(ModelConfig config);

  bool has_weights() const { return !encoded_.empty(); }

  const ModelConfig& config() const { return config_; }
  std::uint32_t version() const { return kPtifVersion; }
  const std::map<std::string, FloatTensor>& tensors() const { return tensors_; }
  const FloatTensor& raw(const std::string& name) const;
  /// Fixed-point encoding of a tensor; throws ModelError if absent.
  const PlainTensor& encoded(const std::string& name) const;
  /// Affine parameters of a normalization layer ("blocks.0.ln1").
  nn::AffineParams affine(const std::string& prefix) const;
  /// Copy with the operator variants replaced (weights shared).
  ModelBundle with_variants(std::vector<nn::OperatorVariant> variants) const;

 private:
  ModelConfig config_;
  std::map<std::string, FloatTensor> tensors_;
  std::map<std::string, PlainTensor> encoded_;
};

/// PTIF v1: "PTIF", u32 version, u64 manifest length, JSON manifest, then the
/// little-endian float32 blob. Errors are ModelError (format, missing tensor,
/// dimension mismatch) or IoError.
ModelBundle load_model(const std::string& path);
ModelBundle parse_model(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> serialize_model(const ModelBundle& bundle);
void save_model(const ModelBundle& bundle, const std::string& path);

/// Random weights scaled so that activations of unit-scale inputs stay well
/// inside the activation bound.
ModelBundle random_model(const ModelConfig& config, std::uint64_t seed);

/// Standard-normal inputs clipped to the activation bound.
std::vector<double> random_input(std::size_t rows, std::size_t cols, std::uint64_t seed);

}  // namespace pti::engine
