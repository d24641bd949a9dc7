#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "pti/channel.hpp"
#include "pti/model.hpp"
#include "pti/session.hpp"
#include "pti/share.hpp"

namespace pti::engine {

using mpc::Session;
using mpc::ShareTensor;

struct CostReport {
  /// Operator-level attribution (outermost scope).
  std::array<mpc::CategoryCost, mpc::kCategoryCount> categories{};
  /// Primitive-level attribution (innermost scope).
  std::array<mpc::CategoryCost, mpc::kCategoryCount> primitives{};
  mpc::CategoryCost total;
  std::uint64_t rounds = 0;
  mpc::Backend backend = mpc::Backend::kCrypto;
  bool insecure = false;
  double wall_seconds = 0.0;

  static CostReport from_session(const Session& s, double wall_seconds);
  const mpc::CategoryCost& category(mpc::Category c) const { return categories[static_cast<std::size_t>(c)]; }
  std::string to_json() const;
};

/// One encoder block: attention with residual and LN1, then the feed-forward
/// layer with residual and LN2. `x` is [S x E].
ShareTensor encoder_block_forward(Session& s, const ModelBundle& bundle, std::size_t block, const ShareTensor& x);

/// All blocks, then first-token pooling and the classifier head when the
/// model has one. Runs OT setup first so that it is not charged to an operator.
ShareTensor model_forward(Session& s, const ModelBundle& bundle, const ShareTensor& x);

/// Fixed-point oracle: exact ring arithmetic for the linear layers and
/// double-precision nonlinearities re-encoded at each step. Throws
/// OverflowError when a product leaves the truncation headroom or a
/// nonlinearity's input leaves its protocol's domain.
PlainTensor reference_block_forward(const ModelBundle& bundle, std::size_t block, const PlainTensor& x);
PlainTensor reference_forward(const ModelBundle& bundle, const PlainTensor& x);

/// Double-precision forward on the raw float32 weights.
std::vector<double> float_block_forward(const ModelBundle& bundle, std::size_t block, const std::vector<double>& x,
                                        std::size_t rows);
std::vector<double> float_forward(const ModelBundle& bundle, const std::vector<double>& x, std::size_t rows);

struct ClientOutcome {
  PlainTensor output;
  std::vector<double> values;
  CostReport report;
};

/// Party-side drivers of one inference over an established session. The
/// client shares `x`, the server learns only its row count.
ClientOutcome client_inference(Session& s, const ModelConfig& config, const PlainTensor& x);
CostReport server_inference(Session& s, const ModelBundle& bundle);

/// Network entry points. The server announces the public model config and
/// session parameters on the raw channel before the protocol starts.
CostReport serve(std::unique_ptr<mpc::Channel> channel, const ModelBundle& bundle, const mpc::SessionOptions& opts);
ClientOutcome connect_and_infer(std::unique_ptr<mpc::Channel> channel, const std::vector<double>& x,
                                std::size_t rows, const mpc::SessionOptions& opts);

/// Both parties in-process over a pipe.
struct LocalOutcome {
  ClientOutcome client;
  CostReport server;
};
LocalOutcome run_local(const ModelBundle& bundle, const std::vector<double>& x, std::size_t rows,
                       const mpc::SessionOptions& opts);

struct BenchOptions {
  /// Shape of the benchmarked block; only block 0's weights are used.
  ModelConfig config = ModelConfig::bert_tiny();
  std::size_t seq_len = 32;
  std::uint64_t seed = 1;
  mpc::SessionOptions session{};
};

struct BenchRow {
  std::string name;
  nn::OperatorVariant variant;
  CostReport report;
  /// Max-abs distance of the block output from the fixed-point reference.
  double max_abs_error = 0.0;
};

/// The five cumulative operator-substitution variants, original first.
std::vector<std::pair<std::string, nn::OperatorVariant>> cumulative_variants();

/// One encoder block per cumulative variant on a random fixture.
std::vector<BenchRow> run_benchmark(const BenchOptions& opts);
std::string benchmark_json(const std::vector<BenchRow>& rows);
/// Human-readable per-operator table with ratios against the first row.
std::string benchmark_table(const std::vector<BenchRow>& rows);

}  // namespace pti::engine
