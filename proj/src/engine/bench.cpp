#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "pti/engine.hpp"

namespace pti::engine {

using nlohmann::json;
using mpc::Category;

namespace {

struct PublishedRow {
  const char* op;
  double seconds;
  double megabytes;
};

// Published BERT-Tiny per-operator costs, measured on other hardware.
constexpr PublishedRow kPublished[] = {{"MatMul", 3.75, 111.0}, {"GELU", 3.67, 1020.0}, {"Total", 13.99, 1814.0}};

template <typename... Args>
std::string format(const char* fmt, Args... args) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

}  // namespace

std::vector<std::pair<std::string, nn::OperatorVariant>> cumulative_variants() {
  using nn::Activation, nn::AttentionNorm, nn::Norm;
  nn::OperatorVariant v;
  std::vector<std::pair<std::string, nn::OperatorVariant>> out{{"Orig.", v}};
  v.activation = Activation::kRelu;
  out.emplace_back("-GELU", v);
  v.attention_norm = AttentionNorm::kSoftmaxSub;
  out.emplace_back("-Softmax", v);
  v.ln1 = Norm::kLayerNormSub;
  out.emplace_back("-LN1", v);
  v.ln2 = Norm::kLayerNormSub;
  out.emplace_back("-LN2", v);
  return out;
}

std::vector<BenchRow> run_benchmark(const BenchOptions& opts) {
  ModelConfig c = opts.config;
  c.n_blocks = 1;
  c.n_labels = 0;
  c.max_seq_len = std::max(c.max_seq_len, opts.seq_len);
  c.variants.assign(1, nn::OperatorVariant{});
  const ModelBundle base = random_model(c, opts.seed);
  const std::vector<double> x = random_input(opts.seq_len, c.embed_dim, opts.seed + 1);
  const PlainTensor xe = encode_tensor({opts.seq_len, c.embed_dim}, x, c.fp);

  std::vector<BenchRow> rows;
  for (const auto& [name, variant] : cumulative_variants()) {
    const ModelBundle b = base.with_variants({variant});
    const auto ref = decode_tensor(reference_forward(b, xe), c.fp);
    const LocalOutcome out = run_local(b, x, opts.seq_len, opts.session);
    double err = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) err = std::max(err, std::abs(ref[i] - out.client.values[i]));
    rows.push_back({name, variant, out.client.report, err});
  }
  return rows;
}

std::string benchmark_json(const std::vector<BenchRow>& rows) {
  json variants = json::array();
  for (const auto& r : rows) {
    json report = json::parse(r.report.to_json());
    variants.push_back({{"name", r.name},
                        {"activation", nn::to_string(r.variant.activation)},
                        {"attention_norm", nn::to_string(r.variant.attention_norm)},
                        {"ln1", nn::to_string(r.variant.ln1)},
                        {"ln2", nn::to_string(r.variant.ln2)},
                        {"max_abs_error", r.max_abs_error},
                        {"bytes_ratio", rows.empty() ? 1.0
                                                     : static_cast<double>(r.report.total.bytes()) /
                                                           static_cast<double>(rows.front().report.total.bytes())},
                        {"speedup", rows.front().report.wall_seconds / r.report.wall_seconds},
                        {"report", report}});
  }
  json published = json::array();
  for (const auto& p : kPublished) published.push_back({{"operator", p.op}, {"seconds", p.seconds}, {"megabytes", p.megabytes}});
  return json{{"variants", variants},
              {"published_reference", {{"note", "reference hardware, not a target"}, {"rows", published}}}}
      .dump(2);
}

std::string benchmark_table(const std::vector<BenchRow>& rows) {
  std::string out = "operator    ";
  for (const auto& r : rows) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%18s", r.name.c_str());
    out += buf;
  }
  out += "\n";
  auto line = [&](const char* label, auto cost_of) {
    char head[16];
    std::snprintf(head, sizeof head, "%-12s", label);
    out += head;
    for (const auto& r : rows) {
      const mpc::CategoryCost c = cost_of(r.report);
      out += format("%8.2fs %7.1fMB", c.seconds, static_cast<double>(c.bytes()) / 1e6);
    }
    out += "\n";
  };
  for (std::size_t i = 0; i < mpc::kCategoryCount; ++i) {
    line(mpc::category_name(static_cast<Category>(i)), [i](const CostReport& r) { return r.categories[i]; });
  }
  line("Total", [](const CostReport& r) {
    mpc::CategoryCost t = r.total;
    t.seconds = r.wall_seconds;
    return t;
  });
  out += "bytes ratio ";
  for (const auto& r : rows) {
    out += format("%17.3f ", static_cast<double>(r.report.total.bytes()) /
                                     static_cast<double>(rows.front().report.total.bytes()));
  }
  out += "\nspeedup     ";
  for (const auto& r : rows) out += format("%17.2fx", rows.front().report.wall_seconds / r.report.wall_seconds);
  out += "\nmax |err|   ";
  for (const auto& r : rows) out += format("%17.5f ", r.max_abs_error);
  out += "\n\nPublished BERT-Tiny reference (reference hardware, not a target):\n";
  for (const auto& p : kPublished) out += std::string("  ") + p.op + format(": %.2f s / %.0f MB\n", p.seconds, p.megabytes);
  return out;
}

}  // namespace pti::engine
