#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pti/pti.h"

namespace {

using nlohmann::json;

enum ExitCode {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitTransport = 3,
  kExitDesync = 4,
  kExitModel = 5,
  kExitIo = 6,
  kExitOverflow = 7,
};

int exit_code(pti_status s) {
  switch (s) {
    case PTI_OK: return kExitOk;
    case PTI_ERR_CONFIG:
    case PTI_ERR_INVALID_ARGUMENT:
    case PTI_ERR_SHAPE: return kExitConfig;
    case PTI_ERR_TRANSPORT: return kExitTransport;
    case PTI_ERR_DESYNC: return kExitDesync;
    case PTI_ERR_MODEL: return kExitModel;
    case PTI_ERR_IO: return kExitIo;
    case PTI_ERR_OVERFLOW: return kExitOverflow;
    default: return kExitFailure;
  }
}

struct Failure {
  int code;
  std::string message;
};

void check(pti_status s) {
  if (s != PTI_OK) throw Failure{exit_code(s), std::string(pti_status_string(s)) + ": " + pti_last_error()};
}

struct ModelDeleter {
  void operator()(pti_model* m) const { pti_model_free(m); }
};
struct ResultDeleter {
  void operator()(pti_result* r) const { pti_result_free(r); }
};
using ModelPtr = std::unique_ptr<pti_model, ModelDeleter>;
using ResultPtr = std::unique_ptr<pti_result, ResultDeleter>;

struct RunConfig {
  std::string role;
  std::string listen = "127.0.0.1:7070";
  std::string connect = "127.0.0.1:7070";
  std::string model;
  std::string input;
  std::string output;
  std::string backend = "crypto";
  std::optional<std::uint64_t> seed;
  std::string report;
  std::size_t blocks = 2;
  std::optional<std::size_t> seq_len;
  std::size_t poly_degree = 8192;
  int fixed_bits = 0;
  int ring_bits = 0;
  std::string variant = "original";
};

ModelPtr load(const std::string& path) {
  if (path.empty()) throw Failure{kExitConfig, "--model is required for this role"};
  pti_model* m = nullptr;
  check(pti_model_load(path.c_str(), &m));
  return ModelPtr(m);
}

struct Matrix {
  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t cols = 0;
};

Matrix read_input(const std::string& path) {
  if (path.empty()) throw Failure{kExitConfig, "--input is required for this role"};
  std::ifstream in(path);
  if (!in) throw Failure{kExitIo, "cannot open input file '" + path + "'"};
  Matrix m;
  try {
    json j = json::parse(in);
    if (j.is_object()) j = j.at("input");
    for (const auto& row : j) {
      const auto r = row.get<std::vector<double>>();
      if (m.rows == 0) m.cols = r.size();
      if (r.size() != m.cols || r.empty()) throw Failure{kExitConfig, "input rows must be non-empty and equal length"};
      m.values.insert(m.values.end(), r.begin(), r.end());
      ++m.rows;
    }
  } catch (const json::exception& e) {
    throw Failure{kExitConfig, std::string("input must be a JSON matrix: ") + e.what()};
  }
  if (m.rows == 0) throw Failure{kExitConfig, "input matrix is empty"};
  return m;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out || !(out << text << "\n")) throw Failure{kExitIo, "cannot write '" + path + "'"};
}

void emit_outputs(const RunConfig& cfg, const pti_result* r, const char* key) {
  const double* v = pti_result_outputs(r);
  const json j = {{key, std::vector<double>(v, v + pti_result_output_count(r))}};
  if (cfg.output.empty()) {
    std::cout << j.dump() << "\n";
  } else {
    write_text(cfg.output, j.dump(2));
  }
}

void emit_report(const RunConfig& cfg, const pti_result* r) {
  if (!cfg.report.empty()) write_text(cfg.report, pti_result_report_json(r));
}

pti_options options_of(const RunConfig& cfg) {
  pti_options o;
  pti_options_init(&o);
  o.ring_bits = cfg.ring_bits;
  o.frac_bits = cfg.fixed_bits;
  o.poly_degree = cfg.poly_degree;
  o.backend = cfg.backend == "ideal" ? PTI_BACKEND_IDEAL : PTI_BACKEND_CRYPTO;
  if (cfg.seed) o.seed = *cfg.seed;
  return o;
}

int run(const RunConfig& cfg) {
  const pti_options opts = options_of(cfg);
  pti_result* raw = nullptr;

  if (cfg.role == "server") {
    const ModelPtr m = load(cfg.model);
    std::cerr << "listening on " << cfg.listen << "\n";
    check(pti_serve(m.get(), cfg.listen.c_str(), &opts, &raw));
    const ResultPtr r(raw);
    emit_report(cfg, r.get());
    std::cerr << "inference complete\n";
  } else if (cfg.role == "client") {
    const Matrix x = read_input(cfg.input);
    check(pti_client(cfg.connect.c_str(), x.values.data(), x.rows, x.cols, &opts, &raw));
    const ResultPtr r(raw);
    emit_outputs(cfg, r.get(), "logits");
    emit_report(cfg, r.get());
  } else if (cfg.role == "plaintext") {
    const ModelPtr m = load(cfg.model);
    const Matrix x = read_input(cfg.input);
    check(pti_reference_forward(m.get(), x.values.data(), x.rows, x.cols, &raw));
    emit_outputs(cfg, ResultPtr(raw).get(), "logits");
  } else if (cfg.role == "bench") {
    if (!cfg.seed) throw Failure{kExitConfig, "--seed is required for benchmarks"};
    const ModelPtr m = cfg.model.empty() ? nullptr : load(cfg.model);
    check(pti_bench(m.get(), cfg.seq_len.value_or(32), &opts, &raw));
    const ResultPtr r(raw);
    std::cout << pti_result_text(r.get());
    emit_report(cfg, r.get());
  } else if (cfg.role == "fixture") {
    if (cfg.model.empty()) throw Failure{kExitConfig, "--model names the file to write"};
    const bool sub = cfg.variant == "substituted";
    json variants = json::array();
    for (std::size_t i = 0; i < cfg.blocks; ++i) {
      variants.push_back({{"activation", sub ? "relu" : "gelu"},
                          {"attention_norm", sub ? "softmax_sub" : "softmax"},
                          {"ln1", sub ? "layernorm_sub" : "layernorm"},
                          {"ln2", sub ? "layernorm_sub" : "layernorm"}});
    }
    const json config = {{"n_blocks", cfg.blocks},
                         {"embed_dim", 128},
                         {"n_heads", 2},
                         {"ffn_dim", 512},
                         {"max_seq_len", cfg.seq_len.value_or(128)},
                         {"n_labels", 2},
                         {"ring_bits", cfg.ring_bits ? cfg.ring_bits : 41},
                         {"frac_bits", cfg.fixed_bits ? cfg.fixed_bits : 13},
                         {"variants", variants}};
    pti_model* m = nullptr;
    check(pti_model_random(config.dump().c_str(), cfg.seed.value_or(1), &m));
    const ModelPtr owned(m);
    check(pti_model_save(owned.get(), cfg.model.c_str()));
    std::cerr << "wrote " << cfg.model << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-party private transformer inference"};
  RunConfig cfg;
  app.add_option("--role", cfg.role, "server, client, plaintext, bench, or fixture")
      ->required()
      ->check(CLI::IsMember({"server", "client", "plaintext", "bench", "fixture"}));
  app.add_option("--listen", cfg.listen, "host:port the server accepts on");
  app.add_option("--connect", cfg.connect, "host:port of the server");
  app.add_option("--model", cfg.model, "PTIF model file");
  app.add_option("--input", cfg.input, "JSON matrix [S x E] of embeddings");
  app.add_option("--output", cfg.output, "write logits here instead of stdout");
  app.add_option("--backend", cfg.backend, "crypto or ideal (insecure test oracle)")
      ->check(CLI::IsMember({"crypto", "ideal"}));
  app.add_option("--seed", cfg.seed, "randomness seed");
  app.add_option("--report", cfg.report, "write the JSON cost report here");
  app.add_option("--blocks", cfg.blocks, "encoder blocks of a generated fixture")->check(CLI::PositiveNumber);
  app.add_option("--seq-len", cfg.seq_len, "benchmark sequence length / fixture max sequence length")
      ->check(CLI::PositiveNumber);
  app.add_option("--poly-degree", cfg.poly_degree, "ring degree N of the HE scheme");
  app.add_option("--fixed-bits", cfg.fixed_bits, "fractional bits f (default: the model's)");
  app.add_option("--ring-bits", cfg.ring_bits, "ring bit width (default: the model's)");
  app.add_option("--variant", cfg.variant, "operators of a generated fixture")
      ->check(CLI::IsMember({"original", "substituted"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }
  try {
    return run(cfg);
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << "\n";
    return f.code;
  }
}
