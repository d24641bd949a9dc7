#include <cstring>
#include <new>
#include <string>
#include <vector>

#include "pti/engine.hpp"
#include "pti/error.hpp"
#include "pti/pti.h"

struct pti_model {
  pti::engine::ModelBundle bundle;
};

struct pti_result {
  std::vector<double> outputs;
  std::string report_json;
  std::string text;
};

namespace {

using pti::engine::ModelBundle;
using pti::engine::ModelConfig;

thread_local std::string g_last_error;

pti_status status_of(pti::ErrorKind k) {
  switch (k) {
    case pti::ErrorKind::kConfig: return PTI_ERR_CONFIG;
    case pti::ErrorKind::kTransport: return PTI_ERR_TRANSPORT;
    case pti::ErrorKind::kDesync: return PTI_ERR_DESYNC;
    case pti::ErrorKind::kModel: return PTI_ERR_MODEL;
    case pti::ErrorKind::kIo: return PTI_ERR_IO;
    case pti::ErrorKind::kRange: return PTI_ERR_RANGE;
    case pti::ErrorKind::kShape: return PTI_ERR_SHAPE;
    case pti::ErrorKind::kOverflow: return PTI_ERR_OVERFLOW;
    case pti::ErrorKind::kDecryption: return PTI_ERR_DECRYPTION;
    case pti::ErrorKind::kInternal: return PTI_ERR_INTERNAL;
  }
  return PTI_ERR_INTERNAL;
}

template <typename Fn>
pti_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return PTI_OK;
  } catch (const pti::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return PTI_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return PTI_ERR_INTERNAL;
  }
}

pti_status invalid(const char* what) {
  g_last_error = what;
  return PTI_ERR_INVALID_ARGUMENT;
}

pti::mpc::SessionOptions session_options(const pti_options* o) {
  pti_options d;
  pti_options_init(&d);
  if (o == nullptr) o = &d;
  pti::mpc::SessionOptions s;
  s.poly_degree = o->poly_degree;
  s.backend = o->backend == PTI_BACKEND_IDEAL ? pti::mpc::Backend::kIdeal : pti::mpc::Backend::kCrypto;
  s.seed = o->seed;
  s.compress = o->compress != 0;
  return s;
}

pti::FixedPointParams override_fp(pti::FixedPointParams fp, const pti_options* o) {
  if (o == nullptr || (o->ring_bits == 0 && o->frac_bits == 0)) return fp;
  return pti::FixedPointParams::make(o->ring_bits ? o->ring_bits : fp.ell, o->frac_bits ? o->frac_bits : fp.frac_bits);
}

/// The model re-encoded at the requested fixed-point parameters.
ModelBundle prepared(const ModelBundle& b, const pti_options* o) {
  const pti::FixedPointParams fp = override_fp(b.config().fp, o);
  if (fp == b.config().fp) return b;
  ModelConfig c = b.config();
  c.fp = fp;
  return ModelBundle(c, b.tensors());
}

std::vector<double> input_vector(const double* input, std::size_t rows, std::size_t cols) {
  return std::vector<double>(input, input + rows * cols);
}

pti_result* make_result(std::vector<double> outputs, std::string report, std::string text = {}) {
  return new pti_result{std::move(outputs), std::move(report), std::move(text)};
}

}  // namespace

extern "C" {

void pti_options_init(pti_options* opts) {
  if (opts == nullptr) return;
  opts->ring_bits = 0;
  opts->frac_bits = 0;
  opts->poly_degree = 8192;
  opts->backend = PTI_BACKEND_CRYPTO;
  opts->seed = 1;
  opts->compress = 1;
}

const char* pti_status_string(pti_status status) {
  switch (status) {
    case PTI_OK: return "ok";
    case PTI_ERR_CONFIG: return "configuration error";
    case PTI_ERR_TRANSPORT: return "transport error";
    case PTI_ERR_DESYNC: return "protocol desynchronization";
    case PTI_ERR_MODEL: return "model error";
    case PTI_ERR_IO: return "i/o error";
    case PTI_ERR_RANGE: return "value out of range";
    case PTI_ERR_SHAPE: return "shape mismatch";
    case PTI_ERR_OVERFLOW: return "fixed-point overflow";
    case PTI_ERR_DECRYPTION: return "decryption failure";
    case PTI_ERR_INVALID_ARGUMENT: return "invalid argument";
    case PTI_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* pti_last_error(void) { return g_last_error.c_str(); }

pti_status pti_model_load(const char* path, pti_model** out) {
  if (path == nullptr || out == nullptr) return invalid("path and out must be non-null");
  return guarded([&] { *out = new pti_model{pti::engine::load_model(path)}; });
}

pti_status pti_model_random(const char* config_json, uint64_t seed, pti_model** out) {
  if (out == nullptr) return invalid("out must be non-null");
  return guarded([&] {
    const ModelConfig c = config_json ? pti::engine::config_from_json(config_json) : ModelConfig::bert_tiny();
    *out = new pti_model{pti::engine::random_model(c, seed)};
  });
}

pti_status pti_model_save(const pti_model* model, const char* path) {
  if (model == nullptr || path == nullptr) return invalid("model and path must be non-null");
  return guarded([&] { pti::engine::save_model(model->bundle, path); });
}

pti_status pti_model_config_json(const pti_model* model, char** out) {
  if (model == nullptr || out == nullptr) return invalid("model and out must be non-null");
  return guarded([&] {
    const std::string s = pti::engine::config_to_json(model->bundle.config());
    char* buf = new char[s.size() + 1];
    std::memcpy(buf, s.c_str(), s.size() + 1);
    *out = buf;
  });
}

size_t pti_model_embed_dim(const pti_model* model) { return model ? model->bundle.config().embed_dim : 0; }

void pti_model_free(pti_model* model) { delete model; }

void pti_string_free(char* s) { delete[] s; }

pti_status pti_serve(const pti_model* model, const char* listen_address, const pti_options* opts, pti_result** out) {
  if (model == nullptr || listen_address == nullptr || out == nullptr) {
    return invalid("model, listen_address and out must be non-null");
  }
  return guarded([&] {
    const ModelBundle b = prepared(model->bundle, opts);
    const auto report = pti::engine::serve(pti::mpc::tcp_listen(listen_address), b, session_options(opts));
    *out = make_result({}, report.to_json());
  });
}

pti_status pti_client(const char* connect_address, const double* input, size_t rows, size_t cols,
                      const pti_options* opts, pti_result** out) {
  if (connect_address == nullptr || input == nullptr || out == nullptr) {
    return invalid("connect_address, input and out must be non-null");
  }
  return guarded([&] {
    auto r = pti::engine::connect_and_infer(pti::mpc::tcp_connect(connect_address), input_vector(input, rows, cols),
                                            rows, session_options(opts));
    *out = make_result(std::move(r.values), r.report.to_json());
  });
}

pti_status pti_run_local(const pti_model* model, const double* input, size_t rows, size_t cols,
                         const pti_options* opts, pti_result** out) {
  if (model == nullptr || input == nullptr || out == nullptr) return invalid("model, input and out must be non-null");
  return guarded([&] {
    const ModelBundle b = prepared(model->bundle, opts);
    if (cols != b.config().embed_dim) throw pti::ShapeError("input width must equal the embedding dim");
    auto r = pti::engine::run_local(b, input_vector(input, rows, cols), rows, session_options(opts));
    *out = make_result(std::move(r.client.values), r.client.report.to_json());
  });
}

pti_status pti_reference_forward(const pti_model* model, const double* input, size_t rows, size_t cols,
                                 pti_result** out) {
  if (model == nullptr || input == nullptr || out == nullptr) return invalid("model, input and out must be non-null");
  return guarded([&] {
    const ModelBundle& b = model->bundle;
    if (cols != b.config().embed_dim) throw pti::ShapeError("input width must equal the embedding dim");
    const auto x = pti::encode_tensor({rows, cols}, input_vector(input, rows, cols), b.config().fp);
    *out = make_result(pti::decode_tensor(pti::engine::reference_forward(b, x), b.config().fp), {});
  });
}

pti_status pti_bench(const pti_model* model, size_t seq_len, const pti_options* opts, pti_result** out) {
  if (out == nullptr) return invalid("out must be non-null");
  if (seq_len == 0) return invalid("seq_len must be positive");
  return guarded([&] {
    pti::engine::BenchOptions b;
    if (model != nullptr) b.config = model->bundle.config();
    b.config.fp = override_fp(b.config.fp, opts);
    b.seq_len = seq_len;
    b.session = session_options(opts);
    b.seed = b.session.seed;
    const auto rows = pti::engine::run_benchmark(b);
    std::vector<double> ratios;
    for (const auto& r : rows) {
      ratios.push_back(static_cast<double>(r.report.total.bytes()) /
                       static_cast<double>(rows.front().report.total.bytes()));
    }
    *out = make_result(std::move(ratios), pti::engine::benchmark_json(rows), pti::engine::benchmark_table(rows));
  });
}

size_t pti_result_output_count(const pti_result* r) { return r ? r->outputs.size() : 0; }
const double* pti_result_outputs(const pti_result* r) { return r ? r->outputs.data() : nullptr; }
const char* pti_result_report_json(const pti_result* r) { return r ? r->report_json.c_str() : ""; }
const char* pti_result_text(const pti_result* r) { return r ? r->text.c_str() : ""; }
void pti_result_free(pti_result* r) { delete r; }

}  // extern "C"
