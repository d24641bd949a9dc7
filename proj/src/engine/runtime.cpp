#include <chrono>

#include <json.hpp>

#include "pti/engine.hpp"
#include "pti/error.hpp"
#include "pti/runner.hpp"

namespace pti::engine {

using nlohmann::json;
using mpc::Backend;
using mpc::Tag;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

json cost_json(const mpc::CategoryCost& c) {
  return {{"bytes_c2s", c.bytes_c2s}, {"bytes_s2c", c.bytes_s2c}, {"bytes", c.bytes()},
          {"rounds", c.rounds},       {"seconds", c.seconds}};
}

json categories_json(const std::array<mpc::CategoryCost, mpc::kCategoryCount>& a) {
  json out = json::object();
  for (std::size_t i = 0; i < a.size(); ++i) out[mpc::category_name(static_cast<mpc::Category>(i))] = cost_json(a[i]);
  return out;
}

const char* backend_name(Backend b) { return b == Backend::kIdeal ? "ideal" : "crypto"; }

std::vector<std::uint8_t> encode_rows(std::uint64_t rows) {
  std::vector<std::uint8_t> out(8);
  for (int i = 0; i < 8; ++i) out[i] = static_cast<std::uint8_t>(rows >> (8 * i));
  return out;
}

std::uint64_t decode_rows(const std::vector<std::uint8_t>& b) {
  if (b.size() != 8) throw DesyncError("malformed sequence-length message");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{b[i]} << (8 * i);
  return v;
}

mpc::SessionOptions with_model_params(mpc::SessionOptions opts, const ModelConfig& c) {
  opts.fp = c.fp;
  return opts;
}

}  // namespace

CostReport CostReport::from_session(const Session& s, double wall_seconds) {
  const mpc::CostLedger& l = s.costs();
  CostReport r;
  r.categories = l.operators;
  r.primitives = l.primitives;
  r.total = l.total();
  r.rounds = l.rounds;
  r.backend = s.backend();
  r.insecure = l.insecure || s.backend() == Backend::kIdeal;
  r.wall_seconds = wall_seconds;
  return r;
}

std::string CostReport::to_json() const {
  const json j = {{"backend", backend_name(backend)},
                  {"insecure", insecure},
                  {"wall_seconds", wall_seconds},
                  {"rounds", rounds},
                  {"total", cost_json(total)},
                  {"categories", categories_json(categories)},
                  {"primitives", categories_json(primitives)}};
  return j.dump(2);
}

ClientOutcome client_inference(Session& s, const ModelConfig& config, const PlainTensor& x) {
  const auto t0 = Clock::now();
  if (x.shape.size() != 2 || x.cols() != config.embed_dim) throw ShapeError("input must be [S x E]");
  if (x.rows() == 0 || x.rows() > config.max_seq_len) throw ConfigError("sequence length out of range");
  s.send(Tag::kControl, encode_rows(x.rows()));
  const ShareTensor xs = mpc::share_input(s, 0, x, x.shape);
  const ShareTensor out = model_forward(s, ModelBundle::public_view(config), xs);
  ClientOutcome result;
  result.output = mpc::reveal(s, out, 0);
  result.values = decode_tensor(result.output, s.fp());
  result.report = CostReport::from_session(s, seconds_since(t0));
  return result;
}

CostReport server_inference(Session& s, const ModelBundle& bundle) {
  const auto t0 = Clock::now();
  const ModelConfig& c = bundle.config();
  const std::uint64_t rows = decode_rows(s.recv(Tag::kControl));
  if (rows == 0 || rows > c.max_seq_len) throw ConfigError("client sequence length out of range");
  const ShareTensor xs = mpc::share_input(s, 0, {}, {rows, c.embed_dim});
  const ShareTensor out = model_forward(s, bundle, xs);
  mpc::reveal(s, out, 0);
  return CostReport::from_session(s, seconds_since(t0));
}

CostReport serve(std::unique_ptr<mpc::Channel> channel, const ModelBundle& bundle, const mpc::SessionOptions& opts) {
  if (!bundle.has_weights()) throw ModelError("server needs model weights");
  const json hello = {{"config", json::parse(config_to_json(bundle.config()))},
                      {"poly_degree", opts.poly_degree},
                      {"backend", backend_name(opts.backend)},
                      {"compress", opts.compress}};
  const std::string text = hello.dump();
  channel->send_frame(Tag::kControl, std::vector<std::uint8_t>(text.begin(), text.end()));
  Session s(1, std::move(channel), with_model_params(opts, bundle.config()));
  try {
    return server_inference(s, bundle);
  } catch (...) {
    // Unblock the peer; on success the channel drains its queue on destruction.
    s.close();
    throw;
  }
}

ClientOutcome connect_and_infer(std::unique_ptr<mpc::Channel> channel, const std::vector<double>& x,
                                std::size_t rows, const mpc::SessionOptions& opts) {
  const mpc::Frame f = channel->recv_frame();
  if (f.tag != Tag::kControl) throw DesyncError("expected the server's session announcement");
  ModelConfig config;
  mpc::SessionOptions o = opts;
  try {
    const json hello = json::parse(f.payload.begin(), f.payload.end());
    config = config_from_json(hello.at("config").dump());
    o.poly_degree = hello.at("poly_degree").get<std::size_t>();
    o.compress = hello.at("compress").get<bool>();
    if (hello.at("backend").get<std::string>() != backend_name(opts.backend)) {
      throw ConfigError(std::string("backend mismatch: server runs ") + hello.at("backend").get<std::string>());
    }
  } catch (const json::exception& e) {
    throw DesyncError(std::string("malformed session announcement: ") + e.what());
  }
  if (rows == 0 || x.size() != rows * config.embed_dim) throw ShapeError("input must be [S x E]");
  Session s(0, std::move(channel), with_model_params(o, config));
  try {
    return client_inference(s, config, encode_tensor({rows, config.embed_dim}, x, config.fp));
  } catch (...) {
    // Unblock the peer; on success the channel drains its queue on destruction.
    s.close();
    throw;
  }
}

LocalOutcome run_local(const ModelBundle& bundle, const std::vector<double>& x, std::size_t rows,
                       const mpc::SessionOptions& opts) {
  const ModelConfig& c = bundle.config();
  if (rows == 0 || x.size() != rows * c.embed_dim) throw ShapeError("input must be [S x E]");
  const PlainTensor enc = encode_tensor({rows, c.embed_dim}, x, c.fp);
  auto [client, server] = mpc::run_two_party(
      with_model_params(opts, c), [&](Session& s) { return client_inference(s, c, enc); },
      [&](Session& s) { return server_inference(s, bundle); });
  return {std::move(client), std::move(server)};
}

}  // namespace pti::engine
