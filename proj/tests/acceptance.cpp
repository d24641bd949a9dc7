// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "pti/engine.hpp"
#include "pti/error.hpp"
#include "pti/matmul.hpp"
#include "pti/nn.hpp"
#include "pti/primitives.hpp"
#include "two_party.hpp"

using namespace pti;
using mpc::Category;
using mpc::ShareTensor;

namespace {

using Clock = std::chrono::steady_clock;
const FixedPointParams kFp;

struct Outcome {
  bool pass;
  std::string detail;
};

int g_failures = 0;

void report(const char* name, const Outcome& o) {
  std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
  std::fflush(stdout);
  if (!o.pass) ++g_failures;
}

template <typename... Args>
std::string fmt(const char* f, Args... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::vector<double> uniform(Prg& prg, std::size_t n, double lo, double hi) {
  std::vector<double> v(n);
  for (auto& x : v) x = lo + (hi - lo) * static_cast<double>(prg.next_u64() >> 11) / 9007199254740992.0;
  return v;
}

/// Inputs as the protocols see them (floor-encoded).
std::vector<double> quantized(const std::vector<double>& v) { return decode_tensor(encode_tensor({v.size()}, v, kFp), kFp); }

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

std::vector<double> run_protocol(mpc::Backend backend, std::size_t rows, std::size_t cols, const std::vector<double>& v,
                                 const testing::UnaryProtocol& fn) {
  const auto opts = testing::small_options(4096, backend);
  return decode_tensor(testing::run_shared(opts, encode_tensor({rows, cols}, v, kFp), fn), kFp);
}

double gelu(double x) { return 0.5 * x * (1 + std::tanh(std::sqrt(2 / M_PI) * (x + 0.044715 * x * x * x))); }

void per_row(std::vector<double>& v, std::size_t cols, const std::function<void(double*, std::size_t)>& fn) {
  for (std::size_t r = 0; r < v.size() / cols; ++r) fn(v.data() + r * cols, cols);
}

void softmax_rows(double* x, std::size_t n) {
  const double m = *std::max_element(x, x + n);
  double s = 0;
  for (std::size_t i = 0; i < n; ++i) s += (x[i] = std::exp(x[i] - m));
  for (std::size_t i = 0; i < n; ++i) x[i] /= s;
}

/// Affine parameters that depend only on the column, held by the server.
nn::AffineParams affine_for(const mpc::Session& s, const std::vector<double>& gamma, const std::vector<double>& beta) {
  nn::AffineParams a;
  for (std::size_t i = 0; i < gamma.size(); ++i) {
    a.gamma.push_back(s.party() == 1 ? encode_fixed(gamma[i], s.fp()) : 0);
    a.beta.push_back(s.party() == 1 ? encode_fixed(beta[i], s.fp()) : 0);
  }
  return a;
}

Outcome matmul_exactness() {
  Prg prg(2024, 1);
  const auto t0 = Clock::now();
  int exact = 0;
  const int cases = 50;
  for (int c = 0; c < cases; ++c) {
    const std::size_t m = 1 + prg.next_u64() % 64, r = 1 + prg.next_u64() % 64, n = 1 + prg.next_u64() % 64;
    PlainTensor a({m, r}), b({r, n});
    for (auto& v : a.data) v = prg.bits(kFp.ell);
    for (auto& v : b.data) v = prg.bits(kFp.ell);
    auto opts = testing::small_options(4096);
    opts.seed = 500 + c;
    auto [c0, c1] = mpc::run_two_party(
        opts, [&](mpc::Session& s) { return linear::run_matmul_protocol(s, {}, b, m, r, n, true); },
        [&](mpc::Session& s) { return linear::run_matmul_protocol(s, a, {}, m, r, n, true); });
    PlainTensor sum(c0.shape);
    for (std::size_t i = 0; i < sum.size(); ++i) sum.data[i] = kFp.add(c0.data[i], c1.data[i]);
    exact += sum == plain_matmul(a, b, kFp);
  }
  const double secs = seconds_since(t0);
  return {exact == cases && secs < 60.0, fmt("%d/%d products exact at N=4096 in %.1f s (limit 60 s)", exact, cases, secs)};
}

Outcome compression_ratio() {
  struct Shape {
    std::size_t m, r, n, poly;
  };
  std::string detail;
  bool pass = true;
  Prg prg(77, 1);
  for (const Shape sh : {Shape{32, 64, 32, 4096}, Shape{64, 2, 64, 8192}, Shape{48, 100, 20, 8192}}) {
    PlainTensor a({sh.m, sh.r}), b({sh.r, sh.n});
    for (auto& v : a.data) v = prg.bits(kFp.ell);
    for (auto& v : b.data) v = prg.bits(kFp.ell);
    std::uint64_t bytes[2] = {0, 0};
    for (const bool compress : {false, true}) {
      mpc::CostLedger ledger;
      mpc::run_two_party(
          testing::small_options(sh.poly),
          [&](mpc::Session& s) {
            auto out = linear::run_matmul_protocol(s, {}, b, sh.m, sh.r, sh.n, compress);
            ledger = s.costs();
            return out;
          },
          [&](mpc::Session& s) { return linear::run_matmul_protocol(s, a, {}, sh.m, sh.r, sh.n, compress); });
      bytes[compress] = ledger.op(Category::kMatMul).bytes_s2c;
    }
    const auto plan = linear::plan_tiles(sh.m, sh.r, sh.n, sh.poly);
    const double measured = static_cast<double>(bytes[1]) / static_cast<double>(bytes[0]);
    const double predicted = linear::response_bytes_ratio(plan, true);
    const double dev = std::abs(measured / predicted - 1.0);
    pass = pass && dev <= 0.05;
    detail += fmt("%zux%zux%zu N=%zu m0n0=%zu measured %.4f predicted %.4f; ", sh.m, sh.r, sh.n, sh.poly,
                  plan.m0 * plan.n0, measured, predicted);
  }
  return {pass, detail + "tolerance 5%"};
}

Outcome fidelity() {
  Prg prg(31337, 1);
  using mpc::Backend;
  const auto crypto = Backend::kCrypto;

  const auto gx = uniform(prg, 1000, -16, 16);
  const auto gy = run_protocol(crypto, 1, 1000, gx, nn::gelu_protocol);
  std::vector<double> gref = quantized(gx);
  for (auto& v : gref) v = gelu(v);
  const double ge = max_abs_diff(gy, gref);

  const std::size_t sm_cols = 32;
  const auto sx = uniform(prg, sm_cols * sm_cols, -16, 16);
  const auto sy = run_protocol(crypto, sm_cols, sm_cols, sx, nn::softmax_protocol);
  std::vector<double> sref = quantized(sx);
  per_row(sref, sm_cols, softmax_rows);
  const double se = max_abs_diff(sy, sref);

  const std::size_t e = 128, rows = 8;
  const auto lx = uniform(prg, rows * e, -16, 16);
  const auto gamma = uniform(prg, e, 0.5, 1.5), beta = uniform(prg, e, -1, 1);
  const auto ly = run_protocol(crypto, rows, e, lx, [&](mpc::Session& s, const ShareTensor& x) {
    return nn::layernorm_protocol(s, x, affine_for(s, gamma, beta));
  });
  std::vector<double> lref = quantized(lx);
  const auto qg = quantized(gamma), qb = quantized(beta);
  per_row(lref, e, [&](double* x, std::size_t n) {
    const double mean = std::accumulate(x, x + n, 0.0) / static_cast<double>(n);
    double var = 0;
    for (std::size_t i = 0; i < n; ++i) var += (x[i] - mean) * (x[i] - mean);
    var /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = (x[i] - mean) / std::sqrt(var + 1e-5) * qg[i] + qb[i];
  });
  const double le = max_abs_diff(ly, lref);

  const double t7 = std::ldexp(1.0, -7), t6 = std::ldexp(1.0, -6);
  return {ge <= t7 && se <= t7 && le <= t6,
          fmt("max |err| GELU %.5f (n=1000), Softmax %.5f (n=1024), LayerNorm %.5f (n=1024); limits %.5f/%.5f/%.5f", ge,
              se, le, t7, t7, t6)};
}

Outcome differential() {
  Prg prg(4242, 1);
  struct Case {
    const char* name;
    std::size_t rows, cols;
    double lo, hi;
    testing::UnaryProtocol fn;
  };
  const std::vector<double> gamma(25, 1.1), beta(25, -0.3);
  const std::vector<Case> cases = {
      {"relu", 1, 100, -16, 16, [](auto& s, auto& x) { return mpc::p_relu(s, x); }},
      {"max", 10, 10, -16, 16, [](auto& s, auto& x) { return mpc::p_max(s, x); }},
      {"exp", 1, 100, -16, 0, [](auto& s, auto& x) { return mpc::p_exp(s, x); }},
      {"recip", 1, 100, 1, 16, [](auto& s, auto& x) { return mpc::p_recip(s, x, 1, 16); }},
      {"rsqrt", 1, 100, 0.0625, 16, [](auto& s, auto& x) { return mpc::p_rsqrt(s, x, 0.0625, 16); }},
      {"tanh", 1, 100, -8, 8, [](auto& s, auto& x) { return mpc::p_tanh(s, x); }},
      {"gelu", 1, 100, -16, 16, nn::gelu_protocol},
      {"softmax", 10, 10, -16, 16, nn::softmax_protocol},
      {"softmax_sub", 10, 10, -4, 4, [](auto& s, auto& x) { return nn::softmax_sub_protocol(s, x); }},
      {"layernorm", 4, 25, -16, 16,
       [&](auto& s, auto& x) { return nn::layernorm_protocol(s, x, affine_for(s, gamma, beta)); }},
      {"layernorm_sub", 4, 25, -16, 16,
       [&](auto& s, auto& x) { return nn::layernorm_sub_protocol(s, x, affine_for(s, gamma, beta)); }},
  };
  bool pass = true;
  std::string detail;
  for (const auto& c : cases) {
    const auto x = uniform(prg, c.rows * c.cols, c.lo, c.hi);
    const auto a = run_protocol(mpc::Backend::kCrypto, c.rows, c.cols, x, c.fn);
    const auto b = run_protocol(mpc::Backend::kIdeal, c.rows, c.cols, x, c.fn);
    const double d = max_abs_diff(a, b);
    pass = pass && d <= std::ldexp(1.0, -7);
    detail += fmt("%s %.5f, ", c.name, d);
  }
  return {pass, detail + fmt("limit %.5f, 100 points each", std::ldexp(1.0, -7))};
}

Outcome overflow_safety() {
  engine::ModelConfig c = engine::ModelConfig::bert_tiny();
  c.n_blocks = 1;
  c.n_labels = 0;
  int overflows = 0;
  std::string first;
  const int runs = 100;
  for (int i = 0; i < runs; ++i) {
    nn::OperatorVariant v;
    if (i % 2) v = {nn::Activation::kRelu, nn::AttentionNorm::kSoftmaxSub, nn::Norm::kLayerNormSub, nn::Norm::kLayerNormSub};
    c.variants = {v};
    const auto bundle = engine::random_model(c, 9000 + i);
    const auto x = encode_tensor({32, c.embed_dim}, engine::random_input(32, c.embed_dim, 7000 + i), c.fp);
    try {
      engine::reference_block_forward(bundle, 0, x);
    } catch (const OverflowError& e) {
      if (overflows++ == 0) first = e.what();
    }
  }
  return {overflows == 0, fmt("%d overflow errors in %d reference block runs (E=128, S=32, |x| <= 16, l=41, f=13)%s",
                              overflows, runs, first.empty() ? "" : (": " + first).c_str())};
}

}  // namespace

int main() {
  std::printf("acceptance run (crypto backend unless noted)\n");
  report("matmul exactness", matmul_exactness());
  report("compression ratio", compression_ratio());
  report("nonlinear fidelity", fidelity());

  engine::BenchOptions bench;
  bench.seq_len = 32;
  bench.seed = 1;
  std::vector<engine::BenchRow> rows;
  try {
    rows = engine::run_benchmark(bench);
  } catch (const std::exception& e) {
    std::printf("benchmark failed: %s\n", e.what());
  }
  if (rows.size() == 5) {
    const auto& orig = rows.front();
    const auto& last = rows.back();
    report("end-to-end block",
           {orig.max_abs_error <= std::ldexp(1.0, -5) && orig.report.wall_seconds < 600.0,
            fmt("E=128 S=32 max |err| %.5f (limit %.5f), %.1f s (limit 600 s); substituted block max |err| %.5f",
                orig.max_abs_error, std::ldexp(1.0, -5), orig.report.wall_seconds, last.max_abs_error)});
    const double ratio =
        static_cast<double>(last.report.total.bytes()) / static_cast<double>(orig.report.total.bytes());
    const double speedup = orig.report.wall_seconds / last.report.wall_seconds;
    report("substitution savings",
           {ratio <= 0.30 && speedup >= 2.0,
            fmt("bytes(-LN2)/bytes(Orig.) = %.3f (limit 0.30), speedup %.2fx (limit 2x)", ratio, speedup)});
    const auto& r = orig.report;
    const double nonlinear = static_cast<double>(r.category(Category::kGelu).bytes() +
                                                 r.category(Category::kSoftmax).bytes() +
                                                 r.category(Category::kLayerNorm).bytes());
    const double share = nonlinear / static_cast<double>(r.total.bytes());
    report("operator dominance", {share >= 0.70, fmt("GELU+Softmax+LayerNorm = %.1f%% of %.1f MB (limit 70%%)",
                                                      100 * share, static_cast<double>(r.total.bytes()) / 1e6)});
    std::printf("\n%s\n", engine::benchmark_table(rows).c_str());
  } else {
    for (const char* n : {"end-to-end block", "substitution savings", "operator dominance"}) {
      report(n, {false, "benchmark did not complete"});
    }
  }
  report("overflow safety", overflow_safety());
  report("ideal/crypto differential", differential());
  std::printf("%d criteria failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
