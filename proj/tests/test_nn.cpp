#include <doctest.h>

#include <cmath>
#include <numeric>

#include "pti/nn.hpp"
#include "pti/primitives.hpp"
#include "two_party.hpp"

using namespace pti;
using namespace pti::nn;
using mpc::ShareTensor;
using pti::testing::run_shared;
using pti::testing::small_options;

namespace {

const FixedPointParams kFp;
const double kUlp = std::ldexp(1.0, -13);

double gelu_ref(double x) { return 0.5 * x * (1 + std::tanh(std::sqrt(2 / M_PI) * (x + 0.044715 * x * x * x))); }

std::vector<double> decode(const PlainTensor& t) { return decode_tensor(t, kFp); }

std::vector<double> uniform_values(Prg& prg, std::size_t n, double lo, double hi) {
  std::vector<double> v(n);
  for (auto& x : v) x = lo + (hi - lo) * static_cast<double>(prg.next_u64() >> 11) / 9007199254740992.0;
  return v;
}

std::vector<double> quantize(std::vector<double> v) {
  for (auto& x : v) x = std::floor(x * 8192) / 8192;
  return v;
}

std::vector<double> run_rows(std::size_t rows, std::size_t cols, const std::vector<double>& v,
                             const testing::UnaryProtocol& fn, mpc::CostLedger* costs = nullptr) {
  return decode(run_shared(small_options(), encode_tensor({rows, cols}, v, kFp), fn, costs));
}

AffineParams affine_for(const mpc::Session& s, std::size_t e, double gamma, double beta) {
  AffineParams a;
  a.gamma.assign(e, s.party() == 1 ? encode_fixed(gamma, s.fp()) : 0);
  a.beta.assign(e, s.party() == 1 ? encode_fixed(beta, s.fp()) : 0);
  return a;
}

std::vector<double> layernorm_ref(const std::vector<double>& row, double gamma, double beta, double eps) {
  const double mean = std::accumulate(row.begin(), row.end(), 0.0) / row.size();
  double var = 0;
  for (double x : row) var += (x - mean) * (x - mean);
  var /= row.size();
  std::vector<double> out;
  for (double x : row) out.push_back((x - mean) / std::sqrt(var + eps) * gamma + beta);
  return out;
}

std::vector<double> softmax_ref(const std::vector<double>& row) {
  const double m = *std::max_element(row.begin(), row.end());
  double sum = 0;
  for (double x : row) sum += std::exp(x - m);
  std::vector<double> out;
  for (double x : row) out.push_back(std::exp(x - m) / sum);
  return out;
}

PlainTensor random_plain(Prg& prg, std::size_t rows, std::size_t cols, double scale) {
  return encode_tensor({rows, cols}, uniform_values(prg, rows * cols, -scale, scale), kFp);
}

}  // namespace

TEST_CASE("fc forward") {
  Prg prg(1, 1);
  const std::size_t dim = 64, rows = 8;
  const auto x = random_plain(prg, rows, dim, 2.0);
  const auto w = random_plain(prg, dim, dim, 0.5);
  const auto b = encode_tensor({dim}, uniform_values(prg, dim, -1, 1), kFp);

  auto fc = [&](const PlainTensor& wm, const PlainTensor& bv) {
    return run_shared(small_options(), x, [&](mpc::Session& s, const ShareTensor& xs) {
      return s.is_client() ? fc_forward(s, {}, {}, xs, dim) : fc_forward(s, wm, bv, xs, dim);
    });
  };

  PlainTensor eye({dim, dim});
  for (std::size_t i = 0; i < dim; ++i) eye.at(i, i) = encode_fixed(1.0, kFp);
  const auto same = fc(eye, PlainTensor({dim}));
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::llabs(kFp.to_signed(same.data[i]) - kFp.to_signed(x.data[i])) <= 1);

  const auto y = fc(w, b);
  const auto ref = plain_matmul(x, transpose(w), kFp);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t o = 0; o < dim; ++o) {
      const auto want = kFp.add(truncate_plain(ref.at(r, o), 13, kFp), b.data[o]);
      CHECK(std::llabs(kFp.to_signed(y.at(r, o)) - kFp.to_signed(want)) <= 1);
    }
  }

  const auto zero_in = run_shared(small_options(), PlainTensor({rows, dim}), [&](mpc::Session& s, const ShareTensor& xs) {
    return s.is_client() ? fc_forward(s, {}, {}, xs, dim) : fc_forward(s, w, b, xs, dim);
  });
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t o = 0; o < dim; ++o) CHECK(std::llabs(kFp.to_signed(zero_in.at(r, o)) - kFp.to_signed(b.data[o])) <= 1);
  }
}

TEST_CASE("shared matmul") {
  Prg prg(2, 2);
  const std::size_t n = 32;
  const auto x = random_plain(prg, n, n, 2.0);
  const auto y = random_plain(prg, n, n, 2.0);
  PlainTensor both({2 * n, n});
  std::copy(x.data.begin(), x.data.end(), both.data.begin());
  std::copy(y.data.begin(), y.data.end(), both.data.begin() + static_cast<std::ptrdiff_t>(n * n));
  const auto z = run_shared(small_options(), both, [&](mpc::Session& s, const ShareTensor& xy) {
    ShareTensor a = mpc::zeros(s, {n, n}), b = mpc::zeros(s, {n, n});
    std::copy(xy.local.data.begin(), xy.local.data.begin() + static_cast<std::ptrdiff_t>(n * n), a.local.data.begin());
    std::copy(xy.local.data.begin() + static_cast<std::ptrdiff_t>(n * n), xy.local.data.end(), b.local.data.begin());
    return shared_matmul(s, a, b);
  });
  const auto ref = plain_matmul(x, y, kFp);
  for (std::size_t i = 0; i < n * n; ++i) {
    CHECK(std::llabs(kFp.to_signed(z.data[i]) - kFp.to_signed(truncate_plain(ref.data[i], 13, kFp))) <= 1);
  }

  // Y shared as (I, 0).
  const auto ident = run_shared(small_options(), x, [&](mpc::Session& s, const ShareTensor& xs) {
    ShareTensor eye = mpc::zeros(s, {n, n});
    if (s.is_client()) {
      for (std::size_t i = 0; i < n; ++i) eye[i * n + i] = encode_fixed(1.0, s.fp());
    }
    return shared_matmul(s, xs, eye);
  });
  for (std::size_t i = 0; i < n * n; ++i) CHECK(std::llabs(kFp.to_signed(ident.data[i]) - kFp.to_signed(x.data[i])) <= 1);
}

TEST_CASE("gelu") {
  Prg prg(3, 3);
  std::vector<double> xs{0.0, 1.0, -8.0};
  const auto extra = uniform_values(prg, 200, -16, 16);
  xs.insert(xs.end(), extra.begin(), extra.end());
  const auto r = run_rows(1, xs.size(), xs, [](mpc::Session& s, const ShareTensor& x) { return gelu_protocol(s, x); });
  CHECK(std::fabs(r[0]) <= std::ldexp(1.0, -10));
  CHECK(std::fabs(r[1] - 0.8412) <= std::ldexp(1.0, -7));
  CHECK(std::fabs(r[2]) <= std::ldexp(1.0, -7));
  const auto q = quantize(xs);
  for (std::size_t i = 0; i < xs.size(); ++i) CHECK(std::fabs(r[i] - gelu_ref(q[i])) <= std::ldexp(1.0, -7));
}

TEST_CASE("softmax") {
  auto r = run_rows(1, 4, {3, 3, 3, 3}, [](mpc::Session& s, const ShareTensor& x) { return softmax_protocol(s, x); });
  for (double v : r) CHECK(std::fabs(v - 0.25) <= std::ldexp(1.0, -8));
  r = run_rows(1, 2, {std::log(2.0), 0}, [](mpc::Session& s, const ShareTensor& x) { return softmax_protocol(s, x); });
  CHECK(std::fabs(r[0] - 2.0 / 3) <= std::ldexp(1.0, -8));
  CHECK(std::fabs(r[1] - 1.0 / 3) <= std::ldexp(1.0, -8));

  Prg prg(4, 4);
  const std::size_t rows = 4, n = 128;
  const auto v = uniform_values(prg, rows * n, -8, 8);
  r = run_rows(rows, n, v, [](mpc::Session& s, const ShareTensor& x) { return softmax_protocol(s, x); });
  const auto q = quantize(v);
  for (std::size_t row = 0; row < rows; ++row) {
    const std::vector<double> in(q.begin() + row * n, q.begin() + (row + 1) * n);
    const auto ref = softmax_ref(in);
    double sum = 0;
    for (std::size_t c = 0; c < n; ++c) {
      sum += r[row * n + c];
      CHECK(r[row * n + c] >= 0);
      CHECK(std::fabs(r[row * n + c] - ref[c]) <= std::ldexp(1.0, -7));
    }
    CHECK(std::fabs(sum - 1) <= std::ldexp(1.0, -6));
  }
}

TEST_CASE("layernorm") {
  auto run_ln = [](std::size_t rows, std::size_t cols, const std::vector<double>& v, double g, double b, double eps) {
    return run_rows(rows, cols, v, [=](mpc::Session& s, const ShareTensor& x) {
      auto a = affine_for(s, cols, g, b);
      a.epsilon_ln = eps;
      return layernorm_protocol(s, x, a);
    });
  };
  auto r = run_ln(1, 4, {2.5, 2.5, 2.5, 2.5}, 1.5, 0.75, 1e-5);
  for (double v : r) CHECK(std::fabs(v - 0.75) <= std::ldexp(1.0, -6));

  r = run_ln(1, 3, {1, 2, 3}, 1, 0, 0);
  CHECK(std::fabs(r[0] + 1.2247) <= std::ldexp(1.0, -6));
  CHECK(std::fabs(r[1]) <= std::ldexp(1.0, -6));
  CHECK(std::fabs(r[2] - 1.2247) <= std::ldexp(1.0, -6));

  Prg prg(5, 5);
  const std::size_t rows = 4, e = 128;
  const auto v = uniform_values(prg, rows * e, -16, 16);
  r = run_ln(rows, e, v, 0.8, -0.3, 1e-5);
  const auto q = quantize(v);
  for (std::size_t row = 0; row < rows; ++row) {
    const auto ref = layernorm_ref({q.begin() + row * e, q.begin() + (row + 1) * e}, 0.8, -0.3, 1e-5);
    for (std::size_t c = 0; c < e; ++c) CHECK(std::fabs(r[row * e + c] - ref[c]) <= std::ldexp(1.0, -6));
  }
}

TEST_CASE("softmax substitute") {
  const auto fn = [](mpc::Session& s, const ShareTensor& x) { return softmax_sub_protocol(s, x); };
  auto r = run_rows(1, 3, {2, -3, 1}, fn);
  CHECK(std::fabs(r[0] - 2.0 / 3) <= std::ldexp(1.0, -7));
  CHECK(std::fabs(r[1]) <= std::ldexp(1.0, -7));
  CHECK(std::fabs(r[2] - 1.0 / 3) <= std::ldexp(1.0, -7));
  r = run_rows(1, 3, {-1, -2, -0.5}, fn);
  for (double v : r) CHECK(std::fabs(v) <= std::ldexp(1.0, -10));
  r = run_rows(1, 4, {-1, 3.5, -2, -0.5}, fn);
  CHECK(std::fabs(r[1] - 1.0) <= std::ldexp(1.0, -7));
  CHECK(std::fabs(r[0]) + std::fabs(r[2]) + std::fabs(r[3]) <= std::ldexp(1.0, -10));

  Prg prg(6, 6);
  const auto v = uniform_values(prg, 4 * 32, -4, 4);
  r = run_rows(4, 32, v, fn);
  for (std::size_t row = 0; row < 4; ++row) {
    double sum = 0;
    for (std::size_t c = 0; c < 32; ++c) {
      CHECK(r[row * 32 + c] >= 0);
      sum += r[row * 32 + c];
    }
    CHECK(sum <= 1 + std::ldexp(1.0, -6));
  }
}

TEST_CASE("layernorm substitute") {
  const auto fn = [](double g, double b, std::size_t e) {
    return [=](mpc::Session& s, const ShareTensor& x) { return layernorm_sub_protocol(s, x, affine_for(s, e, g, b)); };
  };
  auto r = run_rows(1, 3, {1, 2, 3}, fn(2, 1, 3));
  CHECK(std::fabs(r[0] + 1) <= kUlp);
  CHECK(std::fabs(r[1] - 1) <= kUlp);
  CHECK(std::fabs(r[2] - 3) <= kUlp);

  r = run_rows(1, 4, {1.25, 1.25, 1.25, 1.25}, fn(0.7, 0.5, 4));
  for (double v : r) CHECK(std::fabs(v - 0.5) <= kUlp);

  Prg prg(7, 7);
  const std::size_t rows = 4, e = 128;
  const auto v = uniform_values(prg, rows * e, -16, 16);
  r = run_rows(rows, e, v, fn(0.8, -0.3, e));
  const auto q = quantize(v);
  const double g = std::floor(0.8 * 8192) / 8192, b = std::floor(-0.3 * 8192) / 8192;
  for (std::size_t row = 0; row < rows; ++row) {
    const double mean = std::accumulate(q.begin() + row * e, q.begin() + (row + 1) * e, 0.0) / e;
    for (std::size_t c = 0; c < e; ++c) CHECK(std::fabs(r[row * e + c] - ((q[row * e + c] - mean) * g + b)) <= 2 * kUlp);
  }
}

TEST_CASE("substituted operators use less communication") {
  Prg prg(8, 8);
  const std::size_t rows = 4, n = 32;
  const auto v = uniform_values(prg, rows * n, -4, 4);
  auto bytes = [&](const testing::UnaryProtocol& fn) {
    mpc::CostLedger l;
    run_rows(rows, n, v, fn, &l);
    return l.total().bytes();
  };
  const auto softmax = bytes([](mpc::Session& s, const ShareTensor& x) { return softmax_protocol(s, x); });
  const auto softmax_sub = bytes([](mpc::Session& s, const ShareTensor& x) { return softmax_sub_protocol(s, x); });
  const auto gelu = bytes([](mpc::Session& s, const ShareTensor& x) { return gelu_protocol(s, x); });
  const auto relu = bytes([](mpc::Session& s, const ShareTensor& x) { return relu_activation(s, x); });
  const auto ln = bytes([](mpc::Session& s, const ShareTensor& x) { return layernorm_protocol(s, x, affine_for(s, 32, 1, 0)); });
  const auto ln_sub = bytes([](mpc::Session& s, const ShareTensor& x) {
    return layernorm_sub_protocol(s, x, affine_for(s, 32, 1, 0));
  });
  CHECK(softmax_sub < softmax);
  CHECK(relu < gelu);
  CHECK(ln_sub < ln);
}
