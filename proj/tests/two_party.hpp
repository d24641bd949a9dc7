#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "pti/runner.hpp"
#include "pti/share.hpp"

namespace pti::testing {

inline mpc::SessionOptions small_options(std::size_t poly_degree = 4096, mpc::Backend backend = mpc::Backend::kCrypto) {
  mpc::SessionOptions o;
  o.poly_degree = poly_degree;
  o.backend = backend;
  o.seed = 7;
  return o;
}

using UnaryProtocol = std::function<mpc::ShareTensor(mpc::Session&, const mpc::ShareTensor&)>;

/// Shares `x` with a local PRG, runs `fn` on both halves and reconstructs.
inline PlainTensor run_shared(const mpc::SessionOptions& opts, const PlainTensor& x, const UnaryProtocol& fn,
                              mpc::CostLedger* costs = nullptr) {
  Prg rng(opts.seed, 99);
  auto [x0, x1] = mpc::share_secret(x, rng, opts.fp);
  mpc::CostLedger ledger;
  auto [y0, y1] = mpc::run_two_party(
      opts,
      [&](mpc::Session& s) {
        auto y = fn(s, x0);
        ledger = s.costs();
        return y;
      },
      [&](mpc::Session& s) { return fn(s, x1); });
  if (costs != nullptr) *costs = ledger;
  return mpc::reconstruct(y0, y1);
}

inline PlainTensor encode_vec(const std::vector<double>& v, const FixedPointParams& p = {}) {
  return encode_tensor({v.size()}, v, p);
}

inline std::vector<double> run_unary(const mpc::SessionOptions& opts, const std::vector<double>& v,
                                     const UnaryProtocol& fn, int out_frac = -1) {
  const auto out = run_shared(opts, encode_vec(v, opts.fp), fn);
  std::vector<double> r(out.size());
  const int f = out_frac < 0 ? opts.fp.frac_bits : out_frac;
  for (std::size_t i = 0; i < r.size(); ++i) {
    r[i] = std::ldexp(static_cast<double>(opts.fp.to_signed(out.data[i])), -f);
  }
  return r;
}

}  // namespace pti::testing
