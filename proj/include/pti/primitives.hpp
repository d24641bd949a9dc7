#pragma once

#include <functional>
#include <vector>

#include "pti/channel.hpp"
#include "pti/share.hpp"

namespace pti::mpc {

struct BeaverTriple {
  ShareTensor a;
  ShareTensor b;
  ShareTensor c;
};

/// `count` multiplication triples from Gilboa-style correlated OT.
BeaverTriple generate_triples(Session& s, std::size_t count, Tag tag = Tag::kElemul);

/// Ring product x·y with no truncation.
ShareTensor p_elemul(Session& s, const ShareTensor& x, const ShareTensor& y, Tag tag = Tag::kElemul);

/// Interactive truncation by `shift` bits: floor(x / 2^shift) or one more.
/// Requires |x| < t/4.
ShareTensor p_trunc(Session& s, const ShareTensor& x, int shift, Tag tag = Tag::kTrunc);

/// p_elemul followed by p_trunc. A non-default tag labels both steps.
ShareTensor p_mul_trunc(Session& s, const ShareTensor& x, const ShareTensor& y, int shift,
                        Tag tag = Tag::kElemul);

/// Shares of 1 where signed(x) >= 0, else 0.
ShareTensor p_drelu(Session& s, const ShareTensor& x, Tag tag = Tag::kRelu);
ShareTensor p_relu(Session& s, const ShareTensor& x, Tag tag = Tag::kRelu);
/// Maximum along the last axis; returns one element per row.
ShareTensor p_max(Session& s, const ShareTensor& x);

/// Fractional-precision knobs shared by the iterative approximations. Negative
/// values mean "session default" (frac_bits of the fixed-point params).
struct Precision {
  int in_frac = -1;
  int out_frac = -1;
};

/// e^x for x in [-bound, 0].
ShareTensor p_exp(Session& s, const ShareTensor& x, Precision prec = {}, double bound = 32.0);
/// 1/x for x in [lo, hi]; iterations < 0 picks the count from the range.
ShareTensor p_recip(Session& s, const ShareTensor& x, double lo, double hi, Precision prec = {},
                    int iterations = -1);
/// 1/sqrt(x) for x in [lo, hi].
ShareTensor p_rsqrt(Session& s, const ShareTensor& x, double lo, double hi, Precision prec = {},
                    int iterations = 25);
/// tanh(x) for |x| <= 16 (larger inputs are clamped).
ShareTensor p_tanh(Session& s, const ShareTensor& x, Precision prec = {});

/// Newton iteration count for 1/x on [lo, hi] at `frac_bits` of precision.
int recip_iterations(double lo, double hi, int frac_bits);
/// Working precision used by p_recip for inputs with `in_frac` bits.
int recip_internal_frac(double lo, double hi, int in_frac);
int rsqrt_internal_frac(double lo, double hi, int in_frac);

/// Ideal-functionality evaluation (insecure, for testing): the server sends
/// its halves to the client, which evaluates `fn` on the opened inputs and
/// re-shares the result. Only valid on an ideal-backend session.
using IdealFn = std::function<std::vector<FieldElement>(const std::vector<PlainTensor>&)>;
ShareTensor ideal_eval(Session& s, Tag tag, const std::vector<const ShareTensor*>& inputs,
                       std::vector<std::size_t> out_shape, const IdealFn& fn);

}  // namespace pti::mpc
