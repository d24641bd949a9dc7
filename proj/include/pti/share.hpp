#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "pti/channel.hpp"
#include "pti/fixed_point.hpp"
#include "pti/prg.hpp"

namespace pti::mpc {

class Session;

/// One party's additive share of a tensor over Z_t.
struct ShareTensor {
  PlainTensor local;
  int party = 0;
  FixedPointParams params{};

  ShareTensor() = default;
  ShareTensor(PlainTensor t, int party_id, FixedPointParams p) : local(std::move(t)), party(party_id), params(p) {}

  const std::vector<std::size_t>& shape() const { return local.shape; }
  std::size_t size() const { return local.size(); }
  std::size_t rows() const { return local.rows(); }
  std::size_t cols() const { return local.cols(); }
  FieldElement& operator[](std::size_t i) { return local.data[i]; }
  FieldElement operator[](std::size_t i) const { return local.data[i]; }
};

std::pair<ShareTensor, ShareTensor> share_secret(const PlainTensor& x, Prg& rng, const FixedPointParams& p);
PlainTensor reconstruct(const ShareTensor& a, const ShareTensor& b);

/// Non-interactive truncation of both halves by `shift` bits. Off by at most
/// one ulp, except with probability about |x|/t when the shares wrap.
std::pair<ShareTensor, ShareTensor> truncate_shares(const ShareTensor& s0, const ShareTensor& s1, int shift);
/// The same rule applied to a single party's half.
ShareTensor truncate_local(const ShareTensor& x, int shift);

// Local (communication-free) linear algebra on shares.
ShareTensor zeros_like(const ShareTensor& x);
ShareTensor zeros(const Session& s, std::vector<std::size_t> shape);
ShareTensor add(const ShareTensor& a, const ShareTensor& b);
ShareTensor sub(const ShareTensor& a, const ShareTensor& b);
ShareTensor neg(const ShareTensor& a);
/// Multiplies every element by a public ring element.
ShareTensor mul_public(const ShareTensor& a, FieldElement c);
/// Multiplies element i by c[i mod c.size()].
ShareTensor mul_public(const ShareTensor& a, const std::vector<FieldElement>& c);
/// Adds a public constant; only the server's half changes.
ShareTensor add_public(const ShareTensor& a, FieldElement c);
ShareTensor add_public(const ShareTensor& a, const std::vector<FieldElement>& c);
/// Rescales between fractional precisions by a public power of two; going
/// down uses interactive truncation.
ShareTensor rescale(Session& s, const ShareTensor& a, int from_frac, int to_frac, Tag tag = Tag::kTrunc);

/// Sum along the last axis, giving a [rows] tensor.
ShareTensor row_sum(const ShareTensor& a);
/// Repeats a [rows] tensor across `cols` columns.
ShareTensor broadcast_rows(const ShareTensor& a, std::size_t cols);
ShareTensor reshape(ShareTensor a, std::vector<std::size_t> shape);

/// Splits `owner`'s plaintext input into shares over the wire.
ShareTensor share_input(Session& s, int owner, const PlainTensor& x, std::vector<std::size_t> shape);
/// Opens a shared tensor to `to` (or to both when to < 0). Non-recipients get
/// an empty tensor.
PlainTensor reveal(Session& s, const ShareTensor& x, int to);

}  // namespace pti::mpc
