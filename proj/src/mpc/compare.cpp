#include <algorithm>

#include "bits.hpp"
#include "pti/error.hpp"
#include "pti/ot.hpp"
#include "pti/primitives.hpp"
#include "pti/session.hpp"

namespace pti::mpc {

namespace {

constexpr int kBlockBits = 4;
constexpr std::size_t kBlockValues = 1u << kBlockBits;
constexpr std::uint64_t kLeafDomain = 0x6d696c6c696f6e;

const AesHash& leaf_hash() {
  static const AesHash h;
  return h;
}

/// XOR-shared bits with a batch of AND triples.
struct BitTriples {
  std::vector<std::uint8_t> a, b, c;
  std::size_t next = 0;
};

/// Evaluates z = x AND y on XOR shares for every pair, in one round.
std::vector<std::uint8_t> and_gates(Session& s, Tag tag, BitTriples& t, std::span<const std::uint8_t> x,
                                    std::span<const std::uint8_t> y) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  if (t.next + n > t.a.size()) throw Error(ErrorKind::kInternal, "comparison ran out of AND triples");
  BitWriter w;
  for (std::size_t i = 0; i < n; ++i) w.put(x[i] ^ t.a[t.next + i], 1);
  for (std::size_t i = 0; i < n; ++i) w.put(y[i] ^ t.b[t.next + i], 1);
  s.send(tag, w.bytes());
  const auto peer = s.recv(tag);
  if (peer.size() != (2 * n + 7) / 8) throw DesyncError("AND gate opening has the wrong size");
  BitReader r(peer);
  std::vector<std::uint8_t> d(n), e(n), z(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = static_cast<std::uint8_t>(r.get(1) ^ x[i] ^ t.a[t.next + i]);
  for (std::size_t i = 0; i < n; ++i) e[i] = static_cast<std::uint8_t>(r.get(1) ^ y[i] ^ t.b[t.next + i]);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = t.next + i;
    std::uint8_t v = t.c[k] ^ (d[i] & t.b[k]) ^ (e[i] & t.a[k]);
    if (s.party() == 0) v ^= d[i] & e[i];
    z[i] = v;
  }
  t.next += n;
  return z;
}

std::size_t and_count(std::size_t leaves) {
  std::size_t total = 0;
  for (std::size_t c = leaves; c > 1; c = c / 2 + c % 2) total += (c / 2) * (c == 2 ? 1 : 2);
  return total;
}

/// Shares of [a > b] where the client holds a and the server holds b, both
/// below 2^bits. Block-wise: 1-of-16 OT yields shares of (gt, eq) per 4-bit
/// block, and a log-depth tree of AND gates merges blocks from the top down.
std::vector<std::uint8_t> millionaires(Session& s, Tag tag, std::span<const std::uint64_t> mine, int bits) {
  const std::size_t n = mine.size();
  const std::size_t blocks = static_cast<std::size_t>((bits + kBlockBits - 1) / kBlockBits);
  const std::size_t leaf_ots = n * blocks * kBlockBits;
  const std::size_t triples = n * and_count(blocks);
  const bool client = s.party() == 0;

  auto block_of = [&](std::size_t e, std::size_t k) { return (mine[e] >> (k * kBlockBits)) & (kBlockValues - 1); };

  // Receiver choices: the server's block bits, then random bits for triples.
  std::vector<std::uint8_t> choices;
  if (client) {
    choices.resize(triples);
  } else {
    choices.resize(leaf_ots + triples);
    for (std::size_t e = 0; e < n; ++e) {
      for (std::size_t k = 0; k < blocks; ++k) {
        for (int j = 0; j < kBlockBits; ++j) {
          choices[(e * blocks + k) * kBlockBits + static_cast<std::size_t>(j)] =
              static_cast<std::uint8_t>((block_of(e, k) >> j) & 1);
        }
      }
    }
  }
  for (std::size_t i = choices.size() - triples; i < choices.size(); ++i) {
    choices[i] = static_cast<std::uint8_t>(s.prg().next_u64() & 1);
  }
  const auto rkeys = s.ot_receiver().receive(s, tag, choices);
  const auto skeys = s.ot_sender().send(s, tag, client ? leaf_ots + triples : triples);

  BitTriples bt;
  bt.a.resize(triples);
  bt.b.resize(triples);
  bt.c.resize(triples);
  const std::size_t soff = client ? leaf_ots : 0;
  const std::size_t roff = client ? 0 : leaf_ots;
  for (std::size_t i = 0; i < triples; ++i) {
    const auto x0 = static_cast<std::uint8_t>(skeys[soff + i][0].lo & 1);
    const auto x1 = static_cast<std::uint8_t>(skeys[soff + i][1].lo & 1);
    bt.a[i] = x0 ^ x1;
    bt.b[i] = choices[roff + i];
    bt.c[i] = static_cast<std::uint8_t>((bt.a[i] & bt.b[i]) ^ x0 ^ (rkeys[roff + i].lo & 1));
  }

  const std::size_t leaves = n * blocks;
  std::vector<std::uint8_t> gt(leaves), eq(leaves);
  if (client) {
    std::vector<Block> in(leaves * kBlockBits * kBlockValues), out(in.size());
    for (std::size_t l = 0; l < leaves; ++l) {
      for (int j = 0; j < kBlockBits; ++j) {
        const auto& pair = skeys[l * kBlockBits + static_cast<std::size_t>(j)];
        for (std::size_t u = 0; u < kBlockValues; ++u) {
          const Block key = pair[(u >> j) & 1];
          in[(l * kBlockBits + static_cast<std::size_t>(j)) * kBlockValues + u] = key ^ Block{u, kLeafDomain};
        }
      }
    }
    leaf_hash().hash_untweaked(in, out);
    BitWriter w;
    for (std::size_t e = 0; e < n; ++e) {
      for (std::size_t k = 0; k < blocks; ++k) {
        const std::size_t l = e * blocks + k;
        const std::uint64_t a = block_of(e, k);
        gt[l] = static_cast<std::uint8_t>(s.prg().next_u64() & 1);
        eq[l] = static_cast<std::uint8_t>(s.prg().next_u64() & 1);
        for (std::size_t u = 0; u < kBlockValues; ++u) {
          std::uint64_t mask = 0;
          for (int j = 0; j < kBlockBits; ++j) mask ^= out[(l * kBlockBits + static_cast<std::size_t>(j)) * kBlockValues + u].lo;
          const std::uint64_t msg = (gt[l] ^ (a > u ? 1u : 0u)) | ((eq[l] ^ (a == u ? 1u : 0u)) << 1);
          w.put((msg ^ mask) & 3, 2);
        }
      }
    }
    s.send(tag, w.bytes());
  } else {
    const auto table = s.recv(tag);
    if (table.size() != (leaves * kBlockValues * 2 + 7) / 8) throw DesyncError("comparison table has the wrong size");
    std::vector<Block> in(leaves * kBlockBits), out(in.size());
    for (std::size_t l = 0; l < leaves; ++l) {
      const std::uint64_t b = block_of(l / blocks, l % blocks);
      for (int j = 0; j < kBlockBits; ++j) {
        const std::size_t idx = l * kBlockBits + static_cast<std::size_t>(j);
        in[idx] = rkeys[idx] ^ Block{b, kLeafDomain};
      }
    }
    leaf_hash().hash_untweaked(in, out);
    BitReader r(table);
    for (std::size_t l = 0; l < leaves; ++l) {
      const std::uint64_t b = block_of(l / blocks, l % blocks);
      std::uint64_t mask = 0;
      for (int j = 0; j < kBlockBits; ++j) mask ^= out[l * kBlockBits + static_cast<std::size_t>(j)].lo;
      std::uint64_t msg = 0;
      for (std::size_t u = 0; u < kBlockValues; ++u) {
        const std::uint64_t v = r.get(2);
        if (u == b) msg = v;
      }
      msg ^= mask;
      gt[l] = static_cast<std::uint8_t>(msg & 1);
      eq[l] = static_cast<std::uint8_t>((msg >> 1) & 1);
    }
  }

  // Merge adjacent blocks (low, high) until one node per element remains.
  for (std::size_t width = blocks; width > 1;) {
    const std::size_t pairs = width / 2;
    const bool last = width == 2;
    std::vector<std::uint8_t> xs, ys;
    for (std::size_t e = 0; e < n; ++e) {
      for (std::size_t p = 0; p < pairs; ++p) {
        const std::size_t lo = e * width + 2 * p, hi = lo + 1;
        xs.push_back(eq[hi]);
        ys.push_back(gt[lo]);
        if (!last) {
          xs.push_back(eq[hi]);
          ys.push_back(eq[lo]);
        }
      }
    }
    const auto z = and_gates(s, tag, bt, xs, ys);
    const std::size_t next_width = pairs + width % 2;
    std::vector<std::uint8_t> ngt(n * next_width), neq(n * next_width);
    std::size_t zi = 0;
    for (std::size_t e = 0; e < n; ++e) {
      for (std::size_t p = 0; p < pairs; ++p) {
        const std::size_t hi = e * width + 2 * p + 1;
        ngt[e * next_width + p] = gt[hi] ^ z[zi++];
        neq[e * next_width + p] = last ? 0 : z[zi++];
      }
      if (width % 2) {
        ngt[e * next_width + pairs] = gt[e * width + width - 1];
        neq[e * next_width + pairs] = eq[e * width + width - 1];
      }
    }
    gt = std::move(ngt);
    eq = std::move(neq);
    width = next_width;
  }
  return gt;
}

/// Boolean-to-arithmetic conversion: d0 + d1 - 2·d0·d1 via one correlated OT.
ShareTensor bits_to_arith(Session& s, Tag tag, std::span<const std::uint8_t> bits, std::vector<std::size_t> shape) {
  const auto& p = s.fp();
  const std::size_t n = bits.size();
  std::vector<std::uint8_t> widths(n, static_cast<std::uint8_t>(p.ell));
  const std::span<const std::uint8_t> none;
  CotResult cot;
  if (s.party() == 0) {
    std::vector<std::uint64_t> deltas(bits.begin(), bits.end());
    cot = cot_exchange(s, tag, deltas, widths, none, none);
  } else {
    cot = cot_exchange(s, tag, {}, none, bits, widths);
  }
  const auto& prod = s.party() == 0 ? cot.as_sender : cot.as_receiver;
  ShareTensor out(PlainTensor(std::move(shape)), s.party(), p);
  for (std::size_t i = 0; i < n; ++i) out[i] = p.reduce(bits[i] - 2 * prod[i]);
  return out;
}

}  // namespace

ShareTensor p_drelu(Session& s, const ShareTensor& x, Tag tag) {
  const auto& p = s.fp();
  if (s.backend() == Backend::kIdeal) {
    return ideal_eval(s, tag, {&x}, x.shape(), [&](const std::vector<PlainTensor>& in) {
      std::vector<FieldElement> out(in[0].size());
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = p.to_signed(in[0].data[i]) >= 0 ? 1 : 0;
      return out;
    });
  }
  const std::size_t n = x.size();
  if (n == 0) return x;
  const int low = p.ell - 1;
  const std::uint64_t low_mask = (std::uint64_t{1} << low) - 1;

  // MSB(x) = msb0 ^ msb1 ^ carry, carry = [x0_low > (2^low - 1) - x1_low].
  std::vector<std::uint64_t> cmp(n);
  std::vector<std::uint8_t> msb(n);
  for (std::size_t i = 0; i < n; ++i) {
    msb[i] = static_cast<std::uint8_t>((x[i] >> low) & 1);
    cmp[i] = s.party() == 0 ? (x[i] & low_mask) : low_mask - (x[i] & low_mask);
  }
  const auto carry = millionaires(s, tag, cmp, low);
  std::vector<std::uint8_t> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    d[i] = msb[i] ^ carry[i];
    if (s.party() == 0) d[i] ^= 1;
  }
  return bits_to_arith(s, tag, d, x.shape());
}

ShareTensor p_relu(Session& s, const ShareTensor& x, Tag tag) {
  if (s.backend() == Backend::kIdeal) {
    const auto& p = s.fp();
    return ideal_eval(s, tag, {&x}, x.shape(), [&](const std::vector<PlainTensor>& in) {
      std::vector<FieldElement> out(in[0].size());
      for (std::size_t i = 0; i < out.size(); ++i) out[i] = p.to_signed(in[0].data[i]) >= 0 ? in[0].data[i] : 0;
      return out;
    });
  }
  return p_elemul(s, p_drelu(s, x, tag), x);
}

ShareTensor p_max(Session& s, const ShareTensor& x) {
  const std::size_t cols = x.shape().empty() ? 0 : x.shape().back();
  if (x.size() == 0 || cols == 0) throw ShapeError("max of an empty vector");
  const std::size_t rows = x.size() / cols;
  const auto& p = s.fp();
  if (s.backend() == Backend::kIdeal) {
    return ideal_eval(s, Tag::kMax, {&x}, {rows}, [&](const std::vector<PlainTensor>& in) {
      std::vector<FieldElement> out(rows);
      for (std::size_t r = 0; r < rows; ++r) {
        std::int64_t best = p.to_signed(in[0].data[r * cols]);
        for (std::size_t c = 1; c < cols; ++c) best = std::max(best, p.to_signed(in[0].data[r * cols + c]));
        out[r] = p.from_signed(best);
      }
      return out;
    });
  }
  ShareTensor cur = reshape(x, {rows, cols});
  for (std::size_t width = cols; width > 1;) {
    const std::size_t pairs = width / 2;
    ShareTensor a = zeros(s, {rows, pairs}), b = zeros(s, {rows, pairs});
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t k = 0; k < pairs; ++k) {
        a[r * pairs + k] = cur[r * width + 2 * k];
        b[r * pairs + k] = cur[r * width + 2 * k + 1];
      }
    }
    const ShareTensor m = add(b, p_relu(s, sub(a, b), Tag::kMax));
    const std::size_t next = pairs + width % 2;
    ShareTensor merged = zeros(s, {rows, next});
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t k = 0; k < pairs; ++k) merged[r * next + k] = m[r * pairs + k];
      if (width % 2) merged[r * next + pairs] = cur[r * width + width - 1];
    }
    cur = std::move(merged);
    width = next;
  }
  return reshape(cur, {rows});
}

}  // namespace pti::mpc
