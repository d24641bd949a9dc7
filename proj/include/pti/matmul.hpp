#pragma once

#include <cstddef>
#include <vector>

#include "pti/bfv.hpp"
#include "pti/fixed_point.hpp"

namespace pti::mpc {
class Session;
struct ShareTensor;
}  // namespace pti::mpc

namespace pti::linear {

/// Full product dims (m x r) * (r x n) and the power-of-two tile dims used
/// to pack one tile product into a single polynomial (m0 * r0 * n0 <= N).
struct TilePlan {
  std::size_t m = 0, r = 0, n = 0;
  std::size_t m0 = 1, r0 = 1, n0 = 1;
  std::size_t poly_degree = 0;

  std::size_t m_tiles() const { return (m + m0 - 1) / m0; }
  std::size_t r_tiles() const { return (r + r0 - 1) / r0; }
  std::size_t n_tiles() const { return (n + n0 - 1) / n0; }
  std::size_t tile_count() const { return m_tiles() * r_tiles() * n_tiles(); }
  /// Coefficient indices of the product polynomial that carry C entries.
  std::vector<std::size_t> output_positions() const;
};

/// Tile dims fill N when the matrices allow it, growing r0 first, then n0,
/// then m0.
TilePlan plan_tiles(std::size_t m, std::size_t r, std::size_t n, std::size_t poly_degree);

enum class OperandRole { kA, kB };

struct EncodedOperand {
  OperandRole role = OperandRole::kA;
  he::PlainPoly poly;
  std::size_t tile_row = 0;
  std::size_t tile_col = 0;
};

/// a_ij lands on exponent i*r0 + r0 - 1 - j. `a` may be smaller than the tile
/// (edge tiles), the rest is zero.
EncodedOperand encode_matrix_A(const PlainTensor& a, const TilePlan& plan);
/// b_jk lands on exponent k*m0*r0 + j.
EncodedOperand encode_matrix_B(const PlainTensor& b, const TilePlan& plan);
/// C_ik read from exponent k*m0*r0 + i*r0 + r0 - 1; returns an m0 x n0 tile.
PlainTensor decode_matrix_C(const he::PlainPoly& c, const TilePlan& plan);

/// Zero-padded copy of the rows x cols block starting at (row0, col0).
PlainTensor extract_block(const PlainTensor& t, std::size_t row0, std::size_t col0, std::size_t rows,
                          std::size_t cols);

/// Predicted compressed / uncompressed size of one response ciphertext.
double response_bytes_ratio(const TilePlan& plan, bool compress, std::size_t prime_count = 3);

/// Party holding the plaintext left operand A (the HE evaluator, server side)
/// and party holding B plus the secret key (client side) jointly obtain
/// additive shares of A*B mod t. Each party passes only its own matrix; the
/// other argument is ignored. Dims (m, r, n) are public.
PlainTensor run_matmul_protocol(mpc::Session& session, const PlainTensor& a_holder_matrix,
                                const PlainTensor& b_holder_matrix, std::size_t m, std::size_t r,
                                std::size_t n, bool compress);

}  // namespace pti::linear
