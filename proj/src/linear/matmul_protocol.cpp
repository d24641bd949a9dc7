#include "pti/error.hpp"
#include "pti/matmul.hpp"
#include "pti/session.hpp"

namespace pti::linear {

namespace {

void place_block(PlainTensor& dst, const PlainTensor& tile, std::size_t row0, std::size_t col0) {
  for (std::size_t i = 0; i < tile.rows() && row0 + i < dst.rows(); ++i) {
    for (std::size_t k = 0; k < tile.cols() && col0 + k < dst.cols(); ++k) {
      dst.at(row0 + i, col0 + k) = tile.at(i, k);
    }
  }
}

}  // namespace

PlainTensor run_matmul_protocol(mpc::Session& session, const PlainTensor& a_holder_matrix,
                                const PlainTensor& b_holder_matrix, std::size_t m, std::size_t r,
                                std::size_t n, bool compress_response) {
  using mpc::Tag;
  if (m == 0 || r == 0 || n == 0) throw ShapeError("matmul dimensions must be positive");
  mpc::Session::Scope scope(session, mpc::Category::kMatMul);
  const auto& ctx = session.he();
  const TilePlan plan = plan_tiles(m, r, n, ctx.n());
  const auto positions = plan.output_positions();
  PlainTensor share({m, n});

  if (session.is_client()) {
    const PlainTensor& b = b_holder_matrix;
    if (b.rows() != r || b.cols() != n) throw ShapeError("matmul: client operand must be r x n");
    const auto& sk = session.secret_key();
    for (std::size_t kt = 0; kt < plan.n_tiles(); ++kt) {
      for (std::size_t jt = 0; jt < plan.r_tiles(); ++jt) {
        const auto enc = encode_matrix_B(extract_block(b, jt * plan.r0, kt * plan.n0, plan.r0, plan.n0), plan);
        const auto ct = he::encrypt(ctx, enc.poly, sk, session.he_prg());
        session.send(Tag::kMatmul, he::serialize(ctx, ct));
      }
    }
    for (std::size_t it = 0; it < plan.m_tiles(); ++it) {
      for (std::size_t kt = 0; kt < plan.n_tiles(); ++kt) {
        const auto ct = he::deserialize(ctx, session.recv(Tag::kMatmul));
        const auto tile = decode_matrix_C(he::decrypt(ctx, ct, sk), plan);
        place_block(share, tile, it * plan.m0, kt * plan.n0);
      }
    }
    return share;
  }

  const PlainTensor& a = a_holder_matrix;
  if (a.rows() != m || a.cols() != r) throw ShapeError("matmul: server operand must be m x r");
  std::vector<he::RlweCiphertext> cts;
  cts.reserve(plan.n_tiles() * plan.r_tiles());
  for (std::size_t i = 0; i < plan.n_tiles() * plan.r_tiles(); ++i) {
    auto ct = he::deserialize(ctx, session.recv(Tag::kMatmul));
    if (ct.compressed()) throw DesyncError("matmul: client ciphertext must not be compressed");
    he::to_ntt(ctx, ct);
    cts.push_back(std::move(ct));
  }
  const auto& plain = ctx.plain();
  for (std::size_t it = 0; it < plan.m_tiles(); ++it) {
    std::vector<he::PlainPoly> a_polys;
    for (std::size_t jt = 0; jt < plan.r_tiles(); ++jt) {
      a_polys.push_back(encode_matrix_A(extract_block(a, it * plan.m0, jt * plan.r0, plan.m0, plan.r0), plan).poly);
    }
    for (std::size_t kt = 0; kt < plan.n_tiles(); ++kt) {
      he::RlweCiphertext acc;
      for (std::size_t jt = 0; jt < plan.r_tiles(); ++jt) {
        auto prod = he::he_mul_plain(ctx, cts[kt * plan.r_tiles() + jt], a_polys[jt]);
        acc = jt == 0 ? std::move(prod) : he::he_add(ctx, acc, prod);
      }
      he::from_ntt(ctx, acc);
      he::PlainPoly mask(ctx.n());
      for (auto& c : mask.coeffs) c = session.prg().bits(plain.ell);
      auto masked = he::he_sub_plain(ctx, acc, mask);
      if (compress_response) he::compress(ctx, masked, positions);
      session.send(Tag::kMatmul, he::serialize(ctx, masked));
      place_block(share, decode_matrix_C(mask, plan), it * plan.m0, kt * plan.n0);
    }
  }
  return share;
}

}  // namespace pti::linear
