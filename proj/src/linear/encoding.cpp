#include <algorithm>
#include <cmath>
#include <string>

#include "pti/error.hpp"
#include "pti/matmul.hpp"

namespace pti::linear {
namespace {

std::size_t pow2_at_least(std::size_t v) {
  std::size_t p = 1;
  while (p < v) p <<= 1;
  return p;
}

}  // namespace

TilePlan plan_tiles(std::size_t m, std::size_t r, std::size_t n, std::size_t poly_degree) {
  if (m == 0 || r == 0 || n == 0) throw ShapeError("plan_tiles: dims must be positive");
  TilePlan plan;
  plan.m = m;
  plan.r = r;
  plan.n = n;
  plan.poly_degree = poly_degree;
  plan.r0 = std::min(pow2_at_least(r), poly_degree);
  plan.n0 = std::min(pow2_at_least(n), poly_degree / plan.r0);
  plan.m0 = std::min(pow2_at_least(m), poly_degree / (plan.r0 * plan.n0));
  return plan;
}

std::vector<std::size_t> TilePlan::output_positions() const {
  std::vector<std::size_t> pos;
  pos.reserve(m0 * n0);
  for (std::size_t k = 0; k < n0; ++k)
    for (std::size_t i = 0; i < m0; ++i) pos.push_back(k * m0 * r0 + i * r0 + r0 - 1);
  std::sort(pos.begin(), pos.end());
  return pos;
}

EncodedOperand encode_matrix_A(const PlainTensor& a, const TilePlan& plan) {
  if (a.rows() > plan.m0 || a.cols() > plan.r0 || plan.m0 * plan.r0 > plan.poly_degree) {
    throw ShapeError("encode_matrix_A: " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     " does not fit the tile");
  }
  EncodedOperand out{OperandRole::kA, he::PlainPoly(plan.poly_degree), 0, 0};
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out.poly.coeffs[i * plan.r0 + plan.r0 - 1 - j] = a.at(i, j);
  return out;
}

EncodedOperand encode_matrix_B(const PlainTensor& b, const TilePlan& plan) {
  if (b.rows() > plan.r0 || b.cols() > plan.n0 || plan.m0 * plan.r0 * plan.n0 > plan.poly_degree) {
    throw ShapeError("encode_matrix_B: " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()) +
                     " does not fit the tile");
  }
  EncodedOperand out{OperandRole::kB, he::PlainPoly(plan.poly_degree), 0, 0};
  for (std::size_t j = 0; j < b.rows(); ++j)
    for (std::size_t k = 0; k < b.cols(); ++k) out.poly.coeffs[k * plan.m0 * plan.r0 + j] = b.at(j, k);
  return out;
}

PlainTensor decode_matrix_C(const he::PlainPoly& c, const TilePlan& plan) {
  PlainTensor out({plan.m0, plan.n0});
  for (std::size_t i = 0; i < plan.m0; ++i)
    for (std::size_t k = 0; k < plan.n0; ++k)
      out.at(i, k) = c.coeffs[k * plan.m0 * plan.r0 + i * plan.r0 + plan.r0 - 1];
  return out;
}

PlainTensor extract_block(const PlainTensor& t, std::size_t row0, std::size_t col0, std::size_t rows,
                          std::size_t cols) {
  PlainTensor out({rows, cols});
  const std::size_t rmax = std::min(rows, t.rows() > row0 ? t.rows() - row0 : 0);
  const std::size_t cmax = std::min(cols, t.cols() > col0 ? t.cols() - col0 : 0);
  for (std::size_t i = 0; i < rmax; ++i)
    for (std::size_t j = 0; j < cmax; ++j) out.at(i, j) = t.at(row0 + i, col0 + j);
  return out;
}

double response_bytes_ratio(const TilePlan& plan, bool compress, std::size_t prime_count) {
  if (!compress) return 1.0;
  const double n = static_cast<double>(plan.poly_degree);
  const double row = 8.0 * static_cast<double>(prime_count);
  const double bitmap = std::ceil(n / 8.0);
  const double kept = static_cast<double>(plan.m0 * plan.n0);
  return (n * row + bitmap + kept * row) / (2.0 * n * row);
}

}  // namespace pti::linear
