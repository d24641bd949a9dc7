#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace pti {

/// An element of Z_t, stored in [0, t).
using FieldElement = std::uint64_t;

/// Fixed-point encoding parameters. The field modulus is t = 2^ell and reals
/// carry `frac_bits` fractional bits.
struct FixedPointParams {
  int ell = 41;
  int frac_bits = 13;

  /// Validating constructor; requires ell - 2f >= 8 and ell <= 62.
  static FixedPointParams make(int ell, int frac_bits);

  std::uint64_t modulus() const { return std::uint64_t{1} << ell; }
  std::uint64_t mask() const { return modulus() - 1; }
  /// Largest decoded magnitude an intermediate may reach (t / 2^{2f}).
  double headroom() const;

  FieldElement reduce(std::uint64_t v) const { return v & mask(); }
  FieldElement from_signed(std::int64_t v) const {
    return static_cast<std::uint64_t>(v) & mask();
  }
  std::int64_t to_signed(FieldElement v) const {
    const std::uint64_t half = std::uint64_t{1} << (ell - 1);
    return v >= half ? static_cast<std::int64_t>(v) - static_cast<std::int64_t>(modulus())
                     : static_cast<std::int64_t>(v);
  }
  FieldElement add(FieldElement a, FieldElement b) const { return (a + b) & mask(); }
  FieldElement sub(FieldElement a, FieldElement b) const { return (a - b) & mask(); }
  FieldElement neg(FieldElement a) const { return (0 - a) & mask(); }
  FieldElement mul(FieldElement a, FieldElement b) const { return (a * b) & mask(); }

  bool operator==(const FixedPointParams&) const = default;
};

/// floor(x * 2^f) embedded into Z_t. Throws RangeError when |x| >= t/2^{f+1}.
FieldElement encode_fixed(double x, const FixedPointParams& params);

/// Signed interpretation divided by 2^f.
double decode_fixed(FieldElement x, const FixedPointParams& params);

/// Arithmetic right shift of the signed interpretation (rounds toward -inf).
FieldElement truncate_plain(FieldElement x, int shift, const FixedPointParams& params);

/// Fixed-point product: truncate_f(a * b mod t).
FieldElement plain_fixed_mul(FieldElement a, FieldElement b, const FixedPointParams& params);

/// Round-to-nearest encoding of a public constant, used for scalars such as
/// floor(0.044715 * 2^f] that the protocols multiply shares by.
FieldElement encode_round(double x, int frac_bits, const FixedPointParams& params);

/// Row-major tensor of field elements.
struct PlainTensor {
  std::vector<std::size_t> shape;
  std::vector<FieldElement> data;

  PlainTensor() = default;
  explicit PlainTensor(std::vector<std::size_t> shape_in);
  PlainTensor(std::vector<std::size_t> shape_in, std::vector<FieldElement> data_in);

  static std::size_t count(std::span<const std::size_t> shape);
  std::size_t size() const { return data.size(); }
  std::size_t rows() const { return shape.empty() ? 0 : shape.front(); }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape.back(); }

  FieldElement& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  FieldElement at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  bool operator==(const PlainTensor&) const = default;
};

PlainTensor encode_tensor(std::vector<std::size_t> shape, std::span<const double> values,
                          const FixedPointParams& params);
std::vector<double> decode_tensor(const PlainTensor& t, const FixedPointParams& params);

/// Exact product of an m x r and an r x n matrix over Z_t.
PlainTensor plain_matmul(const PlainTensor& a, const PlainTensor& b, const FixedPointParams& params);
PlainTensor transpose(const PlainTensor& a);

}  // namespace pti
