#include "pti/fixed_point.hpp"

#include <cmath>
#include <sstream>

#include "pti/error.hpp"

namespace pti {

FixedPointParams FixedPointParams::make(int ell, int frac_bits) {
  if (ell < 16 || ell > 62) {
    throw ConfigError("ring bit-length must lie in [16, 62], got " + std::to_string(ell));
  }
  if (frac_bits < 1 || ell - 2 * frac_bits < 8) {
    std::ostringstream os;
    os << "fixed-point params need ell - 2f >= 8 (ell=" << ell << ", f=" << frac_bits << ")";
    throw ConfigError(os.str());
  }
  return FixedPointParams{ell, frac_bits};
}

double FixedPointParams::headroom() const {
  return std::ldexp(1.0, ell - 2 * frac_bits);
}

FieldElement encode_fixed(double x, const FixedPointParams& params) {
  const double bound = std::ldexp(1.0, params.ell - params.frac_bits - 1);
  if (!(std::fabs(x) < bound)) {
    std::ostringstream os;
    os << "value " << x << " outside encodable range |x| < " << bound;
    throw RangeError(os.str());
  }
  const auto scaled = static_cast<std::int64_t>(std::floor(std::ldexp(x, params.frac_bits)));
  return params.from_signed(scaled);
}

double decode_fixed(FieldElement x, const FixedPointParams& params) {
  return std::ldexp(static_cast<double>(params.to_signed(x)), -params.frac_bits);
}

FieldElement truncate_plain(FieldElement x, int shift, const FixedPointParams& params) {
  return params.from_signed(params.to_signed(x) >> shift);
}

FieldElement plain_fixed_mul(FieldElement a, FieldElement b, const FixedPointParams& params) {
  return truncate_plain(params.mul(a, b), params.frac_bits, params);
}

FieldElement encode_round(double x, int frac_bits, const FixedPointParams& params) {
  return params.from_signed(static_cast<std::int64_t>(std::llround(std::ldexp(x, frac_bits))));
}

PlainTensor::PlainTensor(std::vector<std::size_t> shape_in)
    : shape(std::move(shape_in)), data(count(shape), 0) {}

PlainTensor::PlainTensor(std::vector<std::size_t> shape_in, std::vector<FieldElement> data_in)
    : shape(std::move(shape_in)), data(std::move(data_in)) {
  if (data.size() != count(shape)) {
    throw ShapeError("tensor data length " + std::to_string(data.size()) +
                     " does not match shape product " + std::to_string(count(shape)));
  }
}

std::size_t PlainTensor::count(std::span<const std::size_t> shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

PlainTensor encode_tensor(std::vector<std::size_t> shape, std::span<const double> values,
                          const FixedPointParams& params) {
  PlainTensor out(std::move(shape));
  if (out.size() != values.size()) throw ShapeError("encode_tensor: value count mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) out.data[i] = encode_fixed(values[i], params);
  return out;
}

std::vector<double> decode_tensor(const PlainTensor& t, const FixedPointParams& params) {
  std::vector<double> out(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = decode_fixed(t.data[i], params);
  return out;
}

PlainTensor plain_matmul(const PlainTensor& a, const PlainTensor& b, const FixedPointParams& params) {
  if (a.shape.size() != 2 || b.shape.size() != 2 || a.cols() != b.rows()) {
    throw ShapeError("plain_matmul: inner dimensions disagree");
  }
  const std::size_t m = a.rows(), r = a.cols(), n = b.cols();
  PlainTensor c({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < r; ++j) {
      const FieldElement aij = a.data[i * r + j];
      if (aij == 0) continue;
      const FieldElement* brow = &b.data[j * n];
      FieldElement* crow = &c.data[i * n];
      for (std::size_t k = 0; k < n; ++k) crow[k] += aij * brow[k];
    }
  }
  for (auto& v : c.data) v = params.reduce(v);
  return c;
}

PlainTensor transpose(const PlainTensor& a) {
  const std::size_t m = a.rows(), n = a.cols();
  PlainTensor out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.data[j * m + i] = a.data[i * n + j];
  return out;
}

}  // namespace pti
