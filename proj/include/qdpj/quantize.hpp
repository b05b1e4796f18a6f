#ifndef QDPJ_QUANTIZE_HPP_
#define QDPJ_QUANTIZE_HPP_

#include <cstdint>
#include <string>
#include <string_view>

#include "qdpj/types.hpp"

namespace qdpj {

/// Quantization step held as an exact positive rational numerator/denominator.
class QuantizationLevel {
 public:
    /// Reduces the fraction; throws InvalidArgument unless both parts are positive.
    QuantizationLevel(std::int64_t numerator, std::int64_t denominator);

    /// Accepts "0.001", "1e-3", "2.5E+1", "1/1000", "1".
    static QuantizationLevel parse(std::string_view text);

    std::int64_t numerator() const { return num_; }
    std::int64_t denominator() const { return den_; }
    double value() const { return static_cast<double>(num_) / static_cast<double>(den_); }

    /// Shortest text that parse() maps back to the same rational.
    std::string to_string() const;

    friend bool operator==(const QuantizationLevel&, const QuantizationLevel&) = default;

 private:
    std::int64_t num_;
    std::int64_t den_;
};

struct QuantizedVector {
    IntVector values;
    QuantizationLevel level;
};

/// floor(x / delta) computed exactly for a finite double x.
/// Throws InvalidArgument on non-finite input and OverflowError when the
/// result does not fit in 64 bits.
std::int64_t quantize_scalar(double x, const QuantizationLevel& level);

/// Element-wise mid-rise floor quantizer: out_j = floor(b_j / delta), so that
/// 0 <= b_j - delta * out_j < delta.
QuantizedVector quantize_floor(const VectorXd& b, const QuantizationLevel& level);

/// Lattice value z * delta, rounded upward to the nearest double so that
/// quantize_scalar(dequantize_scalar(z)) == z.
double dequantize_scalar(std::int64_t z, const QuantizationLevel& level);

VectorXd dequantize(const QuantizedVector& q);
VectorXd dequantize(const IntVector& values, const QuantizationLevel& level);

/// Shorthand for dequantize(quantize_floor(b)).
VectorXd quantize_to_lattice(const VectorXd& b, const QuantizationLevel& level);

}  // namespace qdpj

#endif  // QDPJ_QUANTIZE_HPP_
