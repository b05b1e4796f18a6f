#include "qdpj/quantize.hpp"

#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>

namespace qdpj {

namespace {

using i128 = __int128;

constexpr std::int64_t kI64Max = std::numeric_limits<std::int64_t>::max();
constexpr std::int64_t kI64Min = std::numeric_limits<std::int64_t>::min();

int bit_length(unsigned __int128 v) {
    int bits = 0;
    while (v != 0) {
        v >>= 1;
        ++bits;
    }
    return bits;
}

i128 floor_div(i128 a, i128 b) {
    i128 q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) {
        --q;
    }
    return q;
}

std::int64_t narrow(i128 v) {
    if (v > kI64Max || v < kI64Min) {
        throw OverflowError("quantized value does not fit in 64 bits");
    }
    return static_cast<std::int64_t>(v);
}

std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
    std::int64_t out = 0;
    if (__builtin_mul_overflow(a, b, &out)) {
        throw OverflowError("quantization level is not representable in 64 bits");
    }
    return out;
}

}  // namespace

QuantizationLevel::QuantizationLevel(std::int64_t numerator, std::int64_t denominator) {
    if (numerator <= 0 || denominator <= 0) {
        throw InvalidArgument("quantization level must be a positive rational");
    }
    const std::int64_t g = std::gcd(numerator, denominator);
    num_ = numerator / g;
    den_ = denominator / g;
}

QuantizationLevel QuantizationLevel::parse(std::string_view text) {
    auto fail = [&]() -> QuantizationLevel {
        throw InvalidArgument("cannot parse quantization level '" + std::string(text) + "'");
    };
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
    if (text.empty()) {
        return fail();
    }

    auto parse_uint = [&](std::string_view digits) -> std::int64_t {
        if (digits.empty()) fail();
        std::int64_t v = 0;
        for (char c : digits) {
            if (!std::isdigit(static_cast<unsigned char>(c))) fail();
            v = checked_mul(v, 10);
            if (__builtin_add_overflow(v, c - '0', &v)) fail();
        }
        return v;
    };

    if (const auto slash = text.find('/'); slash != std::string_view::npos) {
        return QuantizationLevel(parse_uint(text.substr(0, slash)), parse_uint(text.substr(slash + 1)));
    }

    std::string_view mantissa = text;
    int exponent = 0;
    if (const auto e = text.find_first_of("eE"); e != std::string_view::npos) {
        mantissa = text.substr(0, e);
        std::string_view exp_text = text.substr(e + 1);
        bool negative = false;
        if (!exp_text.empty() && (exp_text.front() == '+' || exp_text.front() == '-')) {
            negative = exp_text.front() == '-';
            exp_text.remove_prefix(1);
        }
        const std::int64_t mag = parse_uint(exp_text);
        if (mag > 18) fail();
        exponent = static_cast<int>(negative ? -mag : mag);
    }

    std::string digits;
    int frac_digits = 0;
    bool seen_point = false;
    for (char c : mantissa) {
        if (c == '.') {
            if (seen_point) fail();
            seen_point = true;
        } else {
            digits.push_back(c);
            if (seen_point) ++frac_digits;
        }
    }
    std::int64_t num = parse_uint(digits);
    std::int64_t den = 1;
    exponent -= frac_digits;
    for (; exponent > 0; --exponent) num = checked_mul(num, 10);
    for (; exponent < 0; ++exponent) den = checked_mul(den, 10);
    return QuantizationLevel(num, den);
}

std::string QuantizationLevel::to_string() const {
    if (den_ == 1) {
        return std::to_string(num_);
    }
    std::int64_t p = den_;
    int k = 0;
    while (p % 10 == 0) {
        p /= 10;
        ++k;
    }
    if (p == 1 && num_ < 10) {
        return std::to_string(num_) + "e-" + std::to_string(k);
    }
    return std::to_string(num_) + "/" + std::to_string(den_);
}

std::int64_t quantize_scalar(double x, const QuantizationLevel& level) {
    if (!std::isfinite(x)) {
        throw InvalidArgument("quantize: non-finite input");
    }
    if (x == 0.0) {
        return 0;
    }
    // x = mant * 2^exp exactly, |mant| < 2^53.
    int exp = 0;
    const double frac = std::frexp(x, &exp);
    const auto mant = static_cast<std::int64_t>(std::ldexp(frac, 53));
    exp -= 53;

    const i128 scaled = static_cast<i128>(mant) * level.denominator();  // |scaled| < 2^116
    const i128 num = level.numerator();
    if (exp >= 0) {
        const unsigned __int128 mag = scaled < 0 ? static_cast<unsigned __int128>(-scaled)
                                                 : static_cast<unsigned __int128>(scaled);
        if (bit_length(mag) + exp > 126) {
            throw OverflowError("quantized value does not fit in 64 bits");
        }
        return narrow(floor_div(scaled << exp, num));
    }
    const int shift = -exp;
    if (bit_length(static_cast<unsigned __int128>(num)) + shift > 126) {
        // Divisor exceeds 2^126 > |scaled|, so the quotient lies in (-1, 1).
        return mant < 0 ? -1 : 0;
    }
    return narrow(floor_div(scaled, num << shift));
}

QuantizedVector quantize_floor(const VectorXd& b, const QuantizationLevel& level) {
    IntVector values(b.size());
    for (Eigen::Index j = 0; j < b.size(); ++j) {
        values[j] = quantize_scalar(b[j], level);
    }
    return QuantizedVector{std::move(values), level};
}

double dequantize_scalar(std::int64_t z, const QuantizationLevel& level) {
    if (z == 0) {
        return 0.0;
    }
    const long double approx = static_cast<long double>(z) * static_cast<long double>(level.numerator()) /
                               static_cast<long double>(level.denominator());
    double y = static_cast<double>(approx);
    constexpr double kInf = std::numeric_limits<double>::infinity();
    // Smallest double y with y >= z * delta, i.e. floor(y / delta) >= z.
    while (quantize_scalar(y, level) < z) {
        y = std::nextafter(y, kInf);
    }
    while (true) {
        const double below = std::nextafter(y, -kInf);
        if (quantize_scalar(below, level) < z) {
            break;
        }
        y = below;
    }
    return y;
}

VectorXd dequantize(const IntVector& values, const QuantizationLevel& level) {
    VectorXd out(values.size());
    for (Eigen::Index j = 0; j < values.size(); ++j) {
        out[j] = dequantize_scalar(values[j], level);
    }
    return out;
}

VectorXd dequantize(const QuantizedVector& q) { return dequantize(q.values, q.level); }

VectorXd quantize_to_lattice(const VectorXd& b, const QuantizationLevel& level) {
    return dequantize(quantize_floor(b, level));
}

}  // namespace qdpj
