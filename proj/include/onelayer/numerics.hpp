#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <mpfr.h>

namespace onelayer {

/// Raised when a numeric result cannot be trusted (overflowed exponentials,
/// NaN decisions). Never raised for ordinary rounding.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace onelayer

namespace onelayer::numerics {

enum class Mode { kDouble, kBigFloat };

/// Arithmetic mode for a whole computation. Hardware mode is IEEE binary64;
/// big-float mode is binary floating point with `mantissa_bits` of precision
/// and round-to-nearest-even.
struct PrecisionConfig {
  Mode mode = Mode::kDouble;
  int mantissa_bits = 53;
  bool stable_softmax = true;

  static PrecisionConfig hardware(bool stable_softmax = true);
  static PrecisionConfig bigfloat(int bits, bool stable_softmax = false);

  /// Parses "double" or "bigfloat:N".
  static PrecisionConfig parse(std::string_view text);

  /// 53 in hardware mode, mantissa_bits otherwise.
  int bits() const { return mode == Mode::kDouble ? 53 : mantissa_bits; }
  std::string to_string() const;
  void validate() const;

  friend bool operator==(const PrecisionConfig&, const PrecisionConfig&) = default;
};

/// Owning wrapper around an MPFR number with a fixed precision.
class BigFloat {
 public:
  explicit BigFloat(int bits);
  BigFloat(const BigFloat& other);
  BigFloat(BigFloat&& other) noexcept;
  BigFloat& operator=(const BigFloat& other);
  BigFloat& operator=(BigFloat&& other) noexcept;
  ~BigFloat();

  int bits() const { return static_cast<int>(mpfr_get_prec(value_)); }
  mpfr_ptr get() { return value_; }
  mpfr_srcptr get() const { return value_; }

 private:
  mpfr_t value_;
  bool live_ = false;
};

/// A real number under one PrecisionConfig. Values are immutable; every
/// operation returns a fresh, correctly rounded result. Mixing a hardware
/// value with a big-float value is a logic error.
class Scalar {
 public:
  Scalar() : rep_(0.0) {}

  static Scalar from_double(double v, const PrecisionConfig& cfg);
  static Scalar from_int(long v, const PrecisionConfig& cfg);
  /// Decimal (or "inf"/"nan") text, rounded to the active precision.
  static Scalar parse(std::string_view text, const PrecisionConfig& cfg);
  static Scalar zero(const PrecisionConfig& cfg) { return from_int(0, cfg); }
  static Scalar one(const PrecisionConfig& cfg) { return from_int(1, cfg); }
  /// base^exponent, correctly rounded.
  static Scalar pow_int(long base, long exponent, const PrecisionConfig& cfg);

  bool is_bigfloat() const { return std::holds_alternative<BigFloat>(rep_); }
  int bits() const;

  double to_double() const;
  /// Decimal string that parses back to the identical value at this
  /// precision (shortest form in hardware mode).
  std::string to_string() const;
  /// Re-rounds into another configuration.
  Scalar convert(const PrecisionConfig& cfg) const;

  bool is_finite() const;
  bool is_inf() const;
  bool is_nan() const;
  bool is_zero() const;
  /// -1, 0 or +1; NaN reports 0.
  int sign() const;

  /// Unit in the last place at this value's magnitude.
  Scalar ulp() const;

  Scalar operator-() const;
  friend Scalar operator+(const Scalar& a, const Scalar& b);
  friend Scalar operator-(const Scalar& a, const Scalar& b);
  friend Scalar operator*(const Scalar& a, const Scalar& b);
  friend Scalar operator/(const Scalar& a, const Scalar& b);
  Scalar& operator+=(const Scalar& b) { return *this = *this + b; }
  Scalar& operator-=(const Scalar& b) { return *this = *this - b; }
  Scalar& operator*=(const Scalar& b) { return *this = *this * b; }

  friend bool operator==(const Scalar& a, const Scalar& b);
  friend bool operator<(const Scalar& a, const Scalar& b);
  friend bool operator>(const Scalar& a, const Scalar& b) { return b < a; }
  friend bool operator<=(const Scalar& a, const Scalar& b) { return a < b || a == b; }
  friend bool operator>=(const Scalar& a, const Scalar& b) { return b <= a; }

  friend Scalar exp(const Scalar& x);
  friend Scalar log(const Scalar& x);
  friend Scalar log1p(const Scalar& x);
  friend Scalar abs(const Scalar& x);
  friend Scalar relu(const Scalar& x);
  friend Scalar max(const Scalar& a, const Scalar& b);

 private:
  explicit Scalar(double v) : rep_(v) {}
  explicit Scalar(BigFloat v) : rep_(std::move(v)) {}

  template <typename DoubleOp, typename MpfrOp>
  static Scalar binary(const Scalar& a, const Scalar& b, DoubleOp dop, MpfrOp mop);

  std::variant<double, BigFloat> rep_;
};

using Vector = std::vector<Scalar>;

/// Distance |a - b| measured in ulps of the larger magnitude.
double ulp_distance(const Scalar& a, const Scalar& b);

/// e^x rounded to the active precision. In hardware mode an overflowing
/// result is +inf; callers inspect is_inf() rather than receiving a clamp.
Scalar exp(const Scalar& x);
Scalar log(const Scalar& x);
Scalar log1p(const Scalar& x);
Scalar abs(const Scalar& x);
Scalar relu(const Scalar& x);
Scalar max(const Scalar& a, const Scalar& b);

/// w_i = e^{s_i} / sum_j e^{s_j}. With cfg.stable_softmax the maximum score is
/// subtracted first. Throws std::invalid_argument on an empty or non-finite
/// list, NumericError if an exponential overflows.
Vector softmax_weights(std::span<const Scalar> scores, const PrecisionConfig& cfg);

Vector zeros(std::size_t size, const PrecisionConfig& cfg);
Scalar dot(std::span<const Scalar> a, std::span<const Scalar> b);

/// Dense row-major matrix of Scalars.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Scalar> data;

  static Matrix zeros(std::size_t rows, std::size_t cols, const PrecisionConfig& cfg);
  Scalar& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  const Scalar& at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<const Scalar> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
};

Vector matvec(const Matrix& m, std::span<const Scalar> v);

}  // namespace onelayer::numerics
