#include "onelayer/numerics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <memory>

namespace onelayer::numerics {

namespace {

constexpr mpfr_rnd_t kRound = MPFR_RNDN;

[[noreturn]] void mixed_modes() {
  throw std::logic_error("arithmetic mixes hardware and big-float scalars");
}

}  // namespace

// ---------------------------------------------------------------------------
// PrecisionConfig

PrecisionConfig PrecisionConfig::hardware(bool stable_softmax) {
  return {Mode::kDouble, 53, stable_softmax};
}

PrecisionConfig PrecisionConfig::bigfloat(int bits, bool stable_softmax) {
  PrecisionConfig cfg{Mode::kBigFloat, bits, stable_softmax};
  cfg.validate();
  return cfg;
}

PrecisionConfig PrecisionConfig::parse(std::string_view text) {
  if (text == "double") return hardware();
  constexpr std::string_view kPrefix = "bigfloat:";
  if (text.starts_with(kPrefix)) {
    auto digits = text.substr(kPrefix.size());
    int bits = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), bits);
    if (ec == std::errc{} && ptr == digits.data() + digits.size()) return bigfloat(bits);
  }
  throw std::invalid_argument("precision must be 'double' or 'bigfloat:N', got '" +
                              std::string(text) + "'");
}

std::string PrecisionConfig::to_string() const {
  return mode == Mode::kDouble ? "double" : "bigfloat:" + std::to_string(mantissa_bits);
}

void PrecisionConfig::validate() const {
  if (mode == Mode::kBigFloat &&
      (mantissa_bits < 2 || static_cast<long>(mantissa_bits) > static_cast<long>(MPFR_PREC_MAX))) {
    throw std::invalid_argument("big-float mantissa_bits must be >= 2");
  }
}

// ---------------------------------------------------------------------------
// BigFloat

BigFloat::BigFloat(int bits) {
  mpfr_init2(value_, bits);
  mpfr_set_zero(value_, 1);
  live_ = true;
}

BigFloat::BigFloat(const BigFloat& other) {
  mpfr_init2(value_, mpfr_get_prec(other.value_));
  mpfr_set(value_, other.value_, kRound);
  live_ = true;
}

BigFloat::BigFloat(BigFloat&& other) noexcept {
  // Steal the limbs; the moved-from object keeps no storage.
  *value_ = *other.value_;
  live_ = other.live_;
  other.live_ = false;
}

BigFloat& BigFloat::operator=(const BigFloat& other) {
  if (this != &other) {
    if (!live_) {
      mpfr_init2(value_, mpfr_get_prec(other.value_));
      live_ = true;
    }
    mpfr_set_prec(value_, mpfr_get_prec(other.value_));
    mpfr_set(value_, other.value_, kRound);
  }
  return *this;
}

BigFloat& BigFloat::operator=(BigFloat&& other) noexcept {
  if (this != &other) {
    std::swap(*value_, *other.value_);
    std::swap(live_, other.live_);
  }
  return *this;
}

BigFloat::~BigFloat() {
  if (live_) mpfr_clear(value_);
}

// ---------------------------------------------------------------------------
// Scalar construction and inspection

Scalar Scalar::from_double(double v, const PrecisionConfig& cfg) {
  if (cfg.mode == Mode::kDouble) return Scalar(v);
  BigFloat b(cfg.mantissa_bits);
  mpfr_set_d(b.get(), v, kRound);
  return Scalar(std::move(b));
}

Scalar Scalar::from_int(long v, const PrecisionConfig& cfg) {
  if (cfg.mode == Mode::kDouble) return Scalar(static_cast<double>(v));
  BigFloat b(cfg.mantissa_bits);
  mpfr_set_si(b.get(), v, kRound);
  return Scalar(std::move(b));
}

Scalar Scalar::parse(std::string_view text, const PrecisionConfig& cfg) {
  std::string owned(text);
  if (cfg.mode == Mode::kDouble) {
    double v = 0.0;
    const char* begin = owned.data();
    if (!owned.empty() && owned.front() == '+') ++begin;
    auto [ptr, ec] = std::from_chars(begin, owned.data() + owned.size(), v);
    if (ec == std::errc::result_out_of_range) {
      // from_chars leaves v untouched on range errors; fall back to strtod
      // which yields the correctly signed inf or zero.
      v = std::strtod(owned.c_str(), nullptr);
    } else if (ec != std::errc{} || ptr != owned.data() + owned.size()) {
      throw std::invalid_argument("not a number: '" + owned + "'");
    }
    return Scalar(v);
  }
  BigFloat b(cfg.mantissa_bits);
  char* end = nullptr;
  mpfr_strtofr(b.get(), owned.c_str(), &end, 10, kRound);
  if (owned.empty() || end != owned.c_str() + owned.size()) {
    throw std::invalid_argument("not a number: '" + owned + "'");
  }
  return Scalar(std::move(b));
}

Scalar Scalar::pow_int(long base, long exponent, const PrecisionConfig& cfg) {
  if (cfg.mode == Mode::kDouble) {
    // Route through MPFR so the double result is correctly rounded, not
    // whatever libm's pow happens to return.
    BigFloat b(53);
    mpfr_set_si(b.get(), base, kRound);
    mpfr_pow_si(b.get(), b.get(), exponent, kRound);
    return Scalar(mpfr_get_d(b.get(), kRound));
  }
  BigFloat b(cfg.mantissa_bits);
  mpfr_set_si(b.get(), base, kRound);
  mpfr_pow_si(b.get(), b.get(), exponent, kRound);
  return Scalar(std::move(b));
}

int Scalar::bits() const {
  if (const auto* b = std::get_if<BigFloat>(&rep_)) return b->bits();
  return 53;
}

double Scalar::to_double() const {
  if (const auto* b = std::get_if<BigFloat>(&rep_)) return mpfr_get_d(b->get(), kRound);
  return std::get<double>(rep_);
}

std::string Scalar::to_string() const {
  if (const auto* d = std::get_if<double>(&rep_)) {
    if (std::isnan(*d)) return "nan";
    if (std::isinf(*d)) return *d > 0 ? "inf" : "-inf";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, *d);
    return std::string(buf, ptr);
  }
  const auto& b = std::get<BigFloat>(rep_);
  if (mpfr_nan_p(b.get())) return "nan";
  if (mpfr_inf_p(b.get())) return mpfr_sgn(b.get()) > 0 ? "inf" : "-inf";
  if (mpfr_zero_p(b.get())) return mpfr_signbit(b.get()) ? "-0" : "0";
  mpfr_exp_t exponent = 0;
  std::unique_ptr<char, void (*)(char*)> digits(
      mpfr_get_str(nullptr, &exponent, 10, 0, b.get(), kRound), mpfr_free_str);
  std::string mantissa(digits.get());
  std::string sign;
  if (mantissa.front() == '-') {
    sign = "-";
    mantissa.erase(0, 1);
  }
  while (mantissa.size() > 1 && mantissa.back() == '0') mantissa.pop_back();
  // mpfr_get_str returns 0.DIGITS * 10^exponent.
  std::string out = sign + mantissa.substr(0, 1);
  if (mantissa.size() > 1) out += "." + mantissa.substr(1);
  const long e10 = static_cast<long>(exponent) - 1;
  if (e10 != 0) out += "e" + std::to_string(e10);
  return out;
}

Scalar Scalar::convert(const PrecisionConfig& cfg) const {
  if (const auto* d = std::get_if<double>(&rep_)) return from_double(*d, cfg);
  const auto& b = std::get<BigFloat>(rep_);
  if (cfg.mode == Mode::kDouble) return Scalar(mpfr_get_d(b.get(), kRound));
  BigFloat out(cfg.mantissa_bits);
  mpfr_set(out.get(), b.get(), kRound);
  return Scalar(std::move(out));
}

bool Scalar::is_finite() const {
  if (const auto* b = std::get_if<BigFloat>(&rep_)) return mpfr_number_p(b->get()) != 0;
  return std::isfinite(std::get<double>(rep_));
}

bool Scalar::is_inf() const {
  if (const auto* b = std::get_if<BigFloat>(&rep_)) return mpfr_inf_p(b->get()) != 0;
  return std::isinf(std::get<double>(rep_));
}

bool Scalar::is_nan() const {
  if (const auto* b = std::get_if<BigFloat>(&rep_)) return mpfr_nan_p(b->get()) != 0;
  return std::isnan(std::get<double>(rep_));
}

bool Scalar::is_zero() const {
  if (const auto* b = std::get_if<BigFloat>(&rep_)) return mpfr_zero_p(b->get()) != 0;
  return std::get<double>(rep_) == 0.0;
}

int Scalar::sign() const {
  if (is_nan()) return 0;
  if (const auto* b = std::get_if<BigFloat>(&rep_)) return mpfr_sgn(b->get()) > 0 ? 1 : (mpfr_sgn(b->get()) < 0 ? -1 : 0);
  const double v = std::get<double>(rep_);
  return v > 0 ? 1 : (v < 0 ? -1 : 0);
}

Scalar Scalar::ulp() const {
  if (const auto* d = std::get_if<double>(&rep_)) {
    const double a = std::fabs(*d);
    return Scalar(std::nextafter(a, std::numeric_limits<double>::infinity()) - a);
  }
  const auto& b = std::get<BigFloat>(rep_);
  BigFloat out(b.bits());
  if (mpfr_zero_p(b.get())) {
    mpfr_set_ui_2exp(out.get(), 1, mpfr_get_emin(), kRound);
  } else {
    // |x| lies in [2^(e-1), 2^e): one ulp is 2^(e - prec).
    mpfr_set_ui_2exp(out.get(), 1, mpfr_get_exp(b.get()) - b.bits(), kRound);
  }
  return Scalar(std::move(out));
}

// ---------------------------------------------------------------------------
// Arithmetic

template <typename DoubleOp, typename MpfrOp>
Scalar Scalar::binary(const Scalar& a, const Scalar& b, DoubleOp dop, MpfrOp mop) {
  const auto* da = std::get_if<double>(&a.rep_);
  const auto* db = std::get_if<double>(&b.rep_);
  if (da && db) return Scalar(dop(*da, *db));
  if (da || db) mixed_modes();
  const auto& ba = std::get<BigFloat>(a.rep_);
  const auto& bb = std::get<BigFloat>(b.rep_);
  BigFloat out(std::max(ba.bits(), bb.bits()));
  mop(out.get(), ba.get(), bb.get(), kRound);
  return Scalar(std::move(out));
}

Scalar Scalar::operator-() const {
  if (const auto* d = std::get_if<double>(&rep_)) return Scalar(-*d);
  const auto& b = std::get<BigFloat>(rep_);
  BigFloat out(b.bits());
  mpfr_neg(out.get(), b.get(), kRound);
  return Scalar(std::move(out));
}

Scalar operator+(const Scalar& a, const Scalar& b) {
  return Scalar::binary(a, b, [](double x, double y) { return x + y; }, mpfr_add);
}

Scalar operator-(const Scalar& a, const Scalar& b) {
  return Scalar::binary(a, b, [](double x, double y) { return x - y; }, mpfr_sub);
}

Scalar operator*(const Scalar& a, const Scalar& b) {
  return Scalar::binary(a, b, [](double x, double y) { return x * y; }, mpfr_mul);
}

Scalar operator/(const Scalar& a, const Scalar& b) {
  return Scalar::binary(a, b, [](double x, double y) { return x / y; }, mpfr_div);
}

bool operator==(const Scalar& a, const Scalar& b) {
  const auto* da = std::get_if<double>(&a.rep_);
  const auto* db = std::get_if<double>(&b.rep_);
  if (da && db) return *da == *db;
  if (da || db) mixed_modes();
  return mpfr_equal_p(std::get<BigFloat>(a.rep_).get(), std::get<BigFloat>(b.rep_).get()) != 0;
}

bool operator<(const Scalar& a, const Scalar& b) {
  const auto* da = std::get_if<double>(&a.rep_);
  const auto* db = std::get_if<double>(&b.rep_);
  if (da && db) return *da < *db;
  if (da || db) mixed_modes();
  return mpfr_less_p(std::get<BigFloat>(a.rep_).get(), std::get<BigFloat>(b.rep_).get()) != 0;
}

Scalar exp(const Scalar& x) {
  if (const auto* d = std::get_if<double>(&x.rep_)) {
    // libm exp is not guaranteed correctly rounded; MPFR at 53 bits is, and
    // mpfr_get_d of a 53-bit value is exact (up to range).
    if (!std::isfinite(*d)) return Scalar(std::exp(*d));
    BigFloat t(53);
    mpfr_set_d(t.get(), *d, kRound);
    mpfr_exp(t.get(), t.get(), kRound);
    return Scalar(mpfr_get_d(t.get(), kRound));
  }
  const auto& b = std::get<BigFloat>(x.rep_);
  BigFloat out(b.bits());
  mpfr_exp(out.get(), b.get(), kRound);
  return Scalar(std::move(out));
}

Scalar log(const Scalar& x) {
  if (const auto* d = std::get_if<double>(&x.rep_)) return Scalar(std::log(*d));
  const auto& b = std::get<BigFloat>(x.rep_);
  BigFloat out(b.bits());
  mpfr_log(out.get(), b.get(), kRound);
  return Scalar(std::move(out));
}

Scalar log1p(const Scalar& x) {
  if (const auto* d = std::get_if<double>(&x.rep_)) return Scalar(std::log1p(*d));
  const auto& b = std::get<BigFloat>(x.rep_);
  BigFloat out(b.bits());
  mpfr_log1p(out.get(), b.get(), kRound);
  return Scalar(std::move(out));
}

Scalar abs(const Scalar& x) { return x.sign() < 0 ? -x : x; }

Scalar relu(const Scalar& x) {
  if (x.is_nan()) return x;
  if (x.sign() > 0) return x;
  // Positive zero of the right precision.
  return x - x;
}

Scalar max(const Scalar& a, const Scalar& b) { return a < b ? b : a; }

double ulp_distance(const Scalar& a, const Scalar& b) {
  if (a == b) return 0.0;
  if (!a.is_finite() || !b.is_finite()) return std::numeric_limits<double>::infinity();
  const Scalar larger = max(abs(a), abs(b));
  return (abs(a - b) / larger.ulp()).to_double();
}

// ---------------------------------------------------------------------------
// Softmax and small linear algebra

Vector softmax_weights(std::span<const Scalar> scores, const PrecisionConfig& cfg) {
  if (scores.empty()) throw std::invalid_argument("softmax of an empty score list");
  for (const auto& s : scores) {
    if (!s.is_finite()) throw std::invalid_argument("softmax scores must be finite");
  }
  Scalar shift = Scalar::zero(cfg);
  if (cfg.stable_softmax) {
    shift = scores[0];
    for (const auto& s : scores) shift = max(shift, s);
  }
  Vector exps;
  exps.reserve(scores.size());
  Scalar total = Scalar::zero(cfg);
  for (const auto& s : scores) {
    exps.push_back(exp(s - shift));
    if (exps.back().is_inf()) throw NumericError("softmax exponential overflowed");
    total += exps.back();
  }
  if (total.is_inf()) throw NumericError("softmax normalizer overflowed");
  if (total.is_zero()) throw NumericError("softmax normalizer underflowed to zero");
  for (auto& e : exps) e = e / total;
  return exps;
}

Vector zeros(std::size_t size, const PrecisionConfig& cfg) {
  return Vector(size, Scalar::zero(cfg));
}

Scalar dot(std::span<const Scalar> a, std::span<const Scalar> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
  if (a.empty()) throw std::invalid_argument("dot: empty vectors");
  Scalar acc = a[0] * b[0];
  for (std::size_t i = 1; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

Matrix Matrix::zeros(std::size_t rows, std::size_t cols, const PrecisionConfig& cfg) {
  return Matrix{rows, cols, std::vector<Scalar>(rows * cols, Scalar::zero(cfg))};
}

Vector matvec(const Matrix& m, std::span<const Scalar> v) {
  if (m.cols != v.size()) throw std::invalid_argument("matvec: dimension mismatch");
  Vector out;
  out.reserve(m.rows);
  for (std::size_t r = 0; r < m.rows; ++r) out.push_back(dot(m.row(r), v));
  return out;
}

}  // namespace onelayer::numerics
