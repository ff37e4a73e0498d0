#pragma once

#include <gmpxx.h>

#include <cstdint>
#include <map>
#include <string>

namespace bv {

using Rational = mpq_class;

/// Exact Gaussian rational a + b*i.
class GaussianRational {
 public:
  GaussianRational() : re_(0), im_(0) {}
  GaussianRational(long n) : re_(n), im_(0) {}
  GaussianRational(Rational re) : re_(std::move(re)), im_(0) {}
  GaussianRational(Rational re, Rational im)
      : re_(std::move(re)), im_(std::move(im)) {}
  GaussianRational(long num, long den) : re_(num, den), im_(0) {
    re_.canonicalize();
  }

  static GaussianRational i() { return GaussianRational(Rational(0), Rational(1)); }

  const Rational& re() const { return re_; }
  const Rational& im() const { return im_; }

  bool is_zero() const { return re_ == 0 && im_ == 0; }
  bool is_real() const { return im_ == 0; }

  GaussianRational operator-() const { return {-re_, -im_}; }
  GaussianRational& operator+=(const GaussianRational& o) {
    re_ += o.re_;
    im_ += o.im_;
    return *this;
  }
  GaussianRational& operator-=(const GaussianRational& o) {
    re_ -= o.re_;
    im_ -= o.im_;
    return *this;
  }
  GaussianRational& operator*=(const GaussianRational& o) {
    Rational r = re_ * o.re_ - im_ * o.im_;
    Rational i = re_ * o.im_ + im_ * o.re_;
    re_ = std::move(r);
    im_ = std::move(i);
    return *this;
  }
  GaussianRational& operator/=(const GaussianRational& o);

  friend GaussianRational operator+(GaussianRational a, const GaussianRational& b) { return a += b; }
  friend GaussianRational operator-(GaussianRational a, const GaussianRational& b) { return a -= b; }
  friend GaussianRational operator*(GaussianRational a, const GaussianRational& b) { return a *= b; }
  friend GaussianRational operator/(GaussianRational a, const GaussianRational& b) { return a /= b; }
  friend bool operator==(const GaussianRational& a, const GaussianRational& b) {
    return a.re_ == b.re_ && a.im_ == b.im_;
  }
  friend bool operator!=(const GaussianRational& a, const GaussianRational& b) { return !(a == b); }

  std::string str() const;

 private:
  Rational re_, im_;
};

/// Coefficient ring of the whole library: Laurent polynomials in the formal
/// parameter hbar with Gaussian-rational coefficients. No floats anywhere.
///
/// Negative hbar exponents are allowed internally (they arise in the
/// order-by-order equivalents of e^{iS/hbar} statements); public surfaces that
/// promise plain power series check is_polynomial().
class Scalar {
 public:
  Scalar() = default;
  Scalar(long n) {
    if (n != 0) c_[0] = GaussianRational(n);
  }
  Scalar(GaussianRational g) {
    if (!g.is_zero()) c_[0] = std::move(g);
  }
  Scalar(Rational r) : Scalar(GaussianRational(std::move(r))) {}

  static Scalar i() { return Scalar(GaussianRational::i()); }
  static Scalar hbar(int power = 1) {
    Scalar s;
    s.c_[power] = GaussianRational(1);
    return s;
  }
  static Scalar term(GaussianRational g, int hbar_power) {
    Scalar s;
    if (!g.is_zero()) s.c_[hbar_power] = std::move(g);
    return s;
  }

  bool is_zero() const { return c_.empty(); }
  bool is_one() const;
  /// True when no negative hbar power is present.
  bool is_polynomial() const { return c_.empty() || c_.begin()->first >= 0; }
  /// Lowest/highest hbar exponent; only valid on nonzero scalars.
  int min_order() const { return c_.begin()->first; }
  int max_order() const { return c_.rbegin()->first; }

  GaussianRational coeff(int hbar_power) const {
    auto it = c_.find(hbar_power);
    return it == c_.end() ? GaussianRational() : it->second;
  }
  const std::map<int, GaussianRational>& terms() const { return c_; }

  Scalar operator-() const;
  Scalar& operator+=(const Scalar& o);
  Scalar& operator-=(const Scalar& o);
  friend Scalar operator+(Scalar a, const Scalar& b) { return a += b; }
  friend Scalar operator-(Scalar a, const Scalar& b) { return a -= b; }
  friend Scalar operator*(const Scalar& a, const Scalar& b);
  Scalar& operator*=(const Scalar& o) { return *this = *this * o; }

  /// Multiply by hbar^k (exponent shift).
  Scalar shifted(int k) const;
  /// Drop all terms with hbar exponent > cap.
  Scalar truncated_above(int cap) const;
  /// Drop all terms with hbar exponent < floor.
  Scalar truncated_below(int floor) const;

  Scalar div(const GaussianRational& g) const;
  /// Exact division by a one-term scalar c*hbar^k.
  Scalar div_unit(const Scalar& unit) const;

  friend bool operator==(const Scalar& a, const Scalar& b) { return a.c_ == b.c_; }
  friend bool operator!=(const Scalar& a, const Scalar& b) { return !(a == b); }

  std::string str() const;

 private:
  void strip(int key) {
    auto it = c_.find(key);
    if (it != c_.end() && it->second.is_zero()) c_.erase(it);
  }
  std::map<int, GaussianRational> c_;
};

}  // namespace bv
