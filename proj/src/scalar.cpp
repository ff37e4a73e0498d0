#include "bv/scalar.hpp"

#include <sstream>
#include <stdexcept>

namespace bv {

GaussianRational& GaussianRational::operator/=(const GaussianRational& o) {
  if (o.is_zero()) throw std::domain_error("GaussianRational: division by zero");
  Rational n = o.re_ * o.re_ + o.im_ * o.im_;
  Rational r = (re_ * o.re_ + im_ * o.im_) / n;
  Rational i = (im_ * o.re_ - re_ * o.im_) / n;
  re_ = std::move(r);
  im_ = std::move(i);
  return *this;
}

std::string GaussianRational::str() const {
  std::ostringstream os;
  if (im_ == 0) {
    os << re_;
  } else if (re_ == 0) {
    os << im_ << "i";
  } else {
    os << re_ << (im_ > 0 ? "+" : "") << im_ << "i";
  }
  return os.str();
}

bool Scalar::is_one() const {
  return c_.size() == 1 && c_.begin()->first == 0 &&
         c_.begin()->second == GaussianRational(1);
}

Scalar Scalar::operator-() const {
  Scalar r;
  for (auto& [k, v] : c_) r.c_[k] = -v;
  return r;
}

Scalar& Scalar::operator+=(const Scalar& o) {
  for (auto& [k, v] : o.c_) {
    c_[k] += v;
    strip(k);
  }
  return *this;
}

Scalar& Scalar::operator-=(const Scalar& o) {
  for (auto& [k, v] : o.c_) {
    c_[k] -= v;
    strip(k);
  }
  return *this;
}

Scalar operator*(const Scalar& a, const Scalar& b) {
  Scalar r;
  for (auto& [ka, va] : a.c_)
    for (auto& [kb, vb] : b.c_) {
      r.c_[ka + kb] += va * vb;
      r.strip(ka + kb);
    }
  return r;
}

Scalar Scalar::shifted(int k) const {
  Scalar r;
  for (auto& [e, v] : c_) r.c_[e + k] = v;
  return r;
}

Scalar Scalar::truncated_above(int cap) const {
  Scalar r;
  for (auto& [e, v] : c_)
    if (e <= cap) r.c_[e] = v;
  return r;
}

Scalar Scalar::truncated_below(int floor) const {
  Scalar r;
  for (auto& [e, v] : c_)
    if (e >= floor) r.c_[e] = v;
  return r;
}

Scalar Scalar::div(const GaussianRational& g) const {
  Scalar r;
  for (auto& [e, v] : c_) r.c_[e] = v / g;
  return r;
}

Scalar Scalar::div_unit(const Scalar& unit) const {
  if (unit.c_.size() != 1)
    throw std::domain_error("Scalar::div_unit: divisor is not a single term");
  int k = unit.c_.begin()->first;
  const GaussianRational& g = unit.c_.begin()->second;
  Scalar r;
  for (auto& [e, v] : c_) r.c_[e - k] = v / g;
  return r;
}

std::string Scalar::str() const {
  if (c_.empty()) return "0";
  std::ostringstream os;
  bool first = true;
  for (auto& [e, v] : c_) {
    if (!first) os << " + ";
    first = false;
    os << "(" << v.str() << ")";
    if (e != 0) os << "*h^" << e;
  }
  return os.str();
}

}  // namespace bv
