#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "bv/chart.hpp"
#include "bv/scalar.hpp"

namespace bv {

enum class Side { Left, Right };

/// Canonical-form monomial: factors sorted by the chart's global variable
/// order, exponents positive, odd variables at exponent <= 1. Instances are
/// produced by the normalizing constructors below, which also report the
/// Koszul sign (or annihilation) incurred by sorting.
class Monomial {
 public:
  using Factor = std::pair<VarIndex, std::uint32_t>;

  Monomial() = default;  // the unit monomial

  static const Monomial& one() {
    static const Monomial m;
    return m;
  }
  static Monomial variable(VarIndex v) {
    Monomial m;
    m.f_.push_back({v, 1});
    return m;
  }

  /// Normalized product. Returns nullopt when an odd variable squares to zero;
  /// otherwise the merged monomial and the Koszul sign (+1/-1).
  static std::optional<std::pair<Monomial, int>> mul(const Monomial& a, const Monomial& b,
                                                     const Chart& chart);

  /// Builds a monomial from an arbitrarily ordered factor list.
  static std::optional<std::pair<Monomial, int>> from_factors(
      std::span<const VarIndex> factors, const Chart& chart);

  const std::vector<Factor>& factors() const { return f_; }
  bool is_one() const { return f_.empty(); }
  std::uint32_t degree() const;
  std::uint32_t exponent(VarIndex v) const;
  bool contains(VarIndex v) const { return exponent(v) > 0; }

  int ghost(const Chart& chart) const;
  Parity parity(const Chart& chart) const;

  friend bool operator<(const Monomial& a, const Monomial& b) { return a.f_ < b.f_; }
  friend bool operator==(const Monomial& a, const Monomial& b) { return a.f_ == b.f_; }
  friend bool operator!=(const Monomial& a, const Monomial& b) { return !(a == b); }

  std::string str(const Chart& chart) const;

 private:
  std::vector<Factor> f_;
};

/// Graded partial derivative of a monomial: Koszul sign, exponent
/// multiplicity, and the reduced monomial.
struct MonomialDerivative {
  Monomial reduced;
  int sign = 1;
  std::uint32_t multiplicity = 0;
};

/// Returns nullopt when the variable is absent.
std::optional<MonomialDerivative> derive_monomial(const Monomial& m, VarIndex v, Side side,
                                                  const Chart& chart);

/// Sparse supercommutative polynomial over a chart, with Scalar coefficients.
/// Always normalized: monomials canonical, no zero coefficients. Values are
/// immutable in spirit; all operations return new polynomials.
class GradedPolynomial {
 public:
  GradedPolynomial() = default;
  explicit GradedPolynomial(ChartPtr chart) : chart_(std::move(chart)) {}

  static GradedPolynomial zero(ChartPtr chart) { return GradedPolynomial(std::move(chart)); }
  static GradedPolynomial constant(ChartPtr chart, Scalar c);
  static GradedPolynomial variable(ChartPtr chart, VarIndex v);
  static GradedPolynomial variable(ChartPtr chart, const std::string& name);
  static GradedPolynomial monomial(ChartPtr chart, Monomial m, Scalar c);

  const ChartPtr& chart() const { return chart_; }
  const Chart& chart_ref() const { return *chart_; }
  const std::map<Monomial, Scalar>& terms() const { return t_; }
  bool is_zero() const { return t_.empty(); }
  std::size_t term_count() const { return t_.size(); }

  Scalar coeff(const Monomial& m) const {
    auto it = t_.find(m);
    return it == t_.end() ? Scalar() : it->second;
  }
  /// Coefficient of the unit monomial.
  Scalar constant_term() const { return coeff(Monomial::one()); }

  GradedPolynomial operator-() const;
  GradedPolynomial& operator+=(const GradedPolynomial& o);
  GradedPolynomial& operator-=(const GradedPolynomial& o);
  friend GradedPolynomial operator+(GradedPolynomial a, const GradedPolynomial& b) { return a += b; }
  friend GradedPolynomial operator-(GradedPolynomial a, const GradedPolynomial& b) { return a -= b; }
  friend GradedPolynomial operator*(const GradedPolynomial& a, const GradedPolynomial& b);
  GradedPolynomial& operator*=(const GradedPolynomial& o) { return *this = *this * o; }
  GradedPolynomial scaled(const Scalar& s) const;
  GradedPolynomial pow(std::uint32_t n) const;

  friend bool operator==(const GradedPolynomial& a, const GradedPolynomial& b) {
    return *a.chart_ == *b.chart_ && a.t_ == b.t_;
  }
  friend bool operator!=(const GradedPolynomial& a, const GradedPolynomial& b) { return !(a == b); }

  /// Graded left/right partial derivative. Absent variables derive to zero.
  GradedPolynomial derive(VarIndex v, Side side) const;
  GradedPolynomial derive(const std::string& name, Side side) const;

  /// Simultaneous substitution. Variables not listed map to themselves (which
  /// requires them to exist in the target chart under the same name). Each
  /// image must be zero or homogeneous of the ghost of its variable.
  GradedPolynomial substitute(const std::map<VarIndex, GradedPolynomial>& assignment,
                              ChartPtr target) const;
  GradedPolynomial substitute(const std::map<VarIndex, GradedPolynomial>& assignment) const {
    return substitute(assignment, chart_);
  }

  /// Common ghost number of all terms, or nullopt if inhomogeneous.
  /// The zero polynomial reports ghost 0.
  std::optional<int> ghost() const;
  std::optional<Parity> parity() const;
  bool ghost_is(int g) const { return is_zero() || ghost() == g; }
  bool parity_is(Parity p) const { return is_zero() || parity() == p; }

  std::uint32_t degree() const;
  std::uint32_t min_degree() const;
  GradedPolynomial homogeneous_part(std::uint32_t n) const;
  GradedPolynomial degree_truncated(std::uint32_t cap) const;

  /// Polynomial whose coefficients are the hbar^k parts (hbar removed).
  GradedPolynomial hbar_slice(int k) const;
  GradedPolynomial hbar_truncated(int cap) const;
  GradedPolynomial hbar_shifted(int k) const;
  int min_hbar_order() const;
  int max_hbar_order() const;
  /// True when every coefficient is a genuine hbar power series.
  bool hbar_polynomial() const;

  std::string str() const;

 private:
  void add_term(Monomial m, Scalar c);
  ChartPtr chart_;
  std::map<Monomial, Scalar> t_;
};

/// Sum of left-derivative applications v |-> p_v * d_L f / d v.
GradedPolynomial apply_first_order(const GradedPolynomial& f,
                                   const std::vector<std::pair<VarIndex, GradedPolynomial>>& ops);

}  // namespace bv
