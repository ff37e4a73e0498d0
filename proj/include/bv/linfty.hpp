#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bv/linalg.hpp"
#include "bv/polynomial.hpp"

namespace bv {

/// Finite graded basis of V = X[-1]. The coordinate z^a dual to a basis
/// element of degree d carries ghost number 1 - d, so Darboux-conjugate
/// coordinates correspond to degree-complementary slots (d + d' = 3).
class GradedBasisSpace {
 public:
  struct Element {
    std::string symbol;
    int degree = 0;
  };

  GradedBasisSpace() = default;
  explicit GradedBasisSpace(std::vector<Element> basis) : basis_(std::move(basis)) {}

  /// Basis read off a chart: one element per variable, degree 1 - ghost.
  static GradedBasisSpace from_chart(const Chart& chart);

  std::size_t dim() const { return basis_.size(); }
  const std::vector<Element>& basis() const { return basis_; }
  int degree(std::size_t a) const { return basis_.at(a).degree; }
  /// Parity of the suspended slot (= parity of the coordinate z^a).
  Parity suspended_parity(std::size_t a) const { return parity_of_ghost(1 - degree(a)); }

  /// Coordinate chart with gh(z^a) = 1 - degree(a), in basis order.
  ChartPtr make_chart() const;

  friend bool operator==(const GradedBasisSpace& x, const GradedBasisSpace& y) {
    return x.basis_.size() == y.basis_.size() &&
           [&] {
             for (std::size_t i = 0; i < x.basis_.size(); ++i)
               if (x.basis_[i].symbol != y.basis_[i].symbol ||
                   x.basis_[i].degree != y.basis_[i].degree)
                 return false;
             return true;
           }();
  }

 private:
  std::vector<Element> basis_;
};

/// Degree -3 pairing on V: <a,b> = 0 unless deg a + deg b = 3, symmetric on
/// the complementary blocks, nondegenerate.
class CyclicPairing {
 public:
  CyclicPairing() = default;
  CyclicPairing(const GradedBasisSpace& space, linalg::Matrix m);

  const linalg::Matrix& matrix() const { return m_; }
  const linalg::Matrix& inverse() const { return inv_; }
  const GaussianRational& at(std::size_t a, std::size_t b) const { return m_[a][b]; }

 private:
  linalg::Matrix m_, inv_;
};

/// One multilinear operation l_n, stored in the suspended symmetric normal
/// form: a canonical component per ascending index tuple, evaluated on
/// arbitrary tuples through Koszul resorting in the suspended parities.
class OperationTensor {
 public:
  OperationTensor() = default;
  explicit OperationTensor(int arity) : arity_(arity) {}

  int arity() const { return arity_; }
  bool is_zero() const { return comp_.empty(); }
  const std::map<std::vector<std::uint32_t>, linalg::Vector>& components() const { return comp_; }

  /// Sets the component on an ascending tuple (zero vectors are dropped).
  void set(std::vector<std::uint32_t> key, linalg::Vector value);

  /// Evaluation on an arbitrary basis tuple: resorts with the Koszul sign of
  /// the permutation in suspended parities; repeated odd-suspended indices
  /// evaluate to zero.
  linalg::Vector eval(const GradedBasisSpace& space, std::vector<std::uint32_t> tuple) const;

 private:
  int arity_ = 0;
  std::map<std::vector<std::uint32_t>, linalg::Vector> comp_;
};

/// Resorts a tuple ascending, counting the Koszul sign in suspended parities.
/// Returns 0 sign when two equal odd-suspended indices collide.
int suspended_sort_sign(const GradedBasisSpace& space, std::vector<std::uint32_t>& tuple);

/// Cyclic L-infinity algebra data (V, <,>, {l_n}).
struct CyclicLinfty {
  GradedBasisSpace space;
  CyclicPairing pairing;
  std::map<int, OperationTensor> ops;  // keyed by arity

  /// <e_{a0}, l_n(e_{a1}, ..., e_{an})>, the full cyclic tensor.
  GaussianRational cyclic_tensor(const std::vector<std::uint32_t>& tuple) const;
  linalg::Vector apply(int n, const std::vector<std::uint32_t>& inputs) const {
    auto it = ops.find(n);
    if (it == ops.end()) return linalg::Vector(space.dim());
    return it->second.eval(space, inputs);
  }
};

/// Reads the cyclic L-infinity structure off a polynomial CME solution that
/// starts at quadratic order: the degree-(n+1) Taylor tensors of S are the
/// cyclic tensors <e_{a0}, l_n(...)>, and the operations are obtained through
/// the inverse pairing. Errors: S with constant or linear terms, degenerate
/// pairing block structure.
CyclicLinfty extract_linfty(const GradedPolynomial& S, const DarbouxChartPtr& chart);

/// S(alpha) = sum_n 1/(n+1)! <s(alpha), l_n(s(alpha), ..., s(alpha))>, the
/// inverse of extract_linfty (graded Taylor reconstruction). The chart must
/// carry one variable per basis slot with gh = 1 - degree; when omitted it is
/// synthesized from the space.
GradedPolynomial reconstruct_action(const CyclicLinfty& A, ChartPtr chart);
GradedPolynomial reconstruct_action(const CyclicLinfty& A);

/// Homotopy Jacobi residual for relation index m on the given basis inputs:
///   sum_{r+s=m} sum_{(r,s)-shuffles} koszul(sigma) l_{s+1}(l_r(...), ...),
/// with the sign computed by explicit transposition counting in suspended
/// parities. Zero vector for every structure extracted from a CME solution.
linalg::Vector check_homotopy_jacobi(const CyclicLinfty& A, int m,
                                     const std::vector<std::uint32_t>& inputs);

struct CyclicityReport {
  bool pass = true;
  int arity = 0;
  std::vector<std::uint32_t> witness;  // failing (n+1)-tuple, slots 0 and 1 swapped
};
/// Tests that each full cyclic tensor is supersymmetric across all n+1 slots
/// (on a spanning set: every stored component against every slot-0 choice).
CyclicityReport check_cyclicity(const CyclicLinfty& A);

/// Loop-enhanced family: scalar-valued operations c_n^{(l)} indexed by arity
/// n and loop order l, read off the monomials of a QME solution.
struct QuantumLinfty {
  GradedBasisSpace space;
  CyclicPairing pairing;
  std::map<std::pair<int, int>, std::map<std::vector<std::uint32_t>, GaussianRational>> c;

  GaussianRational tensor(int n, int l, const std::vector<std::uint32_t>& tuple_sorted) const;
};

QuantumLinfty extract_quantum_linfty(const GradedPolynomial& S_hbar, const DarbouxChartPtr& chart);

/// Rebuilds the action from the loop-enhanced family (bookkeeping identity:
/// reassemble(extract(S)) = S).
GradedPolynomial reassemble_quantum_action(const QuantumLinfty& Q, const DarbouxChartPtr& chart);

/// Taylor coefficient: iterated right derivatives of f, rightmost index
/// applied first; constant term of the result.
Scalar taylor_tensor(const GradedPolynomial& f, const std::vector<VarIndex>& indices);

}  // namespace bv
