#pragma once

#include <optional>
#include <vector>

#include "bv/scalar.hpp"

namespace bv::linalg {

/// Dense matrix over the Gaussian rationals, row major. Everything here is
/// exact; sizes are desk scale.
using Vector = std::vector<GaussianRational>;
using Matrix = std::vector<Vector>;

Matrix identity(std::size_t n);
Matrix mul(const Matrix& a, const Matrix& b);
Vector mul(const Matrix& a, const Vector& x);

/// Reduced row echelon form in place; returns the pivot columns.
std::vector<std::size_t> rref(Matrix& m);

std::size_t rank(Matrix m);

/// One solution of A x = b, if any.
std::optional<Vector> solve(const Matrix& a, const Vector& b);

/// Basis of the right nullspace of A.
std::vector<Vector> nullspace(const Matrix& a);

std::optional<Matrix> inverse(const Matrix& a);

}  // namespace bv::linalg
