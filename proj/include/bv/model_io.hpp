#pragma once

#include <map>
#include <optional>
#include <string>

#include "bv/models.hpp"

namespace bv::io {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A parsed model file: Darboux chart plus master action, optional named
/// polynomials (gauge fermions, observables), and the constructor invocation
/// when the model is built rather than listed term by term.
///
/// Files round-trip byte-identically through emit_model: parse(emit(m)) == m
/// and emit(parse(bytes)) == bytes for files in canonical form (the bundled
/// library is written by emit_model).
struct ModelFile {
  std::string version = "1";
  models::BvModel model;
  std::map<std::string, GradedPolynomial> extra;  // keyed by name, e.g. "psi", "O1"
  std::optional<std::string> constructor_kind;    // bv_ansatz | cs_superpoint | pform_tower
  std::map<std::string, std::string> constructor_params;
};

ModelFile parse_model(const std::string& bytes);
std::string emit_model(const ModelFile& m);

/// Serialization of one polynomial as the term-list schema (shared between
/// model files and report witnesses), and the inverse over a given chart.
std::string emit_polynomial_json(const GradedPolynomial& p);
GradedPolynomial parse_polynomial_json(const std::string& bytes, const ChartPtr& chart);

/// Runs a bundled constructor. Recognized kinds and parameters:
///   bv_ansatz:    system = so3 | abelian;            mutate = 0|1
///   cs_superpoint: lie = so3 | abelian, base = superpoint | heisenberg; mutate
///   pform_tower:  tower = circle3 | line1;           mutate = 0|1
/// Mutations produce the bundled CME-violating variants.
models::BvModel run_constructor(const std::string& kind,
                                const std::map<std::string, std::string>& params);

}  // namespace bv::io
