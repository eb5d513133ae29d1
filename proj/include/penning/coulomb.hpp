#pragma once

#include "penning/model.hpp"

namespace penning {

/// Point charges. Positions in m, charges in C.
struct ChargeSystem {
  Positions x;
  Eigen::VectorXd q;

  Eigen::Index size() const { return x.cols(); }
  void validate() const;

  /// N identical charges at the given positions.
  static ChargeSystem identical(const Positions& x, double charge);
};

/// Potential (V) at every charge due to all others, and the electric field (V/m).
struct FieldResult {
  Eigen::VectorXd phi;
  Eigen::Matrix3Xd E;
};

/// O(N^2) pairwise summation. Throws "singular pair (i,j)" for coincident charges.
FieldResult direct_solve(const ChargeSystem& sys);

/// sqrt(sum |phi_a - phi_b|^2 / sum |phi_b|^2), b the reference.
double rel_error_pot(const FieldResult& approx, const FieldResult& reference);
/// Same metric on the field vectors.
double rel_error_field(const FieldResult& approx, const FieldResult& reference);

enum class CoulombMethod { Direct, Fmm };

struct CoulombSettings {
  CoulombMethod method = CoulombMethod::Fmm;
  double epsilon = 1e-7;
  int leaf_min = 64;
  int max_depth = 10;
  bool deterministic = false;
};

/// Dispatches to direct_solve or fmm_solve.
FieldResult coulomb_solve(const ChargeSystem& sys, const CoulombSettings& settings);

}  // namespace penning
