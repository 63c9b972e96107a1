#pragma once

#include <vector>

#include "cldeepc/lti_plant.hpp"

namespace cldeepc {

struct DenseQpOptions {
  /// Feasibility tolerance, scaled by max(1, |b_i|) per row.
  double tolerance = 1e-9;
  /// 0 selects 10 * (n + m) + 50.
  int max_iterations = 0;
};

enum class DenseQpStatus { kOptimal, kInfeasible };

struct DenseQpResult {
  DenseQpStatus status = DenseQpStatus::kOptimal;
  Vector x;
  Vector multipliers;  ///< one per row of A; zero for inactive rows
  double objective = 0.0;
  int iterations = 0;
  std::vector<Index> active_set;
};

/// Strictly convex dense QP
///
///   min 1/2 x^T H x + g^T x   s.t.  A x <= b
///
/// solved with the Goldfarb-Idnani dual active-set method: start from the
/// unconstrained minimiser and add the most violated constraint until the
/// iterate is primal feasible. Infeasibility is detected exactly when a
/// violated constraint is linearly dependent on the active set with no
/// multiplier left to drop.
///
/// A diagonal shift of 1e-10 * max(1, max|H_ii|) is applied only when the
/// Cholesky factorisation of H fails. Throws SolverError if the shifted
/// Hessian is still not positive definite or the iteration limit is hit.
DenseQpResult solve_dense_qp(const Matrix& h, const Vector& g, const Matrix& a, const Vector& b,
                             const DenseQpOptions& options = {});

struct KktResiduals {
  double stationarity = 0.0;     ///< |H x + g + A^T lambda|_inf
  double primal = 0.0;           ///< max(0, A x - b)
  double dual = 0.0;             ///< max(0, -lambda)
  double complementarity = 0.0;  ///< max |lambda_i (b - A x)_i|
  double max() const;
};

KktResiduals kkt_residuals(const Matrix& h, const Vector& g, const Matrix& a, const Vector& b,
                           const Vector& x, const Vector& multipliers);

}  // namespace cldeepc
