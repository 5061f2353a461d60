#pragma once
#include <plo/types.hpp>

#include <algorithm>
#include <functional>
#include <string_view>

namespace plo {

/// A smooth program
///
///     minimize f(x)  subject to  con_lo <= c(x) <= con_hi,  var_lo <= x <= var_hi.
///
/// Rows with con_lo == con_hi are equalities; variables with var_lo == var_hi
/// are held fixed. Infinite bounds (or any bound beyond kBoundInf) are absent.
/// The Jacobian and Hessian callbacks must produce the same sparsity pattern
/// on every call; the Hessian of the Lagrangian
///     obj_weight * grad^2 f(x) + sum_k lambda_k grad^2 c_k(x)
/// is read from its lower triangle only (entries with row >= col).
struct NlpProblem {
  using ObjectiveFn = std::function<double(const Vector&)>;
  using VectorFn = std::function<Vector(const Vector&)>;
  using JacobianFn = std::function<SparseMatrix(const Vector&)>;
  using HessianFn =
      std::function<SparseMatrix(const Vector&, double obj_weight, const Vector& lambda)>;

  Eigen::Index n_vars = 0;
  Eigen::Index n_cons = 0;
  Vector var_lo, var_hi;
  Vector con_lo, con_hi;
  ObjectiveFn objective;
  VectorFn gradient;
  VectorFn constraints;
  JacobianFn jacobian;
  HessianFn hessian;
  Vector x0;
};

enum class NlpStatus { optimal, infeasible, iteration_limit, numeric_failure };

std::string_view to_string(NlpStatus status);

struct NlpOptions {
  double feas_tol = 1e-6;  // max violation of c and bounds, unscaled
  double opt_tol = 1e-6;   // scaled KKT residual
  int max_iter = 500;
  double mu_init = 0.1;
  bool restoration = true;
  /// 0 silent, 1 summary, 2 per-iteration log on stderr.
  int verbosity = 0;
};

struct NlpResult {
  NlpStatus status = NlpStatus::numeric_failure;
  Vector x;
  Vector multipliers;  // constraint multipliers, unscaled
  double obj = 0.0;
  double kkt_residual = 0.0;
  double constraint_violation = 0.0;
  int iterations = 0;

  bool ok() const { return status == NlpStatus::optimal; }
};

/// Primal-dual interior-point method with a filter line search.
NlpResult solve(const NlpProblem& problem, const NlpOptions& options = {});

/// Largest violation of the constraint and variable bounds at x.
double constraint_violation(const NlpProblem& problem, const Vector& x);

struct DerivativeCheck {
  double gradient_error = 0.0;
  double jacobian_error = 0.0;
  double hessian_error = 0.0;

  double max_error() const { return std::max(gradient_error, jacobian_error); }
};

/// Compares the analytic gradient and Jacobian with central differences of
/// step h * max(1, |x_i|), and the Hessian of the Lagrangian (unit weight, given multipliers)
/// with central differences of the Lagrangian gradient. Errors are
/// |analytic - fd| / max(1, |fd|), maximized over entries.
DerivativeCheck check_derivatives(const NlpProblem& problem, const Vector& x, double h,
                                  const Vector& lambda = {});

/// Verbosity from the PLO_SOLVER_VERBOSITY environment variable (default 0).
int verbosity_from_env();

}  // namespace plo
