#pragma once
#include <plo/types.hpp>

#include <Eigen/OrderingMethods>
#include <Eigen/SparseCholesky>

#include <vector>

namespace plo::detail {

struct Inertia {
  Eigen::Index positive = 0;
  Eigen::Index negative = 0;
  Eigen::Index zero = 0;
};

/// Sparse LDL^T of the regularized primal-dual matrix
///
///     [ W + diag(sigma) + dw I   J^T   ]
///     [ J                        -dc I ]
///
/// W is read from its lower triangle. The factorization does not pivot, so
/// dc must stay positive; solutions are refined against the dc = 0 matrix.
class KktSystem {
 public:
  bool factorize(const SparseMatrix& w_lower, const SparseMatrix& jac, const Vector& sigma,
                 double dw, double dc);

  const Inertia& inertia() const { return inertia_; }
  Eigen::Index num_primal() const { return n_; }
  Eigen::Index num_dual() const { return m_; }

  /// Solves with iterative refinement; returns false if the residual stays large.
  bool solve(const Vector& rhs, Vector& sol) const;

 private:
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
  SparseMatrix k_;
  std::vector<int> outer_, inner_;
  bool analyzed_ = false;
  Eigen::Index n_ = 0, m_ = 0;
  double dc_ = 0.0;
  Inertia inertia_;
  std::vector<Triplet> trip_;
};

}  // namespace plo::detail
