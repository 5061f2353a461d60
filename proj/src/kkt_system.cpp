#include "kkt_system.hpp"

#include <cmath>

namespace plo::detail {

bool KktSystem::factorize(const SparseMatrix& w_lower, const SparseMatrix& jac,
                          const Vector& sigma, double dw, double dc) {
  n_ = w_lower.rows();
  m_ = jac.rows();
  dc_ = dc;
  const Eigen::Index dim = n_ + m_;

  trip_.clear();
  trip_.reserve(static_cast<std::size_t>(w_lower.nonZeros() + jac.nonZeros() + dim));
  for (int col = 0; col < w_lower.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(w_lower, col); it; ++it) {
      if (it.row() >= it.col()) trip_.emplace_back(it.row(), it.col(), it.value());
    }
  }
  for (Eigen::Index i = 0; i < n_; ++i) {
    trip_.emplace_back(static_cast<int>(i), static_cast<int>(i), sigma[i] + dw);
  }
  for (int col = 0; col < jac.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(jac, col); it; ++it) {
      trip_.emplace_back(static_cast<int>(n_ + it.row()), it.col(), it.value());
    }
  }
  for (Eigen::Index k = 0; k < m_; ++k) {
    const int r = static_cast<int>(n_ + k);
    trip_.emplace_back(r, r, -dc);
  }
  k_.resize(dim, dim);
  k_.setFromTriplets(trip_.begin(), trip_.end());
  k_.makeCompressed();

  const bool same_pattern =
      analyzed_ && outer_.size() == static_cast<std::size_t>(k_.outerSize() + 1) &&
      inner_.size() == static_cast<std::size_t>(k_.nonZeros()) &&
      std::equal(outer_.begin(), outer_.end(), k_.outerIndexPtr()) &&
      std::equal(inner_.begin(), inner_.end(), k_.innerIndexPtr());
  if (!same_pattern) {
    ldlt_.analyzePattern(k_);
    outer_.assign(k_.outerIndexPtr(), k_.outerIndexPtr() + k_.outerSize() + 1);
    inner_.assign(k_.innerIndexPtr(), k_.innerIndexPtr() + k_.nonZeros());
    analyzed_ = true;
  }
  ldlt_.factorize(k_);

  inertia_ = {};
  if (ldlt_.info() != Eigen::Success) {
    inertia_.zero = 1;
    return false;
  }
  const Vector& d = ldlt_.vectorD();
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (!std::isfinite(d[i])) {
      inertia_.zero = 1;
      return false;
    }
    if (d[i] > 0.0) {
      ++inertia_.positive;
    } else if (d[i] < 0.0) {
      ++inertia_.negative;
    } else {
      ++inertia_.zero;
    }
  }
  return true;
}

bool KktSystem::solve(const Vector& rhs, Vector& sol) const {
  sol = ldlt_.solve(rhs);
  const double scale = 1.0 + rhs.lpNorm<Eigen::Infinity>();
  auto residual = [&](const Vector& x) {
    Vector r = rhs - k_.selfadjointView<Eigen::Lower>() * x;
    r.tail(m_) -= dc_ * x.tail(m_);
    return r;
  };
  Vector r = residual(sol);
  double err = r.lpNorm<Eigen::Infinity>();
  for (int it = 0; it < 10 && err > 1e-10 * scale; ++it) {
    Vector corr = ldlt_.solve(r);
    Vector trial = sol + corr;
    Vector rt = residual(trial);
    const double et = rt.lpNorm<Eigen::Infinity>();
    if (!(et < err)) break;
    sol = std::move(trial);
    r = std::move(rt);
    err = et;
  }
  return sol.allFinite() && err <= 1e-5 * scale;
}

}  // namespace plo::detail
