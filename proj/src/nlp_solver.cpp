#include <plo/nlp.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <vector>

#include "kkt_system.hpp"

// Primal-dual barrier method in the style of Waechter & Biegler's filter
// line-search IPM. Inequalities get slacks, so the working problem is
//
//     min f(y)  s.t.  c(y) = 0,  lo <= y <= hi,    y = (free x, slacks).
//
// Objective and constraint rows are scaled by gradient norms at x0.

namespace plo {

std::string_view to_string(NlpStatus status) {
  switch (status) {
    case NlpStatus::optimal: return "optimal";
    case NlpStatus::infeasible: return "infeasible";
    case NlpStatus::iteration_limit: return "iteration_limit";
    case NlpStatus::numeric_failure: return "numeric_failure";
  }
  return "unknown";
}

int verbosity_from_env() {
  if (const char* v = std::getenv("PLO_SOLVER_VERBOSITY")) return std::atoi(v);
  return 0;
}

double constraint_violation(const NlpProblem& p, const Vector& x) {
  double viol = 0.0;
  for (Eigen::Index i = 0; i < p.n_vars; ++i) {
    viol = std::max({viol, p.var_lo[i] - x[i], x[i] - p.var_hi[i]});
  }
  if (p.n_cons > 0) {
    const Vector c = p.constraints(x);
    for (Eigen::Index k = 0; k < p.n_cons; ++k) {
      if (!std::isfinite(c[k])) return kInf;
      viol = std::max({viol, p.con_lo[k] - c[k], c[k] - p.con_hi[k]});
    }
  }
  return viol;
}

namespace {

constexpr double kKappaEps = 10.0;
constexpr double kKappaMu = 0.2;
constexpr double kThetaMu = 1.5;
constexpr double kTauMin = 0.99;
constexpr double kKappaSigma = 1e10;
constexpr double kGammaTheta = 1e-5;
constexpr double kGammaPhi = 1e-8;
constexpr double kDelta = 1.0;
constexpr double kSTheta = 1.1;
constexpr double kSPhi = 2.3;
constexpr double kEtaPhi = 1e-8;
constexpr double kGammaAlpha = 0.05;
constexpr int kMaxSoc = 4;
constexpr double kKappaSoc = 0.99;
constexpr double kBoundPush = 1e-2;
constexpr double kBoundRelax = 1e-8;
constexpr double kDcBase = 1e-9;
constexpr double kRho = 1000.0;
constexpr int kMaxRestorations = 8;

bool finite_bound(double v) { return std::isfinite(v) && std::abs(v) < kBoundInf; }

struct Filter {
  std::vector<std::pair<double, double>> entries;

  bool acceptable(double theta, double phi) const {
    for (const auto& [t, f] : entries) {
      if (theta >= t && phi >= f) return false;
    }
    return true;
  }
  void add(double theta, double phi) {
    std::erase_if(entries, [&](const auto& e) { return e.first >= theta && e.second >= phi; });
    entries.emplace_back(theta, phi);
  }
  void reset(double theta_max) {
    entries.clear();
    entries.emplace_back(theta_max, -kInf);
  }
};

class InteriorPoint {
 public:
  InteriorPoint(const NlpProblem& p, const NlpOptions& o) : p_(p), opt_(o) {}

  NlpResult run();

 private:
  // Problem transformation
  void setup();
  Vector full_x(const Vector& y) const;
  bool eval_point(const Vector& y, double& f, Vector& c) const;
  Vector eval_grad(const Vector& y) const;
  SparseMatrix eval_jac(const Vector& y) const;
  SparseMatrix eval_hess(const Vector& y, const Vector& lambda) const;

  // Algorithm pieces
  double barrier(const Vector& y, double f) const;
  Vector barrier_grad(const Vector& y, const Vector& grad) const;
  void push_interior(Vector& y) const;
  Vector sigma() const;
  bool factor_kkt(const SparseMatrix& w, const SparseMatrix& jac, const Vector& sig);
  double max_step(const Vector& v, const Vector& dv, const Vector& lo, const Vector& hi,
                  double tau) const;
  double max_dual_step(const Vector& dzl, const Vector& dzu, double tau) const;
  void init_multipliers(const Vector& grad, const SparseMatrix& jac);
  double kkt_error(double mu, const Vector& grad, const SparseMatrix& jac, const Vector& c,
                   double* primal = nullptr) const;
  NlpStatus restore(double& f, Vector& c);
  NlpResult finish(NlpStatus status, double err);
  NlpResult fail(const char* why, double err);
  void log(int it, double f, double theta, double err, double alpha) const;

  const NlpProblem& p_;
  NlpOptions opt_;

  Eigen::Index n_free_ = 0, n_ineq_ = 0, dim_ = 0, m_ = 0;
  std::vector<Eigen::Index> free_;       // y index -> x index
  std::vector<Eigen::Index> x_to_y_;     // x index -> y index or -1
  std::vector<Eigen::Index> slack_of_;   // constraint -> y index or -1
  Vector x_template_;
  double obj_scale_ = 1.0;
  Vector con_scale_;
  Vector eq_target_;  // scaled rhs for equality rows
  Vector lo_, hi_;
  Vector unit_;  // scaled units per unscaled unit
  std::vector<bool> has_lo_, has_hi_;

  Vector y_, lambda_, zl_, zu_;
  double mu_ = 0.1;
  double dw_last_ = 0.0;
  int iter_ = 0;
  int restorations_ = 0;
  detail::KktSystem kkt_;
};

void InteriorPoint::setup() {
  const Eigen::Index n = p_.n_vars;
  m_ = p_.n_cons;
  auto check = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("NlpProblem: ") + what);
  };
  check(p_.var_lo.size() == n && p_.var_hi.size() == n, "variable bound size");
  check(p_.con_lo.size() == m_ && p_.con_hi.size() == m_, "constraint bound size");
  check(p_.x0.size() == n, "x0 size");
  check(static_cast<bool>(p_.objective) && static_cast<bool>(p_.gradient), "missing callbacks");
  check(m_ == 0 || (p_.constraints && p_.jacobian), "missing constraint callbacks");
  check(static_cast<bool>(p_.hessian), "missing hessian callback");

  x_template_ = p_.x0;
  x_to_y_.assign(static_cast<std::size_t>(n), -1);
  free_.clear();
  for (Eigen::Index i = 0; i < n; ++i) {
    x_template_[i] = std::clamp(x_template_[i], p_.var_lo[i], p_.var_hi[i]);
    if (p_.var_lo[i] == p_.var_hi[i]) {
      x_template_[i] = p_.var_lo[i];
    } else {
      x_to_y_[static_cast<std::size_t>(i)] = static_cast<Eigen::Index>(free_.size());
      free_.push_back(i);
    }
  }
  n_free_ = static_cast<Eigen::Index>(free_.size());

  slack_of_.assign(static_cast<std::size_t>(m_), -1);
  n_ineq_ = 0;
  for (Eigen::Index k = 0; k < m_; ++k) {
    if (p_.con_lo[k] != p_.con_hi[k]) slack_of_[static_cast<std::size_t>(k)] = n_free_ + n_ineq_++;
  }
  dim_ = n_free_ + n_ineq_;

  // Gradient-based scaling at the starting point.
  const Vector x0 = x_template_;
  const Vector g0 = p_.gradient(x0);
  check(g0.size() == n, "gradient size");
  const double gmax = g0.allFinite() ? g0.lpNorm<Eigen::Infinity>() : 0.0;
  obj_scale_ = gmax > 100.0 ? 100.0 / gmax : 1.0;
  con_scale_ = Vector::Ones(m_);
  if (m_ > 0) {
    const SparseMatrix j0 = p_.jacobian(x0);
    check(j0.rows() == m_ && j0.cols() == n, "jacobian size");
    Vector rowmax = Vector::Zero(m_);
    for (int col = 0; col < j0.outerSize(); ++col) {
      for (SparseMatrix::InnerIterator it(j0, col); it; ++it) {
        if (std::isfinite(it.value())) {
          rowmax[it.row()] = std::max(rowmax[it.row()], std::abs(it.value()));
        }
      }
    }
    for (Eigen::Index k = 0; k < m_; ++k) {
      if (rowmax[k] > 100.0) con_scale_[k] = 100.0 / rowmax[k];
    }
  }

  eq_target_ = Vector::Zero(m_);
  lo_.resize(dim_);
  hi_.resize(dim_);
  for (Eigen::Index i = 0; i < n_free_; ++i) {
    lo_[i] = p_.var_lo[free_[static_cast<std::size_t>(i)]];
    hi_[i] = p_.var_hi[free_[static_cast<std::size_t>(i)]];
  }
  for (Eigen::Index k = 0; k < m_; ++k) {
    const auto s = slack_of_[static_cast<std::size_t>(k)];
    if (s < 0) {
      eq_target_[k] = con_scale_[k] * p_.con_lo[k];
    } else {
      lo_[s] = con_scale_[k] * p_.con_lo[k];
      hi_[s] = con_scale_[k] * p_.con_hi[k];
    }
  }
  unit_ = Vector::Ones(dim_);
  for (Eigen::Index k = 0; k < m_; ++k) {
    const auto sk = slack_of_[static_cast<std::size_t>(k)];
    if (sk >= 0) unit_[sk] = con_scale_[k];
  }
  has_lo_.assign(static_cast<std::size_t>(dim_), false);
  has_hi_.assign(static_cast<std::size_t>(dim_), false);
  for (Eigen::Index i = 0; i < dim_; ++i) {
    const auto u = static_cast<std::size_t>(i);
    has_lo_[u] = finite_bound(lo_[i]);
    has_hi_[u] = finite_bound(hi_[i]);
    // Relaxation measured in unscaled units and kept well below feas_tol.
    // Variables get a tighter one so clipping back barely moves the rows.
    const double unit = unit_[i];
    auto relax = [&](double bound) {
      const double mag = std::max(1.0, std::abs(bound / unit));
      if (i < n_free_) return 1e-2 * kBoundRelax * mag;
      return unit * std::min(kBoundRelax * mag, 0.1 * opt_.feas_tol);
    };
    if (has_lo_[u]) lo_[i] -= relax(lo_[i]);
    if (has_hi_[u]) hi_[i] += relax(hi_[i]);
  }
}

Vector InteriorPoint::full_x(const Vector& y) const {
  Vector x = x_template_;
  for (Eigen::Index i = 0; i < n_free_; ++i) x[free_[static_cast<std::size_t>(i)]] = y[i];
  return x;
}

bool InteriorPoint::eval_point(const Vector& y, double& f, Vector& c) const {
  const Vector x = full_x(y);
  f = obj_scale_ * p_.objective(x);
  c.resize(m_);
  if (m_ > 0) {
    const Vector cx = p_.constraints(x);
    if (cx.size() != m_) throw std::invalid_argument("NlpProblem: constraint size");
    for (Eigen::Index k = 0; k < m_; ++k) {
      const auto s = slack_of_[static_cast<std::size_t>(k)];
      c[k] = con_scale_[k] * cx[k] - (s < 0 ? eq_target_[k] : y[s]);
    }
  }
  return std::isfinite(f) && c.allFinite();
}

Vector InteriorPoint::eval_grad(const Vector& y) const {
  const Vector gx = p_.gradient(full_x(y));
  if (gx.size() != p_.n_vars) throw std::invalid_argument("NlpProblem: gradient size");
  Vector g = Vector::Zero(dim_);
  for (Eigen::Index i = 0; i < n_free_; ++i) {
    g[i] = obj_scale_ * gx[free_[static_cast<std::size_t>(i)]];
  }
  return g;
}

SparseMatrix InteriorPoint::eval_jac(const Vector& y) const {
  SparseMatrix jac(m_, dim_);
  if (m_ == 0) return jac;
  const SparseMatrix jx = p_.jacobian(full_x(y));
  if (jx.rows() != m_ || jx.cols() != p_.n_vars) {
    throw std::invalid_argument("NlpProblem: jacobian size");
  }
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(jx.nonZeros() + n_ineq_));
  for (int col = 0; col < jx.outerSize(); ++col) {
    const auto yc = x_to_y_[static_cast<std::size_t>(col)];
    if (yc < 0) continue;
    for (SparseMatrix::InnerIterator it(jx, col); it; ++it) {
      t.emplace_back(it.row(), static_cast<int>(yc), con_scale_[it.row()] * it.value());
    }
  }
  for (Eigen::Index k = 0; k < m_; ++k) {
    const auto s = slack_of_[static_cast<std::size_t>(k)];
    if (s >= 0) t.emplace_back(static_cast<int>(k), static_cast<int>(s), -1.0);
  }
  jac.setFromTriplets(t.begin(), t.end());
  return jac;
}

SparseMatrix InteriorPoint::eval_hess(const Vector& y, const Vector& lambda) const {
  const Vector lam = lambda.cwiseProduct(con_scale_);
  const SparseMatrix hx = p_.hessian(full_x(y), obj_scale_, lam);
  if (hx.rows() != p_.n_vars || hx.cols() != p_.n_vars) {
    throw std::invalid_argument("NlpProblem: hessian size");
  }
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(hx.nonZeros()));
  for (int col = 0; col < hx.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(hx, col); it; ++it) {
      if (it.row() < it.col()) continue;
      const auto r = x_to_y_[static_cast<std::size_t>(it.row())];
      const auto c = x_to_y_[static_cast<std::size_t>(it.col())];
      if (r < 0 || c < 0) continue;
      // Free-variable order preserves x order, so r >= c still holds.
      t.emplace_back(static_cast<int>(r), static_cast<int>(c), it.value());
    }
  }
  SparseMatrix w(dim_, dim_);
  w.setFromTriplets(t.begin(), t.end());
  return w;
}

double InteriorPoint::barrier(const Vector& y, double f) const {
  double phi = f;
  for (Eigen::Index i = 0; i < dim_; ++i) {
    const auto u = static_cast<std::size_t>(i);
    if (has_lo_[u]) phi -= mu_ * std::log(y[i] - lo_[i]);
    if (has_hi_[u]) phi -= mu_ * std::log(hi_[i] - y[i]);
  }
  return phi;
}

Vector InteriorPoint::barrier_grad(const Vector& y, const Vector& grad) const {
  Vector g = grad;
  for (Eigen::Index i = 0; i < dim_; ++i) {
    const auto u = static_cast<std::size_t>(i);
    if (has_lo_[u]) g[i] -= mu_ / (y[i] - lo_[i]);
    if (has_hi_[u]) g[i] += mu_ / (hi_[i] - y[i]);
  }
  return g;
}

void InteriorPoint::push_interior(Vector& y) const {
  for (Eigen::Index i = 0; i < dim_; ++i) {
    const auto u = static_cast<std::size_t>(i);
    const double l = lo_[i], h = hi_[i];
    if (has_lo_[u] && has_hi_[u]) {
      const double pl = std::min(kBoundPush * std::max(1.0, std::abs(l)), kBoundPush * (h - l));
      const double ph = std::min(kBoundPush * std::max(1.0, std::abs(h)), kBoundPush * (h - l));
      y[i] = std::clamp(y[i], l + pl, h - ph);
    } else if (has_lo_[u]) {
      y[i] = std::max(y[i], l + kBoundPush * std::max(1.0, std::abs(l)));
    } else if (has_hi_[u]) {
      y[i] = std::min(y[i], h - kBoundPush * std::max(1.0, std::abs(h)));
    }
  }
}

Vector InteriorPoint::sigma() const {
  Vector s = Vector::Zero(dim_);
  for (Eigen::Index i = 0; i < dim_; ++i) {
    const auto u = static_cast<std::size_t>(i);
    if (has_lo_[u]) s[i] += zl_[i] / (y_[i] - lo_[i]);
    if (has_hi_[u]) s[i] += zu_[i] / (hi_[i] - y_[i]);
  }
  return s;
}

bool InteriorPoint::factor_kkt(const SparseMatrix& w, const SparseMatrix& jac,
                               const Vector& sig) {
  const double dc = kDcBase;
  auto good = [&] {
    const auto& in = kkt_.inertia();
    return in.zero == 0 && in.positive == dim_ && in.negative == m_;
  };
  if (kkt_.factorize(w, jac, sig, 0.0, dc) && good()) return true;
  double dw = dw_last_ == 0.0 ? 1e-4 : std::max(1e-20, dw_last_ / 3.0);
  const double grow = dw_last_ == 0.0 ? 100.0 : 8.0;
  while (dw < 1e40) {
    if (kkt_.factorize(w, jac, sig, dw, dc) && good()) {
      dw_last_ = dw;
      return true;
    }
    dw *= grow;
  }
  return false;
}

double InteriorPoint::max_step(const Vector& v, const Vector& dv, const Vector& lo,
                               const Vector& hi, double tau) const {
  double alpha = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const auto u = static_cast<std::size_t>(i);
    if (dv[i] < 0.0 && has_lo_[u]) alpha = std::min(alpha, -tau * (v[i] - lo[i]) / dv[i]);
    if (dv[i] > 0.0 && has_hi_[u]) alpha = std::min(alpha, tau * (hi[i] - v[i]) / dv[i]);
  }
  return alpha;
}

double InteriorPoint::max_dual_step(const Vector& dzl, const Vector& dzu, double tau) const {
  double alpha = 1.0;
  for (Eigen::Index i = 0; i < dim_; ++i) {
    const auto u = static_cast<std::size_t>(i);
    if (has_lo_[u] && dzl[i] < 0.0) alpha = std::min(alpha, -tau * zl_[i] / dzl[i]);
    if (has_hi_[u] && dzu[i] < 0.0) alpha = std::min(alpha, -tau * zu_[i] / dzu[i]);
  }
  return alpha;
}

void InteriorPoint::init_multipliers(const Vector& grad, const SparseMatrix& jac) {
  lambda_ = Vector::Zero(m_);
  if (m_ == 0) return;
  // Least-squares estimate from [I J^T; J 0].
  if (!kkt_.factorize(SparseMatrix(dim_, dim_), jac, Vector::Ones(dim_), 0.0, kDcBase)) return;
  Vector rhs(dim_ + m_);
  rhs.head(dim_) = -(grad - zl_ + zu_);
  rhs.tail(m_).setZero();
  Vector sol;
  if (!kkt_.solve(rhs, sol)) return;
  lambda_ = sol.tail(m_);
  if (lambda_.lpNorm<Eigen::Infinity>() > 1e3) lambda_.setZero();
}

double InteriorPoint::kkt_error(double mu, const Vector& grad, const SparseMatrix& jac,
                                const Vector& c, double* primal) const {
  Vector dual = grad - zl_ + zu_;
  if (m_ > 0) dual += jac.transpose() * lambda_;
  double comp = 0.0;
  double zsum = 0.0;
  Eigen::Index nz = 0;
  for (Eigen::Index i = 0; i < dim_; ++i) {
    const auto u = static_cast<std::size_t>(i);
    if (has_lo_[u]) {
      comp = std::max(comp, std::abs((y_[i] - lo_[i]) * zl_[i] - mu));
      zsum += std::abs(zl_[i]);
      ++nz;
    }
    if (has_hi_[u]) {
      comp = std::max(comp, std::abs((hi_[i] - y_[i]) * zu_[i] - mu));
      zsum += std::abs(zu_[i]);
      ++nz;
    }
  }
  constexpr double smax = 100.0;
  const double denom_d = static_cast<double>(m_ + nz);
  const double sd =
      denom_d > 0 ? std::max(smax, (lambda_.lpNorm<1>() + zsum) / denom_d) / smax : 1.0;
  const double sc = nz > 0 ? std::max(smax, zsum / static_cast<double>(nz)) / smax : 1.0;
  const double pr = m_ > 0 ? c.lpNorm<Eigen::Infinity>() : 0.0;
  if (primal) *primal = pr;
  const double du = dim_ > 0 ? dual.lpNorm<Eigen::Infinity>() : 0.0;
  return std::max({du / sd, pr, comp / sc});
}

NlpStatus InteriorPoint::restore(double& f, Vector& c) {
  // Elastic l1 problem on the scaled constraints:
  //   min rho * sum(p + n) + zeta/2 |D (x - x_r)|^2
  //   s.t. lo <= s_k c_k(x) - p_k + n_k <= hi,  p, n >= 0,  bounds on x.
  ++restorations_;
  const Eigen::Index n = p_.n_vars;
  const Vector xr = full_x(y_);
  const Vector cx = p_.constraints(xr);
  const double zeta = std::sqrt(mu_);
  Vector dr(n);
  for (Eigen::Index i = 0; i < n; ++i) dr[i] = std::min(1.0, 1.0 / std::max(1e-12, std::abs(xr[i])));
  const Vector scale = con_scale_;
  const Eigen::Index m = m_;
  const NlpProblem& base = p_;

  NlpProblem r;
  r.n_vars = n + 2 * m;
  r.n_cons = m;
  r.var_lo.resize(r.n_vars);
  r.var_hi.resize(r.n_vars);
  r.var_lo.head(n) = p_.var_lo;
  r.var_hi.head(n) = p_.var_hi;
  r.var_lo.tail(2 * m).setZero();
  r.var_hi.tail(2 * m).setConstant(kInf);
  r.con_lo = scale.cwiseProduct(p_.con_lo);
  r.con_hi = scale.cwiseProduct(p_.con_hi);
  for (Eigen::Index k = 0; k < m; ++k) {
    if (!finite_bound(p_.con_lo[k])) r.con_lo[k] = -kInf;
    if (!finite_bound(p_.con_hi[k])) r.con_hi[k] = kInf;
  }
  r.x0.resize(r.n_vars);
  r.x0.head(n) = xr;
  for (Eigen::Index k = 0; k < m; ++k) {
    const double ck = scale[k] * cx[k];
    const double below = std::max(0.0, r.con_lo[k] - ck);
    const double above = std::max(0.0, ck - r.con_hi[k]);
    r.x0[n + k] = above + mu_;
    r.x0[n + m + k] = below + mu_;
  }
  r.objective = [=](const Vector& z) {
    const Vector d = dr.cwiseProduct(z.head(n) - xr);
    return kRho * z.tail(2 * m).sum() + 0.5 * zeta * d.squaredNorm();
  };
  r.gradient = [=](const Vector& z) {
    Vector g(n + 2 * m);
    g.head(n) = zeta * dr.cwiseProduct(dr).cwiseProduct(z.head(n) - xr);
    g.tail(2 * m).setConstant(kRho);
    return g;
  };
  r.constraints = [=, &base](const Vector& z) {
    Vector cz = scale.cwiseProduct(base.constraints(z.head(n)));
    cz += z.segment(n + m, m) - z.segment(n, m);
    return cz;
  };
  r.jacobian = [=, &base](const Vector& z) {
    const SparseMatrix jx = base.jacobian(z.head(n));
    std::vector<Triplet> t;
    t.reserve(static_cast<std::size_t>(jx.nonZeros() + 2 * m));
    for (int col = 0; col < jx.outerSize(); ++col) {
      for (SparseMatrix::InnerIterator it(jx, col); it; ++it) {
        t.emplace_back(it.row(), col, scale[it.row()] * it.value());
      }
    }
    for (Eigen::Index k = 0; k < m; ++k) {
      t.emplace_back(static_cast<int>(k), static_cast<int>(n + k), -1.0);
      t.emplace_back(static_cast<int>(k), static_cast<int>(n + m + k), 1.0);
    }
    SparseMatrix j(m, n + 2 * m);
    j.setFromTriplets(t.begin(), t.end());
    return j;
  };
  r.hessian = [=, &base](const Vector& z, double w, const Vector& lam) {
    const SparseMatrix hx = base.hessian(z.head(n), 0.0, lam.cwiseProduct(scale));
    std::vector<Triplet> t;
    t.reserve(static_cast<std::size_t>(hx.nonZeros() + n));
    for (int col = 0; col < hx.outerSize(); ++col) {
      for (SparseMatrix::InnerIterator it(hx, col); it; ++it) {
        if (it.row() >= it.col()) t.emplace_back(it.row(), col, it.value());
      }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      t.emplace_back(static_cast<int>(i), static_cast<int>(i), w * zeta * dr[i] * dr[i]);
    }
    SparseMatrix h(n + 2 * m, n + 2 * m);
    h.setFromTriplets(t.begin(), t.end());
    return h;
  };

  NlpOptions ro = opt_;
  ro.restoration = false;
  ro.max_iter = std::max(50, opt_.max_iter - iter_);
  ro.mu_init = std::max(mu_, 1e-2);
  ro.verbosity = opt_.verbosity > 2 ? opt_.verbosity : 0;
  const NlpResult rr = solve(r, ro);
  iter_ += rr.iterations;
  if (opt_.verbosity >= 2) {
    std::fprintf(stderr, "  restoration: %s after %d iterations, violation %.3e\n",
                 std::string(to_string(rr.status)).c_str(), rr.iterations,
                 constraint_violation(p_, rr.x.head(n)));
  }
  if (rr.status == NlpStatus::numeric_failure) return NlpStatus::numeric_failure;

  const Vector xn = rr.x.head(n);
  const double viol = constraint_violation(p_, xn);
  if (rr.status == NlpStatus::optimal && viol > std::max(opt_.feas_tol, 1e-6) * 10.0) {
    return NlpStatus::infeasible;
  }
  if (rr.status != NlpStatus::optimal && viol > opt_.feas_tol * 10.0) {
    return rr.status;
  }

  for (Eigen::Index i = 0; i < n_free_; ++i) y_[i] = xn[free_[static_cast<std::size_t>(i)]];
  const Vector cn = p_.constraints(xn);
  for (Eigen::Index k = 0; k < m_; ++k) {
    const auto s = slack_of_[static_cast<std::size_t>(k)];
    if (s >= 0) y_[s] = con_scale_[k] * cn[k];
  }
  push_interior(y_);
  for (Eigen::Index i = 0; i < dim_; ++i) {
    const auto u = static_cast<std::size_t>(i);
    zl_[i] = has_lo_[u] ? std::min(1e3, mu_ / (y_[i] - lo_[i])) : 0.0;
    zu_[i] = has_hi_[u] ? std::min(1e3, mu_ / (hi_[i] - y_[i])) : 0.0;
  }
  if (!eval_point(y_, f, c)) return NlpStatus::numeric_failure;
  init_multipliers(eval_grad(y_), eval_jac(y_));
  return NlpStatus::optimal;
}

void InteriorPoint::log(int it, double f, double theta, double err, double alpha) const {
  if (opt_.verbosity < 2) return;
  std::fprintf(stderr, "%4d  f=% .8e  theta=%.3e  err=%.3e  mu=%.2e  alpha=%.3e  dw=%.1e\n", it,
               f / obj_scale_, theta, err, mu_, alpha, dw_last_);
}

NlpResult InteriorPoint::fail(const char* why, double err) {
  if (opt_.verbosity >= 1) std::fprintf(stderr, "nlp: %s\n", why);
  return finish(NlpStatus::numeric_failure, err);
}

NlpResult InteriorPoint::finish(NlpStatus status, double err) {
  NlpResult res;
  if (lambda_.size() != m_) lambda_ = Vector::Zero(m_);
  res.status = status;
  // Clip onto the original box unless that costs feasibility in the rows.
  const Vector raw = full_x(y_);
  Vector x = raw;
  for (Eigen::Index i = 0; i < p_.n_vars; ++i) x[i] = std::clamp(x[i], p_.var_lo[i], p_.var_hi[i]);
  double viol = constraint_violation(p_, x);
  if (viol > opt_.feas_tol) {
    const double raw_viol = constraint_violation(p_, raw);
    if (raw_viol < viol) {
      x = raw;
      viol = raw_viol;
    }
  }
  res.x = x;
  res.obj = p_.objective(x);
  res.kkt_residual = err;
  res.constraint_violation = viol;
  res.iterations = iter_;
  res.multipliers = m_ > 0 ? Vector(lambda_.cwiseProduct(con_scale_) / obj_scale_) : Vector();
  if (res.status == NlpStatus::optimal &&
      !(res.constraint_violation <= opt_.feas_tol && std::isfinite(res.obj))) {
    res.status = NlpStatus::numeric_failure;
  }
  if (opt_.verbosity >= 1) {
    std::fprintf(stderr, "nlp: %s after %d iterations, obj %.10g, kkt %.3e, violation %.3e\n",
                 std::string(to_string(res.status)).c_str(), res.iterations, res.obj, err,
                 res.constraint_violation);
  }
  return res;
}

NlpResult InteriorPoint::run() {
  setup();
  for (Eigen::Index i = 0; i < p_.n_vars; ++i) {
    if (p_.var_lo[i] > p_.var_hi[i]) {
      y_ = Vector::Zero(dim_);
      lambda_ = Vector::Zero(m_);
      return finish(NlpStatus::infeasible, kInf);
    }
  }
  for (Eigen::Index k = 0; k < m_; ++k) {
    if (p_.con_lo[k] > p_.con_hi[k]) {
      y_ = Vector::Zero(dim_);
      for (Eigen::Index i = 0; i < n_free_; ++i) y_[i] = x_template_[free_[static_cast<std::size_t>(i)]];
      lambda_ = Vector::Zero(m_);
      return finish(NlpStatus::infeasible, kInf);
    }
  }

  mu_ = opt_.mu_init;
  y_ = Vector::Zero(dim_);
  for (Eigen::Index i = 0; i < n_free_; ++i) y_[i] = x_template_[free_[static_cast<std::size_t>(i)]];
  if (m_ > 0) {
    const Vector c0 = p_.constraints(x_template_);
    for (Eigen::Index k = 0; k < m_; ++k) {
      const auto s = slack_of_[static_cast<std::size_t>(k)];
      if (s >= 0) y_[s] = std::isfinite(c0[k]) ? con_scale_[k] * c0[k] : 0.0;
    }
  }
  push_interior(y_);
  zl_ = Vector::Zero(dim_);
  zu_ = Vector::Zero(dim_);
  for (Eigen::Index i = 0; i < dim_; ++i) {
    if (has_lo_[static_cast<std::size_t>(i)]) zl_[i] = 1.0;
    if (has_hi_[static_cast<std::size_t>(i)]) zu_[i] = 1.0;
  }

  double f = 0.0;
  Vector c;
  if (!eval_point(y_, f, c)) return fail("non-finite values at the starting point", kInf);
  Vector grad = eval_grad(y_);
  SparseMatrix jac = eval_jac(y_);
  if (!grad.allFinite()) return fail("non-finite gradient at the starting point", kInf);
  init_multipliers(grad, jac);

  const double theta0 = c.lpNorm<1>();
  const double theta_max = 1e4 * std::max(1.0, theta0);
  const double theta_min = 1e-4 * std::max(1.0, theta0);
  Filter filter;
  filter.reset(theta_max);
  const double mu_min = opt_.opt_tol / 10.0;
  double tau = std::max(kTauMin, 1.0 - mu_);
  int tiny_steps = 0;
  double err0 = kInf;

  while (true) {
    double primal = 0.0;
    err0 = kkt_error(0.0, grad, jac, c, &primal);
    if (err0 <= opt_.opt_tol) {
      const double viol = constraint_violation(p_, full_x(y_));
      if (viol <= opt_.feas_tol) return finish(NlpStatus::optimal, err0);
    }
    if (iter_ >= opt_.max_iter) return finish(NlpStatus::iteration_limit, err0);

    // Monotone barrier update.
    bool mu_changed = false;
    while (mu_ > mu_min && (kkt_error(mu_, grad, jac, c) <= kKappaEps * mu_ || tiny_steps >= 2)) {
      mu_ = std::max(mu_min, std::min(kKappaMu * mu_, std::pow(mu_, kThetaMu)));
      tau = std::max(kTauMin, 1.0 - mu_);
      mu_changed = true;
      tiny_steps = 0;
    }
    if (mu_changed) filter.reset(theta_max);

    const SparseMatrix w = eval_hess(y_, lambda_);
    if (!w.coeffs().allFinite()) return fail("non-finite hessian", err0);
    const Vector sig = sigma();
    if (!factor_kkt(w, jac, sig)) return fail("inertia correction failed", err0);

    const Vector gphi = barrier_grad(y_, grad);
    Vector rhs(dim_ + m_);
    rhs.head(dim_) = -gphi;
    if (m_ > 0) {
      rhs.head(dim_) -= jac.transpose() * lambda_;
      rhs.tail(m_) = -c;
    }
    Vector sol;
    if (!kkt_.solve(rhs, sol)) {
      // Treat an inaccurate solve as near-singularity and regularize harder.
      dw_last_ = std::max(dw_last_ * 100.0, 1e-4);
      if (!kkt_.factorize(w, jac, sig, dw_last_, 1e-6)) return fail("inertia correction failed", err0);
      kkt_.solve(rhs, sol);
      if (!sol.allFinite()) return fail("inaccurate linear solve", err0);
    }
    const Vector dy = sol.head(dim_);
    const Vector dlam = sol.tail(m_);
    Vector dzl = Vector::Zero(dim_), dzu = Vector::Zero(dim_);
    for (Eigen::Index i = 0; i < dim_; ++i) {
      const auto u = static_cast<std::size_t>(i);
      if (has_lo_[u]) {
        const double s = y_[i] - lo_[i];
        dzl[i] = mu_ / s - zl_[i] - zl_[i] / s * dy[i];
      }
      if (has_hi_[u]) {
        const double s = hi_[i] - y_[i];
        dzu[i] = mu_ / s - zu_[i] + zu_[i] / s * dy[i];
      }
    }

    const double alpha_max = max_step(y_, dy, lo_, hi_, tau);
    const double alpha_z = max_dual_step(dzl, dzu, tau);
    const double theta = c.lpNorm<1>();
    const double phi = barrier(y_, f);
    const double gd = gphi.dot(dy);

    // Tiny step: accept without line search.
    double rel = 0.0;
    for (Eigen::Index i = 0; i < dim_; ++i) rel = std::max(rel, std::abs(dy[i]) / (1.0 + std::abs(y_[i])));
    const bool tiny = rel < 10.0 * std::numeric_limits<double>::epsilon();

    double alpha_min;
    if (gd < 0.0 && theta <= theta_min) {
      alpha_min = kGammaAlpha * std::min({kGammaTheta, kGammaPhi * theta / -gd,
                                          kDelta * std::pow(theta, kSTheta) / std::pow(-gd, kSPhi)});
    } else if (gd < 0.0) {
      alpha_min = kGammaAlpha * std::min(kGammaTheta, kGammaPhi * theta / -gd);
    } else {
      alpha_min = kGammaAlpha * kGammaTheta;
    }

    double alpha = alpha_max;
    bool accepted = false;
    bool f_type = false;
    Vector y_new, c_new;
    double f_new = 0.0;
    Vector step = dy;
    auto test = [&](const Vector& yt, double a, const Vector& dir_for_switch) -> bool {
      double ft;
      Vector ct;
      if (!eval_point(yt, ft, ct)) return false;
      const double tt = ct.lpNorm<1>();
      const double pt = barrier(yt, ft);
      if (!std::isfinite(pt)) return false;
      if (!filter.acceptable(tt, pt)) return false;
      const double gds = gphi.dot(dir_for_switch);
      const bool switching = gds < 0.0 && a * std::pow(-gds, kSPhi) > kDelta * std::pow(theta, kSTheta);
      bool ok;
      if (switching && theta <= theta_min) {
        ok = pt <= phi + kEtaPhi * a * gds;
        f_type = ok;
      } else {
        ok = tt <= (1.0 - kGammaTheta) * theta || pt <= phi - kGammaPhi * theta;
        f_type = false;
      }
      if (ok) {
        y_new = yt;
        c_new = std::move(ct);
        f_new = ft;
      }
      return ok;
    };

    if (tiny) {
      y_new = y_ + alpha_max * dy;
      if (!eval_point(y_new, f_new, c_new)) return fail("non-finite values after a tiny step", err0);
      accepted = true;
      f_type = true;
      ++tiny_steps;
    } else {
      tiny_steps = 0;
      bool first = true;
      while (alpha >= alpha_min) {
        const Vector yt = y_ + alpha * dy;
        if (test(yt, alpha, dy)) {
          accepted = true;
          break;
        }
        if (first) {
          first = false;
          // Second-order correction.
          double ft;
          Vector ct;
          if (eval_point(yt, ft, ct) && ct.lpNorm<1>() >= theta) {
            Vector c_soc = alpha * c + ct;
            double theta_old = theta;
            double alpha_soc = alpha;
            for (int k = 0; k < kMaxSoc; ++k) {
              Vector rs(dim_ + m_);
              rs.head(dim_) = rhs.head(dim_);
              rs.tail(m_) = -c_soc;
              Vector ss;
              if (!kkt_.solve(rs, ss)) break;
              const Vector dsoc = ss.head(dim_);
              alpha_soc = max_step(y_, dsoc, lo_, hi_, tau);
              const Vector ysoc = y_ + alpha_soc * dsoc;
              if (test(ysoc, alpha, dy)) {
                accepted = true;
                step = dsoc;
                alpha = alpha_soc;
                break;
              }
              double fs;
              Vector cs;
              if (!eval_point(ysoc, fs, cs)) break;
              const double theta_soc = cs.lpNorm<1>();
              if (theta_soc > kKappaSoc * theta_old) break;
              theta_old = theta_soc;
              c_soc = alpha_soc * c_soc + cs;
            }
            if (accepted) break;
          }
        }
        alpha *= 0.5;
      }
    }

    if (!accepted) {
      if (!opt_.restoration || restorations_ >= kMaxRestorations) {
        return fail(opt_.restoration ? "too many restoration phases" : "line search failed", err0);
      }
      if (opt_.verbosity >= 2) std::fprintf(stderr, "  entering restoration\n");
      filter.add((1.0 - kGammaTheta) * theta, phi - kGammaPhi * theta);
      const NlpStatus st = restore(f, c);
      if (st != NlpStatus::optimal) return finish(st, err0);
      grad = eval_grad(y_);
      jac = eval_jac(y_);
      filter.reset(theta_max);
      ++iter_;
      continue;
    }

    if (!f_type) filter.add((1.0 - kGammaTheta) * theta, phi - kGammaPhi * theta);
    y_ = y_new;
    c = c_new;
    f = f_new;
    lambda_ += alpha * dlam;
    zl_ += alpha_z * dzl;
    zu_ += alpha_z * dzu;
    for (Eigen::Index i = 0; i < dim_; ++i) {
      const auto u = static_cast<std::size_t>(i);
      if (has_lo_[u]) {
        const double s = y_[i] - lo_[i];
        zl_[i] = std::clamp(zl_[i], mu_ / (kKappaSigma * s), kKappaSigma * mu_ / s);
      }
      if (has_hi_[u]) {
        const double s = hi_[i] - y_[i];
        zu_[i] = std::clamp(zu_[i], mu_ / (kKappaSigma * s), kKappaSigma * mu_ / s);
      }
    }
    grad = eval_grad(y_);
    jac = eval_jac(y_);
    if (!grad.allFinite()) return fail("non-finite gradient", err0);
    ++iter_;
    log(iter_, f, c.lpNorm<1>(), err0, alpha);
  }
}

}  // namespace

NlpResult solve(const NlpProblem& problem, const NlpOptions& options) {
  NlpOptions o = options;
  o.verbosity = std::max(o.verbosity, verbosity_from_env());
  InteriorPoint ip(problem, o);
  return ip.run();
}

DerivativeCheck check_derivatives(const NlpProblem& p, const Vector& x, double h,
                                  const Vector& lambda) {
  DerivativeCheck out;
  const Eigen::Index n = p.n_vars;
  const Vector g = p.gradient(x);
  Matrix jd;
  if (p.n_cons > 0) jd = Matrix(p.jacobian(x));
  const Vector lam = lambda.size() == p.n_cons ? lambda : Vector::Ones(p.n_cons);
  Matrix hd = Matrix(p.hessian(x, 1.0, lam));
  // Symmetrize from the lower triangle.
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) hd(i, j) = hd(j, i);
  }
  auto lag_grad = [&](const Vector& z) {
    Vector lg = p.gradient(z);
    if (p.n_cons > 0) lg += p.jacobian(z).transpose() * lam;
    return lg;
  };
  auto rel = [](double a, double fd) { return std::abs(a - fd) / std::max(1.0, std::abs(fd)); };
  for (Eigen::Index i = 0; i < n; ++i) {
    Vector xp = x, xm = x;
    const double hi = h * std::max(1.0, std::abs(x[i]));
    xp[i] += hi;
    xm[i] -= hi;
    const double step = xp[i] - xm[i];  // the representable step, not 2 hi
    const double fd = (p.objective(xp) - p.objective(xm)) / step;
    out.gradient_error = std::max(out.gradient_error, rel(g[i], fd));
    if (p.n_cons > 0) {
      const Vector cd = (p.constraints(xp) - p.constraints(xm)) / step;
      for (Eigen::Index k = 0; k < p.n_cons; ++k) {
        out.jacobian_error = std::max(out.jacobian_error, rel(jd(k, i), cd[k]));
      }
    }
    const Vector hcol = (lag_grad(xp) - lag_grad(xm)) / step;
    for (Eigen::Index k = 0; k < n; ++k) {
      out.hessian_error = std::max(out.hessian_error, rel(hd(k, i), hcol[k]));
    }
  }
  return out;
}

}  // namespace plo
