#pragma once
#include <plo/network.hpp>
#include <plo/nlp.hpp>

#include <Eigen/Core>

#include <memory>
#include <optional>
#include <vector>

namespace plo::detail {

/// Active and reactive power leaving each end of a branch, with derivatives
/// with respect to z = (v_f, v_t, theta_f, theta_t, g, b).
struct BranchTerm {
  using Grad = Eigen::Matrix<double, 6, 1>;
  using Hess = Eigen::Matrix<double, 6, 6>;
  double value = 0.0;
  Grad grad = Grad::Zero();
  Hess hess = Hess::Zero();
};

struct BranchFlowTerms {
  BranchTerm pf, qf, pt, qt;
};

/// Pi-model flows of one branch. With `second` false the Hessians are left zero.
BranchFlowTerms branch_flows(const Line& line, double vf, double vt, double tf, double tt,
                             double g, double b, bool second);

enum class ModelObjective {
  cost,                 // dispatch cost, summed over scenarios
  none,                 // feasibility
  load_served,          // maximize served active load
  admittance_distance,  // squared distance of (g, b) to a target
};

struct Scenario {
  Vector pd, qd;  // per bus, p.u.
};

struct AcModelSpec {
  ModelObjective objective = ModelObjective::cost;
  /// Loads per scenario; empty means one scenario with the network loads.
  std::vector<Scenario> scenarios;
  /// Load variables l_i in [0, 1] on every bus with nonzero load.
  bool variable_load = false;
  /// Shared admittance variables (one per line) instead of constants.
  bool variable_admittance = false;
  Vector g_lo, g_hi, b_lo, b_hi;  // bounds when variable
  Vector g_target, b_target;      // distance objective target
  Vector g_start, b_start;        // starting point when variable
  /// Per-scenario bounds on the dispatch cost ($/h); empty means none.
  std::vector<std::pair<double, double>> cost_band;
  /// Optional starting voltages/dispatch for every scenario (from a prior solve).
  std::optional<Vector> v_start, theta_start, pg_start, qg_start;
};

/// Variable layout: for each scenario [v, theta, pg, qg, l], then g, b.
class AcModel {
 public:
  AcModel(const Network& net, AcModelSpec spec);

  NlpProblem problem() const;

  std::size_t num_scenarios() const { return n_scen_; }
  Eigen::Index v_index(std::size_t s, std::size_t bus) const;
  Eigen::Index theta_index(std::size_t s, std::size_t bus) const;
  Eigen::Index pg_index(std::size_t s, std::size_t gen) const;
  Eigen::Index qg_index(std::size_t s, std::size_t gen) const;
  /// -1 when the bus has no load variable.
  Eigen::Index l_index(std::size_t s, std::size_t bus) const;
  Eigen::Index g_index(std::size_t line) const;
  Eigen::Index b_index(std::size_t line) const;
  Eigen::Index num_vars() const { return n_vars_; }

  /// Dispatch cost of scenario s at x.
  double cost(const Vector& x, std::size_t s) const;
  /// (g, b) of a line at x.
  std::pair<double, double> line_admittance(const Vector& x, std::size_t line) const;

  const Network& network() const { return *net_; }

 private:
  struct Data;
  std::shared_ptr<const Data> data_;
  std::shared_ptr<const Network> net_;
  std::size_t n_scen_ = 1;
  Eigen::Index n_vars_ = 0;
  Eigen::Index block_ = 0;
  std::vector<Eigen::Index> l_offset_;
  Eigen::Index n_load_ = 0;
};

}  // namespace plo::detail
