#pragma once
#include <plo/network.hpp>
#include <plo/nlp.hpp>

#include <json.hpp>

#include <optional>
#include <set>
#include <vector>

namespace plo {

/// Power leaving each end of a line (p.u.).
struct LineFlow {
  double pf = 0.0, qf = 0.0;
  double pt = 0.0, qt = 0.0;
};

struct OpfSolution {
  NlpStatus status = NlpStatus::numeric_failure;
  Vector v, theta;  // per bus
  Vector pg, qg;    // per generator
  std::vector<LineFlow> flows;
  double cost = 0.0;  // $/h
  double constraint_violation = 0.0;
  int iterations = 0;

  bool ok() const { return status == NlpStatus::optimal; }
};

/// Line flows recomputed from voltages and the network's line parameters.
std::vector<LineFlow> line_flows(const Network& net, const Vector& v, const Vector& theta);

/// Active and reactive power mismatch per bus (generation minus load, shunt
/// and outgoing flows), recomputed independently of the solver.
std::pair<Vector, Vector> power_mismatch(const Network& net, const Vector& v, const Vector& theta,
                                         const Vector& pg, const Vector& qg);

/// AC-OPF in polar voltage coordinates. Variables per bus (v, theta) and per
/// generator (pg, qg); rows are the bus power balances, squared thermal limits
/// at both ends of rated lines and angle-difference limits. The slack angle is
/// fixed at zero.
NlpProblem build_ac_opf(const Network& net);

/// Solves the AC-OPF from a flat start (v = 1, theta = 0, midpoint dispatch).
OpfSolution solve_ac_opf(const Network& net, const NlpOptions& options = {});

enum class Feasibility { feasible, infeasible, numeric_failure };

std::string_view to_string(Feasibility f);

/// The AC-OPF constraint system with a zero objective.
NlpProblem build_ac_feasibility(const Network& net);

/// Solves build_ac_feasibility, retrying at a smaller initial barrier and then
/// through the OPF itself before reporting a numeric failure. A known operating
/// point (v, theta, pg, qg) is accepted as a certificate when it meets feas_tol,
/// and otherwise serves as the first starting point.
Feasibility check_ac_feasibility(const Network& net, const NlpOptions& options = {},
                                 const OpfSolution* start = nullptr);

/// One connected piece of a damaged network.
struct RestorationIsland {
  Network network;                 // buses, surviving lines and generators of the island
  std::vector<std::size_t> buses;  // positions in the original network
  std::vector<std::size_t> generators;
  std::optional<NlpProblem> problem;  // absent when the island has no generation
  /// Variable index of each island bus's load factor, -1 if the bus has no load.
  std::vector<Eigen::Index> load_index;
};

/// Maximum load restoration after removing `damaged` line ids. Each island is
/// a separate problem with its angle reference at its largest generator; load
/// factors l in [0, 1] scale active and reactive demand together.
std::vector<RestorationIsland> build_restoration(const Network& net, const std::set<int>& damaged);

struct RestorationSolution {
  NlpStatus status = NlpStatus::optimal;  // worst status over islands
  Vector l;                               // per bus load factor
  double served_fraction = 0.0;
  Vector v, theta, pg, qg;
};

RestorationSolution restore_load(const Network& net, const std::set<int>& damaged,
                                 const NlpOptions& options = {});

nlohmann::json to_json(const OpfSolution& sol, const Network& net);

}  // namespace plo
