#include <plo/opf.hpp>

#include <algorithm>
#include <map>

#include "ac_model.hpp"

namespace plo {

using detail::AcModel;
using detail::AcModelSpec;
using detail::ModelObjective;

std::vector<LineFlow> line_flows(const Network& net, const Vector& v, const Vector& theta) {
  std::vector<LineFlow> out;
  out.reserve(net.lines.size());
  for (const auto& line : net.lines) {
    const auto f = static_cast<Eigen::Index>(net.bus_index(line.from_bus));
    const auto t = static_cast<Eigen::Index>(net.bus_index(line.to_bus));
    const auto [g, b] = admittance(line);
    // Complex form: I_f = (y + j bc/2) V_f / tap^2 - y V_t / conj(tap e^{j shift}).
    using C = std::complex<double>;
    const C y(g, b);
    const C vf = std::polar(v[f], theta[f]);
    const C vt = std::polar(v[t], theta[t]);
    const C tap = std::polar(line.tap, line.shift);
    const C ysh(0.0, 0.5 * line.charging);
    const C i_f = (y + ysh) * vf / (line.tap * line.tap) - y * vt / std::conj(tap);
    const C i_t = (y + ysh) * vt - y * vf / tap;
    const C sf = vf * std::conj(i_f);
    const C st = vt * std::conj(i_t);
    out.push_back({sf.real(), sf.imag(), st.real(), st.imag()});
  }
  return out;
}

std::pair<Vector, Vector> power_mismatch(const Network& net, const Vector& v, const Vector& theta,
                                         const Vector& pg, const Vector& qg) {
  const auto nb = static_cast<Eigen::Index>(net.buses.size());
  Vector p = Vector::Zero(nb), q = Vector::Zero(nb);
  for (Eigen::Index i = 0; i < nb; ++i) {
    const auto& bus = net.buses[static_cast<std::size_t>(i)];
    p[i] = -bus.pd - bus.gs * v[i] * v[i];
    q[i] = -bus.qd + bus.bs * v[i] * v[i];
  }
  for (std::size_t k = 0; k < net.generators.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(net.bus_index(net.generators[k].bus));
    p[i] += pg[static_cast<Eigen::Index>(k)];
    q[i] += qg[static_cast<Eigen::Index>(k)];
  }
  const auto flows = line_flows(net, v, theta);
  for (std::size_t e = 0; e < net.lines.size(); ++e) {
    const auto f = static_cast<Eigen::Index>(net.bus_index(net.lines[e].from_bus));
    const auto t = static_cast<Eigen::Index>(net.bus_index(net.lines[e].to_bus));
    p[f] -= flows[e].pf;
    q[f] -= flows[e].qf;
    p[t] -= flows[e].pt;
    q[t] -= flows[e].qt;
  }
  return {p, q};
}

NlpProblem build_ac_opf(const Network& net) { return AcModel(net, {}).problem(); }

namespace {

OpfSolution unpack(const Network& net, const AcModel& model, const NlpResult& r) {
  OpfSolution sol;
  sol.status = r.status;
  sol.iterations = r.iterations;
  sol.constraint_violation = r.constraint_violation;
  const auto nb = net.buses.size(), ng = net.generators.size();
  sol.v.resize(static_cast<Eigen::Index>(nb));
  sol.theta.resize(static_cast<Eigen::Index>(nb));
  sol.pg.resize(static_cast<Eigen::Index>(ng));
  sol.qg.resize(static_cast<Eigen::Index>(ng));
  for (std::size_t i = 0; i < nb; ++i) {
    sol.v[static_cast<Eigen::Index>(i)] = r.x[model.v_index(0, i)];
    sol.theta[static_cast<Eigen::Index>(i)] = r.x[model.theta_index(0, i)];
  }
  for (std::size_t k = 0; k < ng; ++k) {
    sol.pg[static_cast<Eigen::Index>(k)] = r.x[model.pg_index(0, k)];
    sol.qg[static_cast<Eigen::Index>(k)] = r.x[model.qg_index(0, k)];
  }
  sol.flows = line_flows(net, sol.v, sol.theta);
  sol.cost = model.cost(r.x, 0);
  return sol;
}

}  // namespace

OpfSolution solve_ac_opf(const Network& net, const NlpOptions& options) {
  const AcModel model(net, {});
  return unpack(net, model, solve(model.problem(), options));
}

std::string_view to_string(Feasibility f) {
  switch (f) {
    case Feasibility::feasible: return "feasible";
    case Feasibility::infeasible: return "infeasible";
    case Feasibility::numeric_failure: return "numeric_failure";
  }
  return "unknown";
}

NlpProblem build_ac_feasibility(const Network& net) {
  AcModelSpec spec;
  spec.objective = ModelObjective::none;
  return AcModel(net, spec).problem();
}

Feasibility check_ac_feasibility(const Network& net, const NlpOptions& options,
                                 const OpfSolution* start) {
  AcModelSpec spec;
  spec.objective = ModelObjective::none;
  const AcModel model(net, spec);
  const NlpProblem p = model.problem();
  const auto nb = static_cast<Eigen::Index>(net.buses.size());
  const auto ng = static_cast<Eigen::Index>(net.generators.size());
  if (start && start->v.size() == nb && start->theta.size() == nb && start->pg.size() == ng &&
      start->qg.size() == ng) {
    NlpProblem warm = p;
    for (std::size_t i = 0; i < net.buses.size(); ++i) {
      warm.x0[model.v_index(0, i)] = start->v[static_cast<Eigen::Index>(i)];
      warm.x0[model.theta_index(0, i)] = start->theta[static_cast<Eigen::Index>(i)];
    }
    for (std::size_t k = 0; k < net.generators.size(); ++k) {
      warm.x0[model.pg_index(0, k)] = start->pg[static_cast<Eigen::Index>(k)];
      warm.x0[model.qg_index(0, k)] = start->qg[static_cast<Eigen::Index>(k)];
    }
    const bool in_box = ((warm.x0 - warm.var_lo).array() >= -options.feas_tol).all() &&
                        ((warm.var_hi - warm.x0).array() >= -options.feas_tol).all();
    if (in_box && constraint_violation(warm, warm.x0) <= options.feas_tol) return Feasibility::feasible;
    const NlpResult r = solve(warm, options);
    if (r.ok() && r.constraint_violation <= options.feas_tol) return Feasibility::feasible;
  }
  // A pure feasibility problem has no objective to steer the barrier path, so
  // a stalled solve is retried closer to the boundary before falling back to
  // the OPF itself.
  for (double mu0 : {options.mu_init, 1e-3}) {
    NlpOptions o = options;
    o.mu_init = mu0;
    const NlpResult r = solve(p, o);
    if (r.constraint_violation <= options.feas_tol &&
        (r.status == NlpStatus::optimal || r.status == NlpStatus::iteration_limit)) {
      return Feasibility::feasible;
    }
    if (r.status == NlpStatus::infeasible) return Feasibility::infeasible;
  }
  const OpfSolution opf = solve_ac_opf(net, options);
  if (opf.ok()) return Feasibility::feasible;
  if (opf.status == NlpStatus::infeasible) return Feasibility::infeasible;
  return Feasibility::numeric_failure;
}

std::vector<RestorationIsland> build_restoration(const Network& net,
                                                 const std::set<int>& damaged) {
  std::vector<bool> active(net.lines.size(), true);
  for (std::size_t e = 0; e < net.lines.size(); ++e) {
    if (damaged.count(net.lines[e].id)) active[e] = false;
  }
  const auto comp = connected_components(net, active);
  const int n_comp = comp.empty() ? 0 : *std::max_element(comp.begin(), comp.end()) + 1;

  std::vector<RestorationIsland> islands(static_cast<std::size_t>(n_comp));
  for (std::size_t i = 0; i < net.buses.size(); ++i) {
    auto& isl = islands[static_cast<std::size_t>(comp[i])];
    isl.buses.push_back(i);
    isl.network.buses.push_back(net.buses[i]);
  }
  for (std::size_t e = 0; e < net.lines.size(); ++e) {
    if (!active[e]) continue;
    const auto c = comp[net.bus_index(net.lines[e].from_bus)];
    islands[static_cast<std::size_t>(c)].network.lines.push_back(net.lines[e]);
  }
  for (std::size_t k = 0; k < net.generators.size(); ++k) {
    const auto c = comp[net.bus_index(net.generators[k].bus)];
    islands[static_cast<std::size_t>(c)].generators.push_back(k);
    islands[static_cast<std::size_t>(c)].network.generators.push_back(net.generators[k]);
  }

  for (auto& isl : islands) {
    Network& sub = isl.network;
    sub.name = net.name;
    sub.base_mva = net.base_mva;
    isl.load_index.assign(isl.buses.size(), -1);
    if (sub.generators.empty()) continue;
    // Reference at the generator bus with the largest capacity.
    std::size_t best = 0;
    for (std::size_t k = 1; k < sub.generators.size(); ++k) {
      if (sub.generators[k].p_max > sub.generators[best].p_max) best = k;
    }
    for (auto& bus : sub.buses) {
      if (bus.is_slack()) bus.type = BusType::pv;
    }
    sub.buses[sub.bus_index(sub.generators[best].bus)].type = BusType::ref;
    // Units in a damaged network may be tripped, so zero output is admissible.
    for (auto& gen : sub.generators) {
      gen.p_min = std::min(gen.p_min, 0.0);
      gen.q_min = std::min(gen.q_min, 0.0);
      gen.q_max = std::max(gen.q_max, 0.0);
    }

    AcModelSpec spec;
    spec.objective = ModelObjective::load_served;
    spec.variable_load = true;
    const AcModel model(sub, spec);
    isl.problem = model.problem();
    for (std::size_t i = 0; i < isl.buses.size(); ++i) isl.load_index[i] = model.l_index(0, i);
  }
  return islands;
}

RestorationSolution restore_load(const Network& net, const std::set<int>& damaged,
                                 const NlpOptions& options) {
  const auto nb = static_cast<Eigen::Index>(net.buses.size());
  const auto ng = static_cast<Eigen::Index>(net.generators.size());
  RestorationSolution out;
  out.l = Vector::Zero(nb);
  out.v = Vector::Ones(nb);
  out.theta = Vector::Zero(nb);
  out.pg = Vector::Zero(ng);
  out.qg = Vector::Zero(ng);

  const auto islands = build_restoration(net, damaged);
  for (const auto& isl : islands) {
    if (!isl.problem) continue;
    const NlpResult r = solve(*isl.problem, options);
    if (!r.ok()) {
      if (r.status == NlpStatus::numeric_failure || out.status == NlpStatus::optimal) {
        out.status = r.status;
      }
      continue;
    }
    // Island layout: [v, theta, pg, qg, l] over the island's own buses.
    const auto ib = isl.buses.size();
    const auto ig = isl.generators.size();
    for (std::size_t i = 0; i < ib; ++i) {
      const auto gi = static_cast<Eigen::Index>(isl.buses[i]);
      out.v[gi] = r.x[static_cast<Eigen::Index>(i)];
      out.theta[gi] = r.x[static_cast<Eigen::Index>(ib + i)];
      const auto li = isl.load_index[i];
      out.l[gi] = li >= 0 ? r.x[li] : 1.0;
    }
    for (std::size_t k = 0; k < ig; ++k) {
      const auto gk = static_cast<Eigen::Index>(isl.generators[k]);
      out.pg[gk] = r.x[static_cast<Eigen::Index>(2 * ib + k)];
      out.qg[gk] = r.x[static_cast<Eigen::Index>(2 * ib + ig + k)];
    }
  }
  double served = 0.0, total = 0.0;
  for (Eigen::Index i = 0; i < nb; ++i) {
    const double pd = net.buses[static_cast<std::size_t>(i)].pd;
    served += out.l[i] * pd;
    total += pd;
  }
  out.served_fraction = total != 0.0 ? std::clamp(served / total, 0.0, 1.0) : 1.0;
  return out;
}

nlohmann::json to_json(const OpfSolution& sol, const Network& net) {
  nlohmann::json j;
  j["status"] = std::string(to_string(sol.status));
  j["cost"] = sol.cost;
  j["iterations"] = sol.iterations;
  j["constraint_violation"] = sol.constraint_violation;
  auto& buses = j["buses"] = nlohmann::json::array();
  for (std::size_t i = 0; i < net.buses.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    buses.push_back({{"id", net.buses[i].id}, {"vm", sol.v[ii]}, {"va", sol.theta[ii]}});
  }
  auto& gens = j["generators"] = nlohmann::json::array();
  for (std::size_t k = 0; k < net.generators.size(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    gens.push_back({{"bus", net.generators[k].bus}, {"pg", sol.pg[kk]}, {"qg", sol.qg[kk]}});
  }
  auto& lines = j["lines"] = nlohmann::json::array();
  for (std::size_t e = 0; e < net.lines.size(); ++e) {
    const auto& f = sol.flows[e];
    lines.push_back({{"id", net.lines[e].id},
                     {"pf", f.pf},
                     {"qf", f.qf},
                     {"pt", f.pt},
                     {"qt", f.qt}});
  }
  return j;
}

}  // namespace plo
