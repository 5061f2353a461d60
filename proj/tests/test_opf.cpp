#include <doctest.h>
#include <plo/attack.hpp>
#include <plo/opf.hpp>

#include "helpers.hpp"

#include <chrono>
#include <random>

using namespace plo;

TEST_CASE("AC-OPF objectives agree with the reference tool") {
  const auto oracle = testing::fixture("opf_oracle.json")["objective"];
  for (const auto& [name, expected] : oracle.items()) {
    const Network net = testing::load(name.substr(std::string("pglib_opf_").size()));
    const auto t0 = std::chrono::steady_clock::now();
    const OpfSolution sol = solve_ac_opf(net);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    INFO(name);
    REQUIRE(sol.ok());
    CHECK(std::abs(sol.cost - expected.get<double>()) / expected.get<double>() <= 5e-3);
    CHECK(secs < 5.0);
    CHECK(sol.constraint_violation <= 1e-6);
  }
}

TEST_CASE("lossless two-bus dispatch equals the load") {
  const Network net = testing::two_bus(0.0, 0.1);
  const OpfSolution sol = solve_ac_opf(net);
  REQUIRE(sol.ok());
  CHECK(sol.pg[0] == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(sol.cost == doctest::Approx(0.01 * 50 * 50 + 10 * 50).epsilon(1e-6));
  CHECK(check_ac_feasibility(net) == Feasibility::feasible);
}

TEST_CASE("generation deficit is infeasible") {
  const Network net = testing::two_bus(0.01, 0.1, 50.0, 10.0, 40.0);
  CHECK(solve_ac_opf(net).status == NlpStatus::infeasible);
  CHECK(check_ac_feasibility(net) == Feasibility::infeasible);
}

TEST_CASE("high-resistance IEEE-39 is infeasible") {
  Network net = testing::load("case39_epri");
  for (auto& l : net.lines) l.r *= 100.0;
  CHECK(check_ac_feasibility(net) == Feasibility::infeasible);
}

TEST_CASE("solutions balance power at every bus") {
  for (const char* name : {"case30_ieee", "case118_ieee"}) {
    const Network net = testing::load(name);
    const OpfSolution sol = solve_ac_opf(net);
    REQUIRE(sol.ok());
    const auto [dp, dq] = power_mismatch(net, sol.v, sol.theta, sol.pg, sol.qg);
    CHECK(dp.cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(dq.cwiseAbs().maxCoeff() <= 1e-6);
    const auto flows = line_flows(net, sol.v, sol.theta);
    for (std::size_t e = 0; e < flows.size(); ++e) {
      CHECK(flows[e].pf == doctest::Approx(sol.flows[e].pf).epsilon(1e-9));
      const double s = std::hypot(flows[e].pf, flows[e].qf);
      CHECK(s <= net.lines[e].s_max + 1e-6);
    }
    for (std::size_t i = 0; i < net.buses.size(); ++i) {
      CHECK(sol.v[static_cast<Eigen::Index>(i)] >= net.buses[i].v_min - 1e-6);
      CHECK(sol.v[static_cast<Eigen::Index>(i)] <= net.buses[i].v_max + 1e-6);
    }
  }
}

TEST_CASE("base cases pass the feasibility check") {
  for (const char* name : {"case14_ieee", "case39_epri", "case162_ieee_dtc"}) {
    CHECK_MESSAGE(check_ac_feasibility(testing::load(name)) == Feasibility::feasible, name);
  }
}

TEST_CASE("restoration without damage serves everything") {
  const RestorationSolution sol = restore_load(testing::load("case14_ieee"), {});
  CHECK(sol.status == NlpStatus::optimal);
  CHECK(sol.served_fraction == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("restoration islands") {
  const Network net = testing::load("case14_ieee");
  // Bus 8 hangs off bus 7 through line 7-8 alone.
  int cut = -1;
  for (const auto& l : net.lines) {
    if ((l.from_bus == 7 && l.to_bus == 8) || (l.from_bus == 8 && l.to_bus == 7)) cut = l.id;
  }
  REQUIRE(cut >= 0);
  const auto islands = build_restoration(net, {cut});
  REQUIRE(islands.size() == 2);
  for (const auto& isl : islands) {
    REQUIRE(isl.problem);
    const auto slack = isl.network.slack_index();
    CHECK(isl.network.buses[slack].is_slack());
  }
  const RestorationSolution sol = restore_load(net, {cut});
  CHECK(sol.served_fraction == doctest::Approx(1.0).epsilon(1e-6));

  // Isolating a load bus loses its load and nothing else.
  std::set<int> around9;
  for (const auto& l : net.lines) {
    if (l.from_bus == 9 || l.to_bus == 9) around9.insert(l.id);
  }
  const RestorationSolution lost = restore_load(net, around9);
  const double share = net.buses[net.bus_index(9)].pd / net.total_active_load();
  CHECK(lost.served_fraction <= 1.0 - share + 1e-6);
}

TEST_CASE("more damage never restores more load") {
  const Network net = testing::load("case39_epri");
  const OpfSolution opf = solve_ac_opf(net);
  REQUIRE(opf.ok());
  double last = 1.0;
  for (double k : {2.0, 5.0, 10.0, 15.0, 20.0}) {
    const double served = restore_load(net, flow_attack(net, opf, k)).served_fraction;
    CHECK(served <= last + 1e-4);
    last = served;
  }
}

TEST_CASE("restoration is insensitive to the starting point") {
  const Network net = testing::load("case39_epri");
  const auto damaged = flow_attack(net, 10.0);
  std::mt19937_64 rng(7);
  for (const auto& isl : build_restoration(net, damaged)) {
    if (!isl.problem || isl.buses.size() < 2) continue;
    const NlpResult base = solve(*isl.problem);
    REQUIRE(base.ok());
    for (int start = 0; start < 4; ++start) {
      NlpProblem p = *isl.problem;
      for (Eigen::Index i = 0; i < p.n_vars; ++i) {
        // Interior of the box, angles within half a radian.
        const double lo = std::max(p.var_lo[i], -0.5), hi = std::min(p.var_hi[i], 1.5);
        const double pad = 0.05 * (hi - lo);
        if (lo < hi) p.x0[i] = std::uniform_real_distribution<double>(lo + pad, hi - pad)(rng);
      }
      const NlpResult r = solve(p);
      INFO(to_string(r.status), " start ", start);
      REQUIRE(r.ok());
      CHECK(r.obj == doctest::Approx(base.obj).epsilon(1e-4));
    }
  }
}

TEST_CASE("OPF JSON export") {
  const Network net = testing::load("case14_ieee");
  const OpfSolution sol = solve_ac_opf(net);
  const auto j = to_json(sol, net);
  CHECK(j["status"] == "optimal");
  CHECK(j["buses"].size() == 14);
  CHECK(j["generators"].size() == 5);
}
