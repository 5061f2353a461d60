#pragma once
#include <plo/case_io.hpp>
#include <plo/network.hpp>
#include <plo/nlp.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <string>
#include <utility>

namespace testing {

inline std::string data_file(const std::string& name) {
  return std::string(PLO_DATA_DIR) + "/pglib_opf_" + name + ".m";
}

inline plo::Network load(const std::string& name) {
  return plo::preprocess(plo::read_case_file(data_file(name)));
}

inline nlohmann::json fixture(const std::string& file) {
  std::ifstream in(std::string(PLO_FIXTURE_DIR) + "/" + file);
  return nlohmann::json::parse(in);
}

// Slack generator at bus 1 feeding a load at bus 2 over one line.
inline std::string two_bus_text(double r, double x, double pd_mw, double qd_mvar, double pmax_mw,
                                double smax_mva = 0.0) {
  auto num = [](double v) { return plo::format_double(v); };
  return "function mpc = two_bus\n"
         "mpc.version = '2';\n"
         "mpc.baseMVA = 100;\n"
         "mpc.bus = [\n"
         "  1 3 0 0 0 0 1 1 0 100 1 1.1 0.9;\n"
         "  2 1 " + num(pd_mw) + " " + num(qd_mvar) + " 0 0 1 1 0 100 1 1.1 0.9;\n"
         "];\n"
         "mpc.gen = [\n"
         "  1 0 0 100 -100 1 100 1 " + num(pmax_mw) + " 0;\n"
         "];\n"
         "mpc.branch = [\n"
         "  1 2 " + num(r) + " " + num(x) + " 0 " + num(smax_mva) + " 0 0 0 0 1 -360 360;\n"
         "];\n"
         "mpc.gencost = [\n"
         "  2 0 0 3 0.01 10 0;\n"
         "];\n";
}

inline plo::Network two_bus(double r, double x, double pd_mw = 50.0, double qd_mvar = 10.0,
                            double pmax_mw = 200.0, double smax_mva = 0.0) {
  return plo::preprocess(plo::parse_case(two_bus_text(r, x, pd_mw, qd_mvar, pmax_mw, smax_mva)));
}

// Random point around the start, strictly inside the box, and random multipliers.
inline std::pair<plo::Vector, plo::Vector> random_point(const plo::NlpProblem& p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  plo::Vector x(p.n_vars);
  for (Eigen::Index i = 0; i < p.n_vars; ++i) {
    const double r = 0.1 * std::max(1.0, std::abs(p.x0[i]));
    const double lo = std::max(p.var_lo[i], p.x0[i] - r), hi = std::min(p.var_hi[i], p.x0[i] + r);
    x[i] = 0.5 * (lo + hi) + 0.45 * (hi - lo) * unit(rng);
  }
  plo::Vector lam(p.n_cons);
  for (Eigen::Index k = 0; k < p.n_cons; ++k) lam[k] = unit(rng);
  return {x, lam};
}

}  // namespace testing
