#include <plo/plo.hpp>

#include <algorithm>
#include <cmath>

#include "ac_model.hpp"

namespace plo {

using detail::AcModel;
using detail::AcModelSpec;
using detail::ModelObjective;

double ObfuscationResult::max_cost_gap() const {
  double gap = 0.0;
  for (std::size_t s = 0; s < o_star.size() && s < cost_out.size(); ++s) {
    gap = std::max(gap, std::abs(cost_out[s] - o_star[s]) / std::abs(o_star[s]));
  }
  return gap;
}

std::pair<double, double> mean_interval(double mu, double lambda_bound) {
  const double a = mu / lambda_bound, c = mu * lambda_bound;
  return {std::min(a, c), std::max(a, c)};
}

Network laplace_obfuscate(const Network& net, const PrivacyParams& p, NoiseSource& noise,
                          NoisyLineData* noisy_out) {
  NoisyLineData noisy = private_line_queries(net, p, noise);
  Network out = with_admittances(net, noisy.g_tilde, noisy.b_tilde);
  if (noisy_out) *noisy_out = std::move(noisy);
  return out;
}

namespace {

AcModelSpec post_processing_spec(const std::vector<Network>& steps,
                                 const std::vector<double>& o_star, const NoisyLineData& noisy,
                                 const PrivacyParams& p, double lambda_bound) {
  if (steps.empty() || steps.size() != o_star.size()) {
    throw std::invalid_argument("post-processing: one o_star per step required");
  }
  const Network& base = steps.front();
  const auto nl = static_cast<Eigen::Index>(base.lines.size());
  const auto nb = static_cast<Eigen::Index>(base.buses.size());
  AcModelSpec spec;
  spec.objective = ModelObjective::admittance_distance;
  spec.variable_admittance = true;
  spec.g_target = noisy.g_tilde;
  spec.b_target = noisy.b_tilde;
  spec.g_lo.resize(nl);
  spec.g_hi.resize(nl);
  spec.b_lo.resize(nl);
  spec.b_hi.resize(nl);
  for (Eigen::Index e = 0; e < nl; ++e) {
    const auto level = noisy.level_of[static_cast<std::size_t>(e)];
    if (noisy.ratios[e] == 0.0) {
      spec.g_lo[e] = spec.g_hi[e] = 0.0;
    } else {
      std::tie(spec.g_lo[e], spec.g_hi[e]) = mean_interval(noisy.mu_g[level], lambda_bound);
    }
    std::tie(spec.b_lo[e], spec.b_hi[e]) = mean_interval(noisy.mu_b[level], lambda_bound);
  }
  spec.g_start = noisy.g_tilde.cwiseMax(spec.g_lo).cwiseMin(spec.g_hi);
  spec.b_start = noisy.b_tilde.cwiseMax(spec.b_lo).cwiseMin(spec.b_hi);
  for (std::size_t s = 0; s < steps.size(); ++s) {
    if (steps[s].buses.size() != base.buses.size() || steps[s].lines.size() != base.lines.size()) {
      throw std::invalid_argument("post-processing: steps must share the topology");
    }
    detail::Scenario sc{Vector(nb), Vector(nb)};
    for (Eigen::Index i = 0; i < nb; ++i) {
      sc.pd[i] = steps[s].buses[static_cast<std::size_t>(i)].pd;
      sc.qd[i] = steps[s].buses[static_cast<std::size_t>(i)].qd;
    }
    spec.scenarios.push_back(std::move(sc));
    const double band = p.beta * std::abs(o_star[s]);
    spec.cost_band.emplace_back(o_star[s] - band, o_star[s] + band);
  }
  return spec;
}

void warm_start(NlpProblem& prob, const AcModel& model, const OpfSolution& opf) {
  const Network& net = model.network();
  for (std::size_t s = 0; s < model.num_scenarios(); ++s) {
    for (std::size_t i = 0; i < net.buses.size(); ++i) {
      prob.x0[model.v_index(s, i)] = opf.v[static_cast<Eigen::Index>(i)];
      prob.x0[model.theta_index(s, i)] = opf.theta[static_cast<Eigen::Index>(i)];
    }
    for (std::size_t k = 0; k < net.generators.size(); ++k) {
      prob.x0[model.pg_index(s, k)] = opf.pg[static_cast<Eigen::Index>(k)];
      prob.x0[model.qg_index(s, k)] = opf.qg[static_cast<Eigen::Index>(k)];
    }
  }
}

// Lands exactly on the noisy values when the solver stopped within roundoff
// of them and that point is still feasible.
void snap_to_noisy(const AcModel& model, const NlpProblem& prob, const NoisyLineData& noisy,
                   double feas_tol, Vector& x) {
  Vector xs = x;
  auto close = [](double a, double t) { return std::abs(a - t) <= 1e-4 * std::max(1.0, std::abs(t)); };
  for (std::size_t e = 0; e < model.network().lines.size(); ++e) {
    const auto ei = static_cast<Eigen::Index>(e);
    const auto gi = model.g_index(e), bi = model.b_index(e);
    const double gt = noisy.g_tilde[ei], bt = noisy.b_tilde[ei];
    if (!close(x[gi], gt) || !close(x[bi], bt)) return;
    if (gt < prob.var_lo[gi] || gt > prob.var_hi[gi] || bt < prob.var_lo[bi] || bt > prob.var_hi[bi]) return;
    xs[gi] = gt;
    xs[bi] = bt;
  }
  if (constraint_violation(prob, xs) <= feas_tol) x = std::move(xs);
}

double norm2(const Vector& v) { return v.norm(); }

}  // namespace

NlpProblem build_post_processing(const std::vector<Network>& steps,
                                 const std::vector<double>& o_star, const NoisyLineData& noisy,
                                 const PrivacyParams& p) {
  const AcModel model(steps.front(), post_processing_spec(steps, o_star, noisy, p, p.lambda_bound));
  return model.problem();
}

bool verify_factor2(const ObfuscationResult& res, const Vector& g, const Vector& b) {
  const double lhs = norm2(res.g_dot - g) + norm2(res.b_dot - b);
  const double rhs = 2.0 * norm2(res.noisy.g_tilde - g) + 2.0 * norm2(res.noisy.b_tilde - b);
  return lhs <= rhs + 1e-8;
}

ObfuscationResult mplo_obfuscate(const std::vector<Network>& nets,
                                 const std::vector<double>& o_stars, const PrivacyParams& p,
                                 const std::vector<std::size_t>& steps, NoiseSource& noise,
                                 const PloOptions& options) {
  p.validate();
  if (steps.empty()) throw std::invalid_argument("mplo: no steps selected");
  if (nets.size() != o_stars.size()) throw std::invalid_argument("mplo: one o_star per network");
  std::vector<Network> chosen;
  std::vector<double> targets;
  for (auto s : steps) {
    if (s >= nets.size()) throw std::out_of_range("mplo: step index out of range");
    chosen.push_back(nets[s]);
    targets.push_back(o_stars[s]);
  }
  const Network& base = chosen.front();

  ObfuscationResult res;
  // The only reads of the raw line data.
  res.noisy = private_line_queries(base, p, noise);
  res.o_star = targets;

  const OpfSolution opf = options.warm_start ? *options.warm_start : solve_ac_opf(base, options.nlp);
  const auto [g, b] = line_admittances(base);

  double lambda = p.lambda_bound;
  for (int attempt = 1; attempt <= 3; ++attempt, lambda *= 2.0) {
    const AcModel model(base, post_processing_spec(chosen, targets, res.noisy, p, lambda));
    NlpProblem prob = model.problem();
    if (opf.v.size() == static_cast<Eigen::Index>(base.buses.size())) warm_start(prob, model, opf);
    NlpResult r = solve(prob, options.nlp);
    if (r.ok()) snap_to_noisy(model, prob, res.noisy, options.nlp.feas_tol, r.x);

    res.attempts = attempt;
    res.iterations += r.iterations;
    res.status = r.status;
    res.lambda_used = lambda;
    const auto nl = static_cast<Eigen::Index>(base.lines.size());
    res.g_dot.resize(nl);
    res.b_dot.resize(nl);
    for (Eigen::Index e = 0; e < nl; ++e) {
      std::tie(res.g_dot[e], res.b_dot[e]) = model.line_admittance(r.x, static_cast<std::size_t>(e));
    }
    res.cost_out.clear();
    for (std::size_t s = 0; s < chosen.size(); ++s) res.cost_out.push_back(model.cost(r.x, s));
    OpfSolution& op = res.operating_point;
    op.status = r.status;
    op.v.resize(static_cast<Eigen::Index>(base.buses.size()));
    op.theta.resize(op.v.size());
    for (std::size_t i = 0; i < base.buses.size(); ++i) {
      op.v[static_cast<Eigen::Index>(i)] = r.x[model.v_index(0, i)];
      op.theta[static_cast<Eigen::Index>(i)] = r.x[model.theta_index(0, i)];
    }
    op.pg.resize(static_cast<Eigen::Index>(base.generators.size()));
    op.qg.resize(op.pg.size());
    for (std::size_t k = 0; k < base.generators.size(); ++k) {
      op.pg[static_cast<Eigen::Index>(k)] = r.x[model.pg_index(0, k)];
      op.qg[static_cast<Eigen::Index>(k)] = r.x[model.qg_index(0, k)];
    }
    op.cost = res.cost_out.front();
    if (r.ok()) break;
  }

  res.distances = {norm2(res.g_dot - res.noisy.g_tilde), norm2(res.b_dot - res.noisy.b_tilde),
                   norm2(res.g_dot - g), norm2(res.b_dot - b)};
  res.factor2_ok = verify_factor2(res, g, b);
  res.network_out = with_admittances(base, res.g_dot, res.b_dot);
  if (!res.ok()) {
    throw ObfuscationError("post-processing failed: " + std::string(to_string(res.status)),
                           std::move(res));
  }
  return res;
}

ObfuscationResult mplo_obfuscate(const std::vector<Network>& nets,
                                 const std::vector<double>& o_stars, const PrivacyParams& p,
                                 const std::vector<std::size_t>& steps, std::uint64_t seed,
                                 const PloOptions& options) {
  RandomNoise noise(seed);
  return mplo_obfuscate(nets, o_stars, p, steps, noise, options);
}

ObfuscationResult plo_obfuscate(const Network& net, double o_star, const PrivacyParams& p,
                                NoiseSource& noise, const PloOptions& options) {
  return mplo_obfuscate({net}, {o_star}, p, {0}, noise, options);
}

ObfuscationResult plo_obfuscate(const Network& net, double o_star, const PrivacyParams& p,
                                std::uint64_t seed, const PloOptions& options) {
  RandomNoise noise(seed);
  return plo_obfuscate(net, o_star, p, noise, options);
}

std::vector<Network> load_profile(const Network& net, const std::vector<double>& factors) {
  std::vector<Network> out;
  out.reserve(factors.size());
  for (double f : factors) {
    Network n = net;
    for (auto& bus : n.buses) {
      bus.pd *= f;
      bus.qd *= f;
    }
    out.push_back(std::move(n));
  }
  return out;
}

std::vector<double> load_factors(std::size_t h, double low, double high) {
  std::vector<double> out;
  if (h == 1) return {1.0};
  for (std::size_t t = 0; t < h; ++t) {
    out.push_back(low + (high - low) * static_cast<double>(t) / static_cast<double>(h - 1));
  }
  return out;
}

std::vector<std::size_t> select_steps(const std::vector<double>& factors, std::size_t r) {
  const std::size_t h = factors.size();
  if (h == 0 || r == 0 || r > h) throw std::invalid_argument("select_steps: need 1 <= r <= h");
  if (r == 1) {
    std::size_t best = 0;
    for (std::size_t t = 1; t < h; ++t) {
      if (std::abs(factors[t] - 1.0) < std::abs(factors[best] - 1.0)) best = t;
    }
    return {best};
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < r; ++i) {
    out.push_back(static_cast<std::size_t>(
        std::lround(static_cast<double>(i * (h - 1)) / static_cast<double>(r - 1))));
  }
  return out;
}

nlohmann::json to_json(const ObfuscationResult& res) {
  nlohmann::json j;
  j["status"] = std::string(to_string(res.status));
  j["g_dot"] = std::vector<double>(res.g_dot.begin(), res.g_dot.end());
  j["b_dot"] = std::vector<double>(res.b_dot.begin(), res.b_dot.end());
  j["noisy"] = to_json(res.noisy);
  j["distances"] = {{"g_dot_to_noisy", res.distances.g_to_noisy},
                    {"b_dot_to_noisy", res.distances.b_to_noisy},
                    {"g_dot_to_original", res.distances.g_to_original},
                    {"b_dot_to_original", res.distances.b_to_original}};
  j["o_star"] = res.o_star;
  j["cost_out"] = res.cost_out;
  j["lambda_bound"] = res.lambda_used;
  j["attempts"] = res.attempts;
  j["iterations"] = res.iterations;
  j["factor2_ok"] = res.factor2_ok;
  return j;
}

}  // namespace plo
