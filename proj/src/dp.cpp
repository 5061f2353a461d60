#include <plo/dp.hpp>

#include <bit>
#include <cmath>
#include <stdexcept>

namespace plo {

void PrivacyParams::validate() const {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(epsilon)) throw std::invalid_argument("epsilon must be positive");
  if (!positive(alpha)) throw std::invalid_argument("alpha must be positive");
  if (!positive(beta)) throw std::invalid_argument("beta must be positive");
  if (!(std::isfinite(lambda_bound) && lambda_bound > 1.0)) {
    throw std::invalid_argument("lambda_bound must exceed 1");
  }
}

double RandomNoise::uniform() {
  while (true) {
    const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53 - 0.5;
    if (u != -0.5) return u;
  }
}

double laplace_quantile(double scale, double u) {
  if (u == 0.0) return 0.0;
  const double sign = u < 0.0 ? -1.0 : 1.0;
  return -scale * sign * std::log1p(-2.0 * std::abs(u));
}

double laplace_sample(double scale, NoiseSource& noise) {
  return laplace_quantile(scale, noise.uniform());
}

double BudgetLedger::total() const {
  double t = 0.0;
  for (const auto& e : entries) t += e.epsilon;
  return t;
}

AuditResult budget_audit(const BudgetLedger& ledger, double epsilon) {
  AuditResult out;
  const double share = epsilon / 3.0;
  int seen[3] = {0, 0, 0};
  const std::string_view names[3] = {kIdentityQuery, kMeanGQuery, kMeanBQuery};
  for (const auto& e : ledger.entries) {
    int which = -1;
    for (int k = 0; k < 3; ++k) {
      if (e.query == names[k]) which = k;
    }
    if (which < 0) {
      out.violations.push_back("unexpected query " + e.query);
      continue;
    }
    if (++seen[which] > 1) out.violations.push_back("repeated query " + e.query);
    if (std::abs(e.epsilon - share) > 1e-12 * std::max(1.0, share)) {
      out.violations.push_back("query " + e.query + " charged " + std::to_string(e.epsilon));
    }
  }
  for (int k = 0; k < 3; ++k) {
    if (seen[k] == 0) out.violations.push_back("missing query " + std::string(names[k]));
  }
  if (std::abs(ledger.total() - epsilon) > 1e-12 * std::max(1.0, epsilon)) {
    out.violations.push_back("total " + std::to_string(ledger.total()) + " differs from budget");
  }
  out.ok = out.violations.empty();
  return out;
}

Vector noisy_conductances(const Vector& g, const PrivacyParams& p, NoiseSource& noise,
                          BudgetLedger& ledger) {
  const double scale = 3.0 * p.alpha / p.epsilon;
  Vector out = g;
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double lap = laplace_sample(scale, noise);
    if (g[i] != 0.0) out[i] = g[i] + lap;
  }
  ledger.charge(std::string(kIdentityQuery), p.epsilon / 3.0);
  return out;
}

Vector noisy_susceptances(const Vector& g_tilde, const Vector& ratios) {
  Vector out(g_tilde.size());
  for (Eigen::Index i = 0; i < g_tilde.size(); ++i) {
    if (ratios[i] == 0.0 || !std::isfinite(ratios[i])) {
      throw std::invalid_argument("noisy_susceptances: ratio must be finite and nonzero");
    }
    out[i] = g_tilde[i] / ratios[i];
  }
  return out;
}

std::vector<double> noisy_level_means(const std::vector<VoltageLevel>& levels,
                                      const Vector& values, const PrivacyParams& p,
                                      NoiseSource& noise, BudgetLedger& ledger,
                                      std::string_view query) {
  std::vector<double> out;
  out.reserve(levels.size());
  for (const auto& level : levels) {
    const double n_v = static_cast<double>(level.lines.size());
    double mean = 0.0;
    for (auto e : level.lines) mean += values[static_cast<Eigen::Index>(e)];
    mean /= n_v;
    out.push_back(mean + laplace_sample(3.0 * p.alpha / (n_v * p.epsilon), noise));
  }
  ledger.charge(std::string(query), p.epsilon / 3.0);
  return out;
}

NoisyLineData private_line_queries(const Network& net, const PrivacyParams& p,
                                   NoiseSource& noise) {
  p.validate();
  NoisyLineData out;
  const auto [g, b] = line_admittances(net);
  const auto n = g.size();
  const double scale = 3.0 * p.alpha / p.epsilon;

  // Identity query: one draw per line, in line order.
  out.g_tilde = g;
  out.b_tilde = b;
  out.ratios = Vector::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double lap = laplace_sample(scale, noise);
    if (g[i] != 0.0) {
      out.ratios[i] = g[i] / b[i];
      out.g_tilde[i] = g[i] + lap;
      // b~ = g~ / r written as g~ b / g keeps the ratio identity exact.
      if (lap != 0.0) out.b_tilde[i] = out.g_tilde[i] * b[i] / g[i];
    } else {
      out.b_tilde[i] = b[i] + lap;
    }
  }
  out.ledger.charge(std::string(kIdentityQuery), p.epsilon / 3.0);

  out.levels = voltage_levels(net);
  out.level_of.assign(static_cast<std::size_t>(n), 0);
  for (std::size_t v = 0; v < out.levels.size(); ++v) {
    for (auto e : out.levels[v].lines) out.level_of[e] = v;
  }
  out.mu_g = noisy_level_means(out.levels, g, p, noise, out.ledger, kMeanGQuery);
  out.mu_b = noisy_level_means(out.levels, b, p, noise, out.ledger, kMeanBQuery);
  return out;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::string_view instance, double alpha,
                          double beta, std::uint64_t run) {
  std::uint64_t h = splitmix64(master);
  for (std::uint64_t part : {fnv1a(instance), std::bit_cast<std::uint64_t>(alpha),
                             std::bit_cast<std::uint64_t>(beta), run}) {
    h = splitmix64(h ^ part);
  }
  return h;
}

nlohmann::json to_json(const BudgetLedger& ledger) {
  auto j = nlohmann::json::array();
  for (const auto& e : ledger.entries) j.push_back({{"query", e.query}, {"epsilon", e.epsilon}});
  return j;
}

nlohmann::json to_json(const NoisyLineData& noisy) {
  nlohmann::json j;
  j["g_tilde"] = std::vector<double>(noisy.g_tilde.begin(), noisy.g_tilde.end());
  j["b_tilde"] = std::vector<double>(noisy.b_tilde.begin(), noisy.b_tilde.end());
  j["ratios"] = std::vector<double>(noisy.ratios.begin(), noisy.ratios.end());
  auto& levels = j["levels"] = nlohmann::json::array();
  for (std::size_t v = 0; v < noisy.levels.size(); ++v) {
    levels.push_back({{"kv_low", noisy.levels[v].kv_low},
                      {"kv_high", noisy.levels[v].kv_high},
                      {"lines", noisy.levels[v].lines.size()},
                      {"mu_g", noisy.mu_g[v]},
                      {"mu_b", noisy.mu_b[v]}});
  }
  j["ledger"] = to_json(noisy.ledger);
  return j;
}

}  // namespace plo
