#include <doctest.h>
#include <plo/dp.hpp>

#include "helpers.hpp"

#include <cmath>
#include <map>

using namespace plo;

namespace {

// Replays a fixed sequence of uniforms and counts the draws.
class ScriptedNoise final : public NoiseSource {
 public:
  explicit ScriptedNoise(std::vector<double> u) : u_(std::move(u)) {}
  double uniform() override { return u_[draws++ % u_.size()]; }
  std::size_t draws = 0;

 private:
  std::vector<double> u_;
};

}  // namespace

TEST_CASE("Laplace quantiles") {
  CHECK(laplace_quantile(2.0, 0.0) == 0.0);
  CHECK(laplace_quantile(2.0, 0.25) == doctest::Approx(2.0 * std::log(2.0)));
  CHECK(laplace_quantile(2.0, -0.25) == doctest::Approx(-2.0 * std::log(2.0)));
  // P(X > x) = exp(-x / s) / 2
  for (double x : {0.1, 1.0, 5.0}) {
    const double u = 0.5 - 0.5 * std::exp(-x / 1.5);
    CHECK(laplace_quantile(1.5, u) == doctest::Approx(x).epsilon(1e-12));
  }
}

TEST_CASE("Laplace sample moments") {
  RandomNoise noise(11);
  const double s = 1.5;
  const int n = 200000;
  double sum = 0.0, sq = 0.0, abs_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = laplace_sample(s, noise);
    sum += x;
    sq += x * x;
    abs_sum += std::abs(x);
  }
  const double sd = std::sqrt(2.0) * s;
  CHECK(std::abs(sum / n) < 5.0 * sd / std::sqrt(n));
  CHECK(sq / n == doctest::Approx(2.0 * s * s).epsilon(0.03));
  CHECK(abs_sum / n == doctest::Approx(s).epsilon(0.01));
}

TEST_CASE("random noise stays inside the open interval and is reproducible") {
  RandomNoise a(5), b(5), c(6);
  bool differs = false;
  for (int i = 0; i < 10000; ++i) {
    const double u = a.uniform();
    CHECK(u > -0.5);
    CHECK(u < 0.5);
    CHECK(u == b.uniform());
    differs |= u != c.uniform();
  }
  CHECK(differs);
}

TEST_CASE("adjacent identity queries stay within the privacy ratio") {
  // g and g + alpha differ in one line; the identity query spends epsilon / 3.
  PrivacyParams p;
  p.epsilon = 1.0;
  p.alpha = 0.5;
  const double scale = 3.0 * p.alpha / p.epsilon;
  const double width = scale / 4.0;
  const int n = 400000;
  RandomNoise na(1), nb(2);
  std::map<long, int> ha, hb;
  for (int i = 0; i < n; ++i) {
    ++ha[std::lround(std::floor((1.0 + laplace_sample(scale, na)) / width))];
    ++hb[std::lround(std::floor((1.0 + p.alpha + laplace_sample(scale, nb)) / width))];
  }
  double worst = 0.0;
  for (const auto& [bin, ca] : ha) {
    const auto it = hb.find(bin);
    if (it == hb.end() || ca < 4000 || it->second < 4000) continue;
    worst = std::max(worst, std::abs(std::log(static_cast<double>(ca) / it->second)));
  }
  CHECK(worst > 0.0);
  CHECK(worst <= p.epsilon / 3.0 + 0.1);
}

TEST_CASE("private line queries") {
  const Network net = testing::load("case39_epri");
  const auto [g, b] = line_admittances(net);
  const auto levels = voltage_levels(net);
  PrivacyParams p;
  p.alpha = 0.1;

  SUBCASE("draw order and count") {
    ScriptedNoise noise({0.3, -0.2, 0.1});
    const NoisyLineData d = private_line_queries(net, p, noise);
    CHECK(noise.draws == static_cast<std::size_t>(g.size()) + 2 * levels.size());
    CHECK(d.levels.size() == levels.size());
    const double lap0 = laplace_quantile(3.0 * p.alpha / p.epsilon, 0.3);
    CHECK(d.g_tilde[0] == g[0] + lap0);
  }

  SUBCASE("ratio identity") {
    RandomNoise noise(3);
    const NoisyLineData d = private_line_queries(net, p, noise);
    for (Eigen::Index e = 0; e < g.size(); ++e) {
      if (g[e] == 0.0) continue;
      CHECK(d.g_tilde[e] / d.b_tilde[e] == doctest::Approx(g[e] / b[e]).epsilon(1e-14));
      CHECK(d.ratios[e] == g[e] / b[e]);
    }
  }

  SUBCASE("level means") {
    ScriptedNoise noise({0.0});
    const NoisyLineData d = private_line_queries(net, p, noise);
    CHECK(d.g_tilde == g);
    CHECK(d.b_tilde == b);
    for (std::size_t v = 0; v < levels.size(); ++v) {
      double mean = 0.0;
      for (auto e : levels[v].lines) mean += g[static_cast<Eigen::Index>(e)];
      CHECK(d.mu_g[v] == doctest::Approx(mean / static_cast<double>(levels[v].lines.size())));
      for (auto e : levels[v].lines) CHECK(d.level_of[e] == v);
    }
  }

  SUBCASE("mean noise shrinks with the level size") {
    ScriptedNoise zero({0.0});
    const NoisyLineData base = private_line_queries(net, p, zero);
    std::vector<double> u(static_cast<std::size_t>(g.size()), 0.0);
    u.insert(u.end(), 2 * levels.size(), 0.25);
    ScriptedNoise noise(u);
    const NoisyLineData d = private_line_queries(net, p, noise);
    for (std::size_t v = 0; v < levels.size(); ++v) {
      const double nv = static_cast<double>(levels[v].lines.size());
      CHECK(d.mu_g[v] - base.mu_g[v] == doctest::Approx(laplace_quantile(3.0 * p.alpha / (nv * p.epsilon), 0.25)));
    }
  }

  SUBCASE("budget ledger") {
    RandomNoise noise(4);
    const NoisyLineData d = private_line_queries(net, p, noise);
    REQUIRE(d.ledger.entries.size() == 3);
    CHECK(d.ledger.total() == doctest::Approx(p.epsilon));
    CHECK(budget_audit(d.ledger, p.epsilon).ok);
  }
}

TEST_CASE("pure reactances perturb the susceptance") {
  const Network net = testing::two_bus(0.0, 0.1);
  PrivacyParams p;
  ScriptedNoise noise({0.25});
  const NoisyLineData d = private_line_queries(net, p, noise);
  CHECK(d.g_tilde[0] == 0.0);
  CHECK(d.ratios[0] == 0.0);
  CHECK(d.b_tilde[0] == doctest::Approx(-10.0 + laplace_quantile(3.0 * p.alpha, 0.25)));
}

TEST_CASE("budget audit rejects wrong ledgers") {
  const double eps = 1.0;
  BudgetLedger ok;
  ok.charge(std::string(kIdentityQuery), eps / 3.0);
  ok.charge(std::string(kMeanGQuery), eps / 3.0);
  ok.charge(std::string(kMeanBQuery), eps / 3.0);
  CHECK(budget_audit(ok, eps).ok);

  BudgetLedger repeated = ok;
  repeated.charge(std::string(kIdentityQuery), eps / 3.0);
  CHECK_FALSE(budget_audit(repeated, eps).ok);

  BudgetLedger missing;
  missing.charge(std::string(kIdentityQuery), eps / 2.0);
  missing.charge(std::string(kMeanGQuery), eps / 2.0);
  const AuditResult r = budget_audit(missing, eps);
  CHECK_FALSE(r.ok);
  CHECK(r.violations.size() >= 2);

  BudgetLedger stray = ok;
  stray.charge("raw_lines", 0.0);
  CHECK_FALSE(budget_audit(stray, eps).ok);
  CHECK_FALSE(budget_audit(ok, 2.0 * eps).ok);
}

TEST_CASE("standalone mechanisms") {
  PrivacyParams p;
  Vector g(3);
  g << 1.0, 0.0, 2.0;
  BudgetLedger ledger;
  ScriptedNoise noise({0.25});
  const Vector gt = noisy_conductances(g, p, noise, ledger);
  CHECK(noise.draws == 3);
  CHECK(gt[1] == 0.0);
  CHECK(gt[0] == g[0] + laplace_quantile(3.0 * p.alpha / p.epsilon, 0.25));
  CHECK(ledger.total() == doctest::Approx(p.epsilon / 3.0));

  Vector ratios(3);
  ratios << 0.1, 0.2, 0.5;
  const Vector bt = noisy_susceptances(gt, ratios);
  CHECK(bt[2] == doctest::Approx(gt[2] / 0.5));
  ratios[1] = 0.0;
  CHECK_THROWS_AS(noisy_susceptances(gt, ratios), std::invalid_argument);
}

TEST_CASE("privacy parameters are validated") {
  PrivacyParams p;
  CHECK_NOTHROW(p.validate());
  p.epsilon = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  p.lambda_bound = 1.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  p.alpha = std::nan("");
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("seed derivation") {
  const auto s = derive_seed(1, "case39", 0.01, 0.1, 7);
  CHECK(s == derive_seed(1, "case39", 0.01, 0.1, 7));
  CHECK(s != derive_seed(2, "case39", 0.01, 0.1, 7));
  CHECK(s != derive_seed(1, "case30", 0.01, 0.1, 7));
  CHECK(s != derive_seed(1, "case39", 0.1, 0.1, 7));
  CHECK(s != derive_seed(1, "case39", 0.01, 0.01, 7));
  CHECK(s != derive_seed(1, "case39", 0.01, 0.1, 8));
}
