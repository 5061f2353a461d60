#pragma once
#include <plo/dp.hpp>
#include <plo/network.hpp>
#include <plo/nlp.hpp>
#include <plo/opf.hpp>

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

namespace plo {

struct PloOptions {
  NlpOptions nlp;
  /// Solution of the original network's OPF used as the warm start; solved
  /// internally when absent.
  std::optional<OpfSolution> warm_start;
};

struct ObfuscationDistances {
  double g_to_noisy = 0.0;     // |g_dot - g~|
  double b_to_noisy = 0.0;     // |b_dot - b~|
  double g_to_original = 0.0;  // |g_dot - g|
  double b_to_original = 0.0;  // |b_dot - b|
};

struct ObfuscationResult {
  Network network_out;
  Vector g_dot, b_dot;
  NoisyLineData noisy;
  ObfuscationDistances distances;
  NlpStatus status = NlpStatus::numeric_failure;
  std::vector<double> o_star;    // per step
  std::vector<double> cost_out;  // per step dispatch cost at the post-processed solution
  OpfSolution operating_point;   // v, theta, pg, qg of the first step at the post-processed solution
  double lambda_used = 0.0;      // lambda_bound of the accepted attempt
  int attempts = 0;
  int iterations = 0;
  bool factor2_ok = false;

  bool ok() const { return status == NlpStatus::optimal; }
  /// Largest |cost_out - o_star| / o_star over steps.
  double max_cost_gap() const;
};

class ObfuscationError : public std::runtime_error {
 public:
  ObfuscationError(const std::string& what, ObfuscationResult last)
      : std::runtime_error(what), last_(std::move(last)) {}
  const ObfuscationResult& last_attempt() const { return last_; }

 private:
  ObfuscationResult last_;
};

/// Admissible interval around a noisy mean: [min(mu/l, l mu), max(mu/l, l mu)].
std::pair<double, double> mean_interval(double mu, double lambda_bound);

/// Lines that only pass the Laplace mechanism: (g~, b~) mapped back to (r, x).
Network laplace_obfuscate(const Network& net, const PrivacyParams& p, NoiseSource& noise,
                          NoisyLineData* noisy_out = nullptr);

/// Post-processing program: minimize |g_dot - g~|^2 + |b_dot - b~|^2 over the
/// AC constraints of every step with variable line admittances, per-step cost
/// within beta of o_star and per-level bounds on g_dot and b_dot. Lines with
/// g = 0 keep g_dot = 0.
NlpProblem build_post_processing(const std::vector<Network>& steps,
                                 const std::vector<double>& o_star, const NoisyLineData& noisy,
                                 const PrivacyParams& p);

/// Single snapshot obfuscation.
ObfuscationResult plo_obfuscate(const Network& net, double o_star, const PrivacyParams& p,
                                NoiseSource& noise, const PloOptions& options = {});
ObfuscationResult plo_obfuscate(const Network& net, double o_star, const PrivacyParams& p,
                                std::uint64_t seed, const PloOptions& options = {});

/// Multi-step obfuscation over the networks at positions `steps`. The line
/// data are queried once, from nets[steps.front()].
ObfuscationResult mplo_obfuscate(const std::vector<Network>& nets,
                                 const std::vector<double>& o_stars, const PrivacyParams& p,
                                 const std::vector<std::size_t>& steps, NoiseSource& noise,
                                 const PloOptions& options = {});
ObfuscationResult mplo_obfuscate(const std::vector<Network>& nets,
                                 const std::vector<double>& o_stars, const PrivacyParams& p,
                                 const std::vector<std::size_t>& steps, std::uint64_t seed,
                                 const PloOptions& options = {});

/// |g_dot - g| + |b_dot - b| <= 2 |g~ - g| + 2 |b~ - b| + 1e-8.
bool verify_factor2(const ObfuscationResult& res, const Vector& g, const Vector& b);

/// Networks with every load scaled by the given factors.
std::vector<Network> load_profile(const Network& net, const std::vector<double>& factors);

/// h factors evenly spaced over [low, high].
std::vector<double> load_factors(std::size_t h, double low = 0.8, double high = 1.1);

/// r positions spread evenly over the profile, round(i (h - 1) / (r - 1));
/// r = 1 picks the factor closest to 1.
std::vector<std::size_t> select_steps(const std::vector<double>& factors, std::size_t r);

nlohmann::json to_json(const ObfuscationResult& res);

}  // namespace plo
