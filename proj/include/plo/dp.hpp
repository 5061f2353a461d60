#pragma once
#include <plo/network.hpp>

#include <json.hpp>

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace plo {

struct PrivacyParams {
  double epsilon = 1.0;       // privacy budget
  double alpha = 0.01;        // indistinguishability level
  double beta = 0.01;         // faithfulness level
  double lambda_bound = 20.0; // spread of the admissible interval around the level means

  /// Throws std::invalid_argument unless all values are positive and lambda_bound > 1.
  void validate() const;
};

/// Uniform draws on the open interval (-1/2, 1/2).
class NoiseSource {
 public:
  virtual ~NoiseSource() = default;
  virtual double uniform() = 0;
};

/// mt19937_64 stream; the top 53 bits of each word give u in [-1/2, 1/2),
/// and u = -1/2 is redrawn.
class RandomNoise final : public NoiseSource {
 public:
  explicit RandomNoise(std::uint64_t seed) : engine_(seed) {}
  double uniform() override;

 private:
  std::mt19937_64 engine_;
};

/// Every draw is the median, so every Laplace sample is zero.
class ZeroNoise final : public NoiseSource {
 public:
  double uniform() override { return 0.0; }
};

/// Inverse CDF of Laplace(0, scale) at u in (-1/2, 1/2).
double laplace_quantile(double scale, double u);
double laplace_sample(double scale, NoiseSource& noise);

struct LedgerEntry {
  std::string query;
  double epsilon = 0.0;
};

struct BudgetLedger {
  std::vector<LedgerEntry> entries;

  void charge(std::string query, double epsilon) {
    entries.push_back({std::move(query), epsilon});
  }
  double total() const;
};

inline constexpr std::string_view kIdentityQuery = "identity_g";
inline constexpr std::string_view kMeanGQuery = "level_mean_g";
inline constexpr std::string_view kMeanBQuery = "level_mean_b";

struct AuditResult {
  bool ok = false;
  std::vector<std::string> violations;
};

/// Accepts exactly one entry of epsilon/3 for each of the three queries.
AuditResult budget_audit(const BudgetLedger& ledger, double epsilon);

/// g + Lap(3 alpha / epsilon) per entry, one draw per entry. Entries with
/// g = 0 stay zero. Charges epsilon/3.
Vector noisy_conductances(const Vector& g, const PrivacyParams& p, NoiseSource& noise,
                          BudgetLedger& ledger);

/// b~ = g~ / r with r = g / b, so that g~ / b~ = g / b.
Vector noisy_susceptances(const Vector& g_tilde, const Vector& ratios);

/// Per-level mean of `values` plus Lap(3 alpha / (n_v epsilon)), levels in the
/// given order. Charges epsilon/3 once under `query`.
std::vector<double> noisy_level_means(const std::vector<VoltageLevel>& levels,
                                      const Vector& values, const PrivacyParams& p,
                                      NoiseSource& noise, BudgetLedger& ledger,
                                      std::string_view query);

struct NoisyLineData {
  Vector g_tilde, b_tilde;
  Vector ratios;  // g / b, zero for pure reactances
  std::vector<VoltageLevel> levels;
  std::vector<double> mu_g, mu_b;  // per level
  std::vector<std::size_t> level_of;  // per line
  BudgetLedger ledger;
};

/// The three private queries in a fixed draw order: one draw per line for the
/// identity query (lines with g = 0 perturb b directly with the same scale),
/// then one per level for the conductance means, then for the susceptance means.
NoisyLineData private_line_queries(const Network& net, const PrivacyParams& p,
                                   NoiseSource& noise);

/// Mixes a master seed with a run's coordinates (splitmix64 over an FNV-1a
/// hash of the instance name and the bit patterns of alpha and beta).
std::uint64_t derive_seed(std::uint64_t master, std::string_view instance, double alpha,
                          double beta, std::uint64_t run);

nlohmann::json to_json(const BudgetLedger& ledger);
nlohmann::json to_json(const NoisyLineData& noisy);

}  // namespace plo
