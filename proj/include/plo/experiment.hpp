#pragma once
#include <plo/attack.hpp>
#include <plo/network.hpp>
#include <plo/opf.hpp>
#include <plo/plo.hpp>

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace plo {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct ExperimentConfig {
  std::vector<std::string> instances;  // case file paths
  double epsilon = 1.0;
  std::vector<double> alphas{1e-3, 1e-2, 1e-1, 1.0};
  std::vector<double> betas{1e-2, 1e-1};
  int runs = 100;
  std::vector<double> budgets{5.0, 10.0, 15.0};  // attack budgets, percent of lines
  std::vector<AttackStrategy> strategies{AttackStrategy::random, AttackStrategy::obfuscated_flow,
                                         AttackStrategy::real_flow};
  double lambda_bound = 20.0;
  std::size_t multistep_h = 31;
  double profile_low = 0.8, profile_high = 1.1;  // load factors spanned by the horizon
  std::vector<std::size_t> multistep_r;  // similarity sweep, skipped when empty
  double similarity_budget = 10.0;
  std::uint64_t seed = 1;
  std::string out_dir = "results";
  unsigned threads = 0;  // 0: one per hardware thread

  bool feasibility = true;  // Laplace-only and PLO feasibility, cost deltas, timing
  bool attacks = true;

  /// Throws std::invalid_argument on empty grids or runs < 1.
  void validate() const;
};

/// A case with its preprocessed network and reference OPF.
struct Instance {
  std::string name;
  Network net;
  OpfSolution opf;
};

/// Throws std::runtime_error when the reference OPF does not solve.
Instance load_instance(const std::string& path, const NlpOptions& options = {});

struct FeasibilityRow {
  std::string instance;
  std::string mechanism;  // "laplace" or "plo"
  double alpha = 0.0, beta = kNaN;
  int run = 0;
  std::uint64_t seed = 0;
  std::string status;  // feasibility of the released network, or why it is missing
  bool feasible = false;
  double cost_delta_pct = kNaN;  // 100 (O(N) - O(N~)) / O(N)
  double cost_gap = kNaN;        // |cost_out - O*| / O*, PLO only
  bool factor2 = false;
  bool audit_ok = false;
  double time_s = 0.0;  // obfuscation wall clock
};

struct AttackRow {
  std::string instance;
  AttackStrategy strategy = AttackStrategy::random;
  double k = 0.0;
  double alpha = kNaN, beta = kNaN;
  int run = -1;
  std::uint64_t seed = 0;
  double restored_pct = kNaN;
  double similarity = kNaN;  // obfuscated-flow rows only
};

struct SimilarityRow {
  std::string instance;
  double alpha = 0.0, beta = 0.0, k = 0.0;
  std::size_t h = 0, r = 0;
  int run = 0;
  std::uint64_t seed = 0;
  bool plo_ok = false;
  double cost_gap = kNaN;  // worst |cost_out - O*| / O* over the selected steps
  bool audit_ok = false;
  double similarity = kNaN;  // mean over the evaluated time steps
};

struct ExperimentResults {
  std::vector<FeasibilityRow> feasibility;
  std::vector<AttackRow> attacks;
  std::vector<SimilarityRow> similarity;
  std::vector<nlohmann::json> raw_runs;
};

/// Runs fn(0..n-1) on a pool of workers; results land at their own index so
/// the output never depends on scheduling.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

PrivacyParams privacy_params(const ExperimentConfig& cfg, double alpha, double beta);

/// Laplace-only releases over the alpha grid (beta does not apply).
std::vector<FeasibilityRow> laplace_study(const Instance& inst, const ExperimentConfig& cfg,
                                          std::vector<nlohmann::json>* raw = nullptr);
/// PLO releases over the alpha x beta grid.
std::vector<FeasibilityRow> plo_study(const Instance& inst, const ExperimentConfig& cfg,
                                      std::vector<nlohmann::json>* raw = nullptr);
/// Random, obfuscated-flow and real-flow attacks over the budget grid, each
/// evaluated on the real network.
std::vector<AttackRow> attack_campaign(const Instance& inst, const ExperimentConfig& cfg);
/// MPLO over the r grid; similarity of the flow attacks at every step of the
/// horizon, real network versus released network with that step's loads.
std::vector<SimilarityRow> similarity_sweep(const Instance& inst, const ExperimentConfig& cfg);

/// Runs every enabled study on every instance and writes the tables to cfg.out_dir.
ExperimentResults run_experiment(const ExperimentConfig& cfg);

struct CellMean {
  std::size_t n = 0;
  double mean = kNaN;
};

/// Mean of `value` over rows accepted by `keep`, skipping NaN.
template <class Row, class Keep, class Value>
CellMean cell_mean(const std::vector<Row>& rows, Keep keep, Value value) {
  CellMean out;
  double sum = 0.0;
  std::size_t finite = 0;
  for (const auto& row : rows) {
    if (!keep(row)) continue;
    ++out.n;
    const double v = value(row);
    if (!std::isnan(v)) {
      sum += v;
      ++finite;
    }
  }
  if (finite > 0) out.mean = sum / static_cast<double>(finite);
  return out;
}

void write_tables(const ExperimentConfig& cfg, const ExperimentResults& res);

}  // namespace plo
