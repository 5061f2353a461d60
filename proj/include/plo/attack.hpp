#pragma once
#include <plo/network.hpp>
#include <plo/nlp.hpp>
#include <plo/opf.hpp>

#include <cstdint>
#include <random>
#include <set>
#include <stdexcept>
#include <string_view>

namespace plo {

enum class AttackStrategy { random, obfuscated_flow, real_flow };

std::string_view to_string(AttackStrategy s);
/// Throws std::invalid_argument on unknown names.
AttackStrategy parse_strategy(std::string_view name);

struct AttackOutcome {
  AttackStrategy strategy = AttackStrategy::random;
  double budget_pct = 0.0;
  std::set<int> damaged;      // line ids
  double restored_pct = 0.0;  // served load on the real network, percent
  std::uint64_t seed = 0;
};

class AttackError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Lines an attacker with budget k percent may remove: round(k n / 100), at least 1.
std::size_t attack_size(std::size_t n_lines, double budget_pct);

/// Uniform sample without replacement (partial Fisher-Yates).
std::set<int> random_attack(const Network& net, double budget_pct, std::mt19937_64& rng);

/// Top lines by max(|pf|, |pt|) at the AC-OPF solution, ties by ascending id.
/// Throws AttackError when the OPF does not solve.
std::set<int> flow_attack(const Network& net, double budget_pct, const NlpOptions& options = {});
std::set<int> flow_attack(const Network& net, const OpfSolution& opf, double budget_pct);

/// 100 x served fraction of the maximum load restoration on `real_net`.
double evaluate_attack(const Network& real_net, const std::set<int>& damaged,
                       const NlpOptions& options = {});

/// 100 |e_real n e_obf| / |e_real|. Throws std::invalid_argument on empty e_real.
double attack_similarity(const std::set<int>& e_real, const std::set<int>& e_obf);

}  // namespace plo
