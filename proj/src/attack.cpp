#include <plo/attack.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace plo {

std::string_view to_string(AttackStrategy s) {
  switch (s) {
    case AttackStrategy::random: return "random";
    case AttackStrategy::obfuscated_flow: return "obfuscated_flow";
    case AttackStrategy::real_flow: return "real_flow";
  }
  return "unknown";
}

AttackStrategy parse_strategy(std::string_view name) {
  for (auto s : {AttackStrategy::random, AttackStrategy::obfuscated_flow, AttackStrategy::real_flow}) {
    if (name == to_string(s)) return s;
  }
  throw std::invalid_argument("unknown attack strategy: " + std::string(name));
}

std::size_t attack_size(std::size_t n_lines, double budget_pct) {
  if (!(budget_pct > 0.0 && budget_pct <= 100.0)) {
    throw std::invalid_argument("attack budget must lie in (0, 100]");
  }
  if (n_lines == 0) throw std::invalid_argument("attack on a network without lines");
  const auto k = static_cast<std::size_t>(
      std::floor(budget_pct * static_cast<double>(n_lines) / 100.0 + 0.5));
  return std::clamp<std::size_t>(k, 1, n_lines);
}

namespace {

// Unbiased draw in [0, n) by rejection; std::uniform_int_distribution is
// implementation-defined, this keeps seeds portable.
std::uint64_t below(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit = -n % n;  // 2^64 mod n
  while (true) {
    const std::uint64_t r = rng();
    if (r >= limit) return r % n;
  }
}

}  // namespace

std::set<int> random_attack(const Network& net, double budget_pct, std::mt19937_64& rng) {
  const std::size_t n = net.lines.size();
  const std::size_t k = attack_size(n, budget_pct);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::set<int> out;
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(below(rng, n - i));
    std::swap(idx[i], idx[j]);
    out.insert(net.lines[idx[i]].id);
  }
  return out;
}

std::set<int> flow_attack(const Network& net, const OpfSolution& opf, double budget_pct) {
  const std::size_t n = net.lines.size();
  const std::size_t k = attack_size(n, budget_pct);
  if (opf.flows.size() != n) throw AttackError("flow attack: flows do not match the network");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  auto load = [&](std::size_t e) { return std::max(std::abs(opf.flows[e].pf), std::abs(opf.flows[e].pt)); };
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const double la = load(a), lb = load(b);
    if (la != lb) return la > lb;
    return net.lines[a].id < net.lines[b].id;
  });
  std::set<int> out;
  for (std::size_t i = 0; i < k; ++i) out.insert(net.lines[idx[i]].id);
  return out;
}

std::set<int> flow_attack(const Network& net, double budget_pct, const NlpOptions& options) {
  const OpfSolution opf = solve_ac_opf(net, options);
  if (!opf.ok()) {
    throw AttackError("flow attack: OPF " + std::string(to_string(opf.status)));
  }
  return flow_attack(net, opf, budget_pct);
}

double evaluate_attack(const Network& real_net, const std::set<int>& damaged,
                       const NlpOptions& options) {
  for (int id : damaged) {
    const bool known = std::any_of(real_net.lines.begin(), real_net.lines.end(),
                                   [id](const Line& l) { return l.id == id; });
    if (!known) throw std::invalid_argument("damaged line " + std::to_string(id) + " not in network");
  }
  const RestorationSolution sol = restore_load(real_net, damaged, options);
  if (sol.status == NlpStatus::numeric_failure) {
    throw AttackError("load restoration failed numerically");
  }
  return 100.0 * sol.served_fraction;
}

double attack_similarity(const std::set<int>& e_real, const std::set<int>& e_obf) {
  if (e_real.empty()) throw std::invalid_argument("attack similarity: empty reference set");
  std::size_t common = 0;
  for (int id : e_real) common += e_obf.count(id);
  return 100.0 * static_cast<double>(common) / static_cast<double>(e_real.size());
}

}  // namespace plo
