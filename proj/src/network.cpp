#include <plo/network.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

namespace plo {

std::size_t Network::bus_index(int id) const {
  for (std::size_t i = 0; i < buses.size(); ++i) {
    if (buses[i].id == id) return i;
  }
  throw std::out_of_range("no bus with id " + std::to_string(id));
}

std::size_t Network::slack_index() const {
  for (std::size_t i = 0; i < buses.size(); ++i) {
    if (buses[i].is_slack()) return i;
  }
  throw NetworkError(NetworkError::Kind::missing_slack, "network has no slack bus");
}

double Network::total_active_load() const {
  double total = 0.0;
  for (const auto& bus : buses) total += bus.pd;
  return total;
}

std::pair<Vector, Vector> line_admittances(const Network& net) {
  const auto n = static_cast<Eigen::Index>(net.lines.size());
  Vector g(n), b(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    std::tie(g[k], b[k]) = admittance(net.lines[k]);
  }
  return {g, b};
}

Network with_admittances(const Network& net, const Vector& g, const Vector& b) {
  Network out = net;
  for (std::size_t k = 0; k < out.lines.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    // Unchanged admittances keep the original impedance bits.
    if (admittance(out.lines[k]) == std::pair{g[i], b[i]}) continue;
    std::tie(out.lines[k].r, out.lines[k].x) = impedance(g[i], b[i]);
  }
  return out;
}

std::vector<VoltageLevel> voltage_levels(const Network& net) {
  std::map<std::pair<double, double>, std::vector<std::size_t>> groups;
  std::unordered_map<int, double> kv;
  for (const auto& bus : net.buses) kv[bus.id] = bus.base_kv;
  for (std::size_t k = 0; k < net.lines.size(); ++k) {
    const double a = kv.at(net.lines[k].from_bus);
    const double c = kv.at(net.lines[k].to_bus);
    groups[{std::min(a, c), std::max(a, c)}].push_back(k);
  }
  std::vector<VoltageLevel> levels;
  levels.reserve(groups.size());
  for (auto& [key, lines] : groups) {
    levels.push_back({key.first, key.second, std::move(lines)});
  }
  return levels;
}

Network preprocess(const Network& net) {
  Network out = net;
  for (auto& line : out.lines) {
    if (line.r < 0.0) line.r = 0.0;
  }
  std::map<std::pair<int, int>, std::vector<std::size_t>> parallel;
  for (std::size_t k = 0; k < out.lines.size(); ++k) {
    const auto& l = out.lines[k];
    parallel[{std::min(l.from_bus, l.to_bus), std::max(l.from_bus, l.to_bus)}]
        .push_back(k);
  }
  for (const auto& [ends, group] : parallel) {
    if (group.size() < 2) continue;
    // Already-merged groups are left bit-identical.
    const bool uniform = std::all_of(group.begin(), group.end(), [&](auto k) {
      return out.lines[k].r == out.lines[group[0]].r &&
             out.lines[k].x == out.lines[group[0]].x;
    });
    if (uniform) continue;
    double r = 0.0, x = 0.0;
    for (auto k : group) {
      r += out.lines[k].r;
      x += out.lines[k].x;
    }
    r /= static_cast<double>(group.size());
    x /= static_cast<double>(group.size());
    for (auto k : group) {
      out.lines[k].r = r;
      out.lines[k].x = x;
    }
  }
  return out;
}

std::vector<int> connected_components(const Network& net,
                                      const std::vector<bool>& line_active) {
  const std::size_t m = net.buses.size();
  std::vector<std::size_t> parent(m);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t i) {
    while (parent[i] != i) {
      parent[i] = parent[parent[i]];
      i = parent[i];
    }
    return i;
  };
  std::unordered_map<int, std::size_t> index;
  for (std::size_t i = 0; i < m; ++i) index[net.buses[i].id] = i;
  for (std::size_t k = 0; k < net.lines.size(); ++k) {
    if (!line_active.empty() && !line_active[k]) continue;
    const auto a = find(index.at(net.lines[k].from_bus));
    const auto b = find(index.at(net.lines[k].to_bus));
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  std::vector<int> label(m, -1);
  std::unordered_map<std::size_t, int> root_label;
  for (std::size_t i = 0; i < m; ++i) {
    const auto root = find(i);
    auto [it, inserted] =
        root_label.try_emplace(root, static_cast<int>(root_label.size()));
    label[i] = it->second;
  }
  return label;
}

void validate(const Network& net) {
  using Kind = NetworkError::Kind;
  if (net.buses.empty()) throw NetworkError(Kind::malformed, "network has no buses");
  if (!(net.base_mva > 0.0)) throw NetworkError(Kind::malformed, "base MVA must be positive");

  std::set<int> ids;
  int slacks = 0;
  for (const auto& bus : net.buses) {
    if (!ids.insert(bus.id).second) {
      throw NetworkError(Kind::malformed, "duplicate bus id " + std::to_string(bus.id));
    }
    if (bus.is_slack()) ++slacks;
    if (!(bus.v_min > 0.0)) {
      throw NetworkError(Kind::invalid_bounds,
                         "bus " + std::to_string(bus.id) + ": v_min must be positive");
    }
  }
  if (slacks == 0) throw NetworkError(Kind::missing_slack, "missing slack bus");
  if (slacks > 1) throw NetworkError(Kind::multiple_slack, "multiple slack buses");

  for (const auto& line : net.lines) {
    const auto tag = "line " + std::to_string(line.id);
    if (!ids.count(line.from_bus) || !ids.count(line.to_bus)) {
      throw NetworkError(Kind::unknown_bus, tag + ": references an unknown bus");
    }
    if (line.from_bus == line.to_bus) throw NetworkError(Kind::malformed, tag + ": self loop");
    if (line.x == 0.0) throw NetworkError(Kind::zero_impedance, tag + ": zero reactance");
    if (!(line.s_max > 0.0)) throw NetworkError(Kind::invalid_bounds, tag + ": s_max must be positive");
    if (!(line.angle_min < line.angle_max)) {
      throw NetworkError(Kind::invalid_bounds, tag + ": empty angle-difference window");
    }
  }
  for (const auto& gen : net.generators) {
    if (!ids.count(gen.bus)) {
      throw NetworkError(Kind::unknown_bus,
                         "generator at unknown bus " + std::to_string(gen.bus));
    }
    if (gen.p_min > gen.p_max || gen.q_min > gen.q_max) {
      throw NetworkError(Kind::invalid_bounds,
                         "generator at bus " + std::to_string(gen.bus) + ": inverted bounds");
    }
    if (gen.c2 < 0.0) {
      throw NetworkError(Kind::unsupported,
                         "generator at bus " + std::to_string(gen.bus) + ": concave cost");
    }
  }

  const auto label = connected_components(net, {});
  if (std::any_of(label.begin(), label.end(), [](int l) { return l != 0; })) {
    throw NetworkError(Kind::disconnected, "network graph is disconnected");
  }
}

}  // namespace plo
