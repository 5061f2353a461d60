#pragma once
#include <plo/types.hpp>

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace plo {

enum class BusType { pq = 1, pv = 2, ref = 3, isolated = 4 };

/// Bus data in per-unit on the network MVA base.
struct Bus {
  int id = 0;
  BusType type = BusType::pq;
  double pd = 0.0;  // active load
  double qd = 0.0;  // reactive load
  double gs = 0.0;  // shunt conductance (p.u. at v = 1)
  double bs = 0.0;  // shunt susceptance (p.u. at v = 1)
  double v_min = 0.9;
  double v_max = 1.1;
  double base_kv = 0.0;
  double vm = 1.0;  // initial voltage magnitude
  double va = 0.0;  // initial voltage angle (rad)
  int area = 1;
  int zone = 1;

  bool is_slack() const { return type == BusType::ref; }
  std::complex<double> load() const { return {pd, qd}; }

  bool operator==(const Bus&) const = default;
};

/// Branch in the standard pi model. Only the series impedance (r, x) is
/// obfuscated; charging and tap settings ride along unchanged.
struct Line {
  int id = 0;
  int from_bus = 0;
  int to_bus = 0;
  double r = 0.0;
  double x = 0.0;
  double charging = 0.0;  // total line charging susceptance
  double s_max = kInf;    // apparent power limit, kInf when unrated
  double tap = 1.0;       // off-nominal turns ratio (1 for lines)
  double shift = 0.0;     // phase shift (rad)
  double angle_min = -kInf;
  double angle_max = kInf;

  bool operator==(const Line&) const = default;
};

/// Generator with a quadratic cost c2 P^2 + c1 P + c0, P in MW.
struct Generator {
  int bus = 0;
  double pg = 0.0;
  double qg = 0.0;
  double p_min = 0.0;
  double p_max = 0.0;
  double q_min = 0.0;
  double q_max = 0.0;
  double vg = 1.0;
  double c0 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;

  bool operator==(const Generator&) const = default;
};

struct Network {
  std::string name;
  double base_mva = 100.0;
  std::vector<Bus> buses;
  std::vector<Line> lines;
  std::vector<Generator> generators;

  std::size_t num_buses() const { return buses.size(); }
  std::size_t num_lines() const { return lines.size(); }

  /// Position of a bus id in `buses`; throws std::out_of_range.
  std::size_t bus_index(int id) const;
  std::size_t slack_index() const;

  /// Dispatch cost ($/h) of a generator at `pg` p.u.
  double generator_cost(std::size_t gen, double pg) const {
    const auto& g = generators[gen];
    const double p = pg * base_mva;
    return g.c2 * p * p + g.c1 * p + g.c0;
  }

  double total_active_load() const;

  bool operator==(const Network& o) const {
    return name == o.name && base_mva == o.base_mva && buses == o.buses &&
           lines == o.lines && generators == o.generators;
  }
};

class NetworkError : public std::runtime_error {
 public:
  enum class Kind {
    malformed,
    missing_slack,
    multiple_slack,
    zero_impedance,
    disconnected,
    unknown_bus,
    invalid_bounds,
    unsupported,
  };
  NetworkError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Series admittance g + ib = 1 / (r + ix).
template <class Scalar>
std::pair<Scalar, Scalar> admittance(Scalar r, Scalar x) {
  const Scalar z2 = r * r + x * x;
  if (!(z2 > Scalar(0))) {
    throw NetworkError(NetworkError::Kind::zero_impedance,
                       "admittance: zero series impedance");
  }
  return {r / z2, -x / z2};
}

inline std::pair<double, double> admittance(const Line& line) {
  return admittance(line.r, line.x);
}

/// Inverse of `admittance`: r + ix = 1 / (g + ib).
template <class Scalar>
std::pair<Scalar, Scalar> impedance(Scalar g, Scalar b) {
  const Scalar y2 = g * g + b * b;
  if (!(y2 > Scalar(0))) {
    throw NetworkError(NetworkError::Kind::zero_impedance,
                       "impedance: zero series admittance");
  }
  return {g / y2, -b / y2};
}

/// Conductance and susceptance vectors of all lines, in line order.
std::pair<Vector, Vector> line_admittances(const Network& net);

/// Copy of `net` with line impedances replaced by 1 / (g + ib).
Network with_admittances(const Network& net, const Vector& g, const Vector& b);

struct VoltageLevel {
  double kv_low = 0.0;
  double kv_high = 0.0;
  std::vector<std::size_t> lines;  // positions in Network::lines
};

/// Partition of the lines keyed by the unordered pair of endpoint base kV,
/// sorted by key.
std::vector<VoltageLevel> voltage_levels(const Network& net);

/// Parallel lines get the mean (r, x) of their group and negative
/// resistances are clamped to zero. Idempotent.
Network preprocess(const Network& net);

/// Throws NetworkError when an invariant of the data model is violated.
void validate(const Network& net);

/// Connected components over the in-service lines; entry i is the component
/// label of bus i (labels are 0..k-1 in order of first appearance).
std::vector<int> connected_components(const Network& net,
                                      const std::vector<bool>& line_active);

}  // namespace plo
