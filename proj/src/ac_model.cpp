#include "ac_model.hpp"

#include <array>
#include <cmath>
#include <stdexcept>

namespace plo::detail {

namespace {

// Flow F = A(g, b) * W(v) + a * (C cos d + S sin d), with
// a = v_f v_t / tap, d = theta_f - theta_t - shift, and A, C, S linear in (g, b).
struct FlowShape {
  double ag, ab, a0;  // A = ag g + ab b + a0
  double cg, cb;      // C = cg g + cb b
  double sg, sb;      // S = sg g + sb b
  bool from_side;     // W = v_f^2 / tap^2 if true, v_t^2 otherwise
};

BranchTerm flow_term(const FlowShape& k, double tau, double shift, double vf, double vt,
                     double tf, double tt, double g, double b, bool second) {
  BranchTerm out;
  const double d = tf - tt - shift;
  const double cd = std::cos(d), sd = std::sin(d);
  const double big_a = k.ag * g + k.ab * b + k.a0;
  const double c = k.cg * g + k.cb * b;
  const double s = k.sg * g + k.sb * b;
  const double h = c * cd + s * sd;
  const double hd = -c * sd + s * cd;
  const double hg = k.cg * cd + k.sg * sd;
  const double hb = k.cb * cd + k.sb * sd;
  const double hgd = -k.cg * sd + k.sg * cd;
  const double hbd = -k.cb * sd + k.sb * cd;
  const double a = vf * vt / tau;
  const double a_vf = vt / tau, a_vt = vf / tau, a_vfvt = 1.0 / tau;

  double w, w_vf = 0.0, w_vt = 0.0, w_vfvf = 0.0, w_vtvt = 0.0;
  if (k.from_side) {
    w = vf * vf / (tau * tau);
    w_vf = 2.0 * vf / (tau * tau);
    w_vfvf = 2.0 / (tau * tau);
  } else {
    w = vt * vt;
    w_vt = 2.0 * vt;
    w_vtvt = 2.0;
  }

  out.value = big_a * w + a * h;
  auto& gr = out.grad;
  gr[0] = big_a * w_vf + a_vf * h;
  gr[1] = big_a * w_vt + a_vt * h;
  gr[2] = a * hd;
  gr[3] = -a * hd;
  gr[4] = k.ag * w + a * hg;
  gr[5] = k.ab * w + a * hb;
  if (!second) return out;

  auto& H = out.hess;
  H(0, 0) = big_a * w_vfvf;
  H(1, 1) = big_a * w_vtvt;
  H(1, 0) = a_vfvt * h;
  H(2, 0) = a_vf * hd;
  H(3, 0) = -a_vf * hd;
  H(2, 1) = a_vt * hd;
  H(3, 1) = -a_vt * hd;
  H(2, 2) = -a * h;
  H(3, 3) = -a * h;
  H(3, 2) = a * h;
  H(4, 0) = k.ag * w_vf + a_vf * hg;
  H(5, 0) = k.ab * w_vf + a_vf * hb;
  H(4, 1) = k.ag * w_vt + a_vt * hg;
  H(5, 1) = k.ab * w_vt + a_vt * hb;
  H(4, 2) = a * hgd;
  H(4, 3) = -a * hgd;
  H(5, 2) = a * hbd;
  H(5, 3) = -a * hbd;
  for (int i = 0; i < 6; ++i) {
    for (int j = i + 1; j < 6; ++j) H(i, j) = H(j, i);
  }
  return out;
}

}  // namespace

BranchFlowTerms branch_flows(const Line& line, double vf, double vt, double tf, double tt,
                             double g, double b, bool second) {
  const double half_bc = 0.5 * line.charging;
  const double tau = line.tap;
  const double phi = line.shift;
  // P_f = g vf^2/tau^2 - a (g cos d + b sin d)
  // Q_f = -(b + bc/2) vf^2/tau^2 - a (g sin d - b cos d)
  // P_t = g vt^2 - a (g cos d - b sin d)
  // Q_t = -(b + bc/2) vt^2 + a (g sin d + b cos d)
  static constexpr FlowShape pf{1, 0, 0, -1, 0, 0, -1, true};
  const FlowShape qf{0, -1, -half_bc, 0, 1, -1, 0, true};
  static constexpr FlowShape pt{1, 0, 0, -1, 0, 0, 1, false};
  const FlowShape qt{0, -1, -half_bc, 0, 1, 1, 0, false};
  return {flow_term(pf, tau, phi, vf, vt, tf, tt, g, b, second),
          flow_term(qf, tau, phi, vf, vt, tf, tt, g, b, second),
          flow_term(pt, tau, phi, vf, vt, tf, tt, g, b, second),
          flow_term(qt, tau, phi, vf, vt, tf, tt, g, b, second)};
}

struct AcModel::Data {
  Network net;
  AcModelSpec spec;
  std::size_t nb = 0, nl = 0, ng = 0, ns = 0;
  Eigen::Index block = 0;
  Eigen::Index n_vars = 0;
  std::vector<Eigen::Index> l_offset;  // per bus, -1 without load variable
  Eigen::Index n_load = 0;
  std::vector<std::size_t> from, to;   // bus positions per line
  std::vector<std::size_t> gen_bus;
  std::vector<std::vector<std::size_t>> gens_at;
  Vector g_const, b_const;
  std::vector<std::size_t> thermal;    // lines with a finite rating
  std::vector<std::size_t> angle;      // lines with a finite angle bound
  std::vector<double> cost_scale;      // cost rows are divided by these
  Eigen::Index rows_per_scenario = 0;
  Eigen::Index n_cons = 0;

  Eigen::Index v(std::size_t s, std::size_t i) const {
    return static_cast<Eigen::Index>(s) * block + static_cast<Eigen::Index>(i);
  }
  Eigen::Index th(std::size_t s, std::size_t i) const {
    return v(s, i) + static_cast<Eigen::Index>(nb);
  }
  Eigen::Index pg(std::size_t s, std::size_t k) const {
    return static_cast<Eigen::Index>(s) * block + static_cast<Eigen::Index>(2 * nb + k);
  }
  Eigen::Index qg(std::size_t s, std::size_t k) const {
    return pg(s, k) + static_cast<Eigen::Index>(ng);
  }
  Eigen::Index l(std::size_t s, std::size_t i) const {
    const auto off = l_offset[i];
    if (off < 0) return -1;
    return static_cast<Eigen::Index>(s) * block + static_cast<Eigen::Index>(2 * nb + 2 * ng) + off;
  }
  Eigen::Index gvar(std::size_t e) const {
    if (!spec.variable_admittance) return -1;
    return static_cast<Eigen::Index>(ns) * block + static_cast<Eigen::Index>(e);
  }
  Eigen::Index bvar(std::size_t e) const {
    if (!spec.variable_admittance) return -1;
    return static_cast<Eigen::Index>(ns) * block + static_cast<Eigen::Index>(nl + e);
  }
  const Vector& pd(std::size_t s) const { return spec.scenarios[s].pd; }
  const Vector& qd(std::size_t s) const { return spec.scenarios[s].qd; }

  std::array<Eigen::Index, 6> local(std::size_t s, std::size_t e) const {
    return {v(s, from[e]), v(s, to[e]), th(s, from[e]), th(s, to[e]), gvar(e), bvar(e)};
  }
  std::pair<double, double> admittance(const Vector& x, std::size_t e) const {
    if (spec.variable_admittance) return {x[gvar(e)], x[bvar(e)]};
    return {g_const[e], b_const[e]};
  }
  BranchFlowTerms flows(const Vector& x, std::size_t s, std::size_t e, bool second) const {
    const auto [g, b] = admittance(x, e);
    return branch_flows(net.lines[e], x[v(s, from[e])], x[v(s, to[e])], x[th(s, from[e])],
                        x[th(s, to[e])], g, b, second);
  }
  double cost(const Vector& x, std::size_t s) const {
    double c = 0.0;
    for (std::size_t k = 0; k < ng; ++k) c += net.generator_cost(k, x[pg(s, k)]);
    return c;
  }
  double cost_grad(const Vector& x, std::size_t s, std::size_t k) const {
    const auto& gen = net.generators[k];
    const double base = net.base_mva;
    return 2.0 * gen.c2 * base * base * x[pg(s, k)] + gen.c1 * base;
  }
  double cost_hess(std::size_t k) const {
    const double base = net.base_mva;
    return 2.0 * net.generators[k].c2 * base * base;
  }

  // Row offsets inside a scenario block.
  Eigen::Index row_p(std::size_t s, std::size_t i) const {
    return static_cast<Eigen::Index>(s) * rows_per_scenario + static_cast<Eigen::Index>(i);
  }
  Eigen::Index row_q(std::size_t s, std::size_t i) const {
    return row_p(s, i) + static_cast<Eigen::Index>(nb);
  }
  Eigen::Index row_thermal(std::size_t s, std::size_t t) const {
    return static_cast<Eigen::Index>(s) * rows_per_scenario +
           static_cast<Eigen::Index>(2 * nb + 2 * t);
  }
  Eigen::Index row_angle(std::size_t s, std::size_t t) const {
    return static_cast<Eigen::Index>(s) * rows_per_scenario +
           static_cast<Eigen::Index>(2 * nb + 2 * thermal.size() + t);
  }
  Eigen::Index row_cost(std::size_t s) const {
    return static_cast<Eigen::Index>(s + 1) * rows_per_scenario - 1;
  }

  double objective(const Vector& x) const;
  Vector gradient(const Vector& x) const;
  Vector constraints(const Vector& x) const;
  SparseMatrix jacobian(const Vector& x) const;
  SparseMatrix hessian(const Vector& x, double w, const Vector& lambda) const;
};

namespace {

void add_lower(std::vector<Triplet>& t, Eigen::Index r, Eigen::Index c, double v) {
  if (r < 0 || c < 0) return;
  if (r < c) std::swap(r, c);
  t.emplace_back(static_cast<int>(r), static_cast<int>(c), v);
}

void add_term_hessian(std::vector<Triplet>& t, const std::array<Eigen::Index, 6>& idx,
                      const BranchTerm::Hess& h, double weight) {
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j <= i; ++j) add_lower(t, idx[static_cast<std::size_t>(i)],
                                           idx[static_cast<std::size_t>(j)], weight * h(i, j));
  }
}

}  // namespace

double AcModel::Data::objective(const Vector& x) const {
  double f = 0.0;
  switch (spec.objective) {
    case ModelObjective::cost:
      for (std::size_t s = 0; s < ns; ++s) f += cost(x, s);
      break;
    case ModelObjective::none:
      break;
    case ModelObjective::load_served:
      for (std::size_t s = 0; s < ns; ++s) {
        for (std::size_t i = 0; i < nb; ++i) {
          if (l_offset[i] >= 0) f -= x[l(s, i)] * pd(s)[static_cast<Eigen::Index>(i)];
        }
      }
      break;
    case ModelObjective::admittance_distance:
      for (std::size_t e = 0; e < nl; ++e) {
        const auto ei = static_cast<Eigen::Index>(e);
        const double dg = x[gvar(e)] - spec.g_target[ei];
        const double db = x[bvar(e)] - spec.b_target[ei];
        f += dg * dg + db * db;
      }
      break;
  }
  return f;
}

Vector AcModel::Data::gradient(const Vector& x) const {
  Vector g = Vector::Zero(n_vars);
  switch (spec.objective) {
    case ModelObjective::cost:
      for (std::size_t s = 0; s < ns; ++s) {
        for (std::size_t k = 0; k < ng; ++k) g[pg(s, k)] = cost_grad(x, s, k);
      }
      break;
    case ModelObjective::none:
      break;
    case ModelObjective::load_served:
      for (std::size_t s = 0; s < ns; ++s) {
        for (std::size_t i = 0; i < nb; ++i) {
          if (l_offset[i] >= 0) g[l(s, i)] = -pd(s)[static_cast<Eigen::Index>(i)];
        }
      }
      break;
    case ModelObjective::admittance_distance:
      for (std::size_t e = 0; e < nl; ++e) {
        const auto ei = static_cast<Eigen::Index>(e);
        g[gvar(e)] = 2.0 * (x[gvar(e)] - spec.g_target[ei]);
        g[bvar(e)] = 2.0 * (x[bvar(e)] - spec.b_target[ei]);
      }
      break;
  }
  return g;
}

Vector AcModel::Data::constraints(const Vector& x) const {
  Vector c = Vector::Zero(n_cons);
  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t i = 0; i < nb; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const double vi = x[v(s, i)];
      const auto li = l(s, i);
      const double scale = li >= 0 ? x[li] : 1.0;
      double p = -scale * pd(s)[ii] - net.buses[i].gs * vi * vi;
      double q = -scale * qd(s)[ii] + net.buses[i].bs * vi * vi;
      for (auto k : gens_at[i]) {
        p += x[pg(s, k)];
        q += x[qg(s, k)];
      }
      c[row_p(s, i)] += p;
      c[row_q(s, i)] += q;
    }
    for (std::size_t e = 0; e < nl; ++e) {
      const auto f = flows(x, s, e, false);
      c[row_p(s, from[e])] -= f.pf.value;
      c[row_q(s, from[e])] -= f.qf.value;
      c[row_p(s, to[e])] -= f.pt.value;
      c[row_q(s, to[e])] -= f.qt.value;
    }
    for (std::size_t t = 0; t < thermal.size(); ++t) {
      const auto f = flows(x, s, thermal[t], false);
      c[row_thermal(s, t)] = f.pf.value * f.pf.value + f.qf.value * f.qf.value;
      c[row_thermal(s, t) + 1] = f.pt.value * f.pt.value + f.qt.value * f.qt.value;
    }
    for (std::size_t t = 0; t < angle.size(); ++t) {
      const auto e = angle[t];
      c[row_angle(s, t)] = x[th(s, from[e])] - x[th(s, to[e])];
    }
    if (!spec.cost_band.empty()) c[row_cost(s)] = cost(x, s) / cost_scale[s];
  }
  return c;
}

SparseMatrix AcModel::Data::jacobian(const Vector& x) const {
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(ns * (4 * nb + 2 * ng + 48 * nl)));
  auto add = [&](Eigen::Index r, Eigen::Index c, double val) {
    if (c >= 0) t.emplace_back(static_cast<int>(r), static_cast<int>(c), val);
  };
  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t i = 0; i < nb; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const double vi = x[v(s, i)];
      add(row_p(s, i), v(s, i), -2.0 * net.buses[i].gs * vi);
      add(row_q(s, i), v(s, i), 2.0 * net.buses[i].bs * vi);
      const auto li = l(s, i);
      if (li >= 0) {
        add(row_p(s, i), li, -pd(s)[ii]);
        add(row_q(s, i), li, -qd(s)[ii]);
      }
      for (auto k : gens_at[i]) {
        add(row_p(s, i), pg(s, k), 1.0);
        add(row_q(s, i), qg(s, k), 1.0);
      }
    }
    for (std::size_t e = 0; e < nl; ++e) {
      const auto f = flows(x, s, e, false);
      const auto idx = local(s, e);
      for (std::size_t j = 0; j < 6; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        add(row_p(s, from[e]), idx[j], -f.pf.grad[jj]);
        add(row_q(s, from[e]), idx[j], -f.qf.grad[jj]);
        add(row_p(s, to[e]), idx[j], -f.pt.grad[jj]);
        add(row_q(s, to[e]), idx[j], -f.qt.grad[jj]);
      }
    }
    for (std::size_t k = 0; k < thermal.size(); ++k) {
      const auto e = thermal[k];
      const auto f = flows(x, s, e, false);
      const auto idx = local(s, e);
      const BranchTerm::Grad gf = 2.0 * (f.pf.value * f.pf.grad + f.qf.value * f.qf.grad);
      const BranchTerm::Grad gt = 2.0 * (f.pt.value * f.pt.grad + f.qt.value * f.qt.grad);
      for (std::size_t j = 0; j < 6; ++j) {
        add(row_thermal(s, k), idx[j], gf[static_cast<Eigen::Index>(j)]);
        add(row_thermal(s, k) + 1, idx[j], gt[static_cast<Eigen::Index>(j)]);
      }
    }
    for (std::size_t k = 0; k < angle.size(); ++k) {
      const auto e = angle[k];
      add(row_angle(s, k), th(s, from[e]), 1.0);
      add(row_angle(s, k), th(s, to[e]), -1.0);
    }
    if (!spec.cost_band.empty()) {
      for (std::size_t k = 0; k < ng; ++k) {
        add(row_cost(s), pg(s, k), cost_grad(x, s, k) / cost_scale[s]);
      }
    }
  }
  SparseMatrix j(n_cons, n_vars);
  j.setFromTriplets(t.begin(), t.end());
  return j;
}

SparseMatrix AcModel::Data::hessian(const Vector& x, double w, const Vector& lambda) const {
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(ns * (2 * nb + ng + 21 * 6 * nl) + 2 * nl));
  // Objective.
  if (spec.objective == ModelObjective::cost) {
    for (std::size_t s = 0; s < ns; ++s) {
      for (std::size_t k = 0; k < ng; ++k) add_lower(t, pg(s, k), pg(s, k), w * cost_hess(k));
    }
  } else if (spec.objective == ModelObjective::admittance_distance) {
    for (std::size_t e = 0; e < nl; ++e) {
      add_lower(t, gvar(e), gvar(e), 2.0 * w);
      add_lower(t, bvar(e), bvar(e), 2.0 * w);
    }
  }
  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t i = 0; i < nb; ++i) {
      add_lower(t, v(s, i), v(s, i),
                -2.0 * net.buses[i].gs * lambda[row_p(s, i)] +
                    2.0 * net.buses[i].bs * lambda[row_q(s, i)]);
    }
    for (std::size_t e = 0; e < nl; ++e) {
      const auto f = flows(x, s, e, true);
      const BranchTerm::Hess h = -lambda[row_p(s, from[e])] * f.pf.hess -
                                 lambda[row_q(s, from[e])] * f.qf.hess -
                                 lambda[row_p(s, to[e])] * f.pt.hess -
                                 lambda[row_q(s, to[e])] * f.qt.hess;
      add_term_hessian(t, local(s, e), h, 1.0);
    }
    for (std::size_t k = 0; k < thermal.size(); ++k) {
      const auto e = thermal[k];
      const auto f = flows(x, s, e, true);
      const double lf = lambda[row_thermal(s, k)];
      const double lt = lambda[row_thermal(s, k) + 1];
      const BranchTerm::Hess h =
          2.0 * lf *
              (f.pf.grad * f.pf.grad.transpose() + f.pf.value * f.pf.hess +
               f.qf.grad * f.qf.grad.transpose() + f.qf.value * f.qf.hess) +
          2.0 * lt *
              (f.pt.grad * f.pt.grad.transpose() + f.pt.value * f.pt.hess +
               f.qt.grad * f.qt.grad.transpose() + f.qt.value * f.qt.hess);
      add_term_hessian(t, local(s, e), h, 1.0);
    }
    if (!spec.cost_band.empty()) {
      for (std::size_t k = 0; k < ng; ++k) {
        add_lower(t, pg(s, k), pg(s, k), lambda[row_cost(s)] * cost_hess(k) / cost_scale[s]);
      }
    }
  }
  SparseMatrix h(n_vars, n_vars);
  h.setFromTriplets(t.begin(), t.end());
  return h;
}

AcModel::AcModel(const Network& net, AcModelSpec spec) {
  auto d = std::make_shared<Data>();
  d->net = net;
  d->nb = net.buses.size();
  d->nl = net.lines.size();
  d->ng = net.generators.size();
  if (spec.scenarios.empty()) {
    Scenario sc{Vector(static_cast<Eigen::Index>(d->nb)), Vector(static_cast<Eigen::Index>(d->nb))};
    for (std::size_t i = 0; i < d->nb; ++i) {
      sc.pd[static_cast<Eigen::Index>(i)] = net.buses[i].pd;
      sc.qd[static_cast<Eigen::Index>(i)] = net.buses[i].qd;
    }
    spec.scenarios.push_back(std::move(sc));
  }
  d->ns = spec.scenarios.size();
  for (const auto& sc : spec.scenarios) {
    if (sc.pd.size() != static_cast<Eigen::Index>(d->nb) ||
        sc.qd.size() != static_cast<Eigen::Index>(d->nb)) {
      throw std::invalid_argument("AcModel: scenario load size");
    }
  }
  if (!spec.cost_band.empty() && spec.cost_band.size() != d->ns) {
    throw std::invalid_argument("AcModel: cost band per scenario");
  }
  const auto nl = static_cast<Eigen::Index>(d->nl);
  if (spec.objective == ModelObjective::admittance_distance && !spec.variable_admittance) {
    throw std::invalid_argument("AcModel: distance objective needs variable admittances");
  }
  if (spec.variable_admittance) {
    for (const Vector* vec : {&spec.g_lo, &spec.g_hi, &spec.b_lo, &spec.b_hi}) {
      if (vec->size() != nl) throw std::invalid_argument("AcModel: admittance bound size");
    }
  }

  d->l_offset.assign(d->nb, -1);
  if (spec.variable_load) {
    for (std::size_t i = 0; i < d->nb; ++i) {
      bool loaded = false;
      for (const auto& sc : spec.scenarios) {
        const auto ii = static_cast<Eigen::Index>(i);
        loaded = loaded || sc.pd[ii] != 0.0 || sc.qd[ii] != 0.0;
      }
      if (loaded) d->l_offset[i] = d->n_load++;
    }
  }
  d->block = static_cast<Eigen::Index>(2 * d->nb + 2 * d->ng) + d->n_load;
  d->n_vars = d->block * static_cast<Eigen::Index>(d->ns) + (spec.variable_admittance ? 2 * nl : 0);

  d->gens_at.resize(d->nb);
  for (std::size_t k = 0; k < d->ng; ++k) {
    const auto bi = net.bus_index(net.generators[k].bus);
    d->gen_bus.push_back(bi);
    d->gens_at[bi].push_back(k);
  }
  d->g_const.resize(nl);
  d->b_const.resize(nl);
  for (std::size_t e = 0; e < d->nl; ++e) {
    const auto& line = net.lines[e];
    d->from.push_back(net.bus_index(line.from_bus));
    d->to.push_back(net.bus_index(line.to_bus));
    const auto [g, b] = admittance(line);
    d->g_const[static_cast<Eigen::Index>(e)] = g;
    d->b_const[static_cast<Eigen::Index>(e)] = b;
    if (std::isfinite(line.s_max) && line.s_max < kBoundInf) d->thermal.push_back(e);
    if ((std::isfinite(line.angle_min) && line.angle_min > -kBoundInf) ||
        (std::isfinite(line.angle_max) && line.angle_max < kBoundInf)) {
      d->angle.push_back(e);
    }
  }
  d->rows_per_scenario = static_cast<Eigen::Index>(2 * d->nb + 2 * d->thermal.size() +
                                                   d->angle.size()) +
                         (spec.cost_band.empty() ? 0 : 1);
  d->n_cons = d->rows_per_scenario * static_cast<Eigen::Index>(d->ns);
  // Cost rows are relative to the band's midpoint.
  for (const auto& [lo, hi] : spec.cost_band) {
    d->cost_scale.push_back(std::max(1.0, std::abs(0.5 * (lo + hi))));
  }
  d->spec = std::move(spec);

  n_scen_ = d->ns;
  n_vars_ = d->n_vars;
  block_ = d->block;
  l_offset_ = d->l_offset;
  n_load_ = d->n_load;
  net_ = std::make_shared<const Network>(net);
  data_ = std::move(d);
}

Eigen::Index AcModel::v_index(std::size_t s, std::size_t bus) const { return data_->v(s, bus); }
Eigen::Index AcModel::theta_index(std::size_t s, std::size_t bus) const {
  return data_->th(s, bus);
}
Eigen::Index AcModel::pg_index(std::size_t s, std::size_t gen) const { return data_->pg(s, gen); }
Eigen::Index AcModel::qg_index(std::size_t s, std::size_t gen) const { return data_->qg(s, gen); }
Eigen::Index AcModel::l_index(std::size_t s, std::size_t bus) const { return data_->l(s, bus); }
Eigen::Index AcModel::g_index(std::size_t line) const { return data_->gvar(line); }
Eigen::Index AcModel::b_index(std::size_t line) const { return data_->bvar(line); }

double AcModel::cost(const Vector& x, std::size_t s) const { return data_->cost(x, s); }

std::pair<double, double> AcModel::line_admittance(const Vector& x, std::size_t line) const {
  return data_->admittance(x, line);
}

NlpProblem AcModel::problem() const {
  const auto d = data_;
  const auto& net = d->net;
  const auto& spec = d->spec;
  NlpProblem p;
  p.n_vars = d->n_vars;
  p.n_cons = d->n_cons;
  p.var_lo = Vector::Constant(p.n_vars, -kInf);
  p.var_hi = Vector::Constant(p.n_vars, kInf);
  p.x0 = Vector::Zero(p.n_vars);
  const auto slack = net.slack_index();
  for (std::size_t s = 0; s < d->ns; ++s) {
    for (std::size_t i = 0; i < d->nb; ++i) {
      const auto& bus = net.buses[i];
      const auto ii = static_cast<Eigen::Index>(i);
      p.var_lo[d->v(s, i)] = bus.v_min;
      p.var_hi[d->v(s, i)] = bus.v_max;
      p.x0[d->v(s, i)] = spec.v_start ? (*spec.v_start)[ii] : 1.0;
      p.x0[d->th(s, i)] = spec.theta_start ? (*spec.theta_start)[ii] : 0.0;
      if (i == slack) p.var_lo[d->th(s, i)] = p.var_hi[d->th(s, i)] = 0.0;
      const auto li = d->l(s, i);
      if (li >= 0) {
        p.var_lo[li] = 0.0;
        p.var_hi[li] = 1.0;
        p.x0[li] = 1.0;
      }
    }
    for (std::size_t k = 0; k < d->ng; ++k) {
      const auto& gen = net.generators[k];
      const auto kk = static_cast<Eigen::Index>(k);
      p.var_lo[d->pg(s, k)] = gen.p_min;
      p.var_hi[d->pg(s, k)] = gen.p_max;
      p.var_lo[d->qg(s, k)] = gen.q_min;
      p.var_hi[d->qg(s, k)] = gen.q_max;
      p.x0[d->pg(s, k)] = spec.pg_start ? (*spec.pg_start)[kk] : 0.5 * (gen.p_min + gen.p_max);
      p.x0[d->qg(s, k)] = spec.qg_start ? (*spec.qg_start)[kk] : 0.5 * (gen.q_min + gen.q_max);
    }
  }
  if (spec.variable_admittance) {
    for (std::size_t e = 0; e < d->nl; ++e) {
      const auto ei = static_cast<Eigen::Index>(e);
      p.var_lo[d->gvar(e)] = spec.g_lo[ei];
      p.var_hi[d->gvar(e)] = spec.g_hi[ei];
      p.var_lo[d->bvar(e)] = spec.b_lo[ei];
      p.var_hi[d->bvar(e)] = spec.b_hi[ei];
      p.x0[d->gvar(e)] = spec.g_start.size() ? spec.g_start[ei] : d->g_const[ei];
      p.x0[d->bvar(e)] = spec.b_start.size() ? spec.b_start[ei] : d->b_const[ei];
    }
  }

  p.con_lo = Vector::Zero(p.n_cons);
  p.con_hi = Vector::Zero(p.n_cons);
  for (std::size_t s = 0; s < d->ns; ++s) {
    for (std::size_t k = 0; k < d->thermal.size(); ++k) {
      const double smax = net.lines[d->thermal[k]].s_max;
      for (int side = 0; side < 2; ++side) {
        p.con_lo[d->row_thermal(s, k) + side] = -kInf;
        p.con_hi[d->row_thermal(s, k) + side] = smax * smax;
      }
    }
    for (std::size_t k = 0; k < d->angle.size(); ++k) {
      const auto& line = net.lines[d->angle[k]];
      p.con_lo[d->row_angle(s, k)] = line.angle_min;
      p.con_hi[d->row_angle(s, k)] = line.angle_max;
    }
    if (!spec.cost_band.empty()) {
      p.con_lo[d->row_cost(s)] = spec.cost_band[s].first / d->cost_scale[s];
      p.con_hi[d->row_cost(s)] = spec.cost_band[s].second / d->cost_scale[s];
    }
  }

  p.objective = [d](const Vector& x) { return d->objective(x); };
  p.gradient = [d](const Vector& x) { return d->gradient(x); };
  p.constraints = [d](const Vector& x) { return d->constraints(x); };
  p.jacobian = [d](const Vector& x) { return d->jacobian(x); };
  p.hessian = [d](const Vector& x, double w, const Vector& lam) { return d->hessian(x, w, lam); };
  return p;
}

}  // namespace plo::detail
