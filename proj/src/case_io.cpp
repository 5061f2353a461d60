#include <plo/case_io.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>
#include <regex>
#include <sstream>

namespace plo {
namespace {

using Kind = NetworkError::Kind;
using Table = std::vector<std::vector<double>>;

constexpr double kDeg = std::numbers::pi / 180.0;

std::string strip_comments(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool comment = false;
  for (char c : text) {
    if (c == '%') comment = true;
    if (c == '\n') comment = false;
    if (!comment) out.push_back(c);
  }
  return out;
}

double parse_number(std::string_view tok) {
  double v = 0.0;
  if (tok == "Inf" || tok == "inf") return kInf;
  if (tok == "-Inf" || tok == "-inf") return -kInf;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw NetworkError(Kind::malformed, "bad number '" + std::string(tok) + "'");
  }
  return v;
}

std::optional<Table> find_table(const std::string& text, const std::string& name) {
  const std::regex head("mpc\\." + name + "\\s*=\\s*\\[");
  std::smatch m;
  if (!std::regex_search(text, m, head)) return std::nullopt;
  const auto begin = static_cast<std::size_t>(m.position(0) + m.length(0));
  const auto end = text.find(']', begin);
  if (end == std::string::npos) {
    throw NetworkError(Kind::malformed, "unterminated table mpc." + name);
  }
  Table rows;
  std::vector<double> row;
  std::string tok;
  auto flush_tok = [&] {
    if (!tok.empty()) row.push_back(parse_number(tok));
    tok.clear();
  };
  auto flush_row = [&] {
    flush_tok();
    if (!row.empty()) rows.push_back(std::move(row));
    row.clear();
  };
  for (std::size_t i = begin; i < end; ++i) {
    const char c = text[i];
    if (c == ';' || c == '\n') {
      flush_row();
    } else if (c == ' ' || c == '\t' || c == ',' || c == '\r') {
      flush_tok();
    } else {
      tok.push_back(c);
    }
  }
  flush_row();
  for (const auto& r : rows) {
    if (r.size() != rows.front().size()) {
      throw NetworkError(Kind::malformed, "ragged rows in mpc." + name);
    }
  }
  return rows;
}

Table require_table(const std::string& text, const std::string& name, std::size_t min_cols) {
  auto t = find_table(text, name);
  if (!t || t->empty()) throw NetworkError(Kind::malformed, "missing table mpc." + name);
  if (t->front().size() < min_cols) {
    throw NetworkError(Kind::malformed, "mpc." + name + " has too few columns");
  }
  return *t;
}

Network parse_matpower(std::string_view raw) {
  const std::string text = strip_comments(raw);
  Network net;

  static const std::regex fn("function\\s+\\w+\\s*=\\s*(\\w+)");
  std::smatch m;
  if (std::regex_search(text, m, fn)) net.name = m[1];

  static const std::regex base("mpc\\.baseMVA\\s*=\\s*([-+0-9.eE]+)");
  if (!std::regex_search(text, m, base)) {
    throw NetworkError(Kind::malformed, "missing mpc.baseMVA");
  }
  net.base_mva = parse_number(m[1].str());
  const double mva = net.base_mva;

  for (const auto& r : require_table(text, "bus", 13)) {
    Bus b;
    b.id = static_cast<int>(r[0]);
    const int type = static_cast<int>(r[1]);
    if (type < 1 || type > 4) throw NetworkError(Kind::malformed, "bad bus type");
    if (type == 4) continue;
    b.type = static_cast<BusType>(type);
    b.pd = r[2] / mva;
    b.qd = r[3] / mva;
    b.gs = r[4] / mva;
    b.bs = r[5] / mva;
    b.area = static_cast<int>(r[6]);
    b.vm = r[7];
    b.va = r[8] * kDeg;
    b.base_kv = r[9];
    b.zone = static_cast<int>(r[10]);
    b.v_max = r[11];
    b.v_min = r[12];
    net.buses.push_back(b);
  }
  std::unordered_map<int, bool> live;
  for (const auto& b : net.buses) live[b.id] = true;

  const Table gen = require_table(text, "gen", 10);
  const Table cost = require_table(text, "gencost", 5);
  if (cost.size() < gen.size()) {
    throw NetworkError(Kind::malformed, "mpc.gencost has fewer rows than mpc.gen");
  }
  for (std::size_t k = 0; k < gen.size(); ++k) {
    const auto& r = gen[k];
    if (r[7] <= 0.0) continue;
    if (!live.count(static_cast<int>(r[0]))) continue;
    Generator g;
    g.bus = static_cast<int>(r[0]);
    g.pg = r[1] / mva;
    g.qg = r[2] / mva;
    g.q_max = r[3] / mva;
    g.q_min = r[4] / mva;
    g.vg = r[5];
    g.p_max = r[8] / mva;
    g.p_min = r[9] / mva;
    const auto& c = cost[k];
    if (static_cast<int>(c[0]) != 2) {
      throw NetworkError(Kind::unsupported, "only polynomial generator costs are supported");
    }
    const auto ncoef = static_cast<std::size_t>(c[3]);
    if (ncoef > 3 || c.size() < 4 + ncoef) {
      throw NetworkError(Kind::unsupported, "generator cost must be at most quadratic");
    }
    // Coefficients are listed highest order first.
    double coef[3] = {0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < ncoef; ++i) coef[ncoef - 1 - i] = c[4 + i];
    g.c0 = coef[0];
    g.c1 = coef[1];
    g.c2 = coef[2];
    net.generators.push_back(g);
  }

  const Table branch = require_table(text, "branch", 11);
  for (std::size_t k = 0; k < branch.size(); ++k) {
    const auto& r = branch[k];
    if (r[10] <= 0.0) continue;
    Line l;
    l.id = static_cast<int>(k + 1);
    l.from_bus = static_cast<int>(r[0]);
    l.to_bus = static_cast<int>(r[1]);
    if (!live.count(l.from_bus) || !live.count(l.to_bus)) continue;
    l.r = r[2];
    l.x = r[3];
    l.charging = r[4];
    l.s_max = r[5] > 0.0 ? r[5] / mva : kInf;
    l.tap = r[8] != 0.0 ? r[8] : 1.0;
    l.shift = r[9] * kDeg;
    if (r.size() >= 13) {
      const double amin = r[11], amax = r[12];
      l.angle_min = (amin != 0.0 && amin > -360.0) ? amin * kDeg : -kInf;
      l.angle_max = (amax != 0.0 && amax < 360.0) ? amax * kDeg : kInf;
    }
    net.lines.push_back(l);
  }
  return net;
}

double json_number(const nlohmann::json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (v.is_null()) return fallback;
  return v.get<double>();
}

nlohmann::json bound(double v) {
  if (std::isinf(v)) return nullptr;
  return v;
}

}  // namespace

Network parse_case(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  Network net;
  if (first != std::string_view::npos && text[first] == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw NetworkError(Kind::malformed, std::string("invalid JSON case: ") + e.what());
    }
    net = network_from_json(j);
  } else {
    net = parse_matpower(text);
  }
  validate(net);
  return net;
}

Network read_case_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NetworkError(Kind::malformed, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_case(ss.str());
}

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string write_matpower(const Network& net) {
  const double mva = net.base_mva;
  const std::string name = net.name.empty() ? "released_case" : net.name;
  std::ostringstream o;
  auto f = [](double v) { return format_double(v); };
  o << "function mpc = " << name << "\n";
  o << "mpc.version = '2';\n";
  o << "mpc.baseMVA = " << f(mva) << ";\n\n";

  o << "%% bus data\n";
  o << "%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin\n";
  o << "mpc.bus = [\n";
  for (const auto& b : net.buses) {
    o << '\t' << b.id << '\t' << static_cast<int>(b.type) << '\t' << f(b.pd * mva) << '\t'
      << f(b.qd * mva) << '\t' << f(b.gs * mva) << '\t' << f(b.bs * mva) << '\t' << b.area
      << '\t' << f(b.vm) << '\t' << f(b.va / kDeg) << '\t' << f(b.base_kv) << '\t' << b.zone
      << '\t' << f(b.v_max) << '\t' << f(b.v_min) << ";\n";
  }
  o << "];\n\n";

  o << "%% generator data\n";
  o << "%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin\n";
  o << "mpc.gen = [\n";
  for (const auto& g : net.generators) {
    o << '\t' << g.bus << '\t' << f(g.pg * mva) << '\t' << f(g.qg * mva) << '\t'
      << f(g.q_max * mva) << '\t' << f(g.q_min * mva) << '\t' << f(g.vg) << '\t' << f(mva)
      << "\t1\t" << f(g.p_max * mva) << '\t' << f(g.p_min * mva) << ";\n";
  }
  o << "];\n\n";

  o << "%% generator cost data\n";
  o << "%\t2\tstartup\tshutdown\tn\tc(n-1)\t...\tc0\n";
  o << "mpc.gencost = [\n";
  for (const auto& g : net.generators) {
    o << "\t2\t0\t0\t3\t" << f(g.c2) << '\t' << f(g.c1) << '\t' << f(g.c0) << ";\n";
  }
  o << "];\n\n";

  o << "%% branch data\n";
  o << "%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\tangmin\tangmax\n";
  o << "mpc.branch = [\n";
  for (const auto& l : net.lines) {
    const double rate = std::isinf(l.s_max) ? 0.0 : l.s_max * mva;
    const double amin = std::isinf(l.angle_min) ? -360.0 : l.angle_min / kDeg;
    const double amax = std::isinf(l.angle_max) ? 360.0 : l.angle_max / kDeg;
    o << '\t' << l.from_bus << '\t' << l.to_bus << '\t' << f(l.r) << '\t' << f(l.x) << '\t'
      << f(l.charging) << '\t' << f(rate) << '\t' << f(rate) << '\t' << f(rate) << '\t'
      << f(l.tap) << '\t' << f(l.shift / kDeg) << "\t1\t" << f(amin) << '\t' << f(amax)
      << ";\n";
  }
  o << "];\n";
  return o.str();
}

nlohmann::json to_json(const Network& net) {
  nlohmann::json j;
  j["name"] = net.name;
  j["base_mva"] = net.base_mva;
  auto& buses = j["buses"] = nlohmann::json::array();
  for (const auto& b : net.buses) {
    buses.push_back({{"id", b.id},
                     {"type", static_cast<int>(b.type)},
                     {"pd", b.pd},
                     {"qd", b.qd},
                     {"gs", b.gs},
                     {"bs", b.bs},
                     {"v_min", b.v_min},
                     {"v_max", b.v_max},
                     {"base_kv", b.base_kv},
                     {"vm", b.vm},
                     {"va", b.va},
                     {"area", b.area},
                     {"zone", b.zone}});
  }
  auto& lines = j["lines"] = nlohmann::json::array();
  for (const auto& l : net.lines) {
    lines.push_back({{"id", l.id},
                     {"from_bus", l.from_bus},
                     {"to_bus", l.to_bus},
                     {"r", l.r},
                     {"x", l.x},
                     {"charging", l.charging},
                     {"s_max", bound(l.s_max)},
                     {"tap", l.tap},
                     {"shift", l.shift},
                     {"angle_min", bound(l.angle_min)},
                     {"angle_max", bound(l.angle_max)}});
  }
  auto& gens = j["generators"] = nlohmann::json::array();
  for (const auto& g : net.generators) {
    gens.push_back({{"bus", g.bus},
                    {"pg", g.pg},
                    {"qg", g.qg},
                    {"p_min", g.p_min},
                    {"p_max", g.p_max},
                    {"q_min", g.q_min},
                    {"q_max", g.q_max},
                    {"vg", g.vg},
                    {"c0", g.c0},
                    {"c1", g.c1},
                    {"c2", g.c2}});
  }
  return j;
}

Network network_from_json(const nlohmann::json& j) {
  Network net;
  try {
    net.name = j.value("name", std::string{});
    net.base_mva = j.at("base_mva").get<double>();
    for (const auto& e : j.at("buses")) {
      Bus b;
      b.id = e.at("id").get<int>();
      b.type = static_cast<BusType>(e.at("type").get<int>());
      b.pd = e.at("pd").get<double>();
      b.qd = e.at("qd").get<double>();
      b.gs = json_number(e, "gs", 0.0);
      b.bs = json_number(e, "bs", 0.0);
      b.v_min = e.at("v_min").get<double>();
      b.v_max = e.at("v_max").get<double>();
      b.base_kv = e.at("base_kv").get<double>();
      b.vm = json_number(e, "vm", 1.0);
      b.va = json_number(e, "va", 0.0);
      b.area = e.value("area", 1);
      b.zone = e.value("zone", 1);
      net.buses.push_back(b);
    }
    for (const auto& e : j.at("lines")) {
      Line l;
      l.id = e.at("id").get<int>();
      l.from_bus = e.at("from_bus").get<int>();
      l.to_bus = e.at("to_bus").get<int>();
      l.r = e.at("r").get<double>();
      l.x = e.at("x").get<double>();
      l.charging = json_number(e, "charging", 0.0);
      l.s_max = json_number(e, "s_max", kInf);
      l.tap = json_number(e, "tap", 1.0);
      l.shift = json_number(e, "shift", 0.0);
      l.angle_min = json_number(e, "angle_min", -kInf);
      l.angle_max = json_number(e, "angle_max", kInf);
      net.lines.push_back(l);
    }
    for (const auto& e : j.at("generators")) {
      Generator g;
      g.bus = e.at("bus").get<int>();
      g.pg = json_number(e, "pg", 0.0);
      g.qg = json_number(e, "qg", 0.0);
      g.p_min = e.at("p_min").get<double>();
      g.p_max = e.at("p_max").get<double>();
      g.q_min = e.at("q_min").get<double>();
      g.q_max = e.at("q_max").get<double>();
      g.vg = json_number(e, "vg", 1.0);
      g.c0 = json_number(e, "c0", 0.0);
      g.c1 = json_number(e, "c1", 0.0);
      g.c2 = json_number(e, "c2", 0.0);
      net.generators.push_back(g);
    }
  } catch (const nlohmann::json::exception& e) {
    throw NetworkError(Kind::malformed, std::string("invalid network JSON: ") + e.what());
  }
  return net;
}

}  // namespace plo
