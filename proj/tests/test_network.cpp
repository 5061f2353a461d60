#include <doctest.h>
#include <plo/case_io.hpp>
#include <plo/network.hpp>

#include "helpers.hpp"

#include <cmath>

using namespace plo;

TEST_CASE("IEEE-14 parses into per-unit data") {
  const Network net = plo::read_case_file(testing::data_file("case14_ieee"));
  CHECK(net.buses.size() == 14);
  CHECK(net.lines.size() == 20);
  CHECK(net.generators.size() == 5);
  CHECK(net.base_mva == 100.0);
  CHECK(net.buses[net.slack_index()].id == 1);
  // Bus 2 carries 21.7 MW of load.
  CHECK(net.buses[net.bus_index(2)].pd == doctest::Approx(0.217));
  CHECK_NOTHROW(validate(net));
}

TEST_CASE("MATPOWER text round trip") {
  for (const char* name : {"case5_pjm", "case14_ieee", "case118_ieee"}) {
    const Network net = testing::load(name);
    const Network back = parse_case(write_matpower(net));
    CHECK_MESSAGE(back == net, name);
  }
}

TEST_CASE("JSON round trip") {
  const Network net = testing::load("case30_ieee");
  CHECK(network_from_json(to_json(net)) == net);
  CHECK(parse_case(to_json(net).dump()) == net);
}

TEST_CASE("format_double is the shortest exact text") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 123456.789}) {
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(0.1) == "0.1");
}

TEST_CASE("preprocess is idempotent and merges parallel lines") {
  for (const char* name : {"case14_ieee", "case39_epri", "case118_ieee", "case162_ieee_dtc"}) {
    const Network once = preprocess(read_case_file(testing::data_file(name)));
    CHECK_MESSAGE(preprocess(once) == once, name);
    for (const auto& l : once.lines) CHECK(l.r >= 0.0);
  }

  const std::string text = testing::two_bus_text(0.01, 0.1, 50, 10, 200);
  const auto pos = text.find("mpc.branch = [\n") + std::string("mpc.branch = [\n").size();
  std::string doubled = text;
  doubled.insert(pos, "  1 2 0.03 0.3 0 0 0 0 0 0 1 -360 360;\n");
  const Network raw = parse_case(doubled);
  REQUIRE(raw.lines.size() == 2);
  const Network net = preprocess(raw);
  REQUIRE(net.lines.size() == 2);
  CHECK(net.lines[0].r == doctest::Approx(0.02));
  CHECK(net.lines[1].x == doctest::Approx(0.2));
}

TEST_CASE("admittance and impedance are inverse") {
  const auto [g, b] = admittance(0.02, 0.1);
  CHECK(g == doctest::Approx(0.02 / 0.0104));
  CHECK(b == doctest::Approx(-0.1 / 0.0104));
  const auto [r, x] = impedance(g, b);
  CHECK(r == doctest::Approx(0.02).epsilon(1e-14));
  CHECK(x == doctest::Approx(0.1).epsilon(1e-14));
  CHECK_THROWS_AS(admittance(0.0, 0.0), NetworkError);
  CHECK_THROWS_AS(impedance(0.0, 0.0), NetworkError);
}

TEST_CASE("with_admittances keeps unchanged lines bit for bit") {
  const Network net = testing::load("case39_epri");
  auto [g, b] = line_admittances(net);
  CHECK(with_admittances(net, g, b) == net);
  g[3] *= 2.0;
  b[3] *= 2.0;
  const Network out = with_admittances(net, g, b);
  CHECK(out.lines[3].r == doctest::Approx(net.lines[3].r / 2.0));
  CHECK(out.lines[4] == net.lines[4]);
}

TEST_CASE("voltage levels partition the lines") {
  const Network net = testing::load("case118_ieee");
  const auto levels = voltage_levels(net);
  std::vector<int> seen(net.lines.size(), 0);
  for (std::size_t v = 0; v < levels.size(); ++v) {
    CHECK(levels[v].kv_low <= levels[v].kv_high);
    if (v > 0) CHECK(std::pair{levels[v - 1].kv_low, levels[v - 1].kv_high} < std::pair{levels[v].kv_low, levels[v].kv_high});
    for (auto e : levels[v].lines) ++seen[e];
  }
  for (int s : seen) CHECK(s == 1);
}

TEST_CASE("connected components") {
  const Network net = testing::load("case14_ieee");
  std::vector<bool> all(net.lines.size(), true);
  const auto one = connected_components(net, all);
  CHECK(*std::max_element(one.begin(), one.end()) == 0);
  std::vector<bool> none(net.lines.size(), false);
  const auto split = connected_components(net, none);
  CHECK(*std::max_element(split.begin(), split.end()) == 13);
}

TEST_CASE("malformed input is rejected") {
  CHECK_THROWS_AS(parse_case("nothing here"), NetworkError);
  std::string text = testing::two_bus_text(0.01, 0.1, 50, 10, 200);
  text.replace(text.find("1 3 0 0"), 3, "1 1");  // no slack bus left
  CHECK_THROWS_AS(parse_case(text), NetworkError);
  CHECK_THROWS_AS(parse_case(testing::two_bus_text(0.0, 0.0, 50, 10, 200)), NetworkError);
  CHECK_THROWS(read_case_file("/nonexistent/case.m"));
}
