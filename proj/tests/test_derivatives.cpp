#include <doctest.h>
#include <plo/opf.hpp>
#include <plo/plo.hpp>

#include "helpers.hpp"

#include <random>

using namespace plo;

namespace {

void check_builder(const char* what, const NlpProblem& p, std::mt19937_64& rng) {
  for (int k = 0; k < 5; ++k) {
    const auto [x, lam] = testing::random_point(p, rng);
    const DerivativeCheck d = check_derivatives(p, x, 1e-6, lam);
    INFO(std::string(what), " point ", k);
    CHECK(d.gradient_error <= 1e-5);
    CHECK(d.jacobian_error <= 1e-5);
    CHECK(d.hessian_error <= 1e-5);
  }
}

}  // namespace

TEST_CASE("model derivatives match finite differences") {
  std::mt19937_64 rng(2024);
  for (const char* name : {"case14_ieee", "case39_epri"}) {
    const Network net = testing::load(name);
    INFO(std::string(name));
    check_builder("opf", build_ac_opf(net), rng);
    check_builder("feasibility", build_ac_feasibility(net), rng);

    const OpfSolution opf = solve_ac_opf(net);
    REQUIRE(opf.ok());
    std::set<int> damaged{net.lines[0].id, net.lines[3].id};
    for (const auto& isl : build_restoration(net, damaged)) {
      if (isl.problem) check_builder("restoration", *isl.problem, rng);
    }

    PrivacyParams p;
    p.alpha = 0.1;
    RandomNoise noise(1);
    const NoisyLineData noisy = private_line_queries(net, p, noise);
    check_builder("post-processing", build_post_processing({net}, {opf.cost}, noisy, p), rng);
    const auto nets = load_profile(net, {0.9, 1.0});
    check_builder("multistep post-processing",
                  build_post_processing(nets, {opf.cost * 0.9, opf.cost}, noisy, p), rng);
  }
}

TEST_CASE("two-bus derivatives with taps and shifts") {
  std::string text = testing::two_bus_text(0.02, 0.1, 50, 10, 200, 80);
  // tap 1.05, shift 3 degrees, line charging 0.04
  const std::string plain = "1 2 0.02 0.1 0 80 0 0 0 0";
  text.replace(text.find(plain), plain.size(), "1 2 0.02 0.1 0.04 80 0 0 1.05 3");
  const Network net = preprocess(parse_case(text));
  REQUIRE(net.lines[0].tap == 1.05);
  std::mt19937_64 rng(5);
  check_builder("opf", build_ac_opf(net), rng);
}
