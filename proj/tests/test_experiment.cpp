#include <doctest.h>
#include <plo/experiment.hpp>

#include "helpers.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace plo;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

ExperimentConfig small_config(const fs::path& out, unsigned threads) {
  ExperimentConfig cfg;
  cfg.instances = {testing::data_file("case14_ieee")};
  cfg.alphas = {0.1};
  cfg.betas = {0.1};
  cfg.runs = 2;
  cfg.budgets = {10.0};
  cfg.multistep_h = 3;
  cfg.profile_low = 0.9;
  cfg.profile_high = 1.1;
  cfg.multistep_r = {1, 3};
  cfg.seed = 7;
  cfg.threads = threads;
  cfg.out_dir = out.string();
  return cfg;
}

}  // namespace

TEST_CASE("experiments are reproducible byte for byte") {
  const fs::path root = fs::temp_directory_path() / "plo_experiment_test";
  fs::remove_all(root);
  const auto a = run_experiment(small_config(root / "a", 1));
  run_experiment(small_config(root / "b", 2));
  CHECK(a.feasibility.size() == 4);
  CHECK(a.similarity.size() == 4);
  for (const char* file : {"feasibility.csv", "feasibility_summary.csv", "attacks.csv", "attack_summary.csv",
                           "similarity.csv", "similarity_summary.csv", "runs.jsonl", "plots.json"}) {
    INFO(file);
    const std::string first = slurp(root / "a" / file);
    CHECK_FALSE(first.empty());
    CHECK(first == slurp(root / "b" / file));
  }
  CHECK(fs::exists(root / "a" / "timing.csv"));
  fs::remove_all(root);
}

TEST_CASE("experiment configs are validated") {
  ExperimentConfig cfg;
  cfg.instances = {"x.m"};
  CHECK_NOTHROW(cfg.validate());
  cfg.runs = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.instances = {"x.m"};
  cfg.alphas.clear();
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg = {};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("parallel_for fills every slot") {
  std::vector<int> out(100, -1);
  parallel_for(out.size(), 4, [&](std::size_t i) { out[i] = static_cast<int>(i * i); });
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == static_cast<int>(i * i));
}
