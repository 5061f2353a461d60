#include <plo/attack.hpp>
#include <plo/case_io.hpp>
#include <plo/experiment.hpp>
#include <plo/opf.hpp>
#include <plo/plo.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

enum Exit { kOk = 0, kInfeasible = 2, kParse = 3, kNumeric = 4 };

int exit_for(plo::NlpStatus s) {
  switch (s) {
    case plo::NlpStatus::optimal: return kOk;
    case plo::NlpStatus::infeasible: return kInfeasible;
    default: return kNumeric;
  }
}

struct PrivacyFlags {
  double epsilon = 1.0, alpha = 0.01, beta = 0.01, lambda = 20.0;
};

void add_privacy(CLI::App* cmd, PrivacyFlags& f) {
  cmd->add_option("--epsilon", f.epsilon, "privacy budget")->capture_default_str();
  cmd->add_option("--alpha", f.alpha, "indistinguishability level")->capture_default_str();
  cmd->add_option("--beta", f.beta, "faithfulness level")->capture_default_str();
  cmd->add_option("--lambda-bound", f.lambda, "spread of the per-level bounds")->capture_default_str();
}

int cmd_opf(const std::string& path, const std::string& json_out) {
  const plo::Network net = plo::preprocess(plo::read_case_file(path));
  const plo::OpfSolution sol = plo::solve_ac_opf(net);
  std::printf("%s: %s  cost %.6f  iterations %d  violation %.2e\n", net.name.c_str(),
              std::string(plo::to_string(sol.status)).c_str(), sol.cost, sol.iterations,
              sol.constraint_violation);
  const auto j = plo::to_json(sol, net);
  if (json_out.empty()) {
    std::cout << j.dump(1) << '\n';
  } else {
    std::ofstream(json_out) << j.dump(1) << '\n';
  }
  return exit_for(sol.status);
}

struct ObfuscateFlags {
  PrivacyFlags privacy;
  std::uint64_t seed = 1;
  std::size_t h = 0, r = 1;
  double low = 0.8, high = 1.1;
  bool zero_noise = false;
  std::string out = ".";
};

int cmd_obfuscate(const std::string& path, const ObfuscateFlags& f) {
  const plo::Network net = plo::preprocess(plo::read_case_file(path));
  plo::PrivacyParams p{f.privacy.epsilon, f.privacy.alpha, f.privacy.beta, f.privacy.lambda};
  p.validate();

  std::vector<plo::Network> nets{net};
  std::vector<std::size_t> steps{0};
  if (f.h > 0) {
    const auto factors = plo::load_factors(f.h, f.low, f.high);
    nets = plo::load_profile(net, factors);
    steps = plo::select_steps(factors, f.r);
  }
  std::vector<double> o_stars(nets.size(), 0.0);
  plo::PloOptions options;
  for (auto s : steps) {
    const plo::OpfSolution sol = plo::solve_ac_opf(nets[s]);
    if (!sol.ok()) {
      std::fprintf(stderr, "OPF of step %zu: %s\n", s, std::string(plo::to_string(sol.status)).c_str());
      return exit_for(sol.status);
    }
    o_stars[s] = sol.cost;
    if (s == steps.front()) options.warm_start = sol;
  }

  std::unique_ptr<plo::NoiseSource> noise;
  if (f.zero_noise) {
    noise = std::make_unique<plo::ZeroNoise>();
  } else {
    noise = std::make_unique<plo::RandomNoise>(f.seed);
  }

  plo::ObfuscationResult res;
  int code = kOk;
  try {
    res = plo::mplo_obfuscate(nets, o_stars, p, steps, *noise, options);
  } catch (const plo::ObfuscationError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    res = e.last_attempt();
    code = exit_for(res.status);
  }

  namespace fs = std::filesystem;
  fs::create_directories(f.out);
  const std::string stem = net.name.empty() ? fs::path(path).stem().string() : net.name;
  const fs::path json_path = fs::path(f.out) / (stem + "_obfuscation.json");
  auto j = plo::to_json(res);
  j["instance"] = stem;
  j["seed"] = f.seed;
  j["zero_noise"] = f.zero_noise;
  j["params"] = {{"epsilon", p.epsilon}, {"alpha", p.alpha}, {"beta", p.beta}, {"lambda_bound", p.lambda_bound}};
  j["steps"] = steps;
  std::ofstream(json_path) << j.dump(1) << '\n';

  if (code == kOk) {
    const fs::path case_path = fs::path(f.out) / (stem + "_obfuscated.m");
    std::ofstream(case_path) << plo::write_matpower(plo::with_admittances(net, res.g_dot, res.b_dot));
    std::printf("%s: released %s  cost gap %.3e  factor-2 %s  lambda %g\n", stem.c_str(),
                case_path.string().c_str(), res.max_cost_gap(), res.factor2_ok ? "ok" : "violated",
                res.lambda_used);
  }
  return code;
}

int cmd_experiment(plo::ExperimentConfig cfg, const std::vector<std::string>& strategies) {
  if (!strategies.empty()) {
    cfg.strategies.clear();
    for (const auto& s : strategies) cfg.strategies.push_back(plo::parse_strategy(s));
  }
  const plo::ExperimentResults res = plo::run_experiment(cfg);
  std::printf("feasibility rows %zu  attack rows %zu  similarity rows %zu  -> %s\n",
              res.feasibility.size(), res.attacks.size(), res.similarity.size(), cfg.out_dir.c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Power line obfuscation: OPF, private release of line parameters and experiments"};
  app.require_subcommand(1);
  app.footer("Set PLO_SOLVER_VERBOSITY=1 or 2 for solver logs on stderr.");

  std::string case_path, json_out;
  auto* opf = app.add_subcommand("opf", "solve the AC-OPF of a case");
  opf->add_option("case", case_path, "MATPOWER or JSON case file")->required()->check(CLI::ExistingFile);
  opf->add_option("--json", json_out, "write the solution JSON here instead of stdout");

  ObfuscateFlags of;
  auto* obf = app.add_subcommand("obfuscate", "release a case with private line parameters");
  obf->add_option("case", case_path, "MATPOWER or JSON case file")->required()->check(CLI::ExistingFile);
  add_privacy(obf, of.privacy);
  obf->add_option("--seed", of.seed, "noise seed")->capture_default_str();
  obf->add_option("--multistep-h", of.h, "time horizon; 0 releases a single snapshot")->capture_default_str();
  obf->add_option("--multistep-r", of.r, "steps enforced out of the horizon")->capture_default_str();
  obf->add_option("--profile-low", of.low, "smallest load factor of the horizon")->capture_default_str();
  obf->add_option("--profile-high", of.high, "largest load factor of the horizon")->capture_default_str();
  obf->add_flag("--zero-noise", of.zero_noise, "draw zero noise (testing)");
  obf->add_option("--out", of.out, "output directory")->capture_default_str();

  plo::ExperimentConfig cfg;
  std::vector<std::string> strategies;
  bool no_feasibility = false, no_attacks = false;
  auto* exp = app.add_subcommand("experiment", "feasibility, cost, attack and similarity studies");
  exp->add_option("cases", cfg.instances, "case files")->required()->check(CLI::ExistingFile);
  exp->add_option("--epsilon", cfg.epsilon, "privacy budget")->capture_default_str();
  exp->add_option("--alpha", cfg.alphas, "indistinguishability grid")->capture_default_str();
  exp->add_option("--beta", cfg.betas, "faithfulness grid")->capture_default_str();
  exp->add_option("--lambda-bound", cfg.lambda_bound, "spread of the per-level bounds")->capture_default_str();
  exp->add_option("--runs", cfg.runs, "runs per cell")->capture_default_str();
  exp->add_option("--seed", cfg.seed, "master seed")->capture_default_str();
  exp->add_option("--budget", cfg.budgets, "attack budgets, percent of lines")->capture_default_str();
  exp->add_option("--strategy", strategies, "random, obfuscated_flow, real_flow");
  exp->add_option("--multistep-h", cfg.multistep_h, "time horizon of the similarity sweep")->capture_default_str();
  exp->add_option("--multistep-r", cfg.multistep_r, "r grid of the similarity sweep (off when empty)");
  exp->add_option("--profile-low", cfg.profile_low, "smallest load factor of the horizon")->capture_default_str();
  exp->add_option("--profile-high", cfg.profile_high, "largest load factor of the horizon")->capture_default_str();
  exp->add_option("--similarity-budget", cfg.similarity_budget, "attack budget of the similarity sweep")
      ->capture_default_str();
  exp->add_option("--threads", cfg.threads, "worker threads, 0 for all cores")->capture_default_str();
  exp->add_flag("--no-feasibility", no_feasibility, "skip the feasibility and cost studies");
  exp->add_flag("--no-attacks", no_attacks, "skip the attack campaign");
  exp->add_option("--out", cfg.out_dir, "output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kParse;
  }

  try {
    if (*opf) return cmd_opf(case_path, json_out);
    if (*obf) return cmd_obfuscate(case_path, of);
    cfg.feasibility = !no_feasibility;
    cfg.attacks = !no_attacks;
    return cmd_experiment(cfg, strategies);
  } catch (const plo::NetworkError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kParse;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kParse;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kParse;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kNumeric;
  }
}
