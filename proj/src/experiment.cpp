#include <plo/experiment.hpp>

#include <plo/case_io.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <thread>
#include <tuple>

namespace plo {

void ExperimentConfig::validate() const {
  if (instances.empty()) throw std::invalid_argument("experiment: no instances");
  if (alphas.empty() || betas.empty()) throw std::invalid_argument("experiment: empty alpha/beta grid");
  if (runs < 1) throw std::invalid_argument("experiment: runs must be >= 1");
  if (attacks && (budgets.empty() || strategies.empty())) {
    throw std::invalid_argument("experiment: empty attack grid");
  }
  for (double k : budgets) attack_size(1, k);  // range check
  if (!(profile_low > 0.0 && profile_low <= profile_high)) {
    throw std::invalid_argument("experiment: bad load profile range");
  }
  for (auto r : multistep_r) {
    if (r < 1 || r > multistep_h) throw std::invalid_argument("experiment: need 1 <= r <= h");
  }
  privacy_params(*this, alphas.front(), betas.front()).validate();
}

Instance load_instance(const std::string& path, const NlpOptions& options) {
  Instance inst;
  inst.net = preprocess(read_case_file(path));
  inst.name = inst.net.name.empty() ? std::filesystem::path(path).stem().string() : inst.net.name;
  inst.opf = solve_ac_opf(inst.net, options);
  if (!inst.opf.ok()) {
    throw std::runtime_error(inst.name + ": reference OPF " + std::string(to_string(inst.opf.status)));
  }
  return inst;
}

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

PrivacyParams privacy_params(const ExperimentConfig& cfg, double alpha, double beta) {
  PrivacyParams p;
  p.epsilon = cfg.epsilon;
  p.alpha = alpha;
  p.beta = beta;
  p.lambda_bound = cfg.lambda_bound;
  return p;
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Feasibility and OPF cost of a released network.
void assess_release(const Instance& inst, const Network& released, FeasibilityRow& row,
                    const OpfSolution* witness = nullptr) {
  const Feasibility f = check_ac_feasibility(released, {}, witness);
  row.status = std::string(to_string(f));
  row.feasible = f == Feasibility::feasible;
  if (!row.feasible) return;
  const OpfSolution opf = solve_ac_opf(released);
  if (opf.ok()) row.cost_delta_pct = 100.0 * (inst.opf.cost - opf.cost) / inst.opf.cost;
}

nlohmann::json run_header(const char* study, const FeasibilityRow& row) {
  nlohmann::json j;
  j["study"] = study;
  j["instance"] = row.instance;
  j["alpha"] = row.alpha;
  if (!std::isnan(row.beta)) j["beta"] = row.beta;
  j["run"] = row.run;
  j["seed"] = row.seed;
  j["status"] = row.status;
  return j;
}

PloOptions warm(const OpfSolution& opf) {
  PloOptions o;
  o.warm_start = opf;
  return o;
}

}  // namespace

std::vector<FeasibilityRow> laplace_study(const Instance& inst, const ExperimentConfig& cfg,
                                          std::vector<nlohmann::json>* raw) {
  const auto runs = static_cast<std::size_t>(cfg.runs);
  std::vector<FeasibilityRow> rows(cfg.alphas.size() * runs);
  std::vector<nlohmann::json> jsons(rows.size());
  parallel_for(rows.size(), cfg.threads, [&](std::size_t job) {
    FeasibilityRow& row = rows[job];
    row.instance = inst.name;
    row.mechanism = "laplace";
    row.alpha = cfg.alphas[job / runs];
    row.run = static_cast<int>(job % runs);
    row.seed = derive_seed(cfg.seed, inst.name, row.alpha, 0.0, static_cast<std::uint64_t>(row.run));
    try {
      RandomNoise noise(row.seed);
      NoisyLineData noisy;
      const auto t0 = Clock::now();
      const Network released =
          laplace_obfuscate(inst.net, privacy_params(cfg, row.alpha, cfg.betas.front()), noise, &noisy);
      row.time_s = seconds_since(t0);
      row.audit_ok = budget_audit(noisy.ledger, cfg.epsilon).ok;
      assess_release(inst, released, row);
      jsons[job] = run_header("laplace", row);
      jsons[job]["noisy"] = to_json(noisy);
    } catch (const std::exception& e) {
      row.status = std::string("error: ") + e.what();
      jsons[job] = run_header("laplace", row);
    }
  });
  if (raw) raw->insert(raw->end(), jsons.begin(), jsons.end());
  return rows;
}

std::vector<FeasibilityRow> plo_study(const Instance& inst, const ExperimentConfig& cfg,
                                      std::vector<nlohmann::json>* raw) {
  const auto runs = static_cast<std::size_t>(cfg.runs);
  const auto nb = cfg.betas.size();
  std::vector<FeasibilityRow> rows(cfg.alphas.size() * nb * runs);
  std::vector<nlohmann::json> jsons(rows.size());
  const PloOptions options = warm(inst.opf);
  parallel_for(rows.size(), cfg.threads, [&](std::size_t job) {
    FeasibilityRow& row = rows[job];
    row.instance = inst.name;
    row.mechanism = "plo";
    row.alpha = cfg.alphas[job / (nb * runs)];
    row.beta = cfg.betas[job / runs % nb];
    row.run = static_cast<int>(job % runs);
    row.seed = derive_seed(cfg.seed, inst.name, row.alpha, row.beta, static_cast<std::uint64_t>(row.run));
    nlohmann::json result;
    try {
      const auto t0 = Clock::now();
      try {
        const ObfuscationResult res = plo_obfuscate(inst.net, inst.opf.cost,
                                                    privacy_params(cfg, row.alpha, row.beta), row.seed, options);
        row.time_s = seconds_since(t0);
        row.audit_ok = budget_audit(res.noisy.ledger, cfg.epsilon).ok;
        row.cost_gap = res.max_cost_gap();
        row.factor2 = res.factor2_ok;
        assess_release(inst, res.network_out, row, &res.operating_point);
        result = to_json(res);
      } catch (const ObfuscationError& e) {
        row.time_s = seconds_since(t0);
        row.audit_ok = budget_audit(e.last_attempt().noisy.ledger, cfg.epsilon).ok;
        row.status = "post_processing_" + std::string(to_string(e.last_attempt().status));
        result = to_json(e.last_attempt());
      }
    } catch (const std::exception& e) {
      row.status = std::string("error: ") + e.what();
    }
    jsons[job] = run_header("plo", row);
    if (!result.is_null()) jsons[job]["result"] = std::move(result);
  });
  if (raw) raw->insert(raw->end(), jsons.begin(), jsons.end());
  return rows;
}

std::vector<AttackRow> attack_campaign(const Instance& inst, const ExperimentConfig& cfg) {
  auto wants = [&](AttackStrategy s) {
    return std::find(cfg.strategies.begin(), cfg.strategies.end(), s) != cfg.strategies.end();
  };
  const std::size_t nk = cfg.budgets.size();
  std::vector<std::set<int>> real_sets(nk);
  std::vector<AttackRow> out;
  for (std::size_t ki = 0; ki < nk; ++ki) {
    real_sets[ki] = flow_attack(inst.net, inst.opf, cfg.budgets[ki]);
  }
  if (wants(AttackStrategy::real_flow)) {
    std::vector<AttackRow> rows(nk);
    parallel_for(nk, cfg.threads, [&](std::size_t ki) {
      rows[ki] = {inst.name, AttackStrategy::real_flow, cfg.budgets[ki]};
      try {
        rows[ki].restored_pct = evaluate_attack(inst.net, real_sets[ki]);
      } catch (const std::exception&) {
      }
    });
    out.insert(out.end(), rows.begin(), rows.end());
  }

  const bool obf = wants(AttackStrategy::obfuscated_flow);
  const bool rnd = wants(AttackStrategy::random);
  if (!obf && !rnd) return out;
  const auto runs = static_cast<std::size_t>(cfg.runs);
  const auto nb = cfg.betas.size();
  const std::size_t jobs = cfg.alphas.size() * nb * runs;
  std::vector<std::vector<AttackRow>> per_job(jobs);
  const PloOptions options = warm(inst.opf);
  parallel_for(jobs, cfg.threads, [&](std::size_t job) {
    const double alpha = cfg.alphas[job / (nb * runs)];
    const double beta = cfg.betas[job / runs % nb];
    const int run = static_cast<int>(job % runs);
    const auto seed = derive_seed(cfg.seed, inst.name, alpha, beta, static_cast<std::uint64_t>(run));
    const auto random_seed =
        derive_seed(cfg.seed, inst.name + "/random", alpha, beta, static_cast<std::uint64_t>(run));

    std::optional<Network> released;
    std::optional<OpfSolution> released_opf;
    if (obf) {
      try {
        ObfuscationResult res = plo_obfuscate(inst.net, inst.opf.cost, privacy_params(cfg, alpha, beta), seed, options);
        OpfSolution sol = solve_ac_opf(res.network_out);
        if (sol.ok()) {
          released = std::move(res.network_out);
          released_opf = std::move(sol);
        }
      } catch (const std::exception&) {
      }
    }
    auto& rows = per_job[job];
    for (std::size_t ki = 0; ki < nk; ++ki) {
      const double k = cfg.budgets[ki];
      if (rnd) {
        // Same stream for every budget, so larger budgets extend smaller ones.
        std::mt19937_64 rng(random_seed);
        AttackRow row{inst.name, AttackStrategy::random, k, alpha, beta, run, random_seed};
        try {
          row.restored_pct = evaluate_attack(inst.net, random_attack(inst.net, k, rng));
        } catch (const std::exception&) {
        }
        rows.push_back(row);
      }
      if (obf) {
        AttackRow row{inst.name, AttackStrategy::obfuscated_flow, k, alpha, beta, run, seed};
        if (released) {
          try {
            const auto damaged = flow_attack(*released, *released_opf, k);
            row.similarity = attack_similarity(real_sets[ki], damaged);
            row.restored_pct = evaluate_attack(inst.net, damaged);
          } catch (const std::exception&) {
          }
        }
        rows.push_back(row);
      }
    }
  });
  for (auto& rows : per_job) out.insert(out.end(), rows.begin(), rows.end());
  return out;
}

std::vector<SimilarityRow> similarity_sweep(const Instance& inst, const ExperimentConfig& cfg) {
  if (cfg.multistep_r.empty()) return {};
  const std::size_t h = cfg.multistep_h;
  const auto factors = load_factors(h, cfg.profile_low, cfg.profile_high);
  const auto nets = load_profile(inst.net, factors);
  std::vector<OpfSolution> step_opf(h);
  parallel_for(h, cfg.threads, [&](std::size_t t) { step_opf[t] = solve_ac_opf(nets[t]); });
  std::vector<double> o_stars(h);
  std::vector<std::optional<std::set<int>>> real_sets(h);
  for (std::size_t t = 0; t < h; ++t) {
    o_stars[t] = step_opf[t].cost;
    if (step_opf[t].ok()) real_sets[t] = flow_attack(nets[t], step_opf[t], cfg.similarity_budget);
  }

  const auto runs = static_cast<std::size_t>(cfg.runs);
  const auto nb = cfg.betas.size();
  const auto nr = cfg.multistep_r.size();
  std::vector<SimilarityRow> rows(cfg.alphas.size() * nb * nr * runs);
  parallel_for(rows.size(), cfg.threads, [&](std::size_t job) {
    SimilarityRow& row = rows[job];
    row.instance = inst.name;
    row.alpha = cfg.alphas[job / (nb * nr * runs)];
    row.beta = cfg.betas[job / (nr * runs) % nb];
    row.r = cfg.multistep_r[job / runs % nr];
    row.run = static_cast<int>(job % runs);
    row.h = h;
    row.k = cfg.similarity_budget;
    row.seed = derive_seed(cfg.seed, inst.name, row.alpha, row.beta, static_cast<std::uint64_t>(row.run));
    const auto steps = select_steps(factors, row.r);
    for (auto s : steps) {
      if (!step_opf[s].ok()) return;
    }
    try {
      const ObfuscationResult res = mplo_obfuscate(nets, o_stars, privacy_params(cfg, row.alpha, row.beta),
                                                   steps, row.seed, warm(step_opf[steps.front()]));
      row.plo_ok = true;
      row.cost_gap = res.max_cost_gap();
      row.audit_ok = budget_audit(res.noisy.ledger, cfg.epsilon).ok;
      double sum = 0.0;
      int n = 0;
      for (std::size_t t = 0; t < h; ++t) {
        if (!real_sets[t]) continue;
        const Network released = with_admittances(nets[t], res.g_dot, res.b_dot);
        const OpfSolution sol = solve_ac_opf(released);
        if (!sol.ok()) continue;
        sum += attack_similarity(*real_sets[t], flow_attack(released, sol, cfg.similarity_budget));
        ++n;
      }
      if (n > 0) row.similarity = sum / n;
    } catch (const std::exception&) {
    }
  });
  return rows;
}

ExperimentResults run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentResults res;
  for (const auto& path : cfg.instances) {
    const Instance inst = load_instance(path);
    if (cfg.feasibility) {
      for (auto&& rows : {laplace_study(inst, cfg, &res.raw_runs), plo_study(inst, cfg, &res.raw_runs)}) {
        res.feasibility.insert(res.feasibility.end(), rows.begin(), rows.end());
      }
    }
    if (cfg.attacks) {
      const auto rows = attack_campaign(inst, cfg);
      res.attacks.insert(res.attacks.end(), rows.begin(), rows.end());
    }
    const auto sims = similarity_sweep(inst, cfg);
    res.similarity.insert(res.similarity.end(), sims.begin(), sims.end());
  }
  write_tables(cfg, res);
  return res;
}

namespace {

std::string num(double v) { return std::isnan(v) ? std::string() : format_double(v); }

// NaN sorts as a key below every grid value.
double key(double v) { return std::isnan(v) ? -1.0 : v; }
double unkey(double v) { return v == -1.0 ? kNaN : v; }

std::ofstream open_table(const std::filesystem::path& path, const char* header) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << header << '\n';
  return f;
}

struct Acc {
  std::size_t n = 0, hits = 0, flags = 0;
  double sum = 0.0, sum2 = 0.0, max = 0.0;
  std::size_t finite = 0, finite2 = 0;

  void add(double v) {
    if (!std::isnan(v)) {
      sum += v;
      ++finite;
    }
  }
  void add2(double v) {
    if (!std::isnan(v)) {
      sum2 += v;
      ++finite2;
    }
  }
  double mean() const { return finite ? sum / static_cast<double>(finite) : kNaN; }
  double mean2() const { return finite2 ? sum2 / static_cast<double>(finite2) : kNaN; }
};

nlohmann::json series(const std::string& label, const std::vector<double>& x,
                      const std::vector<double>& y) {
  auto clean = [](const std::vector<double>& v) {
    auto j = nlohmann::json::array();
    for (double d : v) j.push_back(std::isnan(d) ? nlohmann::json() : nlohmann::json(d));
    return j;
  };
  return {{"label", label}, {"x", clean(x)}, {"y", clean(y)}};
}

}  // namespace

void write_tables(const ExperimentConfig& cfg, const ExperimentResults& res) {
  namespace fs = std::filesystem;
  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  nlohmann::json plots = nlohmann::json::object();

  if (!res.feasibility.empty()) {
    auto f = open_table(dir / "feasibility.csv",
                        "instance,mechanism,alpha,beta,run,seed,status,feasible,cost_delta_pct,cost_gap,factor2,audit_ok");
    auto t = open_table(dir / "timing.csv", "instance,mechanism,alpha,beta,run,seed,time_s");
    using Key = std::tuple<std::string, std::string, double, double>;
    std::map<Key, Acc> cells;
    std::map<std::pair<std::string, std::string>, Acc> timing;
    for (const auto& r : res.feasibility) {
      f << r.instance << ',' << r.mechanism << ',' << num(r.alpha) << ',' << num(r.beta) << ','
        << r.run << ',' << r.seed << ',' << r.status << ',' << r.feasible << ','
        << num(r.cost_delta_pct) << ',' << num(r.cost_gap) << ',' << r.factor2 << ',' << r.audit_ok
        << '\n';
      t << r.instance << ',' << r.mechanism << ',' << num(r.alpha) << ',' << num(r.beta) << ','
        << r.run << ',' << r.seed << ',' << num(r.time_s) << '\n';
      Acc& c = cells[{r.instance, r.mechanism, r.alpha, key(r.beta)}];
      ++c.n;
      c.hits += r.feasible;
      c.flags += r.factor2;
      c.add(r.cost_delta_pct);
      c.add2(r.cost_gap);
      Acc& tm = timing[{r.instance, r.mechanism}];
      ++tm.n;
      tm.add(r.time_s);
      tm.max = std::max(tm.max, r.time_s);
    }
    auto s = open_table(dir / "feasibility_summary.csv",
                        "instance,mechanism,alpha,beta,runs,feasible,feasible_pct,mean_cost_delta_pct,mean_cost_gap,factor2_pct");
    std::map<std::tuple<std::string, std::string, double>, std::pair<nlohmann::json, nlohmann::json>> by_beta;
    for (const auto& [k, c] : cells) {
      const auto& [inst, mech, alpha, beta] = k;
      const double pct = 100.0 * static_cast<double>(c.hits) / static_cast<double>(c.n);
      const double f2 = mech == "plo" ? 100.0 * static_cast<double>(c.flags) / static_cast<double>(c.n) : kNaN;
      s << inst << ',' << mech << ',' << num(alpha) << ',' << num(unkey(beta)) << ',' << c.n << ','
        << c.hits << ',' << num(pct) << ',' << num(c.mean()) << ',' << num(c.mean2()) << ',' << num(f2)
        << '\n';
      auto& [feas, cost] = by_beta[{inst, mech, beta}];
      if (feas.is_null()) {
        std::string label = inst + "/" + mech;
        if (!std::isnan(unkey(beta))) label += "/beta=" + num(beta);
        feas = series(label, {}, {});
        cost = series(label, {}, {});
      }
      feas["x"].push_back(alpha);
      feas["y"].push_back(pct);
      cost["x"].push_back(alpha);
      cost["y"].push_back(std::isnan(c.mean()) ? nlohmann::json() : nlohmann::json(c.mean()));
    }
    for (auto& [k, v] : by_beta) {
      plots["feasibility_pct_vs_alpha"].push_back(v.first);
      plots["cost_delta_pct_vs_alpha"].push_back(v.second);
    }
    // Wall clock varies between runs; kept apart from the reproducible tables.
    auto ts = open_table(dir / "timing_summary.csv", "instance,mechanism,runs,mean_s,max_s");
    for (const auto& [k, c] : timing) {
      ts << k.first << ',' << k.second << ',' << c.n << ',' << num(c.mean()) << ',' << num(c.max) << '\n';
    }
  }

  if (!res.attacks.empty()) {
    auto f = open_table(dir / "attacks.csv", "instance,strategy,k,alpha,beta,seed,restored_pct,similarity");
    using Key = std::tuple<std::string, std::string, double, double, double>;
    std::map<Key, Acc> cells;
    for (const auto& r : res.attacks) {
      const std::string strat(to_string(r.strategy));
      f << r.instance << ',' << strat << ',' << num(r.k) << ',' << num(r.alpha) << ',' << num(r.beta)
        << ',' << r.seed << ',' << num(r.restored_pct) << ',' << num(r.similarity) << '\n';
      Acc& c = cells[{r.instance, strat, key(r.alpha), key(r.beta), r.k}];
      ++c.n;
      c.add(r.restored_pct);
      c.add2(r.similarity);
    }
    auto s = open_table(dir / "attack_summary.csv",
                        "instance,strategy,k,alpha,beta,n,mean_restored_pct,mean_similarity");
    std::map<std::tuple<std::string, std::string, double, double>, nlohmann::json> lines;
    for (const auto& [k, c] : cells) {
      const auto& [inst, strat, alpha, beta, budget] = k;
      s << inst << ',' << strat << ',' << num(budget) << ',' << num(unkey(alpha)) << ','
        << num(unkey(beta)) << ',' << c.n << ',' << num(c.mean()) << ',' << num(c.mean2()) << '\n';
      auto& l = lines[{inst, strat, alpha, beta}];
      if (l.is_null()) {
        std::string label = inst + "/" + strat;
        if (!std::isnan(unkey(alpha))) label += "/alpha=" + num(alpha) + "/beta=" + num(beta);
        l = series(label, {}, {});
      }
      l["x"].push_back(budget);
      l["y"].push_back(std::isnan(c.mean()) ? nlohmann::json() : nlohmann::json(c.mean()));
    }
    for (auto& [k, l] : lines) plots["restored_pct_vs_budget"].push_back(l);
  }

  if (!res.similarity.empty()) {
    auto f = open_table(dir / "similarity.csv", "instance,alpha,beta,k,h,r,run,seed,plo_ok,cost_gap,audit_ok,similarity");
    using Key = std::tuple<std::string, double, double, double, std::size_t>;
    std::map<Key, Acc> cells;
    for (const auto& r : res.similarity) {
      f << r.instance << ',' << num(r.alpha) << ',' << num(r.beta) << ',' << num(r.k) << ',' << r.h
        << ',' << r.r << ',' << r.run << ',' << r.seed << ',' << r.plo_ok << ',' << num(r.cost_gap)
        << ',' << r.audit_ok << ',' << num(r.similarity) << '\n';
      Acc& c = cells[{r.instance, r.alpha, r.beta, r.k, r.r}];
      ++c.n;
      c.hits += r.plo_ok;
      c.add(r.similarity);
    }
    auto s = open_table(dir / "similarity_summary.csv", "instance,alpha,beta,k,h,r,runs,plo_ok,mean_similarity");
    std::map<std::tuple<std::string, double, double, double>, nlohmann::json> lines;
    for (const auto& [k, c] : cells) {
      const auto& [inst, alpha, beta, budget, r] = k;
      s << inst << ',' << num(alpha) << ',' << num(beta) << ',' << num(budget) << ',' << cfg.multistep_h
        << ',' << r << ',' << c.n << ',' << c.hits << ',' << num(c.mean()) << '\n';
      auto& l = lines[{inst, alpha, beta, budget}];
      if (l.is_null()) {
        l = series(inst + "/alpha=" + num(alpha) + "/beta=" + num(beta) + "/k=" + num(budget), {}, {});
      }
      l["x"].push_back(r);
      l["y"].push_back(std::isnan(c.mean()) ? nlohmann::json() : nlohmann::json(c.mean()));
    }
    for (auto& [k, l] : lines) plots["similarity_pct_vs_r"].push_back(l);
  }

  if (!res.raw_runs.empty()) {
    std::ofstream raw(dir / "runs.jsonl", std::ios::binary);
    for (const auto& j : res.raw_runs) raw << j.dump() << '\n';
  }
  std::ofstream(dir / "plots.json", std::ios::binary) << plots.dump(1) << '\n';
}

}  // namespace plo
