// mtt_sim: train, evaluate and compare scheduling policies.
//
// Exit codes: 0 success, 2 configuration error, 3 runtime error.

#include "mtt/harness.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iomanip>
#include <iostream>

namespace fs = std::filesystem;

namespace
{

constexpr int kConfigExit = 2;
constexpr int kRuntimeExit = 3;

/// "3", "0,1,5" or "0-9".
std::vector<std::uint64_t> parse_seeds(const std::string& text)
{
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (part.empty()) continue;
    try {
      const auto dash = part.find('-');
      if (dash == std::string::npos) {
        out.push_back(std::stoull(part));
      } else {
        const auto lo = std::stoull(part.substr(0, dash));
        const auto hi = std::stoull(part.substr(dash + 1));
        if (hi < lo) throw mtt::ConfigError("seeds", "descending range '" + part + "'");
        for (auto s = lo; s <= hi; ++s) out.push_back(s);
      }
    } catch (const std::logic_error&) {
      throw mtt::ConfigError("seeds", "cannot parse '" + part + "'");
    }
  }
  if (out.empty()) throw mtt::ConfigError("seeds", "no seeds given");
  return out;
}

std::vector<mtt::PolicyKind> parse_policies(const std::vector<std::string>& names)
{
  std::vector<mtt::PolicyKind> out;
  for (const auto& n : names) {
    std::stringstream ss(n);
    std::string part;
    while (std::getline(ss, part, ','))
      if (!part.empty()) out.push_back(mtt::parse_policy(part));
  }
  return out;
}

void print_summary(const mtt::RunSummary& s)
{
  std::cout << std::left << std::setw(10) << "policy" << std::right << std::setw(8) << "seeds" << std::setw(14)
            << "energy_J" << std::setw(12) << "mse_m2" << std::setw(12) << "E_r_m" << std::setw(12) << "deadline"
            << std::setw(14) << "t_alpha_s" << '\n';
  for (const auto& a : s.aggregates)
    std::cout << std::left << std::setw(10) << a.policy << std::right << std::setw(8) << a.seeds << std::setw(14)
              << a.mean_energy_J << std::setw(12) << a.final_mse_m2 << std::setw(12) << a.mean_Er_m << std::setw(12)
              << a.deadline_rate << std::setw(14) << a.mean_t_alpha_s << '\n';
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Mobile target tracking WSN simulator and scheduler"};
  app.require_subcommand(1);

  std::string config_path;
  std::string seeds_text = "0";
  std::uint64_t seed = 0;
  std::string out;
  std::vector<std::string> policy_names;
  int episodes = -1;
  std::string checkpoint;
  std::vector<std::string> run_dirs;

  auto common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "YAML scenario file (defaults are the shipped scenario)");
    cmd->add_option("--out", out, "output directory");
    cmd->add_option("--policy", policy_names, "ltdra, random, greedy, noncoop, plaindqn (comma separated)");
    cmd->add_option("--episodes", episodes, "training episodes per run");
    auto* s = cmd->add_option("--seed", seed, "single seed");
    cmd->add_option("--seeds", seeds_text, "seed list, e.g. 0-9 or 1,4,7")->excludes(s);
  };

  auto* train = app.add_subcommand("train", "train and evaluate policies over a seed sweep");
  common(train);
  auto* eval = app.add_subcommand("eval", "evaluate a baseline or a saved network");
  common(eval);
  eval->add_option("--checkpoint", checkpoint, "network checkpoint for learned policies");
  auto* compare = app.add_subcommand("compare", "compare run directories against ltdra");
  compare->add_option("runs", run_dirs, "run directories")->required();
  compare->add_option("--out", out, "comparison CSV path");
  auto* plot = app.add_subcommand("plot-data", "write plot-ready CSVs for a run directory");
  plot->add_option("--out", out, "run directory")->required();
  auto* check = app.add_subcommand("validate-config", "parse and validate a scenario file");
  check->add_option("--config", config_path, "YAML scenario file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfigExit;
  }

  try {
    mtt::ScenarioConfig cfg = config_path.empty() ? mtt::ScenarioConfig{} : mtt::load_config(config_path);
    mtt::validate(cfg);

    if (*check) {
      std::cout << config_path << ": ok\n";
      return 0;
    }

    if (*train || *eval) {
      auto* cmd = *train ? train : eval;
      mtt::ExperimentSpec spec;
      spec.scenario = cfg;
      spec.seeds = cmd->count("--seed") ? std::vector<std::uint64_t>{seed} : parse_seeds(seeds_text);
      if (!policy_names.empty()) spec.policies = parse_policies(policy_names);
      if (episodes >= 0) spec.episodes = episodes;
      spec.out_dir = out;

      if (*eval) {
        mtt::validate(spec);
        const mtt::ScenarioConfig base = mtt::effective_scenario(spec);
        mtt::RunSummary summary;
        summary.scenario_yaml = mtt::dump_config(base);
        summary.seeds = spec.seeds;
        for (auto kind : spec.policies) {
          const mtt::ScenarioConfig pc = mtt::policy_scenario(kind, base);
          std::unique_ptr<mtt::Policy> policy;
          if (mtt::is_learned(kind)) {
            if (checkpoint.empty()) throw mtt::ConfigError("checkpoint", "learned policies need --checkpoint");
            policy = std::make_unique<mtt::DqnPolicy>(mtt::load_checkpoint(checkpoint), kind);
          } else {
            policy = mtt::baseline_policy(kind);
          }
          for (auto s : spec.seeds) summary.rows.push_back(mtt::evaluate_policy(*policy, pc, s));
        }
        summary.aggregates = mtt::aggregate(summary.rows);
        print_summary(summary);
        return 0;
      }

      const auto summary = mtt::run_experiment(spec);
      print_summary(summary);
      if (!out.empty()) std::cout << "wrote " << out << '\n';
      return 0;
    }

    if (*compare) {
      std::vector<mtt::RunSummary> runs;
      for (const auto& d : run_dirs) runs.push_back(mtt::read_run(d));
      const auto rows = mtt::compare_policies(runs);
      std::cout << std::left << std::setw(10) << "policy" << std::right << std::setw(14) << "energy_J"
                << std::setw(12) << "mse_m2" << std::setw(14) << "t_alpha_s" << std::setw(14) << "energy_red%"
                << std::setw(14) << "latency_red%" << '\n';
      for (const auto& r : rows)
        std::cout << std::left << std::setw(10) << r.stats.policy << std::right << std::setw(14)
                  << r.stats.mean_energy_J << std::setw(12) << r.stats.final_mse_m2 << std::setw(14)
                  << r.stats.mean_t_alpha_s << std::setw(14) << r.energy_reduction_pct << std::setw(14)
                  << r.latency_reduction_pct << '\n';
      if (!out.empty()) mtt::write_comparison(out, rows);
      return 0;
    }

    if (*plot) {
      for (const auto& f : mtt::emit_plot_data(out)) std::cout << "wrote " << f.string() << '\n';
      return 0;
    }
  } catch (const mtt::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigExit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeExit;
  }
  return 0;
}
