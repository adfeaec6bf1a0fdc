#pragma once

#include "mtt/agents.hpp"
#include "mtt/config.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mtt
{

/// Bumped whenever any CSV header below changes.
constexpr int kCsvSchemaVersion = 1;

enum class CsvKind {
  Summary,
  Aggregate,
  Comparison,
  Train,
  EvalTrace,
  Track,
  Latency,
  Energy,
  MseVsIteration,
  EnergyVsIteration,
  ActivatedVsTime,
  AccuracyVsEnergy,
  LatencyVsIteration,
};

/// Comma-separated header line, without a trailing newline.
const std::string& csv_header(CsvKind kind);

/// Shortest round-trip decimal form.
std::string format_number(double v);

class IoError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

struct ExperimentSpec
{
  ScenarioConfig scenario;
  std::vector<PolicyKind> policies{PolicyKind::LTDRA};
  std::vector<std::uint64_t> seeds{0};
  std::optional<int> episodes;  // overrides agent.episodes
  std::optional<int> horizon;   // overrides world.horizon
  std::filesystem::path out_dir;
  bool write_traces = true;
  bool write_checkpoints = true;
  int threads = 0;  // 0: MTT_SIM_THREADS or hardware concurrency
};

/// Throws ConfigError naming the bad field.
void validate(const ExperimentSpec& spec);

/// Scenario with the experiment's overrides applied.
ScenarioConfig effective_scenario(const ExperimentSpec& spec);

struct RunRow
{
  std::string policy;
  std::uint64_t seed = 0;
  double mean_energy_J = 0.0;
  double final_mse_m2 = 0.0;
  double mean_Er_m = 0.0;
  double deadline_rate = 0.0;
  double mean_t_alpha_s = 0.0;
  double wall_s = 0.0;
  // Not part of the summary file.
  double median_tail_error_m = 0.0;
  double mean_activated = 0.0;
  int eval_steps = 0;
  int predictor_fits = 0;
  std::vector<EpisodeLog> training;
};

struct AggregateRow
{
  std::string policy;
  int seeds = 0;
  double mean_energy_J = 0.0;
  double final_mse_m2 = 0.0;
  double mean_Er_m = 0.0;
  double deadline_rate = 0.0;
  double mean_t_alpha_s = 0.0;
};

struct RunSummary
{
  std::string scenario_yaml;
  std::vector<std::uint64_t> seeds;
  std::vector<RunRow> rows;  // policy order of the spec, then seed order
  std::vector<AggregateRow> aggregates;
};

/// Mean over seeds per policy, in first-appearance order.
std::vector<AggregateRow> aggregate(const std::vector<RunRow>& rows);

/// Trains learned policies and evaluates every (policy, seed) pair on the
/// same evaluation seeds. Writes per-run CSVs, summary.csv, aggregate.csv,
/// config.yaml and metadata.json under out_dir when it is set.
RunSummary run_experiment(const ExperimentSpec& spec);

/// Evaluates one policy for one seed without touching the filesystem.
RunRow evaluate_policy(Policy& policy, const ScenarioConfig& cfg, std::uint64_t seed);

struct ComparisonRow
{
  AggregateRow stats;
  double energy_reduction_pct = 0.0;   // (policy - ltdra) / policy
  double mse_reduction_pct = 0.0;
  double latency_reduction_pct = 0.0;
};

/// Per-policy means with the reduction achieved by `reference` relative to
/// each one. Refuses summaries with different scenarios or seed lists.
std::vector<ComparisonRow> compare_policies(const std::vector<RunSummary>& runs,
                                            const std::string& reference = "ltdra");

void write_comparison(const std::filesystem::path& path, const std::vector<ComparisonRow>& rows);

/// Reads a run directory written by run_experiment.
RunSummary read_run(const std::filesystem::path& dir);

/// Writes the per-figure CSVs into `dir`/plots. Missing inputs raise IoError
/// naming the file.
std::vector<std::filesystem::path> emit_plot_data(const std::filesystem::path& dir);

/// Minimal CSV reader: header names and rows of fields.
struct CsvTable
{
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  int column(const std::string& name) const;
};
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace mtt
