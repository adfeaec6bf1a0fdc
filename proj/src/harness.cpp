#include "mtt/harness.hpp"

#include <fmt/format.h>
#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;

namespace mtt
{

const std::string& csv_header(CsvKind kind)
{
  static const std::map<CsvKind, std::string> headers{
      {CsvKind::Summary, "policy,seed,mean_energy_J,final_mse_m2,mean_Er_m,deadline_rate,mean_t_alpha_s,wall_s"},
      {CsvKind::Aggregate, "policy,seeds,mean_energy_J,final_mse_m2,mean_Er_m,deadline_rate,mean_t_alpha_s"},
      {CsvKind::Comparison,
       "policy,seeds,mean_energy_J,final_mse_m2,mean_Er_m,deadline_rate,mean_t_alpha_s,energy_reduction_pct,"
       "mse_reduction_pct,latency_reduction_pct"},
      {CsvKind::Train,
       "episode,env_steps,steps,epsilon,reward,energy_J,mean_error_m,mse_m2,mean_t_alpha_s,mean_loss,updates,"
       "skipped_updates,predictor_fits"},
      {CsvKind::EvalTrace,
       "episode,tick,action_id,reward,e,a,q,E_r,t_alpha,done,energy_J,position_error_m,activated,c1,c2,c3,c4"},
      {CsvKind::Track, "episode,tick,true_x,true_y,est_x,est_y,E_r,n_activated"},
      {CsvKind::Latency, "episode,tick,sn_id,dest_kind,dest_id,tau_c,tau_beta,tau_a,t_alpha,deadline_met"},
      {CsvKind::Energy, "episode,tick,node_id,mode,joules,battery_remaining"},
      {CsvKind::MseVsIteration, "iteration,mse_m2,policy,seed,env_steps"},
      {CsvKind::EnergyVsIteration, "iteration,energy_J,policy,seed,env_steps"},
      {CsvKind::ActivatedVsTime, "tick,activated,policy,seed"},
      {CsvKind::AccuracyVsEnergy, "policy,seed,mean_energy_J,mean_Er_m,final_mse_m2"},
      {CsvKind::LatencyVsIteration, "iteration,mean_t_alpha_s,policy,seed,env_steps"},
  };
  return headers.at(kind);
}

std::string format_number(double v)
{
  if (std::isnan(v)) return "";
  return fmt::format("{}", v);
}

namespace
{

double parse_number(const std::string& s)
{
  if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::stod(s);
}

class CsvWriter
{
public:
  CsvWriter(const fs::path& path, CsvKind kind) : path_(path), os_(path, std::ios::binary)
  {
    if (!os_) throw IoError(path.string() + ": cannot open for writing");
    os_ << csv_header(kind) << '\n';
  }
  template <typename... Ts>
  void row(const Ts&... fields)
  {
    bool first = true;
    ((os_ << (first ? "" : ",") << cell(fields), first = false), ...);
    os_ << '\n';
  }
  ~CsvWriter() = default;

private:
  static std::string cell(double v) { return format_number(v); }
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  static std::string cell(bool b) { return b ? "1" : "0"; }
  template <typename T>
  static std::string cell(T v)
    requires std::is_integral_v<T>
  {
    return std::to_string(v);
  }

  fs::path path_;
  std::ofstream os_;
};

// Mean over the defined entries; NaN marks "no data" (e.g. no tasks).
double mean_of(const std::vector<double>& v)
{
  double s = 0.0;
  std::size_t n = 0;
  for (double x : v)
    if (!std::isnan(x)) {
      s += x;
      ++n;
    }
  return n == 0 ? std::numeric_limits<double>::quiet_NaN() : s / static_cast<double>(n);
}

double median_value(std::vector<double> v)
{
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct EvalTraces
{
  std::vector<std::string> trace, track, latency, energy;
};

template <typename... Ts>
std::string join(const Ts&... fields)
{
  std::string out;
  bool first = true;
  auto add = [&](const std::string& s) {
    if (!first) out += ',';
    out += s;
    first = false;
  };
  (add([&] {
     if constexpr (std::is_same_v<Ts, double>) return format_number(fields);
     else if constexpr (std::is_same_v<Ts, bool>) return std::string(fields ? "1" : "0");
     else if constexpr (std::is_integral_v<Ts>) return std::to_string(fields);
     else return std::string(fields);
   }()),
   ...);
  return out;
}

RunRow evaluate_impl(Policy& policy, const ScenarioConfig& cfg, std::uint64_t seed, EvalTraces* traces)
{
  RunRow row;
  row.policy = to_string(policy.kind());
  row.seed = seed;

  TrackingEnv env(cfg);
  std::vector<double> energies, tail_sq, tail_err, er, t_alpha, activated;
  int tasks = 0, met = 0;
  for (int ep = 0; ep < cfg.agent.eval_episodes; ++ep) {
    env.keep_energy_log = traces != nullptr && ep == 0;
    env.reset(derive_seed(seed, 5000 + static_cast<std::uint64_t>(ep)));
    Rng rng(derive_seed(seed, 7000 + static_cast<std::uint64_t>(ep)));
    double episode_energy = 0.0;
    std::vector<double> errors;
    while (!env.done()) {
      const Decision d = policy.decide(env, rng);
      const StepInfo info = env.step(d.action, d.id);
      episode_energy += info.energy;
      errors.push_back(info.position_error);
      er.push_back(info.e_r);
      activated.push_back(info.activated);
      if (info.tasks > 0) t_alpha.push_back(info.t_alpha);
      tasks += info.tasks;
      met += info.deadline_met;
      ++row.eval_steps;
      if (traces) {
        traces->trace.push_back(join(ep, info.tick, info.action_id, info.reward, info.terms.e, info.terms.a,
                                     info.terms.q, info.e_r, info.t_alpha, info.done, info.energy,
                                     info.position_error, info.activated, info.c1, info.c2, info.c3, info.c4));
        traces->track.push_back(join(ep, info.tick, info.truth.x(), info.truth.y(), info.estimate.x(),
                                     info.estimate.y(), info.e_r, info.activated));
        for (const auto& t : info.task_log)
          traces->latency.push_back(join(ep, t.tick, t.sn_id, std::string(to_string(t.dest_kind)), t.dest_id,
                                         t.latency.tau_c, t.latency.tau_beta, t.latency.tau_a, t.latency.t_alpha,
                                         t.deadline_met));
        for (const auto& e : info.energy_log)
          traces->energy.push_back(
              join(ep, e.tick, e.node_id, std::string(to_string(e.mode)), e.joules, e.battery));
      }
    }
    row.predictor_fits += env.predictor_fits();
    energies.push_back(episode_energy);
    const std::size_t tail = std::min<std::size_t>(100, errors.size());
    for (std::size_t i = errors.size() - tail; i < errors.size(); ++i) {
      tail_sq.push_back(errors[i] * errors[i]);
      tail_err.push_back(errors[i]);
    }
  }
  row.mean_energy_J = mean_of(energies);
  row.final_mse_m2 = mean_of(tail_sq);
  row.median_tail_error_m = median_value(tail_err);
  row.mean_Er_m = mean_of(er);
  row.deadline_rate = tasks > 0 ? static_cast<double>(met) / tasks : std::numeric_limits<double>::quiet_NaN();
  row.mean_t_alpha_s = mean_of(t_alpha);
  row.mean_activated = mean_of(activated);
  return row;
}

void write_lines(const fs::path& path, CsvKind kind, const std::vector<std::string>& lines)
{
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError(path.string() + ": cannot open for writing");
  os << csv_header(kind) << '\n';
  for (const auto& l : lines) os << l << '\n';
}

void write_training(const fs::path& path, const std::vector<EpisodeLog>& log)
{
  CsvWriter w(path, CsvKind::Train);
  long env_steps = 0;
  for (const auto& e : log) {
    env_steps += e.steps;
    w.row(e.episode, env_steps, e.steps, e.epsilon, e.reward, e.energy, e.mean_error, e.mse, e.mean_t_alpha,
          e.mean_loss, e.updates, e.skipped_updates, e.predictor_fits);
  }
}

fs::path run_dir(const fs::path& out, const std::string& policy, std::uint64_t seed)
{
  return out / policy / ("seed_" + std::to_string(seed));
}

int worker_count(int requested, std::size_t jobs)
{
  int n = requested;
  if (n <= 0) {
    if (const char* env = std::getenv("MTT_SIM_THREADS")) n = std::atoi(env);
    const int hw = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    if (n <= 0) n = hw;
  }
  return std::max(1, std::min<int>(n, static_cast<int>(jobs)));
}

void check_writable(const fs::path& dir)
{
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(dir.string() + ": cannot create output directory: " + ec.message());
  const fs::path probe = dir / ".write_probe";
  {
    std::ofstream os(probe);
    if (!os || !(os << "ok")) throw IoError(dir.string() + ": output directory is not writable");
  }
  fs::remove(probe, ec);
}

}  // namespace

void validate(const ExperimentSpec& spec)
{
  if (spec.seeds.empty()) throw ConfigError("seeds", "at least one seed is required");
  if (spec.policies.empty()) throw ConfigError("policy", "at least one policy is required");
  if (spec.horizon && *spec.horizon <= 0) throw ConfigError("world.horizon", "must be > 0");
  if (spec.episodes && *spec.episodes < 0) throw ConfigError("agent.episodes", "must be >= 0");
  validate(effective_scenario(spec));
}

ScenarioConfig effective_scenario(const ExperimentSpec& spec)
{
  ScenarioConfig cfg = spec.scenario;
  if (spec.episodes) cfg.agent.episodes = *spec.episodes;
  if (spec.horizon) cfg.world.horizon = *spec.horizon;
  return cfg;
}

std::vector<AggregateRow> aggregate(const std::vector<RunRow>& rows)
{
  std::vector<AggregateRow> out;
  for (const auto& r : rows) {
    if (std::any_of(out.begin(), out.end(), [&](const AggregateRow& a) { return a.policy == r.policy; })) continue;
    AggregateRow a;
    a.policy = r.policy;
    std::vector<double> e, m, er, dr, ta;
    for (const auto& x : rows) {
      if (x.policy != r.policy) continue;
      ++a.seeds;
      e.push_back(x.mean_energy_J);
      m.push_back(x.final_mse_m2);
      er.push_back(x.mean_Er_m);
      dr.push_back(x.deadline_rate);
      ta.push_back(x.mean_t_alpha_s);
    }
    a.mean_energy_J = mean_of(e);
    a.final_mse_m2 = mean_of(m);
    a.mean_Er_m = mean_of(er);
    a.deadline_rate = mean_of(dr);
    a.mean_t_alpha_s = mean_of(ta);
    out.push_back(a);
  }
  return out;
}

RunRow evaluate_policy(Policy& policy, const ScenarioConfig& cfg, std::uint64_t seed)
{
  return evaluate_impl(policy, cfg, seed, nullptr);
}

RunSummary run_experiment(const ExperimentSpec& spec)
{
  validate(spec);
  const ScenarioConfig base = effective_scenario(spec);
  const bool writing = !spec.out_dir.empty();
  if (writing) check_writable(spec.out_dir);

  struct Job
  {
    PolicyKind kind;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (auto k : spec.policies)
    for (auto s : spec.seeds) jobs.push_back({k, s});

  std::vector<RunRow> results(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};

  auto work = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        const Job& job = jobs[i];
        const auto t0 = std::chrono::steady_clock::now();
        const ScenarioConfig cfg = policy_scenario(job.kind, base);
        std::unique_ptr<Policy> policy;
        std::vector<EpisodeLog> training;
        if (is_learned(job.kind)) {
          TrackingEnv env(cfg);
          TrainResult tr = train_ltdra(env, cfg.agent, job.seed);
          training = std::move(tr.log);
          policy = std::make_unique<DqnPolicy>(std::move(tr.policy), job.kind);
        } else {
          policy = baseline_policy(job.kind);
        }
        EvalTraces traces;
        RunRow row = evaluate_impl(*policy, cfg, job.seed, writing && spec.write_traces ? &traces : nullptr);
        row.training = std::move(training);
        row.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        if (writing) {
          const fs::path dir = run_dir(spec.out_dir, row.policy, job.seed);
          fs::create_directories(dir);
          if (is_learned(job.kind)) {
            write_training(dir / "train.csv", row.training);
            if (spec.write_checkpoints)
              save_checkpoint((dir / "policy.qnet").string(), static_cast<DqnPolicy&>(*policy).net());
          }
          if (spec.write_traces) {
            write_lines(dir / "eval_trace.csv", CsvKind::EvalTrace, traces.trace);
            write_lines(dir / "track.csv", CsvKind::Track, traces.track);
            write_lines(dir / "latency.csv", CsvKind::Latency, traces.latency);
            write_lines(dir / "energy.csv", CsvKind::Energy, traces.energy);
          }
        }
        results[i] = std::move(row);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  const int n = worker_count(spec.threads, jobs.size());
  if (n == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  RunSummary summary;
  summary.scenario_yaml = dump_config(base);
  summary.seeds = spec.seeds;
  summary.rows = std::move(results);
  summary.aggregates = aggregate(summary.rows);

  if (writing) {
    {
      CsvWriter w(spec.out_dir / "summary.csv", CsvKind::Summary);
      for (const auto& r : summary.rows)
        w.row(r.policy, r.seed, r.mean_energy_J, r.final_mse_m2, r.mean_Er_m, r.deadline_rate, r.mean_t_alpha_s,
              r.wall_s);
    }
    {
      CsvWriter w(spec.out_dir / "aggregate.csv", CsvKind::Aggregate);
      for (const auto& a : summary.aggregates)
        w.row(a.policy, a.seeds, a.mean_energy_J, a.final_mse_m2, a.mean_Er_m, a.deadline_rate, a.mean_t_alpha_s);
    }
    {
      std::ofstream os(spec.out_dir / "config.yaml", std::ios::binary);
      os << summary.scenario_yaml;
    }
    nlohmann::json meta;
    meta["schema_version"] = kCsvSchemaVersion;
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    meta["finished_utc"] = stamp;
    meta["workers"] = n;
    meta["seeds"] = spec.seeds;
    for (const auto& r : summary.rows) meta["wall_s"][r.policy][std::to_string(r.seed)] = r.wall_s;
    std::ofstream os(spec.out_dir / "metadata.json", std::ios::binary);
    os << meta.dump(2) << '\n';
  }
  return summary;
}

// ---------------------------------------------------------------------------
// Comparison and plot data

std::vector<ComparisonRow> compare_policies(const std::vector<RunSummary>& runs, const std::string& reference)
{
  if (runs.empty()) throw DomainError("nothing to compare");
  std::vector<RunRow> rows;
  for (const auto& r : runs) {
    if (r.scenario_yaml != runs.front().scenario_yaml)
      throw DomainError("refusing to compare runs with different scenarios");
    if (r.seeds != runs.front().seeds) throw DomainError("refusing to compare runs with different seed lists");
    rows.insert(rows.end(), r.rows.begin(), r.rows.end());
  }
  const auto agg = aggregate(rows);
  const auto ref = std::find_if(agg.begin(), agg.end(), [&](const AggregateRow& a) { return a.policy == reference; });
  if (ref == agg.end()) throw DomainError("reference policy '" + reference + "' is missing");

  auto reduction = [](double other, double mine) { return other != 0.0 ? 100.0 * (other - mine) / other : 0.0; };
  std::vector<ComparisonRow> out;
  for (const auto& a : agg) {
    ComparisonRow c;
    c.stats = a;
    c.energy_reduction_pct = reduction(a.mean_energy_J, ref->mean_energy_J);
    c.mse_reduction_pct = reduction(a.final_mse_m2, ref->final_mse_m2);
    c.latency_reduction_pct = reduction(a.mean_t_alpha_s, ref->mean_t_alpha_s);
    out.push_back(c);
  }
  return out;
}

void write_comparison(const fs::path& path, const std::vector<ComparisonRow>& rows)
{
  CsvWriter w(path, CsvKind::Comparison);
  for (const auto& c : rows)
    w.row(c.stats.policy, c.stats.seeds, c.stats.mean_energy_J, c.stats.final_mse_m2, c.stats.mean_Er_m,
          c.stats.deadline_rate, c.stats.mean_t_alpha_s, c.energy_reduction_pct, c.mse_reduction_pct,
          c.latency_reduction_pct);
}

int CsvTable::column(const std::string& name) const
{
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw IoError("missing CSV column '" + name + "'");
  return static_cast<int>(it - header.begin());
}

CsvTable read_csv(const fs::path& path)
{
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError(path.string() + ": file not found or unreadable");
  auto split = [](const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
  };
  CsvTable t;
  std::string line;
  if (!std::getline(is, line)) throw IoError(path.string() + ": empty file, expected a header");
  t.header = split(line);
  while (std::getline(is, line))
    if (!line.empty()) t.rows.push_back(split(line));
  return t;
}

RunSummary read_run(const fs::path& dir)
{
  RunSummary s;
  {
    const fs::path cfg = dir / "config.yaml";
    std::ifstream is(cfg, std::ios::binary);
    if (!is) throw IoError(cfg.string() + ": file not found");
    std::stringstream ss;
    ss << is.rdbuf();
    s.scenario_yaml = ss.str();
  }
  const CsvTable t = read_csv(dir / "summary.csv");
  const int c_policy = t.column("policy"), c_seed = t.column("seed"), c_e = t.column("mean_energy_J"),
            c_m = t.column("final_mse_m2"), c_er = t.column("mean_Er_m"), c_dr = t.column("deadline_rate"),
            c_ta = t.column("mean_t_alpha_s"), c_w = t.column("wall_s");
  for (const auto& r : t.rows) {
    RunRow row;
    row.policy = r.at(static_cast<std::size_t>(c_policy));
    row.seed = std::stoull(r.at(static_cast<std::size_t>(c_seed)));
    row.mean_energy_J = parse_number(r.at(static_cast<std::size_t>(c_e)));
    row.final_mse_m2 = parse_number(r.at(static_cast<std::size_t>(c_m)));
    row.mean_Er_m = parse_number(r.at(static_cast<std::size_t>(c_er)));
    row.deadline_rate = parse_number(r.at(static_cast<std::size_t>(c_dr)));
    row.mean_t_alpha_s = parse_number(r.at(static_cast<std::size_t>(c_ta)));
    row.wall_s = parse_number(r.size() > static_cast<std::size_t>(c_w) ? r[static_cast<std::size_t>(c_w)] : "");
    if (std::find(s.seeds.begin(), s.seeds.end(), row.seed) == s.seeds.end()) s.seeds.push_back(row.seed);
    s.rows.push_back(row);
  }
  s.aggregates = aggregate(s.rows);
  return s;
}

std::vector<fs::path> emit_plot_data(const fs::path& dir)
{
  const RunSummary run = read_run(dir);
  const fs::path plots = dir / "plots";
  fs::create_directories(plots);

  const std::vector<fs::path> files{plots / "mse_vs_iteration.csv", plots / "energy_vs_iteration.csv",
                                    plots / "activated_sensors_vs_time.csv", plots / "accuracy_vs_energy.csv",
                                    plots / "latency_vs_iteration.csv"};
  CsvWriter mse(files[0], CsvKind::MseVsIteration);
  CsvWriter energy(files[1], CsvKind::EnergyVsIteration);
  CsvWriter activated(files[2], CsvKind::ActivatedVsTime);
  CsvWriter accuracy(files[3], CsvKind::AccuracyVsEnergy);
  CsvWriter latency(files[4], CsvKind::LatencyVsIteration);

  for (const auto& row : run.rows) {
    accuracy.row(row.policy, row.seed, row.mean_energy_J, row.mean_Er_m, row.final_mse_m2);
    const fs::path rd = run_dir(dir, row.policy, row.seed);
    const fs::path train = rd / "train.csv";
    if (fs::exists(train)) {
      const CsvTable t = read_csv(train);
      const int c_ep = t.column("episode"), c_steps = t.column("env_steps"), c_mse = t.column("mse_m2"),
                c_e = t.column("energy_J"), c_ta = t.column("mean_t_alpha_s");
      for (const auto& r : t.rows) {
        const auto ep = std::stol(r.at(static_cast<std::size_t>(c_ep)));
        const auto steps = std::stol(r.at(static_cast<std::size_t>(c_steps)));
        mse.row(ep, parse_number(r.at(static_cast<std::size_t>(c_mse))), row.policy, row.seed, steps);
        energy.row(ep, parse_number(r.at(static_cast<std::size_t>(c_e))), row.policy, row.seed, steps);
        latency.row(ep, parse_number(r.at(static_cast<std::size_t>(c_ta))), row.policy, row.seed, steps);
      }
    }
    const fs::path trace_path = rd / "eval_trace.csv";
    const CsvTable trace = read_csv(trace_path);
    const int c_ep = trace.column("episode"), c_tick = trace.column("tick"), c_act = trace.column("activated"),
              c_err = trace.column("position_error_m"), c_en = trace.column("energy_J"),
              c_ta = trace.column("t_alpha");

    // Untrained baselines contribute one point per evaluation episode.
    std::map<long, std::array<double, 4>> per_episode;  // sq error, energy, t_alpha sum, steps
    for (const auto& r : trace.rows) {
      const long ep = std::stol(r.at(static_cast<std::size_t>(c_ep)));
      if (ep == 0) activated.row(std::stol(r.at(static_cast<std::size_t>(c_tick))),
                                 std::stol(r.at(static_cast<std::size_t>(c_act))), row.policy, row.seed);
      const double err = parse_number(r.at(static_cast<std::size_t>(c_err)));
      auto& acc = per_episode[ep];
      acc[0] += err * err;
      acc[1] += parse_number(r.at(static_cast<std::size_t>(c_en)));
      acc[2] += parse_number(r.at(static_cast<std::size_t>(c_ta)));
      acc[3] += 1.0;
    }
    if (!fs::exists(train)) {
      long steps = 0;
      for (const auto& [ep, acc] : per_episode) {
        steps += static_cast<long>(acc[3]);
        mse.row(ep, acc[0] / acc[3], row.policy, row.seed, steps);
        energy.row(ep, acc[1], row.policy, row.seed, steps);
        latency.row(ep, acc[2] / acc[3], row.policy, row.seed, steps);
      }
    }
  }
  return files;
}

}  // namespace mtt
