#include "mtt/config.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace mtt
{

namespace
{

template <typename Cfg, typename Visitor>
void visit_fields(Cfg& c, Visitor&& v)
{
  auto& w = c.world;
  v("world", "side", w.side);
  v("world", "num_sensors", w.num_sensors);
  v("world", "num_mobile", w.num_mobile);
  v("world", "servers", w.servers);
  v("world", "tick_length", w.tick_length);
  v("world", "horizon", w.horizon);
  v("world", "target_init", w.target_init);
  v("world", "target_start", w.target_start);
  v("world", "target_init_max", w.target_init_max);
  v("world", "target_speed", w.target_speed);
  v("world", "target_heading", w.target_heading);
  v("world", "target_max_speed", w.target_max_speed);
  v("world", "entry_margin", w.entry_margin);
  v("world", "pos_noise_sigma", w.pos_noise_sigma);
  v("world", "vel_noise_sigma", w.vel_noise_sigma);
  v("world", "random_heading", w.random_heading);
  v("world", "heading_sigma", w.heading_sigma);
  v("world", "sense_range", w.sense_range);
  v("world", "comm_range", w.comm_range);
  v("world", "server_reach", w.server_reach);
  v("world", "source_power", w.source_power);
  v("world", "meas_sigma", w.meas_sigma);
  v("world", "outlier_prob", w.outlier_prob);
  v("world", "outlier_scale", w.outlier_scale);
  v("world", "sn_battery", w.sn_battery);
  v("world", "mn_battery", w.mn_battery);
  v("world", "sn_tx_power", w.sn_tx_power);
  v("world", "mn_speed", w.mn_speed);
  v("world", "mn_standoff", w.mn_standoff);
  v("world", "mn_cpu_freq", w.mn_cpu_freq);
  v("world", "server_cpu_freq", w.server_cpu_freq);

  auto& r = c.radio;
  v("radio", "bandwidth_mobile", r.bandwidth_mobile);
  v("radio", "bandwidth_server", r.bandwidth_server);
  v("radio", "noise_power", r.noise_power);
  v("radio", "gain_ref", r.gain_ref);
  v("radio", "cycles_per_bit", r.cycles_per_bit);
  v("radio", "task_bits", r.task_bits);
  v("radio", "deadline", r.deadline);
  v("radio", "split_eta", r.split_eta);
  v("radio", "backhaul_rate", r.backhaul_rate);
  v("radio", "second_hop", r.second_hop);
  v("radio", "tau_a", r.tau_a);

  auto& e = c.energy;
  v("energy", "p0", e.p0);
  v("energy", "eta_w", e.eta_w);
  v("energy", "check_rate", e.check_rate);
  v("energy", "work_cost_per_meter", e.work_cost_per_meter);
  v("energy", "eps_elec", e.eps_elec);
  v("energy", "eps_amp", e.eps_amp);
  v("energy", "q_t", e.q_t);
  v("energy", "q_s", e.q_s);
  v("energy", "q_r", e.q_r);
  v("energy", "kappa", e.kappa);
  v("energy", "a_frac", e.a_frac);
  v("energy", "omega1", e.omega1);
  v("energy", "omega2", e.omega2);
  v("energy", "phi_min", e.phi_min);
  v("energy", "phi_override", e.phi_override);
  v("energy", "k_retry", e.k_retry);
  v("energy", "e_max", e.e_max);
  v("energy", "min_active", e.min_active);
  v("energy", "ticks_per_period", e.ticks_per_period);

  auto& t = c.tracker;
  v("tracker", "fusion_threshold", t.fusion_threshold);
  v("tracker", "omit_noise_terms", t.omit_noise_terms);
  v("tracker", "prior_pos_var", t.prior_pos_var);
  v("tracker", "prior_vel_var", t.prior_vel_var);
  v("tracker", "predictor_order", t.predictor_order);
  v("tracker", "predictor_horizon", t.predictor_horizon);
  v("tracker", "memory_ratio", t.memory_ratio);
  v("tracker", "ekf_iterations", t.ekf_iterations);
  v("tracker", "gate_sigma", t.gate_sigma);

  auto& n = c.env;
  v("env", "candidates", n.candidates);
  v("env", "activation_budget", n.activation_budget);
  v("env", "action_cap", n.action_cap);
  v("env", "k1", n.k1);
  v("env", "k2", n.k2);
  v("env", "k3", n.k3);
  v("env", "error_norm", n.error_norm);
  v("env", "gain_feature", n.gain_feature);
  v("env", "forecast_mode", n.forecast_mode);
  v("env", "use_predictor", n.use_predictor);
  v("env", "cooperative", n.cooperative);

  auto& a = c.agent;
  v("agent", "discount", a.discount);
  v("agent", "learning_rate", a.learning_rate);
  v("agent", "batch", a.batch);
  v("agent", "memory", a.memory);
  v("agent", "sync_interval", a.sync_interval);
  v("agent", "episodes", a.episodes);
  v("agent", "eps_start", a.eps_start);
  v("agent", "eps_end", a.eps_end);
  v("agent", "eps_decay_fraction", a.eps_decay_fraction);
  v("agent", "hidden", a.hidden);
  v("agent", "pretrain_rounds", a.pretrain_rounds);
  v("agent", "eval_episodes", a.eval_episodes);
  v("agent", "grad_clip", a.grad_clip);
}

std::string full_name(const char* section, const char* key)
{
  return std::string(section) + "." + key;
}

template <typename T>
void read_scalar(const YAML::Node& node, const std::string& name, T& out)
{
  try {
    out = node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(name, "cannot parse value");
  }
}

void read(const YAML::Node& n, const std::string& name, double& out) { read_scalar(n, name, out); }
void read(const YAML::Node& n, const std::string& name, int& out) { read_scalar(n, name, out); }
void read(const YAML::Node& n, const std::string& name, long& out) { read_scalar(n, name, out); }
void read(const YAML::Node& n, const std::string& name, bool& out) { read_scalar(n, name, out); }

void read(const YAML::Node& n, const std::string& name, std::vector<int>& out)
{
  if (!n.IsSequence()) throw ConfigError(name, "expected a list of integers");
  out.clear();
  for (const auto& item : n) {
    int v = 0;
    read_scalar(item, name, v);
    out.push_back(v);
  }
}

void read(const YAML::Node& n, const std::string& name, Position& out)
{
  if (!n.IsSequence() || n.size() != 2) throw ConfigError(name, "expected [x, y]");
  read_scalar(n[0], name, out.x());
  read_scalar(n[1], name, out.y());
}

void read(const YAML::Node& n, const std::string& name, std::vector<Position>& out)
{
  if (!n.IsSequence()) throw ConfigError(name, "expected a list of [x, y] pairs");
  out.clear();
  for (const auto& item : n) {
    Position p;
    read(item, name, p);
    out.push_back(p);
  }
}

template <typename E>
void read_enum(const YAML::Node& n, const std::string& name, E& out,
               std::initializer_list<std::pair<const char*, E>> table)
{
  std::string s;
  read_scalar(n, name, s);
  for (const auto& [label, value] : table) {
    if (s == label) {
      out = value;
      return;
    }
  }
  throw ConfigError(name, "unknown option '" + s + "'");
}

void read(const YAML::Node& n, const std::string& name, TargetInit& out)
{
  read_enum(n, name, out, {{"fixed", TargetInit::Fixed}, {"ranged", TargetInit::Ranged}});
}

void read(const YAML::Node& n, const std::string& name, GainFeature& out)
{
  read_enum(n, name, out,
            {{"frobenius", GainFeature::Frobenius},
             {"trace", GainFeature::Trace},
             {"diagonal", GainFeature::Diagonal}});
}

void read(const YAML::Node& n, const std::string& name, ForecastMode& out)
{
  read_enum(n, name, out, {{"augment", ForecastMode::Augment}, {"replace", ForecastMode::Replace}});
}

std::string emit(double v)
{
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}
std::string emit(int v) { return std::to_string(v); }
std::string emit(long v) { return std::to_string(v); }
std::string emit(bool v) { return v ? "true" : "false"; }
std::string emit(const Position& p) { return "[" + emit(p.x()) + ", " + emit(p.y()) + "]"; }
std::string emit(const std::vector<Position>& ps)
{
  std::string s = "[";
  for (std::size_t i = 0; i < ps.size(); ++i) s += (i ? ", " : "") + emit(ps[i]);
  return s + "]";
}
std::string emit(const std::vector<int>& vs)
{
  std::string s = "[";
  for (std::size_t i = 0; i < vs.size(); ++i) s += (i ? ", " : "") + std::to_string(vs[i]);
  return s + "]";
}
std::string emit(TargetInit v) { return v == TargetInit::Fixed ? "fixed" : "ranged"; }
std::string emit(GainFeature v)
{
  switch (v) {
    case GainFeature::Frobenius: return "frobenius";
    case GainFeature::Trace: return "trace";
    case GainFeature::Diagonal: return "diagonal";
  }
  return "frobenius";
}
std::string emit(ForecastMode v) { return v == ForecastMode::Augment ? "augment" : "replace"; }

void require(bool ok, const char* field, const std::string& what)
{
  if (!ok) throw ConfigError(field, what);
}

bool finite_positive(double v) { return std::isfinite(v) && v > 0.0; }
bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0.0; }

}  // namespace

void validate(const ScenarioConfig& c)
{
  const auto& w = c.world;
  require(finite_positive(w.side), "world.side", "must be > 0");
  require(w.num_sensors > 0, "world.num_sensors", "must be > 0");
  require(w.num_mobile >= 0, "world.num_mobile", "must be >= 0");
  for (const auto& s : w.servers) {
    require(s.allFinite() && s.x() >= 0 && s.y() >= 0 && s.x() <= w.side && s.y() <= w.side,
            "world.servers", "server positions must lie inside the square");
  }
  require(finite_positive(w.tick_length), "world.tick_length", "must be > 0");
  require(w.horizon > 0, "world.horizon", "must be > 0");
  require(w.target_start.allFinite(), "world.target_start", "must be finite");
  require(finite_positive(w.target_max_speed), "world.target_max_speed", "must be > 0");
  require(finite_nonneg(w.entry_margin) && 2.0 * w.entry_margin < w.side, "world.entry_margin",
          "must lie in [0, side / 2)");
  require(finite_nonneg(w.target_speed) && w.target_speed <= w.target_max_speed, "world.target_speed",
          "must lie in [0, target_max_speed]");
  require(finite_nonneg(w.pos_noise_sigma), "world.pos_noise_sigma", "must be >= 0");
  require(finite_nonneg(w.vel_noise_sigma), "world.vel_noise_sigma", "must be >= 0");
  require(finite_positive(w.sense_range), "world.sense_range", "must be > 0");
  require(finite_positive(w.comm_range), "world.comm_range", "must be > 0");
  require(finite_positive(w.server_reach), "world.server_reach", "must be > 0");
  require(finite_positive(w.source_power), "world.source_power", "must be > 0");
  require(finite_nonneg(w.meas_sigma), "world.meas_sigma", "must be >= 0");
  require(w.outlier_prob >= 0.0 && w.outlier_prob <= 1.0, "world.outlier_prob", "must lie in [0, 1]");
  require(finite_positive(w.sn_battery), "world.sn_battery", "must be > 0");
  require(finite_positive(w.mn_battery), "world.mn_battery", "must be > 0");
  require(finite_positive(w.sn_tx_power), "world.sn_tx_power", "must be > 0");
  require(finite_nonneg(w.mn_speed), "world.mn_speed", "must be >= 0");
  require(finite_positive(w.mn_cpu_freq), "world.mn_cpu_freq", "must be > 0");
  require(finite_positive(w.server_cpu_freq), "world.server_cpu_freq", "must be > 0");

  const auto& r = c.radio;
  require(finite_positive(r.bandwidth_mobile), "radio.bandwidth_mobile", "must be > 0");
  require(finite_positive(r.bandwidth_server), "radio.bandwidth_server", "must be > 0");
  require(finite_positive(r.noise_power), "radio.noise_power", "must be > 0");
  require(finite_positive(r.gain_ref), "radio.gain_ref", "must be > 0");
  require(finite_positive(r.cycles_per_bit), "radio.cycles_per_bit", "must be > 0");
  require(finite_positive(r.task_bits), "radio.task_bits", "must be > 0");
  require(finite_positive(r.deadline) || r.deadline == 0.0, "radio.deadline", "must be >= 0");
  require(r.split_eta >= 0.0 && r.split_eta <= 1.0, "radio.split_eta", "must lie in [0, 1]");
  require(finite_positive(r.backhaul_rate), "radio.backhaul_rate", "must be > 0");
  require(finite_nonneg(r.tau_a), "radio.tau_a", "must be >= 0");

  const auto& e = c.energy;
  require(finite_nonneg(e.p0), "energy.p0", "must be >= 0");
  require(std::isfinite(e.eta_w) && e.eta_w > 1.0, "energy.eta_w", "must be > 1");
  require(finite_nonneg(e.check_rate), "energy.check_rate", "must be >= 0");
  require(finite_nonneg(e.work_cost_per_meter), "energy.work_cost_per_meter", "must be >= 0");
  require(finite_nonneg(e.eps_elec), "energy.eps_elec", "must be >= 0");
  require(finite_nonneg(e.eps_amp), "energy.eps_amp", "must be >= 0");
  require(finite_nonneg(e.q_t) && finite_nonneg(e.q_s) && finite_nonneg(e.q_r), "energy.q_t",
          "data sizes must be >= 0");
  require(finite_nonneg(e.kappa), "energy.kappa", "must be >= 0");
  require(e.a_frac >= 0.0 && e.a_frac <= 1.0, "energy.a_frac", "must lie in [0, 1]");
  require(e.omega1 >= 0.0 && e.omega2 >= 0.0 && std::abs(e.omega1 + e.omega2 - 1.0) < 1e-12,
          "energy.omega1", "omega1 + omega2 must equal 1 with both >= 0");
  require(e.phi_min >= 0.0 && e.phi_min <= 1.0, "energy.phi_min", "must lie in [0, 1]");
  require(e.phi_override < 1.0, "energy.phi_override", "must be < 1 (or negative to disable)");
  require(e.k_retry >= 1, "energy.k_retry", "must be >= 1");
  require(finite_positive(e.e_max), "energy.e_max", "must be > 0");
  require(e.min_active >= 0, "energy.min_active", "must be >= 0");
  require(e.ticks_per_period >= 1, "energy.ticks_per_period", "must be >= 1");

  const auto& t = c.tracker;
  require(finite_positive(t.fusion_threshold), "tracker.fusion_threshold", "must be > 0");
  require(finite_positive(t.prior_pos_var), "tracker.prior_pos_var", "must be > 0");
  require(finite_positive(t.prior_vel_var), "tracker.prior_vel_var", "must be > 0");
  require(t.predictor_order >= 1, "tracker.predictor_order", "must be >= 1");
  require(t.predictor_horizon >= 1, "tracker.predictor_horizon", "must be >= 1");
  require(t.memory_ratio >= 1, "tracker.memory_ratio", "must be >= 1");
  require(std::isfinite(t.gate_sigma), "tracker.gate_sigma", "must be finite");
  require(t.ekf_iterations >= 1 && t.ekf_iterations <= 100, "tracker.ekf_iterations", "must lie in [1, 100]");
  require(t.memory_ratio * t.predictor_horizon >= 2 * t.predictor_order, "tracker.memory_ratio",
          "history window (memory_ratio * predictor_horizon) must hold at least 2 * predictor_order points");

  const auto& n = c.env;
  require(n.candidates >= 1, "env.candidates", "must be >= 1");
  require(n.activation_budget >= 0 && n.activation_budget <= n.candidates, "env.activation_budget",
          "must lie in [0, candidates]");
  require(n.action_cap > 0, "env.action_cap", "must be > 0");
  require(n.k1 >= 0 && n.k2 >= 0 && n.k3 >= 0 && std::abs(n.k1 + n.k2 + n.k3 - 1.0) < 1e-12, "env.k1",
          "k1 + k2 + k3 must equal 1 with all >= 0");
  require(finite_positive(n.error_norm), "env.error_norm", "must be > 0");

  const auto& a = c.agent;
  require(a.discount > 0.0 && a.discount < 1.0, "agent.discount", "must lie in (0, 1)");
  require(finite_positive(a.learning_rate), "agent.learning_rate", "must be > 0");
  require(a.batch >= 1, "agent.batch", "must be >= 1");
  require(a.memory >= a.batch, "agent.memory", "must be >= batch");
  require(a.sync_interval >= 1, "agent.sync_interval", "must be >= 1");
  require(a.episodes >= 0, "agent.episodes", "must be >= 0");
  require(a.eps_start >= 0 && a.eps_start <= 1 && a.eps_end >= 0 && a.eps_end <= a.eps_start, "agent.eps_start",
          "require 0 <= eps_end <= eps_start <= 1");
  require(a.eps_decay_fraction > 0 && a.eps_decay_fraction <= 1, "agent.eps_decay_fraction", "must lie in (0, 1]");
  for (int h : a.hidden) require(h > 0, "agent.hidden", "layer widths must be > 0");
  require(a.pretrain_rounds >= 0, "agent.pretrain_rounds", "must be >= 0");
  require(a.eval_episodes >= 0, "agent.eval_episodes", "must be >= 0");
  require(finite_positive(a.grad_clip), "agent.grad_clip", "must be > 0");
}

ScenarioConfig parse_config(const std::string& text)
{
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& ex) {
    throw ConfigError("<file>", std::string("malformed config: ") + ex.what());
  }
  ScenarioConfig cfg;
  if (root.IsNull()) {
    validate(cfg);
    return cfg;
  }
  if (!root.IsMap()) throw ConfigError("<file>", "top level must be a mapping of sections");

  for (const auto& section : root) {
    const auto name = section.first.as<std::string>();
    if (name != "world" && name != "radio" && name != "energy" && name != "tracker" && name != "env" &&
        name != "agent")
      throw ConfigError(name, "unknown section");
    if (!section.second.IsMap()) throw ConfigError(name, "section must be a mapping");
    for (const auto& kv : section.second) {
      const auto key = kv.first.as<std::string>();
      bool known = false;
      visit_fields(cfg, [&](const char* s, const char* k, auto&) {
        if (name == s && key == k) known = true;
      });
      if (!known) throw ConfigError(name + "." + key, "unknown key");
    }
  }

  visit_fields(cfg, [&](const char* s, const char* k, auto& field) {
    const YAML::Node sec = root[s];
    if (!sec) return;
    const YAML::Node val = sec[k];
    if (!val) return;
    read(val, full_name(s, k), field);
  });
  validate(cfg);
  return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const ScenarioConfig& cfg)
{
  std::string out;
  std::string current;
  visit_fields(cfg, [&](const char* s, const char* k, const auto& field) {
    if (current != s) {
      current = s;
      out += std::string(s) + ":\n";
    }
    out += "  " + std::string(k) + ": " + emit(field) + "\n";
  });
  return out;
}

}  // namespace mtt
