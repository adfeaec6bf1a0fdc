#pragma once

#include "mtt/types.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace mtt
{

enum class TargetInit { Fixed, Ranged };
enum class GainFeature { Frobenius, Trace, Diagonal };
enum class ForecastMode { Augment, Replace };

struct WorldConfig
{
  double side = 200.0;
  int num_sensors = 56;
  int num_mobile = 6;
  std::vector<Position> servers = {Position(50.0, 200.0), Position(150.0, 200.0)};
  double tick_length = 1.0;
  int horizon = 200;

  TargetInit target_init = TargetInit::Fixed;
  Position target_start = Position(0.0, 50.0);
  double target_init_max = 150.0;     // ranged init: y in (0, max)
  double target_speed = 0.5;          // initial speed, m/s
  double target_heading = 0.0;        // radians, 0 = +x
  double target_max_speed = 1.0;
  double entry_margin = 5.0;          // m inside the square before an exit can end the episode
  double pos_noise_sigma = 1.0;
  double vel_noise_sigma = 0.1;
  bool random_heading = false;
  double heading_sigma = 0.3;         // rad per tick when random_heading is set

  double sense_range = 30.0;
  double comm_range = 50.0;
  double server_reach = 300.0;
  double source_power = 1.0e6;        // target emission power P_i
  double meas_sigma = 1.0;
  double outlier_prob = 0.0;         // gross-error injection for fusion experiments
  double outlier_scale = 20.0;        // gross error in units of meas_sigma

  double sn_battery = 40.0;
  double mn_battery = 1000.0;
  double sn_tx_power = 0.1;
  double mn_speed = 1.0;
  double mn_standoff = 10.0;
  double mn_cpu_freq = 2.0e9;
  double server_cpu_freq = 4.0e9;
};

struct RadioConfig
{
  double bandwidth_mobile = 2.0e6;    // Hz pool per MN
  double bandwidth_server = 2.0e6;    // Hz pool per server
  double noise_power = 1.0e-10;       // W
  double gain_ref = 1.0;              // g0 in g = g0 / (1 + d^2)
  double cycles_per_bit = 1000.0;
  double task_bits = 1.0e5;
  double deadline = 0.04;             // s
  double split_eta = 1.0 / 3.0;
  double backhaul_rate = 5.0e7;       // bit/s, MN -> server
  bool second_hop = true;
  double tau_a = 0.002;               // tracking-control latency, s
};

struct EnergyConfig
{
  double p0 = 0.1;                    // sleep J per unit time
  double eta_w = 2.0;                 // idle multiplier
  double check_rate = 0.6;            // check listen J per unit time
  double work_cost_per_meter = 1.5;   // J/m
  double eps_elec = 50.0e-9;
  double eps_amp = 100.0e-12;
  double q_t = 1000.0;
  double q_s = 1000.0;
  double q_r = 1.0e5;
  double kappa = 1.0e-28;
  double a_frac = 1.0;
  double omega1 = 0.5;
  double omega2 = 0.5;
  double phi_min = 0.3;
  double phi_override = -1.0;         // < 0: derive from con
  int k_retry = 1;
  double e_max = 5.0;                 // per-node per-period cap (C2)
  int min_active = 2;                 // C3 activation floor
  int ticks_per_period = 1;
};

struct TrackerConfig
{
  double fusion_threshold = 3.0;      // MAD multiples
  bool omit_noise_terms = false;      // drop R from S and Q from prediction
  double prior_pos_var = 1.0;
  double prior_vel_var = 1.0;
  int predictor_order = 2;
  int predictor_horizon = 5;
  int memory_ratio = 2;               // history : horizon
  int ekf_iterations = 5;             // 1 = single linearization
  double gate_sigma = 5.0;            // innovation gate, <= 0 disables
};

struct EnvConfig
{
  int candidates = 6;                 // K
  int activation_budget = 4;          // B_act
  long action_cap = 4096;
  double k1 = 0.4;
  double k2 = 0.4;
  double k3 = 0.2;
  double error_norm = 5.0;            // m, scale of the accuracy term
  GainFeature gain_feature = GainFeature::Frobenius;
  ForecastMode forecast_mode = ForecastMode::Augment;
  bool use_predictor = true;
  bool cooperative = true;            // false: eta forced to 0
};

struct AgentConfig
{
  double discount = 0.9;
  double learning_rate = 0.01;
  int batch = 32;
  int memory = 500;
  int sync_interval = 200;
  int episodes = 300;
  double eps_start = 1.0;
  double eps_end = 0.05;
  double eps_decay_fraction = 0.5;
  std::vector<int> hidden = {64, 64};
  int pretrain_rounds = 1000;
  int eval_episodes = 5;
  double grad_clip = 10.0;
};

struct ScenarioConfig
{
  WorldConfig world;
  RadioConfig radio;
  EnergyConfig energy;
  TrackerConfig tracker;
  EnvConfig env;
  AgentConfig agent;
};

/// Throws ConfigError naming the first offending field.
void validate(const ScenarioConfig& cfg);

ScenarioConfig load_config(const std::filesystem::path& path);
ScenarioConfig parse_config(const std::string& text);
std::string dump_config(const ScenarioConfig& cfg);

}  // namespace mtt
