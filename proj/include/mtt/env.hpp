#pragma once

#include "mtt/config.hpp"
#include "mtt/energy.hpp"
#include "mtt/radio.hpp"
#include "mtt/tracker.hpp"
#include "mtt/world.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

namespace mtt
{

using Observation = Eigen::VectorXd;

/// Episodic interface the learner trains against.
class Environment
{
public:
  struct Step
  {
    Observation obs;
    double reward = 0.0;
    bool done = false;
  };

  virtual ~Environment() = default;
  virtual Observation reset(std::uint64_t seed) = 0;
  virtual Step step(int action) = 0;
  virtual int action_count() const = 0;
  virtual int observation_dim() const = 0;

  // Optional diagnostics for training logs.
  virtual double step_energy() const { return 0.0; }
  virtual double step_error() const { return 0.0; }
  virtual double step_latency() const { return 0.0; }
  virtual int predictor_fits() const { return 0; }
};

enum class OffloadChoice { Mobile = 0, Server = 1 };

const char* to_string(OffloadChoice c);

/// One scheduling decision: where sensed data goes and which candidate slots
/// are switched on. `track` overrides the mobile dispatch rule when set.
struct Action
{
  OffloadChoice offload = OffloadChoice::Mobile;
  std::vector<int> activate;  // candidate slot indices
  std::optional<std::vector<int>> track;
};

/// Enumeration of offload choices x activation subsets of size <= budget.
class ActionSpace
{
public:
  ActionSpace() = default;
  ActionSpace(int candidates, int budget, long cap);

  int size() const { return static_cast<int>(subsets_.size()) * kOffloadChoices; }
  int subset_count() const { return static_cast<int>(subsets_.size()); }
  Action decode(int index) const;
  int encode(OffloadChoice offload, std::vector<int> activate) const;
  int candidates() const { return candidates_; }
  int budget() const { return budget_; }

  static constexpr int kOffloadChoices = 2;

private:
  int candidates_ = 0;
  int budget_ = 0;
  std::vector<std::vector<int>> subsets_;
};

/// Throws ConfigError when the enumeration exceeds env.action_cap.
ActionSpace action_space(const ScenarioConfig& cfg);

struct RewardTerms
{
  double e = 0.0;
  double a = 0.0;
  double q = 0.0;
  double k1 = 0.0, k2 = 0.0, k3 = 0.0;

  /// Reward is maximized; energy and error enter as costs.
  double reward() const { return -(k1 * e + k2 * a) - k3 * q; }
};

struct TaskRecord
{
  int tick = 0;
  int sn_id = 0;
  DestinationKind dest_kind = DestinationKind::Server;
  int dest_id = 0;
  LatencyBreakdown latency;
  bool deadline_met = true;
};

struct NodeEnergyRecord
{
  int tick = 0;
  int node_id = 0;  // sensors first, then mobiles offset by the sensor count
  NodeMode mode = NodeMode::Sleep;
  double joules = 0.0;
  double battery = 0.0;
};

struct StepInfo
{
  int tick = 0;
  int action_id = -1;
  double energy = 0.0;  // J debited this step
  RewardTerms terms;
  double reward = 0.0;
  double position_error = 0.0;  // EKF posterior vs truth
  double e_r = 0.0;             // centroid error of per-node estimates
  double t_alpha = 0.0;         // worst task latency this step
  int activated = 0;
  int measured = 0;
  int accepted = 0;
  int orphans = 0;
  int tasks = 0;
  int deadline_met = 0;
  int moving_mobiles = 0;
  bool ekf_skipped = false;
  bool c1 = false, c2 = false, c3 = false, c4 = false;
  bool done = false;
  Position truth = Position::Zero();
  Position estimate = Position::Zero();
  std::vector<TaskRecord> task_log;
  std::vector<NodeEnergyRecord> energy_log;
};

/// Mobile-target-tracking scheduling environment.
class TrackingEnv : public Environment
{
public:
  explicit TrackingEnv(ScenarioConfig cfg);

  Observation reset(std::uint64_t seed) override;
  Step step(int action) override;
  int action_count() const override { return space_.size(); }
  int observation_dim() const override { return obs_dim_; }

  /// Full-information step. Throws DomainError on an invalid action.
  StepInfo step(const Action& action, int action_id = -1);
  Observation observe() const;

  const ScenarioConfig& config() const { return cfg_; }
  const ActionSpace& actions() const { return space_; }
  const WorldState& world() const { return world_; }
  const TrackEstimate<double>& estimate() const { return est_; }
  const EnergyLedger& ledger() const { return ledger_; }
  const StepInfo& last_info() const { return last_info_; }
  /// Sensor ids for each candidate slot (may be shorter than K late in an episode).
  const std::vector<int>& candidates() const { return candidates_; }
  Position predicted_position() const;
  Position forecast_position() const { return forecast_; }
  int predictor_fits() const override { return predictor_fits_; }
  double step_energy() const override { return last_info_.energy; }
  double step_error() const override { return last_info_.position_error; }
  double step_latency() const override { return last_info_.t_alpha; }
  double initial_battery_total() const { return initial_battery_; }
  double battery_total() const;
  double period() const;
  bool done() const { return done_; }
  bool keep_energy_log = false;

private:
  void refresh_candidates();
  void update_predictor();
  double tracking_capacity_of(double battery, double capacity, double dist) const;

  ScenarioConfig cfg_;
  ActionSpace space_;
  int obs_dim_ = 0;
  WorldState world_;
  TrackEstimate<double> est_;
  Mat4 F_;
  Mat4 Q_;
  Rng target_rng_;
  Rng meas_rng_;
  EnergyLedger ledger_;
  std::vector<int> candidates_;
  std::vector<bool> tracking_;
  std::vector<double> history_x_, history_y_;
  Position forecast_ = Position::Zero();
  double last_t_alpha_ = 0.0;
  double gain_feature_ = 0.0;
  int predictor_fits_ = 0;
  double initial_battery_ = 0.0;
  bool done_ = false;
  StepInfo last_info_;
};

}  // namespace mtt
