#pragma once

#include "mtt/config.hpp"
#include "mtt/env.hpp"
#include "mtt/qnet.hpp"

#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mtt
{

using Net = QNet<double>;

struct Transition
{
  Observation s;
  int a = 0;
  double r = 0.0;
  Observation s2;
  bool done = false;
};

/// Fixed-capacity ring of transitions.
class ReplayMemory
{
public:
  explicit ReplayMemory(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  /// i-th oldest stored transition.
  const Transition& at(std::size_t i) const;
  /// Uniform draws with replacement. Throws DomainError when size < n.
  std::vector<const Transition*> sample(std::size_t n, Rng& rng) const;

private:
  std::size_t capacity_;
  std::size_t cursor_ = 0;
  std::vector<Transition> items_;
};

/// y = r + gamma max_a' Q'(s', a'), or r for terminal transitions.
Eigen::VectorXd td_target(std::span<const Transition* const> batch, const Net& target, double discount);

/// One SGD step on the squared TD error of the taken actions. Returns the
/// loss before the step; non-finite gradients leave the net unchanged and set
/// `skipped`.
double q_update(Net& net, std::span<const Transition* const> batch, const Eigen::VectorXd& targets, double lr,
                double grad_clip = 0.0, bool* skipped = nullptr);

/// Lowest index among the maxima.
int greedy_action(const Eigen::VectorXd& q);

/// Epsilon-greedy. One uniform draw decides exploration, a second picks the
/// random action.
int select_action(const Net& net, const Observation& s, double epsilon, Rng& rng);

/// Copies primary into target when step is a positive multiple of interval.
bool sync_target(const Net& primary, Net& target, long step, long interval);

/// Exponential decay from start to end over the first `fraction` of episodes.
double epsilon_at(const AgentConfig& cfg, int episode);

struct EpisodeLog
{
  int episode = 0;
  int steps = 0;
  double epsilon = 0.0;
  double reward = 0.0;
  double energy = 0.0;
  double mean_error = 0.0;
  double mse = 0.0;
  double mean_t_alpha = 0.0;
  double mean_loss = 0.0;
  int updates = 0;
  int skipped_updates = 0;
  int predictor_fits = 0;
};

struct TrainResult
{
  Net policy;
  std::vector<EpisodeLog> log;
  int pretrain_steps = 0;
  int pretrain_predictor_fits = 0;
  long total_updates = 0;
};

class TrainingDiverged : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Epsilon-greedy DQN with replay and a target network. A warm-up of at most
/// `pretrain_rounds` random-action ticks fills replay and primes the
/// trajectory predictor before the W training episodes.
TrainResult train_ltdra(Environment& env, const AgentConfig& cfg, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Policies

enum class PolicyKind { LTDRA, Random, Greedy, NonCooperative, PlainDQN };

const char* to_string(PolicyKind kind);
/// Throws ConfigError("policy", ...) for unknown names.
PolicyKind parse_policy(const std::string& name);
bool is_learned(PolicyKind kind);

/// Scenario the policy is trained and evaluated in.
ScenarioConfig policy_scenario(PolicyKind kind, ScenarioConfig cfg);

struct Decision
{
  Action action;
  int id = -1;
};

class Policy
{
public:
  virtual ~Policy() = default;
  virtual Decision decide(const TrackingEnv& env, Rng& rng) = 0;
  virtual PolicyKind kind() const = 0;
};

/// Indices of the `budget` highest batteries; lower index wins ties.
std::vector<int> greedy_activation(std::span<const double> batteries, int budget);

/// Indices with score above the threshold, best first, at most `budget`.
std::vector<int> random_activation(std::span<const double> scores, double threshold, int budget);

class DqnPolicy : public Policy
{
public:
  DqnPolicy(Net net, PolicyKind kind) : net_(std::move(net)), kind_(kind) {}
  Decision decide(const TrackingEnv& env, Rng& rng) override;
  PolicyKind kind() const override { return kind_; }
  const Net& net() const { return net_; }

private:
  Net net_;
  PolicyKind kind_;
};

class RandomPolicy : public Policy
{
public:
  Decision decide(const TrackingEnv& env, Rng& rng) override;
  PolicyKind kind() const override { return PolicyKind::Random; }
};

class GreedyPolicy : public Policy
{
public:
  Decision decide(const TrackingEnv& env, Rng& rng) override;
  PolicyKind kind() const override { return PolicyKind::Greedy; }
};

/// Untrained baselines; learned kinds need a trained net.
std::unique_ptr<Policy> baseline_policy(PolicyKind kind);

// ---------------------------------------------------------------------------
// Checkpoints: "MTTQNET1", u32 version, u32 bias flag, u32 layer count,
// u32 sizes, then per layer row-major weights and biases as little-endian f64.

void save_checkpoint(const std::string& path, const Net& net);
Net load_checkpoint(const std::string& path);

}  // namespace mtt
