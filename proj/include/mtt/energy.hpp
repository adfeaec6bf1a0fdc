#pragma once

#include "mtt/config.hpp"
#include "mtt/world.hpp"

#include <Eigen/Dense>

#include <array>
#include <vector>

namespace mtt
{

/// Indicator vector in the order [sleep, check, idle, work].
Eigen::Vector4d sat_vector(NodeMode mode);

enum class ModeEvent { NoTask, TargetDetected, DataCollected, ScheduledToTrack, Timeout };

/// Node state machine. Throws TransitionError when a static sensor is asked to
/// track or when data is collected by a node that has not been woken.
NodeMode transition_mode(NodeMode mode, ModeEvent event, bool is_mobile);

double sleep_energy(double period, double p0);

/// Throws DomainError when eta_w <= 1.
double idle_energy(double period, double eta_w, double p0);

struct CheckEnergy
{
  double trans = 0.0;   // 2 e_elec (q_t + q_s) + e_amp q_r d^2
  double com = 0.0;     // kappa a L f^2
  double listen = 0.0;  // retry prefactor * eta_w P0 period

  double total() const { return trans + com + listen; }
};

double transmit_energy(const EnergyConfig& p, double dist, double payload_bits);
double compute_energy(const EnergyConfig& p, double bits, double freq);

/// Check-state energy with a retry count k: the idle-listen term is scaled by
/// sum_{n=1..k} phi^n. Throws DomainError for phi outside [0, 1).
CheckEnergy check_energy_terms(double phi, int k_retry, double dist, const EnergyConfig& p, double compute_bits,
                               double local_freq, double period);

inline double check_energy(double phi, int k_retry, double dist, const EnergyConfig& p, double compute_bits,
                           double local_freq, double period)
{
  return check_energy_terms(phi, k_retry, dist, p, compute_bits, local_freq, period).total();
}

/// v * period * cost_per_meter.
double work_energy(double speed, double period, double cost_per_meter);

/// w1 R + w2 exp(-d). Throws DomainError unless the weights are nonnegative
/// and sum to one.
double tracking_capacity(double residual_norm, double dist, double w1, double w2);

/// Energy consumed by one node over one period, split by cause.
struct NodeEnergy
{
  NodeMode mode = NodeMode::Sleep;
  double sleep = 0.0;
  double idle = 0.0;
  double check = 0.0;  // listen part of the check state
  double work = 0.0;
  double trans = 0.0;
  double com = 0.0;

  double total() const { return sleep + idle + check + work + trans + com; }

  /// Mode-entry vector in [sleep, check, idle, work] order; event costs are
  /// charged to the mode the node occupied.
  Eigen::Vector4d state_vector() const;
};

struct PeriodCost
{
  double joules = 0.0;
  std::vector<int> c2_flagged;
};

/// sum_i I_i . E_i over nodes. Rows of `indicators` must be one-hot. When
/// batteries are given each node contributes at most its remaining charge.
PeriodCost period_cost(const Eigen::MatrixX4d& indicators, const Eigen::MatrixX4d& energies, double e_max,
                       const std::vector<double>* batteries = nullptr);

/// Cumulative per-node accounting for an episode.
class EnergyLedger
{
public:
  EnergyLedger() = default;
  explicit EnergyLedger(std::size_t nodes) : cumulative_(nodes, 0.0), last_(nodes) {}

  void record(std::size_t node, const NodeEnergy& e)
  {
    cumulative_[node] += e.total();
    last_[node] = e;
    total_ += e.total();
  }

  double total() const { return total_; }
  double node_total(std::size_t node) const { return cumulative_[node]; }
  const NodeEnergy& last(std::size_t node) const { return last_[node]; }
  std::size_t size() const { return cumulative_.size(); }

private:
  std::vector<double> cumulative_;
  std::vector<NodeEnergy> last_;
  double total_ = 0.0;
};

}  // namespace mtt
