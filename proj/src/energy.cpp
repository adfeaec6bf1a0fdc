#include "mtt/energy.hpp"

#include <cmath>

namespace mtt
{

Eigen::Vector4d sat_vector(NodeMode mode)
{
  switch (mode) {
    case NodeMode::Sleep: return {1, 0, 0, 0};
    case NodeMode::Check: return {0, 1, 0, 0};
    case NodeMode::Idle: return {0, 0, 1, 0};
    case NodeMode::Work: return {0, 0, 0, 1};
  }
  return {1, 0, 0, 0};
}

NodeMode transition_mode(NodeMode mode, ModeEvent event, bool is_mobile)
{
  switch (event) {
    case ModeEvent::NoTask:
    case ModeEvent::Timeout:
      return NodeMode::Sleep;
    case ModeEvent::TargetDetected:
      return mode == NodeMode::Sleep ? NodeMode::Idle : mode;
    case ModeEvent::DataCollected:
      if (mode == NodeMode::Sleep) throw TransitionError("data collected by a sleeping node");
      return mode == NodeMode::Idle ? NodeMode::Check : mode;
    case ModeEvent::ScheduledToTrack:
      if (!is_mobile) throw TransitionError("only mobile nodes can be scheduled to track");
      if (mode == NodeMode::Check || mode == NodeMode::Work) return NodeMode::Work;
      throw TransitionError("tracking requires the check state first");
  }
  return mode;
}

double sleep_energy(double period, double p0)
{
  if (period < 0.0) throw DomainError("period must be >= 0");
  return p0 * period;
}

double idle_energy(double period, double eta_w, double p0)
{
  if (!(eta_w > 1.0)) throw DomainError("idle multiplier eta_w must be > 1");
  if (period < 0.0) throw DomainError("period must be >= 0");
  return eta_w * p0 * period;
}

double transmit_energy(const EnergyConfig& p, double dist, double payload_bits)
{
  return 2.0 * p.eps_elec * (p.q_t + p.q_s) + p.eps_amp * payload_bits * dist * dist;
}

double compute_energy(const EnergyConfig& p, double bits, double freq)
{
  return p.kappa * p.a_frac * bits * freq * freq;
}

CheckEnergy check_energy_terms(double phi, int k_retry, double dist, const EnergyConfig& p, double compute_bits,
                               double local_freq, double period)
{
  if (!(phi >= 0.0 && phi < 1.0)) throw DomainError("scheduling probability must lie in [0, 1)");
  if (k_retry < 1) throw DomainError("retry count must be >= 1");
  if (!(p.eta_w > 1.0)) throw DomainError("idle multiplier eta_w must be > 1");

  // (phi - phi^{k+1}) / (1 - phi), written as the finite sum to stay exact at phi = 0.
  double prefactor = 0.0;
  double term = 1.0;
  for (int n = 1; n <= k_retry; ++n) {
    term *= phi;
    prefactor += term;
  }

  CheckEnergy e;
  e.trans = transmit_energy(p, dist, p.q_r);
  e.com = compute_energy(p, compute_bits, local_freq);
  e.listen = prefactor * p.eta_w * p.p0 * period;
  return e;
}

double work_energy(double speed, double period, double cost_per_meter)
{
  if (speed < 0.0 || period < 0.0 || cost_per_meter < 0.0) throw DomainError("work_energy inputs must be >= 0");
  return speed * period * cost_per_meter;
}

double tracking_capacity(double residual_norm, double dist, double w1, double w2)
{
  if (w1 < 0.0 || w2 < 0.0 || std::abs(w1 + w2 - 1.0) > 1e-12)
    throw DomainError("tracking capacity weights must be nonnegative and sum to 1");
  return w1 * residual_norm + w2 * std::exp(-dist);
}

Eigen::Vector4d NodeEnergy::state_vector() const
{
  Eigen::Vector4d v = Eigen::Vector4d::Zero();
  const double events = trans + com;
  v(0) = sleep;
  v(1) = check;
  v(2) = idle;
  v(3) = work;
  switch (mode) {
    case NodeMode::Sleep: v(0) += events; break;
    case NodeMode::Check: v(1) += events; break;
    case NodeMode::Idle: v(2) += events; break;
    case NodeMode::Work: v(3) += events; break;
  }
  return v;
}

PeriodCost period_cost(const Eigen::MatrixX4d& indicators, const Eigen::MatrixX4d& energies, double e_max,
                       const std::vector<double>* batteries)
{
  if (indicators.rows() != energies.rows()) throw DomainError("indicator and energy row counts differ");
  if (batteries && static_cast<Eigen::Index>(batteries->size()) != indicators.rows())
    throw DomainError("battery count differs from node count");

  PeriodCost out;
  for (Eigen::Index i = 0; i < indicators.rows(); ++i) {
    const auto row = indicators.row(i);
    const bool one_hot = ((row.array() == 0.0) || (row.array() == 1.0)).all() && row.sum() == 1.0;
    if (!one_hot) throw DomainError("indicator row " + std::to_string(i) + " is not one-hot");

    double e = row.dot(energies.row(i));
    if (e > e_max) out.c2_flagged.push_back(static_cast<int>(i));
    if (batteries) e = std::min(e, (*batteries)[static_cast<std::size_t>(i)]);
    out.joules += e;
  }
  return out;
}

}  // namespace mtt
