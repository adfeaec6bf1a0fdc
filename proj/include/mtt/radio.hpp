#pragma once

#include "mtt/world.hpp"

#include <algorithm>
#include <optional>
#include <vector>

namespace mtt
{

struct Task
{
  double bits = 0.0;      // L
  double deadline = 0.0;  // tau_ar
  double split = 0.0;     // eta, fraction computed on the mobile node

  /// Throws DomainError unless L > 0, tau_ar > 0 and eta in [0, 1].
  void check() const;
};

enum class DestinationKind { Mobile, Server };

const char* to_string(DestinationKind kind);

struct OffloadDecision
{
  int source = 0;
  DestinationKind kind = DestinationKind::Server;
  int dest = 0;
  double bandwidth = 0.0;  // Hz granted to this source
  double rate = 0.0;       // bit/s achieved
  double dist = 0.0;       // m, source to destination
};

struct LatencyBreakdown
{
  double tau_c = 0.0;
  double tau_beta = 0.0;
  double tau_a = 0.0;
  double t_alpha = 0.0;
};

/// Channel-level quantities needed to rank destinations in one tick.
struct ChannelState
{
  double bandwidth_mobile = 0.0;
  double bandwidth_server = 0.0;
  double noise_power = 0.0;
  double gain_ref = 1.0;
  double server_reach = 0.0;
  /// Concurrent uploaders per mobile node / server; the pool is shared equally.
  std::vector<int> load_mobile;
  std::vector<int> load_server;
};

/// a * log2(1 + p * g / noise). All inputs must be > 0.
double transmission_rate(double bandwidth, double tx_power, double gain, double noise);

/// payload / rate; a non-positive rate means the destination is unreachable.
double transmission_latency(double payload_bits, double rate);

/// g = g0 / (1 + d^2).
inline double channel_gain(double gain_ref, double dist) { return gain_ref / (1.0 + dist * dist); }

/// Best in-range mobile node by achievable rate (lowest id on ties), else the
/// best reachable server. Nothing when the sensor is orphaned.
std::optional<OffloadDecision> select_offload_destination(const SensorNode& sn, const WorldState& world,
                                                          const ChannelState& channel);

/// Best reachable server for a sensor regardless of mobile nodes.
std::optional<OffloadDecision> select_server(const SensorNode& sn, const WorldState& world,
                                             const ChannelState& channel);

struct ComputeLatency
{
  double local = 0.0;   // eta L c / f
  double remote = 0.0;  // (1 - eta) L c / f_e

  /// The two halves run in parallel.
  double combined() const { return std::max(local, remote); }
};

ComputeLatency compute_latency(const Task& task, double local_freq, double server_freq, double cycles_per_bit);

/// tau_c + tau_beta + I * tau_a.
double total_latency(double tau_c, double tau_beta, bool move_indicator, double tau_a);

inline bool deadline_met(double t_alpha, double deadline) { return t_alpha <= deadline; }

}  // namespace mtt
