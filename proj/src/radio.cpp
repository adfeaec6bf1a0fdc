#include "mtt/radio.hpp"

#include <cmath>

namespace mtt
{

void Task::check() const
{
  if (!(bits > 0.0)) throw DomainError("task size must be > 0");
  if (!(deadline > 0.0)) throw DomainError("task deadline must be > 0");
  if (!(split >= 0.0 && split <= 1.0)) throw DomainError("task split must lie in [0, 1]");
}

const char* to_string(DestinationKind kind) { return kind == DestinationKind::Mobile ? "mobile" : "server"; }

double transmission_rate(double bandwidth, double tx_power, double gain, double noise)
{
  if (!(bandwidth > 0.0) || !(tx_power > 0.0) || !(gain > 0.0) || !(noise > 0.0))
    throw DomainError("transmission_rate: all inputs must be > 0");
  return bandwidth * std::log2(1.0 + tx_power * gain / noise);
}

double transmission_latency(double payload_bits, double rate)
{
  if (!(rate > 0.0)) throw DomainError("transmission_latency: unreachable destination (rate <= 0)");
  return payload_bits / rate;
}

namespace
{

double share(double pool, const std::vector<int>& load, int idx)
{
  const int n = idx < static_cast<int>(load.size()) ? load[static_cast<std::size_t>(idx)] : 0;
  return pool / static_cast<double>(std::max(1, n));
}

}  // namespace

std::optional<OffloadDecision> select_server(const SensorNode& sn, const WorldState& world,
                                             const ChannelState& channel)
{
  std::optional<OffloadDecision> best;
  for (const auto& server : world.servers) {
    const double d = distance(sn.pos, server.pos);
    if (d > channel.server_reach) continue;
    const double bw = share(channel.bandwidth_server, channel.load_server, server.id);
    const double rate =
        transmission_rate(bw, sn.tx_power, channel_gain(channel.gain_ref, d), channel.noise_power);
    if (!best || rate > best->rate) best = OffloadDecision{sn.id, DestinationKind::Server, server.id, bw, rate, d};
  }
  return best;
}

std::optional<OffloadDecision> select_offload_destination(const SensorNode& sn, const WorldState& world,
                                                          const ChannelState& channel)
{
  std::optional<OffloadDecision> best;
  for (const auto& mn : world.mobiles) {
    if (!mn.alive()) continue;
    const double d = distance(sn.pos, mn.pos);
    if (d > sn.comm_range) continue;
    const double bw = share(channel.bandwidth_mobile, channel.load_mobile, mn.id);
    const double rate =
        transmission_rate(bw, sn.tx_power, channel_gain(channel.gain_ref, d), channel.noise_power);
    // Strict comparison keeps the lowest id on ties since mobiles are scanned in id order.
    if (!best || rate > best->rate) best = OffloadDecision{sn.id, DestinationKind::Mobile, mn.id, bw, rate, d};
  }
  if (best) return best;
  return select_server(sn, world, channel);
}

ComputeLatency compute_latency(const Task& task, double local_freq, double server_freq, double cycles_per_bit)
{
  if (!(local_freq > 0.0) || !(server_freq > 0.0) || !(cycles_per_bit > 0.0))
    throw DomainError("compute_latency: frequencies and cycles per bit must be > 0");
  ComputeLatency out;
  out.local = task.split * task.bits * cycles_per_bit / local_freq;
  out.remote = (1.0 - task.split) * task.bits * cycles_per_bit / server_freq;
  return out;
}

double total_latency(double tau_c, double tau_beta, bool move_indicator, double tau_a)
{
  return tau_c + tau_beta + (move_indicator ? tau_a : 0.0);
}

}  // namespace mtt
