#include "mtt/world.hpp"

#include <cmath>

namespace mtt
{

const char* to_string(NodeMode mode)
{
  switch (mode) {
    case NodeMode::Sleep: return "sleep";
    case NodeMode::Idle: return "idle";
    case NodeMode::Check: return "check";
    case NodeMode::Work: return "work";
  }
  return "sleep";
}

Mat4 NoiseSpec::covariance() const
{
  Vec4 d(pos_sigma * pos_sigma, pos_sigma * pos_sigma, vel_sigma * vel_sigma, vel_sigma * vel_sigma);
  return d.asDiagonal();
}

bool WorldState::inside(const Position& p) const
{
  return p.x() >= 0.0 && p.y() >= 0.0 && p.x() <= side && p.y() <= side;
}

bool WorldState::target_exited() const { return target_entered && !inside(target.pos); }

Mat4 constant_velocity_transition(double dt)
{
  Mat4 F = Mat4::Identity();
  F(0, 2) = dt;
  F(1, 3) = dt;
  return F;
}

WorldState init_world(const ScenarioConfig& cfg, std::uint64_t seed)
{
  validate(cfg);
  const auto& w = cfg.world;
  Rng rng(derive_seed(seed, 0));

  WorldState world;
  world.side = w.side;

  world.sensors.reserve(static_cast<std::size_t>(w.num_sensors));
  for (int i = 0; i < w.num_sensors; ++i) {
    SensorNode sn;
    sn.id = i;
    sn.pos.x() = uniform01(rng) * w.side;
    sn.pos.y() = uniform01(rng) * w.side;
    sn.battery = w.sn_battery;
    sn.sense_range = w.sense_range;
    sn.comm_range = w.comm_range;
    sn.tx_power = w.sn_tx_power;
    world.sensors.push_back(sn);
  }

  world.mobiles.reserve(static_cast<std::size_t>(w.num_mobile));
  for (int j = 0; j < w.num_mobile; ++j) {
    MobileNode mn;
    mn.id = j;
    mn.pos.x() = uniform01(rng) * w.side;
    mn.pos.y() = uniform01(rng) * w.side;
    mn.battery = w.mn_battery;
    mn.speed = w.mn_speed;
    mn.cpu_freq = w.mn_cpu_freq;
    world.mobiles.push_back(mn);
  }

  for (std::size_t s = 0; s < w.servers.size(); ++s)
    world.servers.push_back({static_cast<int>(s), w.servers[s], w.server_cpu_freq});

  if (w.target_init == TargetInit::Fixed) {
    world.target.pos = w.target_start;
    world.target.vel = w.target_speed * Vec2(std::cos(w.target_heading), std::sin(w.target_heading));
  } else {
    // Enters from the left edge at a random height, heading into the square.
    world.target.pos = Position(0.0, uniform01(rng) * w.target_init_max);
    const double speed = uniform01(rng) * w.target_max_speed;
    const double heading = (uniform01(rng) - 0.5) * 3.14159265358979323846;
    world.target.vel = speed * Vec2(std::cos(heading), std::sin(heading));
  }
  world.target_entered = well_inside(world.target.pos, w.side, w.entry_margin);
  return world;
}

TargetState step_target(const TargetState& state, const Mat4& F, const NoiseSpec& noise, Rng& rng,
                        double max_speed)
{
  Vec4 x = F * state.as_vector();
  x(0) += noise.pos_sigma * standard_normal(rng);
  x(1) += noise.pos_sigma * standard_normal(rng);
  x(2) += noise.vel_sigma * standard_normal(rng);
  x(3) += noise.vel_sigma * standard_normal(rng);
  TargetState next = TargetState::from_vector(x);
  if (max_speed > 0.0) {
    const double speed = next.vel.norm();
    if (speed > max_speed) next.vel *= max_speed / speed;
  }
  return next;
}

double amplitude(double source_power, const Position& sensor, const Position& target)
{
  const double d2 = (sensor - target).squaredNorm();
  return std::sqrt(source_power / (1.0 + d2));
}

std::optional<double> measure(const SensorNode& sensor, const Position& target_pos, double source_power,
                              double sigma, Rng& rng)
{
  if (!sensor.alive() || sensor.mode == NodeMode::Sleep) return std::nullopt;
  if (distance(sensor.pos, target_pos) > sensor.sense_range) return std::nullopt;
  return amplitude(source_power, sensor.pos, target_pos) + sigma * standard_normal(rng);
}

}  // namespace mtt
