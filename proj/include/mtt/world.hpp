#pragma once

#include "mtt/config.hpp"
#include "mtt/types.hpp"

#include <optional>
#include <vector>

namespace mtt
{

/// Exclusive operating state of a node.
enum class NodeMode { Sleep, Idle, Check, Work };

const char* to_string(NodeMode mode);

struct TargetState
{
  Position pos = Position::Zero();
  Vec2 vel = Vec2::Zero();

  Vec4 as_vector() const { return Vec4(pos.x(), pos.y(), vel.x(), vel.y()); }
  static TargetState from_vector(const Vec4& x) { return {x.head<2>(), x.tail<2>()}; }
};

struct SensorNode
{
  int id = 0;
  Position pos = Position::Zero();
  double battery = 0.0;
  NodeMode mode = NodeMode::Sleep;
  double sense_range = 0.0;
  double comm_range = 0.0;
  double tx_power = 0.0;

  bool alive() const { return battery > 0.0; }
};

struct MobileNode
{
  int id = 0;
  Position pos = Position::Zero();
  double battery = 0.0;
  NodeMode mode = NodeMode::Sleep;
  double speed = 0.0;
  double cpu_freq = 0.0;

  bool alive() const { return battery > 0.0; }
};

struct EdgeServer
{
  int id = 0;
  Position pos = Position::Zero();
  double cpu_freq = 0.0;
};

/// Per-axis standard deviations of the additive target process noise.
struct NoiseSpec
{
  double pos_sigma = 0.0;
  double vel_sigma = 0.0;

  Mat4 covariance() const;
};

struct WorldState
{
  double side = 0.0;
  std::vector<SensorNode> sensors;
  std::vector<MobileNode> mobiles;
  std::vector<EdgeServer> servers;
  TargetState target;
  int tick = 0;
  bool target_entered = false;

  /// True when the target has been well inside the square and has since left.
  bool target_exited() const;
  bool inside(const Position& p) const;
};

inline double distance(const Position& a, const Position& b) { return (a - b).norm(); }

/// At least `margin` away from every edge of the square [0, side]^2.
inline bool well_inside(const Position& p, double side, double margin)
{
  return p.x() > margin && p.y() > margin && p.x() < side - margin && p.y() < side - margin;
}

/// Constant-velocity transition over (x, y, vx, vy) for one tick of length dt.
Mat4 constant_velocity_transition(double dt);

WorldState init_world(const ScenarioConfig& cfg, std::uint64_t seed);

/// F * x + w with w ~ N(0, diag(noise)); velocity is clipped to max_speed when
/// max_speed > 0.
TargetState step_target(const TargetState& state, const Mat4& F, const NoiseSpec& noise, Rng& rng,
                        double max_speed = 0.0);

/// Noise-free received amplitude sqrt(P / (1 + d^2)).
double amplitude(double source_power, const Position& sensor, const Position& target);

/// Received amplitude with additive N(0, sigma^2) noise, or nothing when the
/// target lies outside the sensor's range or the sensor is unable to sense.
std::optional<double> measure(const SensorNode& sensor, const Position& target_pos, double source_power,
                              double sigma, Rng& rng);

}  // namespace mtt
