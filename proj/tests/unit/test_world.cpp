#include "doctest.h"

#include "mtt/world.hpp"

#include <cmath>

using namespace mtt;

TEST_CASE("default scenario layout")
{
  ScenarioConfig cfg;
  const auto w = init_world(cfg, 7);
  CHECK(w.sensors.size() == 56);
  CHECK(w.mobiles.size() == 6);
  CHECK(w.side == 200.0);
  CHECK(w.target.pos.x() == 0.0);
  CHECK(w.target.pos.y() == 50.0);
  CHECK_FALSE(w.target_entered);
  for (const auto& sn : w.sensors) {
    CHECK(w.inside(sn.pos));
    CHECK(sn.battery == cfg.world.sn_battery);
    CHECK(sn.mode == NodeMode::Sleep);
  }
  for (const auto& mn : w.mobiles) CHECK(w.inside(mn.pos));
}

TEST_CASE("single sensor in a unit square")
{
  ScenarioConfig cfg;
  cfg.world.side = 1.0;
  cfg.world.num_sensors = 1;
  cfg.world.num_mobile = 0;
  cfg.world.servers = {Position(0.5, 1.0)};
  cfg.world.target_start = Position(0.0, 0.5);
  cfg.world.entry_margin = 0.1;
  const auto w = init_world(cfg, 0);
  REQUIRE(w.sensors.size() == 1);
  CHECK(w.mobiles.empty());
  CHECK(w.inside(w.sensors[0].pos));
}

TEST_CASE("layouts depend only on the seed")
{
  ScenarioConfig cfg;
  const auto a = init_world(cfg, 1);
  const auto b = init_world(cfg, 1);
  const auto c = init_world(cfg, 2);
  bool differs = false;
  for (std::size_t i = 0; i < a.sensors.size(); ++i) {
    CHECK(a.sensors[i].pos == b.sensors[i].pos);
    differs = differs || a.sensors[i].pos != c.sensors[i].pos;
  }
  CHECK(differs);
}

TEST_CASE("ranged init enters from the left edge")
{
  ScenarioConfig cfg;
  cfg.world.target_init = TargetInit::Ranged;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto w = init_world(cfg, s);
    CHECK(w.target.pos.x() == 0.0);
    CHECK(w.target.pos.y() >= 0.0);
    CHECK(w.target.pos.y() < cfg.world.target_init_max);
    CHECK(w.target.vel.x() >= 0.0);
    CHECK(w.target.vel.norm() <= cfg.world.target_max_speed);
  }
}

TEST_CASE("target kinematics")
{
  Rng rng(3);
  TargetState s{Position(0, 0), Vec2(1, 0)};

  SUBCASE("identity without noise")
  {
    const auto next = step_target(s, Mat4::Identity(), NoiseSpec{}, rng);
    CHECK(next.as_vector() == s.as_vector());
  }
  SUBCASE("constant velocity over one second")
  {
    const auto next = step_target(s, constant_velocity_transition(1.0), NoiseSpec{}, rng);
    CHECK(next.pos.x() == doctest::Approx(1.0));
    CHECK(next.pos.y() == doctest::Approx(0.0));
    CHECK(next.vel == s.vel);
  }
  SUBCASE("speed clip")
  {
    TargetState fast{Position(0, 0), Vec2(3, 4)};
    const auto next = step_target(fast, Mat4::Identity(), NoiseSpec{}, rng, 1.0);
    CHECK(next.vel.norm() == doctest::Approx(1.0));
    CHECK(next.vel.x() == doctest::Approx(0.6));
  }
}

TEST_CASE("process noise is zero mean")
{
  Rng rng(11);
  const int n = 100000;
  const TargetState zero;
  Vec4 sum = Vec4::Zero();
  for (int i = 0; i < n; ++i) sum += step_target(zero, Mat4::Identity(), NoiseSpec{1.0, 1.0}, rng).as_vector();
  const Vec4 mean = sum / n;
  const double bound = 3.0 / std::sqrt(static_cast<double>(n));
  for (int k = 0; k < 4; ++k) CHECK(std::abs(mean(k)) < bound);
}

TEST_CASE("noise covariance")
{
  const Mat4 Q = NoiseSpec{2.0, 0.5}.covariance();
  CHECK(Q(0, 0) == 4.0);
  CHECK(Q(1, 1) == 4.0);
  CHECK(Q(2, 2) == 0.25);
  CHECK(Q(3, 3) == 0.25);
  CHECK(Q(0, 1) == 0.0);
}

TEST_CASE("received amplitude")
{
  CHECK(amplitude(4.0, Position(0, 0), Position(0, 0)) == doctest::Approx(2.0));
  CHECK(amplitude(4.0, Position(0, 0), Position(1, 0)) == doctest::Approx(std::sqrt(2.0)));

  SensorNode sn;
  sn.pos = Position(0, 0);
  sn.battery = 1.0;
  sn.sense_range = 30.0;
  sn.mode = NodeMode::Idle;
  Rng rng(1);
  auto z = measure(sn, Position(1, 0), 4.0, 0.0, rng);
  REQUIRE(z);
  CHECK(*z == doctest::Approx(std::sqrt(2.0)));
  CHECK_FALSE(measure(sn, Position(31, 0), 4.0, 0.0, rng));

  sn.mode = NodeMode::Sleep;
  CHECK_FALSE(measure(sn, Position(1, 0), 4.0, 0.0, rng));
  sn.mode = NodeMode::Idle;
  sn.battery = 0.0;
  CHECK_FALSE(measure(sn, Position(1, 0), 4.0, 0.0, rng));
}

TEST_CASE("distance")
{
  CHECK(distance(Position(0, 0), Position(3, 4)) == 5.0);
  CHECK(distance(Position(2, 7), Position(2, 7)) == 0.0);
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    const Position p(uniform01(rng) * 100, uniform01(rng) * 100);
    const Position q(uniform01(rng) * 100, uniform01(rng) * 100);
    CHECK(distance(p, q) == distance(q, p));
  }
}

TEST_CASE("exit needs an earlier entry")
{
  WorldState w;
  w.side = 200.0;
  w.target.pos = Position(-1, 50);
  CHECK_FALSE(w.target_exited());
  w.target_entered = true;
  CHECK(w.target_exited());
  w.target.pos = Position(100, 100);
  CHECK_FALSE(w.target_exited());
  CHECK(well_inside(Position(6, 6), 200, 5));
  CHECK_FALSE(well_inside(Position(4, 100), 200, 5));
}

TEST_CASE("seed streams")
{
  CHECK(derive_seed(1, 0) != derive_seed(1, 1));
  CHECK(derive_seed(1, 0) != derive_seed(2, 0));
  CHECK(derive_seed(9, 4) == derive_seed(9, 4));
  Rng rng(42);
  for (int i = 0; i < 1000; ++i) {
    const double u = uniform01(rng);
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}
