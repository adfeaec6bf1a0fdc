#include "doctest.h"

#include "mtt/env.hpp"

#include <set>

using namespace mtt;

namespace
{

ScenarioConfig small()
{
  ScenarioConfig cfg;
  cfg.world.horizon = 60;
  return cfg;
}

}  // namespace

TEST_CASE("action enumeration")
{
  CHECK(ActionSpace(3, 1, 4096).size() == 8);
  CHECK(ActionSpace(3, 0, 4096).size() == 2);
  CHECK(ActionSpace(6, 4, 4096).size() == 2 * 57);

  const ActionSpace space(5, 2, 4096);
  std::set<std::pair<int, std::vector<int>>> seen;
  for (int i = 0; i < space.size(); ++i) {
    const Action a = space.decode(i);
    CHECK(static_cast<int>(a.activate.size()) <= 2);
    CHECK(space.encode(a.offload, a.activate) == i);
    seen.insert({static_cast<int>(a.offload), a.activate});
  }
  CHECK(static_cast<int>(seen.size()) == space.size());
  CHECK_THROWS_AS(space.decode(space.size()), DomainError);
  CHECK_THROWS_AS(space.decode(-1), DomainError);

  ScenarioConfig cfg;
  cfg.env.candidates = 20;
  cfg.env.activation_budget = 10;
  CHECK_THROWS_AS(action_space(cfg), ConfigError);
}

TEST_CASE("observation shape and range")
{
  TrackingEnv env(small());
  const Observation o = env.reset(3);
  CHECK(env.observation_dim() == 6 + 9 * 6 + 10 * 6);
  CHECK(o.size() == env.observation_dim());
  CHECK(env.action_count() == 114);

  Rng rng(1);
  int ticks = 0;
  for (int ep = 0; ep < 5; ++ep) {
    env.reset(100 + ep);
    bool done = false;
    while (!done) {
      const int before = env.action_count();
      auto step = env.step(static_cast<int>(uniform_index(rng, static_cast<std::size_t>(env.action_count()))));
      CHECK(env.action_count() == before);
      REQUIRE(step.obs.size() == env.observation_dim());
      CHECK(step.obs.minCoeff() >= 0.0);
      CHECK(step.obs.maxCoeff() <= 1.0);
      done = step.done;
      ++ticks;
    }
  }
  CHECK(ticks > 0);
}

TEST_CASE("reset is deterministic and refills batteries")
{
  TrackingEnv env(small());
  const Observation a = env.reset(3);
  const double full = env.battery_total();
  for (int i = 0; i < 20; ++i) env.step(env.action_count() - 1);
  CHECK(env.battery_total() < full);
  const Observation b = env.reset(3);
  CHECK(a == b);
  CHECK(env.battery_total() == full);
}

TEST_CASE("same seed, same trajectory")
{
  TrackingEnv x(small()), y(small());
  x.reset(9);
  y.reset(9);
  for (int i = 0; i < 30 && !x.done(); ++i) {
    const auto sx = x.step(i % x.action_count());
    const auto sy = y.step(i % y.action_count());
    CHECK(sx.reward == sy.reward);
    CHECK(sx.obs == sy.obs);
  }
}

TEST_CASE("invalid actions are rejected")
{
  TrackingEnv env(small());
  env.reset(1);
  CHECK_THROWS_AS(env.step(env.action_count()), DomainError);
  CHECK_THROWS_AS(env.step(Action{OffloadChoice::Mobile, {0, 0}, std::nullopt}), DomainError);
  CHECK_THROWS_AS(env.step(Action{OffloadChoice::Mobile, {0, 1, 2, 3, 4}, std::nullopt}), DomainError);
  CHECK_THROWS_AS(env.step(Action{OffloadChoice::Mobile, {9}, std::nullopt}), DomainError);
}

TEST_CASE("no activation")
{
  TrackingEnv env(small());
  env.reset(2);
  const auto info = env.step(Action{OffloadChoice::Server, {}, std::nullopt});
  CHECK(info.activated == 0);
  CHECK(info.accepted == 0);
  CHECK(info.terms.a == 1.0);
  CHECK(info.c3);
  CHECK(info.terms.q == 1.0);
}

TEST_CASE("single energy term")
{
  auto cfg = small();
  cfg.env.k1 = 1.0;
  cfg.env.k2 = 0.0;
  cfg.env.k3 = 0.0;
  TrackingEnv env(cfg);
  env.reset(2);
  const auto info = env.step(Action{OffloadChoice::Server, {}, std::nullopt});
  CHECK(info.reward == -info.terms.e);
  CHECK(info.terms.e >= 0.0);
  CHECK(info.terms.e <= 1.0);
}

TEST_CASE("zero deadline violates the latency constraint")
{
  auto cfg = small();
  cfg.radio.deadline = 1e-12;
  TrackingEnv env(cfg);
  env.reset(5);
  int tasks = 0;
  for (int i = 0; i < 40 && !env.done(); ++i) {
    const auto info = env.step(Action{OffloadChoice::Mobile, {0, 1, 2}, std::nullopt});
    if (info.tasks > 0) {
      ++tasks;
      CHECK(info.c1);
      CHECK(info.terms.q == 1.0);
    }
  }
  CHECK(tasks > 0);
}

TEST_CASE("ledger matches the battery drop")
{
  auto cfg = small();
  cfg.world.horizon = 200;
  TrackingEnv env(cfg);
  env.keep_energy_log = true;
  env.reset(4);
  double stepped = 0.0;
  double logged = 0.0;
  Rng rng(2);
  while (!env.done()) {
    const auto info = env.step(env.actions().decode(static_cast<int>(uniform_index(rng, 114))));
    stepped += info.energy;
    for (const auto& rec : info.energy_log) logged += rec.joules;
  }
  const double drop = env.initial_battery_total() - env.battery_total();
  CHECK(env.ledger().total() == doctest::Approx(drop).epsilon(1e-9));
  CHECK(stepped == doctest::Approx(drop).epsilon(1e-9));
  CHECK(logged == doctest::Approx(drop).epsilon(1e-9));
}

TEST_CASE("stepping a finished episode")
{
  auto cfg = small();
  cfg.world.horizon = 3;
  TrackingEnv env(cfg);
  env.reset(0);
  for (int i = 0; i < 3; ++i) env.step(0);
  CHECK(env.done());
  CHECK_THROWS_AS(env.step(0), DomainError);
}

TEST_CASE("candidates are alive sensors")
{
  TrackingEnv env(small());
  env.reset(6);
  for (int i = 0; i < 20 && !env.done(); ++i) {
    CHECK(static_cast<int>(env.candidates().size()) <= env.config().env.candidates);
    for (int id : env.candidates()) CHECK(env.world().sensors[static_cast<std::size_t>(id)].alive());
    env.step(i % env.action_count());
  }
}
