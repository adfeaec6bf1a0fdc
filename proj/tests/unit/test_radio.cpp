#include "doctest.h"

#include "mtt/radio.hpp"

#include <cmath>

using namespace mtt;

TEST_CASE("Shannon rate")
{
  CHECK(transmission_rate(1.0, 1.0, 1.0, 1.0) == doctest::Approx(1.0));
  CHECK(transmission_rate(2.0, 3.0, 1.0, 1.0) == doctest::Approx(4.0));
  CHECK(transmission_rate(1e6, 0.5, 0.01, 1e-3) == doctest::Approx(1e6 * std::log2(6.0)));
  CHECK_THROWS_AS(transmission_rate(0.0, 1.0, 1.0, 1.0), DomainError);
  CHECK_THROWS_AS(transmission_rate(1.0, 1.0, 1.0, 0.0), DomainError);
}

TEST_CASE("transmission latency")
{
  CHECK(transmission_latency(100.0, 100.0) == doctest::Approx(1.0));
  Task t{1e4, 0.04, 1.0};
  CHECK(transmission_latency((1.0 - t.split) * t.bits, 2.585e6) == 0.0);
  CHECK(transmission_latency(1e4, 2.585e6) == doctest::Approx(3.868e-3).epsilon(1e-3));
  CHECK_THROWS_AS(transmission_latency(1.0, 0.0), DomainError);
}

TEST_CASE("task domain")
{
  const Task ok{1.0, 1.0, 0.5}, empty{0.0, 1.0, 0.5}, late{1.0, 0.0, 0.5}, split{1.0, 1.0, 1.5};
  CHECK_NOTHROW(ok.check());
  CHECK_THROWS_AS(empty.check(), DomainError);
  CHECK_THROWS_AS(late.check(), DomainError);
  CHECK_THROWS_AS(split.check(), DomainError);
}

namespace
{

WorldState layout(std::vector<Position> mobiles)
{
  WorldState w;
  w.side = 200.0;
  for (std::size_t i = 0; i < mobiles.size(); ++i) {
    MobileNode mn;
    mn.id = static_cast<int>(i);
    mn.pos = mobiles[i];
    mn.battery = 10.0;
    w.mobiles.push_back(mn);
  }
  w.servers = {{0, Position(0, 200), 4e9}, {1, Position(100, 200), 4e9}};
  return w;
}

ChannelState channel(const WorldState& w)
{
  ChannelState c;
  c.bandwidth_mobile = 2e6;
  c.bandwidth_server = 2e6;
  c.noise_power = 1e-10;
  c.server_reach = 300.0;
  c.load_mobile.assign(w.mobiles.size(), 0);
  c.load_server.assign(w.servers.size(), 0);
  return c;
}

SensorNode sensor_at(Position p)
{
  SensorNode sn;
  sn.id = 3;
  sn.pos = p;
  sn.battery = 1.0;
  sn.comm_range = 50.0;
  sn.tx_power = 0.1;
  return sn;
}

}  // namespace

TEST_CASE("offload destination")
{
  SUBCASE("single mobile in range")
  {
    auto w = layout({Position(110, 100), Position(10, 10)});
    auto d = select_offload_destination(sensor_at(Position(100, 100)), w, channel(w));
    REQUIRE(d);
    CHECK(d->kind == DestinationKind::Mobile);
    CHECK(d->dest == 0);
    CHECK(d->source == 3);
    CHECK(d->dist == doctest::Approx(10.0));
  }
  SUBCASE("no mobile in range falls back to the better server")
  {
    auto w = layout({Position(10, 10)});
    auto d = select_offload_destination(sensor_at(Position(90, 150)), w, channel(w));
    REQUIRE(d);
    CHECK(d->kind == DestinationKind::Server);
    CHECK(d->dest == 1);
  }
  SUBCASE("ties go to the lower id")
  {
    auto w = layout({Position(120, 100), Position(80, 100)});
    auto d = select_offload_destination(sensor_at(Position(100, 100)), w, channel(w));
    REQUIRE(d);
    CHECK(d->dest == 0);
  }
  SUBCASE("dead mobiles are skipped")
  {
    auto w = layout({Position(105, 100), Position(130, 100)});
    w.mobiles[0].battery = 0.0;
    auto d = select_offload_destination(sensor_at(Position(100, 100)), w, channel(w));
    REQUIRE(d);
    CHECK(d->dest == 1);
  }
  SUBCASE("bandwidth is shared by concurrent uploaders")
  {
    auto w = layout({Position(110, 100)});
    auto c = channel(w);
    c.load_mobile[0] = 4;
    auto d = select_offload_destination(sensor_at(Position(100, 100)), w, c);
    REQUIRE(d);
    CHECK(d->bandwidth == doctest::Approx(5e5));
    const double rate = transmission_rate(5e5, 0.1, channel_gain(1.0, 10.0), 1e-10);
    CHECK(d->rate == doctest::Approx(rate));
  }
  SUBCASE("orphaned sensor")
  {
    auto w = layout({Position(10, 10)});
    auto c = channel(w);
    c.server_reach = 1.0;
    CHECK_FALSE(select_offload_destination(sensor_at(Position(100, 100)), w, c));
  }
}

TEST_CASE("compute latency")
{
  const auto half = compute_latency(Task{200, 1, 0.5}, 100, 100, 1);
  CHECK(half.remote == doctest::Approx(1.0));
  CHECK(half.local == doctest::Approx(1.0));
  CHECK(compute_latency(Task{200, 1, 0.0}, 100, 100, 1).local == 0.0);
  CHECK(compute_latency(Task{200, 1, 1.0}, 100, 100, 1).remote == 0.0);
  CHECK(compute_latency(Task{200, 1, 0.25}, 100, 100, 1).combined() == doctest::Approx(1.5));
  CHECK_THROWS_AS(compute_latency(Task{200, 1, 0.5}, 0, 100, 1), DomainError);
}

TEST_CASE("total latency")
{
  CHECK(total_latency(0.1, 0.2, true, 0.3) == doctest::Approx(0.6));
  CHECK(total_latency(0.1, 0.2, false, 0.3) == doctest::Approx(0.3));
  CHECK(deadline_met(0.03, 0.04));
  CHECK_FALSE(deadline_met(0.05, 0.04));
}
