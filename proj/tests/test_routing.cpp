//
// Copyright 2026 the qedge authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <map>

#include "qedge/routing.hpp"

using namespace qedge;

namespace {

const ServiceSpec kDps{ServiceName{"dps"}, {80.0}};

InstanceId dps(int ordinal) {
  return InstanceId{ServiceName{"dps"}, ordinal,
                    NodeId{"worker-" + std::to_string(ordinal)}};
}

ClusterSnapshot snapshot_of(const std::vector<InstanceId>& instances) {
  ClusterSnapshot snap;
  snap.services.try_emplace(ServiceName{"dps"});
  for (const auto& id : instances) {
    snap.services[id.service].insert(id);
    snap.nodes.insert(id.node);
  }
  return snap;
}

QoSPool pool_with_members(const std::vector<std::pair<int, Millis>>& entries) {
  std::vector<InstanceId> instances;
  std::map<InstanceId, Millis> estimates;
  for (const auto& [ordinal, estimate] : entries) {
    instances.push_back(dps(ordinal));
    estimates[dps(ordinal)] = estimate;
  }
  return create_pool(kDps, snapshot_of(instances), estimates, 0);
}

std::vector<InstanceId> ordinals(const std::vector<int>& os) {
  std::vector<InstanceId> out;
  for (int o : os) out.push_back(dps(o));
  return out;
}

}  // namespace

TEST_CASE("qedge_select rotates cyclically through the members") {
  // Estimates 4/6/42 order the pool as [dps-3, dps-4, dps-1].
  auto pool = pool_with_members({{1, 42}, {3, 4}, {4, 6}});
  REQUIRE(pool.members == ordinals({3, 4, 1}));
  std::vector<InstanceId> picks;
  for (int i = 0; i < 6; ++i) {
    auto res = qedge_select(pool, i);
    REQUIRE(res.ok());
    picks.push_back(res.decision->instance);
  }
  CHECK(picks == ordinals({3, 4, 1, 3, 4, 1}));
}

TEST_CASE("qedge_select handles singleton pools and cursor wrap") {
  auto singleton = pool_with_members({{1, 10}});
  for (int i = 0; i < 3; ++i) {
    CHECK(qedge_select(singleton, 0).decision->instance == dps(1));
  }

  auto pool = pool_with_members({{1, 42}, {3, 4}, {4, 6}});
  pool.rr_cursor = 2;
  auto res = qedge_select(pool, 0);
  CHECK(res.decision->instance == dps(1));
  CHECK(pool.rr_cursor == 0);
}

TEST_CASE("qedge_select balances a stable pool to within one request") {
  auto pool = pool_with_members({{1, 42}, {3, 4}, {4, 6}});
  std::map<InstanceId, int> counts;
  for (int i = 0; i < 3750; ++i) {
    ++counts[qedge_select(pool, i).decision->instance];
  }
  REQUIRE(counts.size() == 3);
  int lo = 3750, hi = 0;
  for (const auto& [id, c] : counts) {
    lo = std::min(lo, c);
    hi = std::max(hi, c);
  }
  CHECK(hi - lo <= 1);
}

TEST_CASE("qedge_select reports an empty pool") {
  auto pool = pool_with_members({});
  const auto res = qedge_select(pool, 0);
  CHECK_FALSE(res.ok());
  CHECK(res.error == RouteError::no_eligible_instance);
}

TEST_CASE("nodeport_select wraps over the live set in ordinal order") {
  const auto instances = ordinals({1, 2, 3, 4, 5, 6, 7});
  std::size_t cursor = 0;
  std::vector<InstanceId> picks;
  for (int i = 0; i < 8; ++i) {
    picks.push_back(nodeport_select(instances, cursor, i).decision->instance);
  }
  CHECK(picks[0] == dps(1));
  CHECK(picks[6] == dps(7));
  CHECK(picks[7] == dps(1));  // call #8 wraps

  std::map<InstanceId, int> counts;
  cursor = 0;
  for (int i = 0; i < 4000; ++i) {
    ++counts[nodeport_select(instances, cursor, i).decision->instance];
  }
  for (const auto& [id, c] : counts) {
    CHECK(std::abs(c - 4000.0 / 7.0) <= 1.0);
  }

  const auto six = ordinals({1, 2, 4, 5, 6, 7});
  cursor = 0;
  counts.clear();
  for (int i = 0; i < 3000; ++i) {
    ++counts[nodeport_select(six, cursor, i).decision->instance];
  }
  for (const auto& [id, c] : counts) CHECK(c == 500);
}

TEST_CASE("nodeport_select rejects an empty set") {
  std::size_t cursor = 0;
  CHECK(nodeport_select({}, cursor, 0).error == RouteError::no_instance);
}

TEST_CASE("proximity_select at alpha=0 is empirically uniform") {
  const auto instances = ordinals({1, 2, 3, 4, 5, 6, 7});
  LatencyTable table;
  for (int i = 1; i <= 7; ++i) table.rtt[dps(i)] = 10.0 * i;
  std::mt19937_64 rng(1);
  std::map<InstanceId, int> counts;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    ++counts[proximity_select(instances, table, 0.0, rng, i)
                 .decision->instance];
  }
  // Chi-square sanity bound, 6 degrees of freedom at p=0.001.
  const double expected = draws / 7.0;
  double chi2 = 0;
  for (const auto& [id, c] : counts) {
    chi2 += (c - expected) * (c - expected) / expected;
  }
  CHECK(chi2 < 22.46);
  for (const auto& [id, c] : counts) {
    CHECK(std::abs(static_cast<double>(c) / draws - 1.0 / 7.0) < 0.03);
  }
}

TEST_CASE("proximity_select at alpha=1 always picks the argmin") {
  const auto instances = ordinals({1, 2, 3, 4, 5, 6, 7});
  LatencyTable table;
  for (int i = 1; i <= 7; ++i) table.rtt[dps(i)] = 10.0 * i;
  table.rtt[dps(3)] = 0.0;
  std::mt19937_64 rng(99);
  for (int i = 0; i < 1000; ++i) {
    CHECK(proximity_select(instances, table, 1.0, rng, i).decision->instance ==
          dps(3));
  }
}

TEST_CASE("proximity_select blends per w_i = (1-a)/N + a*[argmin]") {
  const auto instances = ordinals({1, 2, 3, 4, 5, 6, 7});
  LatencyTable table;
  for (int i = 1; i <= 7; ++i) table.rtt[dps(i)] = 10.0 * i;
  table.rtt[dps(3)] = 0.0;
  std::mt19937_64 rng(7);
  const int draws = 100000;
  int to_closest = 0;
  for (int i = 0; i < draws; ++i) {
    if (proximity_select(instances, table, 0.8, rng, i).decision->instance ==
        dps(3)) {
      ++to_closest;
    }
  }
  // 0.8 + 0.2/7 = 0.82857...
  CHECK(static_cast<double>(to_closest) / draws ==
        doctest::Approx(0.82857).epsilon(0.01));
}

TEST_CASE("proximity_select argmin ties break to the lowest ordinal") {
  const auto instances = ordinals({3, 4});
  LatencyTable table;
  table.rtt[dps(3)] = 0.0;
  table.rtt[dps(4)] = 0.0;
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    CHECK(proximity_select(instances, table, 1.0, rng, i).decision->instance ==
          dps(3));
  }
}

TEST_CASE("an all-failed table degenerates to the lowest ordinal argmin") {
  const auto instances = ordinals({2, 5, 6});
  const LatencyTable table = refresh_latencies(
      {}, [](const InstanceId&) { return std::nullopt; }, instances, 9);
  for (const auto& [id, rtt] : table.rtt) CHECK(std::isinf(rtt));
  CHECK(table.probed_at == 9);
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    CHECK(proximity_select(instances, table, 1.0, rng, i).decision->instance ==
          dps(2));
  }
}

TEST_CASE("proximity_select rejects an empty set") {
  std::mt19937_64 rng(1);
  CHECK(proximity_select({}, {}, 0.5, rng, 0).error == RouteError::no_instance);
}

TEST_CASE("refresh_latencies replaces every entry from the probe") {
  const auto instances = ordinals({1, 2});
  std::map<InstanceId, Millis> world{{dps(1), 40}, {dps(2), 80}};
  auto probe = [&world](const InstanceId& id) {
    return std::optional<Millis>(world.at(id));
  };
  LatencyTable table = refresh_latencies({}, probe, instances, 0);
  CHECK(table.rtt.at(dps(1)) == 40);

  // The world degrades; the table stays stale until the next refresh.
  world[dps(1)] = 240;
  CHECK(table.rtt.at(dps(1)) == 40);
  table = refresh_latencies(table, probe, instances, 100);
  CHECK(table.rtt.at(dps(1)) == 240);
  CHECK(table.probed_at == 100);
}

TEST_CASE("proximity decision streams are seed-deterministic") {
  const auto snap = snapshot_of(ordinals({1, 2, 3, 4, 5}));
  auto probe = [](const InstanceId& id) {
    return std::optional<Millis>(10.0 * id.ordinal);
  };
  ProximityRouter::Options opts;
  opts.alpha = 0.5;
  opts.seed = 77;
  ProximityRouter a(snap, probe, opts);
  ProximityRouter b(snap, probe, opts);
  for (std::size_t i = 0; i < 2000; ++i) {
    a.before_request(i, 0);
    b.before_request(i, 0);
    const auto ra = a.route(ServiceName{"dps"}, 0);
    const auto rb = b.route(ServiceName{"dps"}, 0);
    REQUIRE(ra.ok());
    CHECK(ra.decision->instance == rb.decision->instance);
  }
}

TEST_CASE("QedgeRouter routes per pool state and reports errors") {
  const auto snap = snapshot_of(ordinals({1, 2}));
  auto estimate = [](const InstanceId& id) -> Millis {
    return id.ordinal == 1 ? 40.0 : 200.0;
  };
  QedgeRouter router({kDps}, snap, estimate, 0);

  CHECK(router.route(ServiceName{"nope"}, 0).error ==
        RouteError::unknown_service);
  auto res = router.route(ServiceName{"dps"}, 0);
  REQUIRE(res.ok());
  CHECK(res.decision->instance == dps(1));

  // A violating measurement drains the pool.
  router.on_measurement({dps(1), 150, 1, MeasurementOutcome::success});
  CHECK(router.route(ServiceName{"dps"}, 2).error ==
        RouteError::no_eligible_instance);
}

TEST_CASE("QedgeRouter fallback serves the best estimate from an empty pool") {
  const auto snap = snapshot_of(ordinals({1, 2}));
  auto estimate = [](const InstanceId& id) -> Millis {
    return id.ordinal == 1 ? 90.0 : 200.0;  // nothing passes the SLO
  };
  QedgeRouter::Options opts;
  opts.fallback_on_empty = true;
  QedgeRouter router({kDps}, snap, estimate, 0, opts);
  auto res = router.route(ServiceName{"dps"}, 0);
  REQUIRE(res.ok());
  CHECK(res.decision->instance == dps(1));
}

TEST_CASE("QedgeRouter randomized rotation stays inside the pool") {
  const auto snap = snapshot_of(ordinals({1, 3, 4}));
  auto estimate = [](const InstanceId&) -> Millis { return 10.0; };
  QedgeRouter::Options opts;
  opts.randomized_rotation = true;
  opts.seed = 5;
  QedgeRouter a({kDps}, snap, estimate, 0, opts);
  QedgeRouter b({kDps}, snap, estimate, 0, opts);
  std::map<InstanceId, int> counts;
  for (int i = 0; i < 3000; ++i) {
    const auto ra = a.route(ServiceName{"dps"}, i);
    const auto rb = b.route(ServiceName{"dps"}, i);
    REQUIRE(ra.ok());
    CHECK(ra.decision->instance == rb.decision->instance);
    ++counts[ra.decision->instance];
  }
  CHECK(counts.size() == 3);
  for (const auto& [id, c] : counts) CHECK(c > 800);
}

TEST_CASE("QedgeRouter opt-in probing re-admits recovered instances") {
  const auto snap = snapshot_of(ordinals({1}));
  Millis world_rtt = 40.0;
  auto estimate = [&world_rtt](const InstanceId&) { return world_rtt; };
  QedgeRouter::Options opts;
  opts.probe_period = 10;
  QedgeRouter router({kDps}, snap, estimate, 0, opts);

  router.on_measurement({dps(1), 150, 1, MeasurementOutcome::success});
  CHECK(router.route(ServiceName{"dps"}, 2).error ==
        RouteError::no_eligible_instance);

  world_rtt = 30.0;  // instance recovered
  router.before_request(9, 9);
  CHECK_FALSE(router.route(ServiceName{"dps"}, 9).ok());  // probe not due yet
  router.before_request(10, 10);
  CHECK(router.route(ServiceName{"dps"}, 10).decision->instance == dps(1));
}

TEST_CASE("NodePortRouter tracks cluster events") {
  NodePortRouter router(snapshot_of(ordinals({1, 2, 3})));
  const ServiceName svc{"dps"};
  CHECK(router.route(svc, 0).decision->instance == dps(1));
  CHECK(router.route(svc, 0).decision->instance == dps(2));
  router.on_cluster_event({ClusterEventKind::instance_removed, dps(3), 0});
  CHECK(router.route(svc, 0).decision->instance == dps(1));
  router.on_cluster_event({ClusterEventKind::instance_added, dps(3), 0});
  CHECK(router.live(svc)->size() == 3);
}

TEST_CASE("router kinds carry stable labels") {
  CHECK(RouterKind::qedge().label() == "qedge");
  CHECK(RouterKind::nodeport().label() == "nodeport");
  CHECK(RouterKind::proximity(0.8).label() == "proximity-0.8");
  CHECK(RouterKind::proximity(1.0).label() == "proximity-1.0");
  CHECK_THROWS_AS(RouterKind::proximity(1.5), std::invalid_argument);
}
