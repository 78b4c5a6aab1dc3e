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

#include <random>

#include "qedge/core.hpp"

using namespace qedge;

namespace {

InstanceId dps(int ordinal, const std::string& node) {
  return InstanceId{ServiceName{"dps"}, ordinal, NodeId{node}};
}

ClusterSnapshot snapshot_of(const std::vector<InstanceId>& instances) {
  ClusterSnapshot snap;
  for (const auto& id : instances) {
    snap.services[id.service].insert(id);
    snap.nodes.insert(id.node);
  }
  return snap;
}

}  // namespace

TEST_CASE("meets_requirement is a strict comparison against the SLO") {
  const QoSRequirement slo{80.0};
  CHECK(meets_requirement(79.9, slo));
  CHECK_FALSE(meets_requirement(80.0, slo));  // ties fail
  CHECK_FALSE(meets_requirement(142.0, slo));
  CHECK(meets_requirement(0.0, slo));
}

TEST_CASE("meets_requirement is monotone in the response time") {
  std::mt19937_64 rng(7);
  const QoSRequirement slo{80.0};
  for (int i = 0; i < 1000; ++i) {
    const double t = static_cast<double>(rng() % 2000) / 10.0;
    if (meets_requirement(t, slo)) {
      const double faster = t * 0.5;
      CHECK(meets_requirement(faster, slo));
    }
  }
}

TEST_CASE("apply_cluster_event adds and removes instances") {
  auto snap = snapshot_of({dps(1, "worker-1"), dps(2, "worker-2"),
                           dps(4, "worker-4"), dps(5, "worker-5"),
                           dps(6, "worker-6"), dps(7, "master")});
  REQUIRE(snap.instance_count(ServiceName{"dps"}) == 6);

  const auto added = apply_cluster_event(
      snap, {ClusterEventKind::instance_added, dps(3, "worker-3"), 10});
  CHECK_FALSE(added.warning.has_value());
  CHECK(added.snapshot.instance_count(ServiceName{"dps"}) == 7);
  CHECK(added.snapshot.contains(dps(3, "worker-3")));
  CHECK(added.snapshot.nodes.count(NodeId{"worker-3"}) == 1);

  const auto removed = apply_cluster_event(
      added.snapshot,
      {ClusterEventKind::instance_removed, dps(3, "worker-3"), 20});
  CHECK_FALSE(removed.warning.has_value());
  CHECK(removed.snapshot.instance_count(ServiceName{"dps"}) == 6);
  CHECK_FALSE(removed.snapshot.contains(dps(3, "worker-3")));
}

TEST_CASE("removing an unknown instance warns and leaves the snapshot alone") {
  const auto snap = snapshot_of({dps(1, "worker-1")});
  const auto update = apply_cluster_event(
      snap, {ClusterEventKind::instance_removed, dps(9, "worker-9"), 0});
  REQUIRE(update.warning.has_value());
  CHECK(update.warning->find("dps-9") != std::string::npos);
  CHECK(update.snapshot == snap);
}

TEST_CASE("event replay is deterministic") {
  std::mt19937_64 rng(42);
  for (int round = 0; round < 50; ++round) {
    std::vector<ClusterEvent> events;
    for (int i = 0; i < 40; ++i) {
      const int ordinal = static_cast<int>(rng() % 8) + 1;
      const auto kind = rng() % 2 == 0 ? ClusterEventKind::instance_added
                                       : ClusterEventKind::instance_removed;
      events.push_back(
          {kind, dps(ordinal, "worker-" + std::to_string(ordinal)), i});
    }
    ClusterSnapshot a;
    ClusterSnapshot b;
    for (const auto& ev : events) {
      a = apply_cluster_event(std::move(a), ev).snapshot;
      b = apply_cluster_event(std::move(b), ev).snapshot;
    }
    CHECK(a == b);
  }
}

TEST_CASE("instance labels combine service and ordinal") {
  CHECK(dps(3, "worker-3").label() == "dps-3");
  CHECK(InstanceId{ServiceName{"svc"}, 12, NodeId{"n"}}.label() == "svc-12");
}

TEST_CASE("instances order by service then ordinal") {
  CHECK(dps(1, "worker-1") < dps(2, "worker-2"));
  CHECK(InstanceId{ServiceName{"a"}, 9, {}} < InstanceId{ServiceName{"b"}, 1, {}});
}
