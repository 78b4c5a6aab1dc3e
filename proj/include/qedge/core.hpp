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

#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>

namespace qedge {

/// Virtual time: integer tick count with millisecond resolution.
using Tick = std::int64_t;

/// Durations and latencies, in milliseconds.
using Millis = double;

struct NodeId {
  std::string name;
  auto operator<=>(const NodeId&) const = default;
};

struct ServiceName {
  std::string name;
  auto operator<=>(const ServiceName&) const = default;
};

/// One replica of a service, pinned to a node. Ordinals are unique within a
/// service, so (service, ordinal) identifies the instance; comparisons order
/// by service, then ordinal.
struct InstanceId {
  ServiceName service;
  int ordinal = 0;
  NodeId node;

  /// Short display form, e.g. "dps-3".
  std::string label() const;

  auto operator<=>(const InstanceId&) const = default;
};

/// Response-time SLO. A measurement passes iff it is strictly below the
/// bound; ties fail.
struct QoSRequirement {
  Millis max_response_time = 0;

  bool operator==(const QoSRequirement&) const = default;
};

struct ServiceSpec {
  ServiceName name;
  QoSRequirement requirement;

  bool operator==(const ServiceSpec&) const = default;
};

enum class MeasurementOutcome { success, transport_error };

/// One observed request outcome. response_time is meaningful only when
/// outcome == success; transport errors carry no usable latency sample.
struct Measurement {
  InstanceId instance;
  Millis response_time = 0;
  Tick at = 0;
  MeasurementOutcome outcome = MeasurementOutcome::success;
};

enum class ClusterEventKind { instance_added, instance_removed };

struct ClusterEvent {
  ClusterEventKind kind = ClusterEventKind::instance_added;
  InstanceId instance;
  Tick at = 0;
};

/// The proxy's view of services, instances and nodes, built by replaying
/// orchestrator events in order. A service key may map to an empty set.
struct ClusterSnapshot {
  std::map<ServiceName, std::set<InstanceId>> services;
  std::set<NodeId> nodes;

  const std::set<InstanceId>* instances_of(const ServiceName& service) const;
  bool contains(const InstanceId& id) const;
  std::size_t instance_count(const ServiceName& service) const;

  bool operator==(const ClusterSnapshot&) const = default;
};

/// True iff response_time meets the SLO (strict inequality).
bool meets_requirement(Millis response_time, const QoSRequirement& req);

struct SnapshotUpdate {
  ClusterSnapshot snapshot;
  /// Set when the event could not be applied and was dropped as a no-op
  /// (removal of an unknown instance).
  std::optional<std::string> warning;
};

/// Applies one orchestrator event. Additions insert the instance and its
/// node; removals delete the instance. Removing an unknown instance leaves
/// the snapshot untouched and reports a warning instead of failing.
SnapshotUpdate apply_cluster_event(ClusterSnapshot snapshot,
                                   const ClusterEvent& ev);

}  // namespace qedge
