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

#include <functional>
#include <limits>
#include <map>
#include <vector>

#include "qedge/core.hpp"

namespace qedge {

enum class EstimateSource { initial_approximation, measured };

/// Current response-time prediction for one instance.
struct QoSEstimate {
  Millis predicted_response_time = 0;
  int sample_count = 0;
  Tick last_updated = 0;
  EstimateSource source = EstimateSource::initial_approximation;

  bool operator==(const QoSEstimate&) const = default;
};

struct InstanceHistory {
  InstanceId instance;
  QoSEstimate estimate;
  /// Consecutive SLO-failing samples (transport errors included); reset to
  /// zero by any passing measurement.
  int consecutive_violations = 0;

  bool operator==(const InstanceHistory&) const = default;
};

/// Estimator and ejection knobs, shared by simulation and service mode.
struct PoolConfig {
  /// EWMA smoothing: predicted <- (1-beta)*predicted + beta*sample.
  double ewma_beta = 0.3;
  /// Members are ejected once this many consecutive violations accumulate.
  /// kViolationRuleDisabled turns the rule off (estimate checks still apply).
  int violation_threshold = 1;

  static constexpr int kViolationRuleDisabled =
      std::numeric_limits<int>::max();

  bool operator==(const PoolConfig&) const = default;
};

/// Per-service set of instances currently predicted to meet the SLO.
/// histories covers every known instance of the service, member or not;
/// members is ordered (ascending estimate at admission time, ordinal
/// tie-break) so the equal-weight rotation is deterministic.
struct QoSPool {
  ServiceSpec service;
  std::vector<InstanceId> members;
  std::map<InstanceId, InstanceHistory> histories;
  std::size_t rr_cursor = 0;
  PoolConfig config;

  bool is_member(const InstanceId& id) const;

  bool operator==(const QoSPool&) const = default;
};

enum class EnvironmentEventKind {
  link_latency_changed,
  node_overloaded,
  generic_disruption,
};

/// A detected environment change (network disruption, node resource
/// fluctuation) that invalidates estimates for instances on affected nodes.
struct EnvironmentEvent {
  EnvironmentEventKind kind = EnvironmentEventKind::generic_disruption;
  std::set<NodeId> affected_nodes;
  Tick at = 0;
};

using EstimateFn = std::function<Millis(const InstanceId&)>;

/// Builds a fresh pool for the service: one history per known instance, all
/// source=initial-approximation; members are the instances whose initial
/// estimate passes the SLO, ordered ascending (ordinal tie-break).
/// Throws std::invalid_argument when an instance has no estimate entry.
QoSPool create_pool(const ServiceSpec& spec, const ClusterSnapshot& snapshot,
                    const std::map<InstanceId, Millis>& initial_estimates,
                    Tick now, PoolConfig config = {});

/// Applies an orchestrator instance event to the pool. Additions create a
/// history seeded with the given initial estimate and join the members iff
/// the estimate passes the SLO; removals drop history and membership. The
/// rotation cursor stays a valid index throughout.
QoSPool on_instance_event(QoSPool pool, const ClusterEvent& ev,
                          Millis initial_estimate_for_added);

/// Folds one piggybacked measurement into the pool. Successful samples move
/// the EWMA estimate and the violation counter; transport errors only count
/// as violations. Membership is then re-evaluated: members are ejected when
/// the violation threshold is reached or the estimate fails the SLO;
/// non-members are admitted when the estimate passes and no violations are
/// outstanding. Throws std::invalid_argument for an unknown instance.
QoSPool record_measurement(QoSPool pool, const Measurement& m);

/// Replaces the estimate for one instance (explicit re-estimation, e.g. an
/// active probe), resetting violations, then re-evaluates its membership.
QoSPool reestimate_instance(QoSPool pool, const InstanceId& id,
                            Millis estimate, Tick now);

/// Reacts to an environment change: every instance on an affected node gets
/// a fresh estimate from `reestimate` (violations reset) and its membership
/// re-evaluated. Pools with no instance on an affected node are returned
/// unchanged.
std::map<ServiceName, QoSPool> on_environment_event(
    std::map<ServiceName, QoSPool> pools, const EnvironmentEvent& ev,
    const EstimateFn& reestimate);

/// Reference oracle for pool membership: a brute-force filter and sort over
/// the given estimates, independent of the pool state machinery above.
std::vector<InstanceId> eligible_instances(
    const ServiceSpec& spec, const ClusterSnapshot& snapshot,
    const std::map<InstanceId, Millis>& estimates);

}  // namespace qedge
