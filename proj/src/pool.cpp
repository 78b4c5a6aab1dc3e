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

#include "qedge/pool.hpp"

#include <algorithm>
#include <stdexcept>
#include <utility>

namespace qedge {

namespace {

bool estimate_passes(const QoSPool& pool, const InstanceHistory& h) {
  return meets_requirement(h.estimate.predicted_response_time,
                           pool.service.requirement);
}

// Insertion point by (estimate, ordinal). Members are scanned linearly:
// estimates of existing members may have drifted since their admission, so
// the sequence is not guaranteed to be partitioned for binary search.
std::size_t admission_position(const QoSPool& pool, const InstanceHistory& h) {
  const auto key = std::pair(h.estimate.predicted_response_time,
                             h.instance.ordinal);
  for (std::size_t i = 0; i < pool.members.size(); ++i) {
    const auto& member = pool.histories.at(pool.members[i]);
    if (key < std::pair(member.estimate.predicted_response_time,
                        pool.members[i].ordinal)) {
      return i;
    }
  }
  return pool.members.size();
}

// Insertion leaves the cursor untouched so the member scheduled next keeps
// its turn; the cursor is clamped to stay a valid index.
void admit(QoSPool& pool, const InstanceId& id) {
  if (pool.is_member(id)) return;
  const auto& h = pool.histories.at(id);
  pool.members.insert(pool.members.begin() +
                          static_cast<std::ptrdiff_t>(admission_position(pool, h)),
                      id);
  if (pool.rr_cursor >= pool.members.size()) pool.rr_cursor = 0;
}

void eject(QoSPool& pool, const InstanceId& id) {
  auto it = std::find(pool.members.begin(), pool.members.end(), id);
  if (it == pool.members.end()) return;
  const auto idx = static_cast<std::size_t>(it - pool.members.begin());
  pool.members.erase(it);
  if (idx < pool.rr_cursor) --pool.rr_cursor;
  if (pool.rr_cursor >= pool.members.size()) pool.rr_cursor = 0;
}

void reevaluate_membership(QoSPool& pool, const InstanceId& id) {
  const auto& h = pool.histories.at(id);
  const bool passes = estimate_passes(pool, h);
  const bool violated =
      h.consecutive_violations >= pool.config.violation_threshold;
  if (pool.is_member(id)) {
    if (violated || !passes) eject(pool, id);
  } else if (passes && h.consecutive_violations == 0) {
    admit(pool, id);
  }
}

}  // namespace

bool QoSPool::is_member(const InstanceId& id) const {
  return std::find(members.begin(), members.end(), id) != members.end();
}

QoSPool create_pool(const ServiceSpec& spec, const ClusterSnapshot& snapshot,
                    const std::map<InstanceId, Millis>& initial_estimates,
                    Tick now, PoolConfig config) {
  QoSPool pool;
  pool.service = spec;
  pool.config = config;
  if (const auto* instances = snapshot.instances_of(spec.name)) {
    for (const auto& id : *instances) {
      auto it = initial_estimates.find(id);
      if (it == initial_estimates.end()) {
        throw std::invalid_argument("missing initial estimate for instance " +
                                    id.label());
      }
      InstanceHistory h;
      h.instance = id;
      h.estimate = {it->second, 0, now, EstimateSource::initial_approximation};
      if (meets_requirement(it->second, spec.requirement)) {
        pool.members.push_back(id);
      }
      pool.histories.emplace(id, std::move(h));
    }
  }
  std::sort(pool.members.begin(), pool.members.end(),
            [&](const InstanceId& a, const InstanceId& b) {
              return std::pair(
                         pool.histories.at(a).estimate.predicted_response_time,
                         a.ordinal) <
                     std::pair(
                         pool.histories.at(b).estimate.predicted_response_time,
                         b.ordinal);
            });
  pool.rr_cursor = 0;
  return pool;
}

QoSPool on_instance_event(QoSPool pool, const ClusterEvent& ev,
                          Millis initial_estimate_for_added) {
  if (ev.instance.service != pool.service.name) {
    throw std::invalid_argument("event for service " +
                                ev.instance.service.name +
                                " applied to pool of " +
                                pool.service.name.name);
  }
  switch (ev.kind) {
    case ClusterEventKind::instance_added: {
      if (pool.histories.count(ev.instance) > 0) break;  // duplicate add
      InstanceHistory h;
      h.instance = ev.instance;
      h.estimate = {initial_estimate_for_added, 0, ev.at,
                    EstimateSource::initial_approximation};
      pool.histories.emplace(ev.instance, std::move(h));
      if (meets_requirement(initial_estimate_for_added,
                            pool.service.requirement)) {
        admit(pool, ev.instance);
      }
      break;
    }
    case ClusterEventKind::instance_removed: {
      auto it = pool.histories.find(ev.instance);
      if (it == pool.histories.end()) break;  // unknown instance: no-op
      eject(pool, ev.instance);
      pool.histories.erase(it);
      break;
    }
  }
  return pool;
}

QoSPool record_measurement(QoSPool pool, const Measurement& m) {
  auto it = pool.histories.find(m.instance);
  if (it == pool.histories.end()) {
    throw std::invalid_argument("measurement for unknown instance " +
                                m.instance.label());
  }
  InstanceHistory& h = it->second;
  if (m.outcome == MeasurementOutcome::success) {
    const double beta = pool.config.ewma_beta;
    h.estimate.predicted_response_time =
        (1.0 - beta) * h.estimate.predicted_response_time +
        beta * m.response_time;
    h.estimate.sample_count += 1;
    h.estimate.source = EstimateSource::measured;
    h.estimate.last_updated = m.at;
    if (meets_requirement(m.response_time, pool.service.requirement)) {
      h.consecutive_violations = 0;
    } else {
      h.consecutive_violations += 1;
    }
  } else {
    // A failed request is a violation, but carries no latency sample.
    h.consecutive_violations += 1;
  }
  reevaluate_membership(pool, m.instance);
  return pool;
}

QoSPool reestimate_instance(QoSPool pool, const InstanceId& id,
                            Millis estimate, Tick now) {
  auto it = pool.histories.find(id);
  if (it == pool.histories.end()) {
    throw std::invalid_argument("re-estimate for unknown instance " +
                                id.label());
  }
  it->second.estimate = {estimate, 0, now,
                         EstimateSource::initial_approximation};
  it->second.consecutive_violations = 0;
  reevaluate_membership(pool, id);
  return pool;
}

std::map<ServiceName, QoSPool> on_environment_event(
    std::map<ServiceName, QoSPool> pools, const EnvironmentEvent& ev,
    const EstimateFn& reestimate) {
  if (ev.affected_nodes.empty()) {
    throw std::invalid_argument("environment event with no affected nodes");
  }
  for (auto& [name, pool] : pools) {
    std::vector<InstanceId> affected;
    for (const auto& [id, h] : pool.histories) {
      if (ev.affected_nodes.count(id.node) > 0) affected.push_back(id);
    }
    for (const auto& id : affected) {
      pool = reestimate_instance(std::move(pool), id, reestimate(id), ev.at);
    }
  }
  return pools;
}

std::vector<InstanceId> eligible_instances(
    const ServiceSpec& spec, const ClusterSnapshot& snapshot,
    const std::map<InstanceId, Millis>& estimates) {
  std::vector<InstanceId> out;
  if (const auto* instances = snapshot.instances_of(spec.name)) {
    for (const auto& id : *instances) {
      auto it = estimates.find(id);
      if (it == estimates.end()) {
        throw std::invalid_argument("missing estimate for instance " +
                                    id.label());
      }
      if (meets_requirement(it->second, spec.requirement)) out.push_back(id);
    }
  }
  std::sort(out.begin(), out.end(),
            [&](const InstanceId& a, const InstanceId& b) {
              return std::pair(estimates.at(a), a.ordinal) <
                     std::pair(estimates.at(b), b.ordinal);
            });
  return out;
}

}  // namespace qedge
