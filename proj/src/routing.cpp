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

#include "qedge/routing.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace qedge {

namespace {

constexpr Millis kInfiniteRtt = std::numeric_limits<Millis>::infinity();

void insert_ordinal_sorted(std::vector<InstanceId>& instances,
                           const InstanceId& id) {
  auto it = std::lower_bound(instances.begin(), instances.end(), id);
  if (it != instances.end() && *it == id) return;
  instances.insert(it, id);
}

// Removal keeps the cursor pointing at the same next instance when possible.
void remove_with_cursor(std::vector<InstanceId>& instances,
                        std::size_t& cursor, const InstanceId& id) {
  auto it = std::find(instances.begin(), instances.end(), id);
  if (it == instances.end()) return;
  const auto idx = static_cast<std::size_t>(it - instances.begin());
  instances.erase(it);
  if (idx < cursor) --cursor;
  if (cursor >= instances.size()) cursor = 0;
}

}  // namespace

std::string RouterKind::label() const {
  switch (policy) {
    case Policy::qedge:
      return "qedge";
    case Policy::nodeport:
      return "nodeport";
    case Policy::proximity: {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "proximity-%.1f", alpha);
      return buf;
    }
  }
  return "unknown";
}

RouterKind RouterKind::qedge() { return RouterKind{Policy::qedge}; }

RouterKind RouterKind::nodeport() { return RouterKind{Policy::nodeport}; }

RouterKind RouterKind::proximity(double alpha, std::size_t refresh_period) {
  if (alpha < 0.0 || alpha > 1.0) {
    throw std::invalid_argument("proximity alpha must be in [0, 1]");
  }
  return RouterKind{Policy::proximity, alpha, refresh_period};
}

const char* to_string(RouteError err) {
  switch (err) {
    case RouteError::none:
      return "none";
    case RouteError::no_eligible_instance:
      return "no-eligible-instance";
    case RouteError::no_instance:
      return "no-instance";
    case RouteError::unknown_service:
      return "unknown-service";
  }
  return "unknown";
}

RouteResult qedge_select(QoSPool& pool, Tick now) {
  if (pool.members.empty()) {
    return {std::nullopt, RouteError::no_eligible_instance};
  }
  if (pool.rr_cursor >= pool.members.size()) pool.rr_cursor = 0;
  const InstanceId pick = pool.members[pool.rr_cursor];
  pool.rr_cursor = (pool.rr_cursor + 1) % pool.members.size();
  return {RoutingDecision{pick, now, RouterKind::Policy::qedge},
          RouteError::none};
}

RouteResult nodeport_select(const std::vector<InstanceId>& instances,
                            std::size_t& cursor, Tick now) {
  if (instances.empty()) return {std::nullopt, RouteError::no_instance};
  if (cursor >= instances.size()) cursor = 0;
  const InstanceId pick = instances[cursor];
  cursor = (cursor + 1) % instances.size();
  return {RoutingDecision{pick, now, RouterKind::Policy::nodeport},
          RouteError::none};
}

RouteResult proximity_select(const std::vector<InstanceId>& instances,
                             const LatencyTable& table, double alpha,
                             std::mt19937_64& rng, Tick now) {
  if (instances.empty()) return {std::nullopt, RouteError::no_instance};
  std::size_t best = 0;
  Millis best_rtt = kInfiniteRtt;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    auto it = table.rtt.find(instances[i]);
    const Millis rtt = it == table.rtt.end() ? kInfiniteRtt : it->second;
    if (rtt < best_rtt) {  // strict: first (lowest-ordinal) entry wins ties
      best = i;
      best_rtt = rtt;
    }
  }
  const double u = next_unit_double(rng);
  const std::size_t idx =
      u < alpha ? best : static_cast<std::size_t>(rng() % instances.size());
  return {RoutingDecision{instances[idx], now, RouterKind::Policy::proximity},
          RouteError::none};
}

LatencyTable refresh_latencies(const LatencyTable& table, const ProbeFn& probe,
                               const std::vector<InstanceId>& instances,
                               Tick now) {
  (void)table;  // the previous table is fully replaced
  LatencyTable fresh;
  fresh.probed_at = now;
  for (const auto& id : instances) {
    const auto rtt = probe(id);
    fresh.rtt[id] = rtt.has_value() ? *rtt : kInfiniteRtt;
  }
  return fresh;
}

// QedgeRouter -------------------------------------------------------------

QedgeRouter::QedgeRouter(std::vector<ServiceSpec> services,
                         const ClusterSnapshot& initial,
                         EstimateFn initial_estimate, Tick now, Options opts)
    : snapshot_(initial),
      initial_estimate_(std::move(initial_estimate)),
      opts_(opts),
      rng_(opts.seed) {
  for (auto& spec : services) {
    std::map<InstanceId, Millis> estimates;
    if (const auto* instances = snapshot_.instances_of(spec.name)) {
      for (const auto& id : *instances) {
        estimates.emplace(id, initial_estimate_(id));
      }
    }
    snapshot_.services.try_emplace(spec.name);  // known even when empty
    pools_.emplace(spec.name,
                   create_pool(spec, snapshot_, estimates, now, opts_.pool));
  }
}

RouterKind QedgeRouter::kind() const { return RouterKind::qedge(); }

RouteResult QedgeRouter::route(const ServiceName& service, Tick now) {
  auto it = pools_.find(service);
  if (it == pools_.end()) return {std::nullopt, RouteError::unknown_service};
  QoSPool& pool = it->second;

  if (!pool.members.empty() && opts_.randomized_rotation) {
    const auto idx = static_cast<std::size_t>(rng_() % pool.members.size());
    return {RoutingDecision{pool.members[idx], now, RouterKind::Policy::qedge},
            RouteError::none};
  }

  auto result = qedge_select(pool, now);
  if (!result.ok() && opts_.fallback_on_empty && !pool.histories.empty()) {
    // Best-effort fallback: lowest estimate wins, ordinal breaks ties.
    const InstanceHistory* best = nullptr;
    for (const auto& [id, h] : pool.histories) {
      if (best == nullptr ||
          std::pair(h.estimate.predicted_response_time, id.ordinal) <
              std::pair(best->estimate.predicted_response_time,
                        best->instance.ordinal)) {
        best = &h;
      }
    }
    return {RoutingDecision{best->instance, now, RouterKind::Policy::qedge},
            RouteError::none};
  }
  return result;
}

void QedgeRouter::on_cluster_event(const ClusterEvent& ev) {
  snapshot_ = apply_cluster_event(std::move(snapshot_), ev).snapshot;
  auto it = pools_.find(ev.instance.service);
  if (it == pools_.end()) return;  // service without a configured SLO
  const Millis estimate = ev.kind == ClusterEventKind::instance_added
                              ? initial_estimate_(ev.instance)
                              : 0;
  it->second = on_instance_event(std::move(it->second), ev, estimate);
}

void QedgeRouter::on_measurement(const Measurement& m) {
  auto it = pools_.find(m.instance.service);
  if (it == pools_.end()) return;
  it->second = record_measurement(std::move(it->second), m);
}

void QedgeRouter::before_request(std::size_t request_index, Tick now) {
  if (opts_.probe_period == 0 || request_index == 0 ||
      request_index % opts_.probe_period != 0) {
    return;
  }
  // Opt-in probing: refresh estimates of non-members so recovered instances
  // can re-enter the pool.
  for (auto& [name, pool] : pools_) {
    std::vector<InstanceId> outsiders;
    for (const auto& [id, h] : pool.histories) {
      if (!pool.is_member(id)) outsiders.push_back(id);
    }
    for (const auto& id : outsiders) {
      pool = reestimate_instance(std::move(pool), id, initial_estimate_(id),
                                 now);
    }
  }
}

void QedgeRouter::on_environment_event(const EnvironmentEvent& ev,
                                       const EstimateFn& reestimate) {
  pools_ = qedge::on_environment_event(std::move(pools_), ev, reestimate);
}

const QoSPool* QedgeRouter::pool(const ServiceName& service) const {
  auto it = pools_.find(service);
  return it == pools_.end() ? nullptr : &it->second;
}

// NodePortRouter ----------------------------------------------------------

NodePortRouter::NodePortRouter(const ClusterSnapshot& initial) {
  for (const auto& [name, instances] : initial.services) {
    State st;
    st.instances.assign(instances.begin(), instances.end());
    state_.emplace(name, std::move(st));
  }
}

RouterKind NodePortRouter::kind() const { return RouterKind::nodeport(); }

RouteResult NodePortRouter::route(const ServiceName& service, Tick now) {
  auto it = state_.find(service);
  if (it == state_.end()) return {std::nullopt, RouteError::unknown_service};
  return nodeport_select(it->second.instances, it->second.cursor, now);
}

void NodePortRouter::on_cluster_event(const ClusterEvent& ev) {
  auto& st = state_[ev.instance.service];
  if (ev.kind == ClusterEventKind::instance_added) {
    insert_ordinal_sorted(st.instances, ev.instance);
  } else {
    remove_with_cursor(st.instances, st.cursor, ev.instance);
  }
}

const std::vector<InstanceId>* NodePortRouter::live(
    const ServiceName& service) const {
  auto it = state_.find(service);
  return it == state_.end() ? nullptr : &it->second.instances;
}

// ProximityRouter ---------------------------------------------------------

ProximityRouter::ProximityRouter(const ClusterSnapshot& initial, ProbeFn probe,
                                 Options opts)
    : probe_(std::move(probe)), opts_(opts), rng_(opts.seed) {
  if (opts_.alpha < 0.0 || opts_.alpha > 1.0) {
    throw std::invalid_argument("proximity alpha must be in [0, 1]");
  }
  if (opts_.refresh_period == 0) {
    throw std::invalid_argument("proximity refresh period must be positive");
  }
  for (const auto& [name, instances] : initial.services) {
    State st;
    st.instances.assign(instances.begin(), instances.end());
    state_.emplace(name, std::move(st));
  }
}

RouterKind ProximityRouter::kind() const {
  return RouterKind::proximity(opts_.alpha, opts_.refresh_period);
}

RouteResult ProximityRouter::route(const ServiceName& service, Tick now) {
  auto it = state_.find(service);
  if (it == state_.end()) return {std::nullopt, RouteError::unknown_service};
  return proximity_select(it->second.instances, it->second.table, opts_.alpha,
                          rng_, now);
}

void ProximityRouter::on_cluster_event(const ClusterEvent& ev) {
  auto& st = state_[ev.instance.service];
  if (ev.kind == ClusterEventKind::instance_added) {
    // No table entry until the next scheduled refresh probes it.
    insert_ordinal_sorted(st.instances, ev.instance);
  } else {
    std::size_t dummy_cursor = 0;
    remove_with_cursor(st.instances, dummy_cursor, ev.instance);
    st.table.rtt.erase(ev.instance);
  }
}

void ProximityRouter::before_request(std::size_t request_index, Tick now) {
  if (request_index % opts_.refresh_period == 0) refresh_now(now);
}

void ProximityRouter::refresh_now(Tick now) {
  for (auto& [name, st] : state_) {
    st.table = refresh_latencies(st.table, probe_, st.instances, now);
  }
}

const LatencyTable* ProximityRouter::table(const ServiceName& service) const {
  auto it = state_.find(service);
  return it == state_.end() ? nullptr : &it->second.table;
}

const std::vector<InstanceId>* ProximityRouter::live(
    const ServiceName& service) const {
  auto it = state_.find(service);
  return it == state_.end() ? nullptr : &it->second.instances;
}

}  // namespace qedge
