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

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "qedge/core.hpp"
#include "qedge/pool.hpp"

namespace qedge {

/// Which routing policy to run, plus its policy-specific parameters.
struct RouterKind {
  enum class Policy { qedge, nodeport, proximity };

  Policy policy = Policy::qedge;
  /// Proximity blend: 0 = pure load balancing, 1 = always-closest.
  double alpha = 1.0;
  /// Proximity probe cadence, in requests.
  std::size_t refresh_period = 100;

  std::string label() const;  // "qedge", "nodeport", "proximity-0.8"

  static RouterKind qedge();
  static RouterKind nodeport();
  static RouterKind proximity(double alpha, std::size_t refresh_period = 100);
};

/// Last probed round-trip per instance. Failed probes are stored as +inf so
/// they can never win the arg-min.
struct LatencyTable {
  std::map<InstanceId, Millis> rtt;
  Tick probed_at = 0;
};

struct RoutingDecision {
  InstanceId instance;
  Tick decided_at = 0;
  RouterKind::Policy policy = RouterKind::Policy::qedge;
};

enum class RouteError {
  none,
  no_eligible_instance,  // qedge: the QoS pool is empty
  no_instance,           // nodeport/proximity: no live instance at all
  unknown_service,
};

const char* to_string(RouteError err);

struct RouteResult {
  std::optional<RoutingDecision> decision;
  RouteError error = RouteError::none;

  bool ok() const { return decision.has_value(); }
};

/// Deterministic [0,1) draw from a raw 64-bit generator, independent of the
/// standard library's distribution implementations.
inline double next_unit_double(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Selection primitives --------------------------------------------------

/// Equal-weight rotation over the pool members; advances the cursor.
RouteResult qedge_select(QoSPool& pool, Tick now);

/// Strict round-robin over the live instances (callers keep them in ordinal
/// order); advances the cursor. QoS-blind by construction.
RouteResult nodeport_select(const std::vector<InstanceId>& instances,
                            std::size_t& cursor, Tick now);

/// Samples instance i with probability (1-alpha)/N + alpha*[i = argmin RTT].
/// Instances absent from the table count as +inf; argmin ties go to the
/// lowest ordinal. `instances` must be in ordinal order.
RouteResult proximity_select(const std::vector<InstanceId>& instances,
                             const LatencyTable& table, double alpha,
                             std::mt19937_64& rng, Tick now);

/// probe returns the measured round-trip in ms, or nullopt on failure.
using ProbeFn = std::function<std::optional<Millis>(const InstanceId&)>;

/// Replaces every entry with a fresh probe; failures become +inf.
LatencyTable refresh_latencies(const LatencyTable& table, const ProbeFn& probe,
                               const std::vector<InstanceId>& instances,
                               Tick now);

// Routers ----------------------------------------------------------------

/// One policy instance per run or server. Owns whatever mutable cursor, RNG
/// and table state the policy needs; callers serialize access.
class Router {
 public:
  virtual ~Router() = default;

  virtual RouterKind kind() const = 0;
  virtual RouteResult route(const ServiceName& service, Tick now) = 0;

  /// Live-set change from the orchestrator watch.
  virtual void on_cluster_event(const ClusterEvent& ev) = 0;

  /// Piggybacked per-request measurement; policies that do not learn from
  /// request feedback ignore it.
  virtual void on_measurement(const Measurement&) {}

  /// Called once per request by the driver, before the request is handled;
  /// policies with scheduled probing hook their refresh here.
  virtual void before_request(std::size_t /*request_index*/, Tick /*now*/) {}
};

/// QoS-pool router: per-service pool maintained from events and piggybacked
/// measurements, equal-weight rotation inside the pool.
class QedgeRouter : public Router {
 public:
  struct Options {
    PoolConfig pool;
    /// Route to the best-estimate instance when the pool is empty instead of
    /// surfacing no-eligible-instance.
    bool fallback_on_empty = false;
    /// Re-estimate non-members every N requests; 0 disables probing, so an
    /// ejected instance only returns via instance/environment events.
    std::size_t probe_period = 0;
    /// Uniform member choice instead of cyclic rotation.
    bool randomized_rotation = false;
    std::uint64_t seed = 1;
  };

  QedgeRouter(std::vector<ServiceSpec> services,
              const ClusterSnapshot& initial, EstimateFn initial_estimate,
              Tick now, Options opts);
  QedgeRouter(std::vector<ServiceSpec> services,
              const ClusterSnapshot& initial, EstimateFn initial_estimate,
              Tick now);

  RouterKind kind() const override;
  RouteResult route(const ServiceName& service, Tick now) override;
  void on_cluster_event(const ClusterEvent& ev) override;
  void on_measurement(const Measurement& m) override;
  void before_request(std::size_t request_index, Tick now) override;

  /// Environment change notification (event 4 of the monitoring loop).
  void on_environment_event(const EnvironmentEvent& ev,
                            const EstimateFn& reestimate);

  const QoSPool* pool(const ServiceName& service) const;
  const ClusterSnapshot& snapshot() const { return snapshot_; }

 private:
  std::map<ServiceName, QoSPool> pools_;
  ClusterSnapshot snapshot_;
  EstimateFn initial_estimate_;
  Options opts_;
  std::mt19937_64 rng_;
};

/// Kubernetes-default-style router: global round-robin over every live
/// instance, blind to QoS.
class NodePortRouter : public Router {
 public:
  explicit NodePortRouter(const ClusterSnapshot& initial);

  RouterKind kind() const override;
  RouteResult route(const ServiceName& service, Tick now) override;
  void on_cluster_event(const ClusterEvent& ev) override;

  const std::vector<InstanceId>* live(const ServiceName& service) const;

 private:
  struct State {
    std::vector<InstanceId> instances;  // ordinal order
    std::size_t cursor = 0;
  };
  std::map<ServiceName, State> state_;
};

/// Proximity/load-balance blend router with periodically refreshed latency
/// probes. Learns only from probes, never from request feedback.
class ProximityRouter : public Router {
 public:
  struct Options {
    double alpha = 1.0;
    std::size_t refresh_period = 100;
    std::uint64_t seed = 1;
  };

  ProximityRouter(const ClusterSnapshot& initial, ProbeFn probe, Options opts);

  RouterKind kind() const override;
  RouteResult route(const ServiceName& service, Tick now) override;
  void on_cluster_event(const ClusterEvent& ev) override;
  void before_request(std::size_t request_index, Tick now) override;

  /// Probes every live instance of every service now.
  void refresh_now(Tick now);

  const LatencyTable* table(const ServiceName& service) const;
  const std::vector<InstanceId>* live(const ServiceName& service) const;

 private:
  struct State {
    std::vector<InstanceId> instances;  // ordinal order
    LatencyTable table;
  };
  std::map<ServiceName, State> state_;
  ProbeFn probe_;
  Options opts_;
  std::mt19937_64 rng_;
};

inline QedgeRouter::QedgeRouter(std::vector<ServiceSpec> services,
                                const ClusterSnapshot& initial,
                                EstimateFn initial_estimate, Tick now)
    : QedgeRouter(std::move(services), initial, std::move(initial_estimate),
                  now, Options{}) {}

}  // namespace qedge
