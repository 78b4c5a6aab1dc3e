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

#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "qedge/core.hpp"

namespace qedge {

enum class VertexKind { node, router, device };

struct Vertex {
  std::string name;
  VertexKind kind = VertexKind::node;

  bool operator==(const Vertex&) const = default;
};

/// Undirected link with a symmetric one-way delay, in whole milliseconds.
struct Link {
  std::string a;
  std::string b;
  Millis one_way_delay = 0;

  bool operator==(const Link&) const = default;
};

struct TopologyError : std::runtime_error {
  explicit TopologyError(std::vector<std::string> diagnostics);
  std::vector<std::string> diagnostics;
};

/// Routed continuum topology. Paths must be unique (tree), matching the
/// hierarchical far-edge / near-edge / cloud layout; validate() enforces it.
class Topology {
 public:
  void add_vertex(const std::string& name, VertexKind kind);
  void add_link(const std::string& a, const std::string& b,
                Millis one_way_delay);
  /// Adjusts an existing link's delay by delta (may be negative); the
  /// resulting delay must stay non-negative.
  void add_link_delay(const std::string& a, const std::string& b,
                      Millis delta);

  bool has_vertex(const std::string& name) const;
  const Vertex* vertex(const std::string& name) const;
  const std::vector<Vertex>& vertices() const { return vertices_; }
  const std::vector<Link>& links() const { return links_; }

  /// Throws TopologyError listing every structural problem: disconnected
  /// vertices, cycles (ambiguous paths), or an empty graph.
  void validate() const;

  /// Order-insensitive structural equality.
  bool operator==(const Topology& other) const;

 private:
  friend Millis one_way_latency(const Topology&, const std::string&,
                                const std::string&);
  std::size_t index_of(const std::string& name) const;
  Link* find_link(const std::string& a, const std::string& b);

  std::vector<Vertex> vertices_;
  std::vector<Link> links_;
  std::map<std::string, std::size_t> index_;
};

/// The built-in continuum used by the bundled scenarios: a far-edge LAN
/// hosting the device and worker-3, a second far-edge LAN with worker-5 and
/// worker-6, near-edge workers 1/2/4 behind r-near, and the master behind
/// the 50 ms cloud uplink.
Topology default_topology();

/// Sum of one-way delays over the unique path between two vertices (nodes,
/// routers or the device); zero when a == b. Throws std::invalid_argument
/// for unknown vertices.
Millis one_way_latency(const Topology& t, const std::string& a,
                       const std::string& b);
Millis one_way_latency(const Topology& t, const NodeId& a, const NodeId& b);

/// Parses the topology config format emitted by dump_topology. All problems
/// are collected into one TopologyError with line-level diagnostics.
Topology load_topology(const std::string& config_text);
std::string dump_topology(const Topology& t);

/// Latency contribution of the instance itself.
struct ProcessingModel {
  InstanceId instance;
  Millis base_processing = 2.0;
  Millis overload_extra = 0.0;

  bool operator==(const ProcessingModel&) const = default;
};

/// Scripted world mutation, keyed by the request index at which it fires.
struct TimelineEvent {
  enum class Action {
    deploy_instance,
    remove_instance,
    set_overload,
    add_link_delay,
  };

  std::size_t at_request_index = 0;
  Action action = Action::deploy_instance;
  InstanceId instance;  // deploy / remove / set_overload
  Millis extra_ms = 0;  // set_overload: overload_extra to apply (absolute)
  std::string link_a;   // add_link_delay endpoints
  std::string link_b;
  Millis delta_ms = 0;  // add_link_delay

  bool operator==(const TimelineEvent&) const = default;
};

struct WorldState {
  Topology topology;
  std::map<InstanceId, ProcessingModel> processing;
  std::set<InstanceId> live_instances;
  Tick clock = 0;
  Millis default_base_processing = 2.0;
};

/// One emulated request round trip, measured at the proxy: twice the one-way
/// path latency plus the instance's processing time. A dead target yields a
/// transport-error measurement instead.
Measurement simulate_request(const WorldState& world, const NodeId& proxy_node,
                             const InstanceId& target);

struct AppliedEvent {
  /// Present only for deploy/remove: those surface through the orchestrator
  /// watch. Overloads and link-delay changes stay silent and must be
  /// discovered through measurements or probes.
  std::optional<ClusterEvent> cluster_event;
};

/// Mutates the world per the event and reports what, if anything, the
/// orchestrator watch would emit. Throws std::invalid_argument when the
/// event is inconsistent with the current world (e.g. removing a dead
/// instance).
AppliedEvent apply_event(WorldState& world, const TimelineEvent& ev);

}  // namespace qedge
