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
#include <string>
#include <vector>

#include "qedge/emulator.hpp"
#include "qedge/routing.hpp"

namespace qedge {

struct Workload {
  enum class Kind { closed_loop, fixed_interval };
  Kind kind = Kind::closed_loop;
  Millis interval_ms = 0;  // fixed_interval only

  bool operator==(const Workload&) const = default;
};

/// A reproducible experiment: topology, initial instances, scripted world
/// mutations and the request workload issued from the proxy's node.
struct Scenario {
  std::string name;
  Topology topology;
  NodeId proxy_node{"worker-3"};
  std::vector<InstanceId> initial_instances;
  std::vector<TimelineEvent> timeline;  // non-decreasing request indices
  std::size_t total_requests = 0;
  ServiceSpec spec;
  Workload workload;
  Millis base_processing_ms = 2.0;
  /// Processing prior added to 2x network latency for initial estimates.
  Millis estimate_prior_ms = 2.0;
  /// Optional per-request penalty applied to nodeport routing only.
  Millis nodeport_overhead_ms = 0.0;

  void validate() const;  // throws ScenarioError
};

struct ScenarioError : std::runtime_error {
  explicit ScenarioError(std::vector<std::string> diagnostics);
  std::vector<std::string> diagnostics;
};

/// Seven instances, one per node, no changes, 4000 requests at an 80 ms SLO.
Scenario static_scenario();

/// Five 750-request phases: start without the local instance, deploy it,
/// overload it, remove it, then degrade the link towards worker-1.
Scenario dynamic_scenario();

/// Parses a scenario definition file. `topology_dir` resolves relative
/// topology file references; the literal name "default" selects the
/// built-in topology.
Scenario load_scenario(const std::string& text,
                       const std::string& topology_dir = ".");

struct RequestRecord {
  std::size_t index = 0;
  std::optional<InstanceId> instance;     // absent on routing failure
  std::optional<Millis> response_time;    // absent on failure of any kind
  bool slo_pass = false;
  int phase = 0;

  bool operator==(const RequestRecord&) const = default;
};

/// Optional instrumentation for a run.
struct RunHooks {
  /// Fired after each successful routing decision. `members` is the qedge
  /// pool membership at decision time (empty for other policies).
  std::function<void(std::size_t index, const std::vector<InstanceId>& members,
                     const RoutingDecision& decision)>
      on_decision;
};

/// Executes the scenario against one router configuration. Per request:
/// scheduled proximity probes fire, due timeline events apply, the router
/// decides, the emulator measures, and the measurement feeds back through
/// the policy's own information channel (piggyback for qedge, probes for
/// proximity, nothing for nodeport). Fully deterministic for a given seed.
std::vector<RequestRecord> run(const Scenario& scenario,
                               const RouterKind& router, std::uint64_t seed,
                               const PoolConfig& pool_config = {},
                               const RunHooks* hooks = nullptr);

struct MetricsReport {
  std::string configuration;
  std::size_t total_requests = 0;
  std::size_t routing_failures = 0;
  /// Over requests that produced a response; absent when none did.
  std::optional<Millis> average_response_time;
  /// Fraction of all requests that met the SLO.
  double success_rate = 0.0;
  std::map<InstanceId, std::size_t> per_instance_counts;
  std::map<std::pair<int, InstanceId>, std::size_t> per_phase_counts;
};

/// Aggregates a record stream; throws std::invalid_argument when empty.
MetricsReport summarize(const std::vector<RequestRecord>& records,
                        std::string configuration = {});

std::map<InstanceId, std::size_t> per_instance_distribution(
    const std::vector<RequestRecord>& records);
std::map<std::pair<int, InstanceId>, std::size_t> per_phase_distribution(
    const std::vector<RequestRecord>& records);

enum class ReportFormat { csv, markdown };

/// Renders one report: configuration, avg_ms, success_rate, then one column
/// per serving instance.
std::string export_report(const MetricsReport& report, ReportFormat format);

/// Tidy per-phase counts: phase,instance,count.
std::string export_phase_distribution_csv(const MetricsReport& report);

std::string export_records_csv(const std::vector<RequestRecord>& records);
std::vector<RequestRecord> parse_records_csv(const std::string& text);

struct ComparisonRow {
  std::string configuration;
  MetricsReport primary;
  std::optional<MetricsReport> secondary;
};

/// Side-by-side router comparison; with a secondary report per row the table
/// carries static/dynamic column pairs.
std::string export_comparison(const std::vector<ComparisonRow>& rows,
                              ReportFormat format,
                              const std::string& primary_label = "static",
                              const std::string& secondary_label = "dynamic");

}  // namespace qedge
