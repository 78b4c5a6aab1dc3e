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

#include "qedge/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

namespace qedge {

namespace {

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& line : lines) {
    if (!out.empty()) out += "\n";
    out += line;
  }
  return out;
}

std::string format_ms(Millis value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", value);
  return buf;
}

std::string format_rate(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", value);
  return buf;
}

std::string format_percent(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f%%", value * 100.0);
  return buf;
}

InstanceId dps_instance(int ordinal) {
  const NodeId node{ordinal == 7 ? std::string("master")
                                 : "worker-" + std::to_string(ordinal)};
  return InstanceId{ServiceName{"dps"}, ordinal, node};
}

ServiceSpec dps_spec() { return ServiceSpec{ServiceName{"dps"}, {80.0}}; }

// Distinct, sorted timeline indices; each starts a new phase.
std::vector<std::size_t> phase_boundaries(const Scenario& scenario) {
  std::vector<std::size_t> bounds;
  for (const auto& ev : scenario.timeline) {
    if (bounds.empty() || bounds.back() != ev.at_request_index) {
      bounds.push_back(ev.at_request_index);
    }
  }
  return bounds;
}

int phase_of(const std::vector<std::size_t>& bounds, std::size_t index) {
  int phase = 0;
  for (auto b : bounds) {
    if (index >= b) ++phase;
  }
  return phase;
}

}  // namespace

ScenarioError::ScenarioError(std::vector<std::string> diags)
    : std::runtime_error(join_lines(diags)), diagnostics(std::move(diags)) {}

void Scenario::validate() const {
  std::vector<std::string> diags;
  if (total_requests == 0) diags.push_back("total requests must be positive");
  if (spec.name.name.empty()) diags.push_back("scenario names no service");
  if (spec.requirement.max_response_time <= 0) {
    diags.push_back("SLO must be strictly positive");
  }
  if (!topology.has_vertex(proxy_node.name)) {
    diags.push_back("proxy node " + proxy_node.name + " is not in the topology");
  }
  for (const auto& id : initial_instances) {
    if (!topology.has_vertex(id.node.name)) {
      diags.push_back("instance " + id.label() + " sits on unknown node " +
                      id.node.name);
    }
    if (id.service != spec.name) {
      diags.push_back("instance " + id.label() + " belongs to another service");
    }
  }
  std::size_t prev = 0;
  for (const auto& ev : timeline) {
    if (ev.at_request_index < prev) {
      diags.push_back("timeline indices must be non-decreasing");
      break;
    }
    prev = ev.at_request_index;
  }
  for (const auto& ev : timeline) {
    if (ev.at_request_index >= total_requests) {
      diags.push_back("timeline event at index " +
                      std::to_string(ev.at_request_index) +
                      " is beyond the last request");
    }
  }
  if (workload.kind == Workload::Kind::fixed_interval &&
      workload.interval_ms <= 0) {
    diags.push_back("fixed-interval workload needs a positive interval");
  }
  if (!diags.empty()) throw ScenarioError(std::move(diags));
}

Scenario static_scenario() {
  Scenario s;
  s.name = "static";
  s.topology = default_topology();
  s.spec = dps_spec();
  s.total_requests = 4000;
  for (int i = 1; i <= 7; ++i) s.initial_instances.push_back(dps_instance(i));
  s.validate();
  return s;
}

Scenario dynamic_scenario() {
  Scenario s;
  s.name = "dynamic";
  s.topology = default_topology();
  s.spec = dps_spec();
  s.total_requests = 3750;  // five 750-request phases
  for (int i : {1, 2, 4, 5, 6, 7}) s.initial_instances.push_back(dps_instance(i));

  TimelineEvent deploy;
  deploy.at_request_index = 750;
  deploy.action = TimelineEvent::Action::deploy_instance;
  deploy.instance = dps_instance(3);

  TimelineEvent overload;
  overload.at_request_index = 1500;
  overload.action = TimelineEvent::Action::set_overload;
  overload.instance = dps_instance(3);
  overload.extra_ms = 100;

  TimelineEvent remove;
  remove.at_request_index = 2250;
  remove.action = TimelineEvent::Action::remove_instance;
  remove.instance = dps_instance(3);

  TimelineEvent degrade;
  degrade.at_request_index = 3000;
  degrade.action = TimelineEvent::Action::add_link_delay;
  degrade.link_a = "worker-1";
  degrade.link_b = "r-near";
  degrade.delta_ms = 100;

  s.timeline = {deploy, overload, remove, degrade};
  s.validate();
  return s;
}

std::vector<RequestRecord> run(const Scenario& scenario,
                               const RouterKind& router_kind,
                               std::uint64_t seed,
                               const PoolConfig& pool_config,
                               const RunHooks* hooks) {
  scenario.validate();

  WorldState world;
  world.topology = scenario.topology;
  world.default_base_processing = scenario.base_processing_ms;
  for (const auto& id : scenario.initial_instances) {
    world.live_instances.insert(id);
    world.processing.emplace(
        id, ProcessingModel{id, scenario.base_processing_ms, 0});
  }

  ClusterSnapshot snapshot;
  snapshot.services.try_emplace(scenario.spec.name);
  for (const auto& id : scenario.initial_instances) {
    snapshot.services[scenario.spec.name].insert(id);
    snapshot.nodes.insert(id.node);
  }

  // Initial estimates and probes both see the world as it currently is.
  const NodeId proxy = scenario.proxy_node;
  EstimateFn initial_estimate = [&world, proxy,
                                 &scenario](const InstanceId& id) -> Millis {
    return 2 * one_way_latency(world.topology, proxy.name, id.node.name) +
           scenario.estimate_prior_ms;
  };
  ProbeFn probe = [&world, proxy](const InstanceId& id) {
    return std::optional<Millis>(
        2 * one_way_latency(world.topology, proxy.name, id.node.name));
  };

  std::unique_ptr<Router> router;
  QedgeRouter* qedge = nullptr;
  switch (router_kind.policy) {
    case RouterKind::Policy::qedge: {
      QedgeRouter::Options opts;
      opts.pool = pool_config;
      opts.seed = seed;
      auto owned = std::make_unique<QedgeRouter>(
          std::vector<ServiceSpec>{scenario.spec}, snapshot, initial_estimate,
          world.clock, opts);
      qedge = owned.get();
      router = std::move(owned);
      break;
    }
    case RouterKind::Policy::nodeport:
      router = std::make_unique<NodePortRouter>(snapshot);
      break;
    case RouterKind::Policy::proximity: {
      ProximityRouter::Options opts;
      opts.alpha = router_kind.alpha;
      opts.refresh_period = router_kind.refresh_period;
      opts.seed = seed;
      router = std::make_unique<ProximityRouter>(snapshot, probe, opts);
      break;
    }
  }

  const auto bounds = phase_boundaries(scenario);
  std::vector<RequestRecord> records;
  records.reserve(scenario.total_requests);
  std::size_t next_event = 0;

  for (std::size_t i = 0; i < scenario.total_requests; ++i) {
    // Scheduled probes fire before any world change scripted at the same
    // index: a change landing an instant after a refresh is exactly the
    // stale-table situation periodic probing produces.
    router->before_request(i, world.clock);

    while (next_event < scenario.timeline.size() &&
           scenario.timeline[next_event].at_request_index == i) {
      auto applied = apply_event(world, scenario.timeline[next_event]);
      if (applied.cluster_event) router->on_cluster_event(*applied.cluster_event);
      ++next_event;
    }

    RequestRecord rec;
    rec.index = i;
    rec.phase = phase_of(bounds, i);

    std::vector<InstanceId> members_before;
    if (qedge != nullptr) {
      if (const QoSPool* pool = qedge->pool(scenario.spec.name)) {
        members_before = pool->members;
      }
    }

    auto result = router->route(scenario.spec.name, world.clock);
    if (!result.ok()) {
      rec.slo_pass = false;  // the client got no timely response
      records.push_back(rec);
      continue;
    }
    if (hooks != nullptr && hooks->on_decision) {
      hooks->on_decision(i, members_before, *result.decision);
    }

    const InstanceId target = result.decision->instance;
    Measurement m = simulate_request(world, proxy, target);
    rec.instance = target;
    if (m.outcome == MeasurementOutcome::success) {
      if (router_kind.policy == RouterKind::Policy::nodeport) {
        m.response_time += scenario.nodeport_overhead_ms;
      }
      rec.response_time = m.response_time;
      rec.slo_pass = meets_requirement(m.response_time,
                                       scenario.spec.requirement);
      router->on_measurement(m);
      const Millis elapsed = scenario.workload.kind == Workload::Kind::closed_loop
                                 ? m.response_time
                                 : scenario.workload.interval_ms;
      world.clock += static_cast<Tick>(std::llround(elapsed));
    } else {
      rec.slo_pass = false;
      router->on_measurement(m);  // transport errors still count as violations
    }
    records.push_back(rec);
  }
  return records;
}

MetricsReport summarize(const std::vector<RequestRecord>& records,
                        std::string configuration) {
  if (records.empty()) {
    throw std::invalid_argument("cannot summarize an empty record stream");
  }
  MetricsReport report;
  report.configuration = std::move(configuration);
  report.total_requests = records.size();
  double sum = 0;
  std::size_t responded = 0;
  std::size_t passed = 0;
  for (const auto& rec : records) {
    if (!rec.instance.has_value()) {
      ++report.routing_failures;
    } else {
      ++report.per_instance_counts[*rec.instance];
      ++report.per_phase_counts[{rec.phase, *rec.instance}];
    }
    if (rec.response_time.has_value()) {
      sum += *rec.response_time;
      ++responded;
    }
    if (rec.slo_pass) ++passed;
  }
  if (responded > 0) {
    report.average_response_time = sum / static_cast<double>(responded);
  }
  report.success_rate =
      static_cast<double>(passed) / static_cast<double>(records.size());
  return report;
}

std::map<InstanceId, std::size_t> per_instance_distribution(
    const std::vector<RequestRecord>& records) {
  std::map<InstanceId, std::size_t> counts;
  for (const auto& rec : records) {
    if (rec.instance.has_value()) ++counts[*rec.instance];
  }
  return counts;
}

std::map<std::pair<int, InstanceId>, std::size_t> per_phase_distribution(
    const std::vector<RequestRecord>& records) {
  std::map<std::pair<int, InstanceId>, std::size_t> counts;
  for (const auto& rec : records) {
    if (rec.instance.has_value()) ++counts[{rec.phase, *rec.instance}];
  }
  return counts;
}

std::string export_report(const MetricsReport& report, ReportFormat format) {
  std::vector<std::string> headers{"configuration", "avg_ms", "success_rate"};
  std::vector<std::string> values{
      report.configuration,
      report.average_response_time ? format_ms(*report.average_response_time)
                                   : "",
      format_rate(report.success_rate)};
  for (const auto& [id, count] : report.per_instance_counts) {
    headers.push_back(id.label());
    values.push_back(std::to_string(count));
  }
  std::string out;
  if (format == ReportFormat::csv) {
    for (std::size_t i = 0; i < headers.size(); ++i) {
      out += (i == 0 ? "" : ",") + headers[i];
    }
    out += "\n";
    for (std::size_t i = 0; i < values.size(); ++i) {
      out += (i == 0 ? "" : ",") + values[i];
    }
    out += "\n";
    return out;
  }
  // Markdown shows the success rate as a percentage and marks a missing
  // average explicitly.
  values[1] = report.average_response_time
                  ? format_ms(*report.average_response_time)
                  : "-";
  values[2] = format_percent(report.success_rate);
  auto row = [&out](const std::vector<std::string>& cells) {
    out += "|";
    for (const auto& c : cells) out += " " + c + " |";
    out += "\n";
  };
  row(headers);
  out += "|";
  for (std::size_t i = 0; i < headers.size(); ++i) out += "---|";
  out += "\n";
  row(values);
  return out;
}

std::string export_phase_distribution_csv(const MetricsReport& report) {
  std::string out = "phase,instance,count\n";
  for (const auto& [key, count] : report.per_phase_counts) {
    out += std::to_string(key.first) + "," + key.second.label() + "," +
           std::to_string(count) + "\n";
  }
  return out;
}

std::string export_records_csv(const std::vector<RequestRecord>& records) {
  std::string out = "index,instance,node,response_time_ms,slo_pass,phase\n";
  for (const auto& rec : records) {
    out += std::to_string(rec.index);
    out += ",";
    out += rec.instance ? rec.instance->label() : "";
    out += ",";
    out += rec.instance ? rec.instance->node.name : "";
    out += ",";
    out += rec.response_time ? format_ms(*rec.response_time) : "";
    out += ",";
    out += rec.slo_pass ? "1" : "0";
    out += ",";
    out += std::to_string(rec.phase);
    out += "\n";
  }
  return out;
}

std::vector<RequestRecord> parse_records_csv(const std::string& text) {
  std::vector<RequestRecord> records;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (first) {  // header
      first = false;
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    while (cells.size() < 6) cells.push_back("");
    if (cells.size() != 6) {
      throw std::invalid_argument("records line " + std::to_string(line_no) +
                                  ": expected 6 columns");
    }
    RequestRecord rec;
    rec.index = static_cast<std::size_t>(std::stoull(cells[0]));
    if (!cells[1].empty()) {
      const auto dash = cells[1].rfind('-');
      if (dash == std::string::npos) {
        throw std::invalid_argument("records line " + std::to_string(line_no) +
                                    ": malformed instance label");
      }
      InstanceId id;
      id.service = ServiceName{cells[1].substr(0, dash)};
      id.ordinal = std::stoi(cells[1].substr(dash + 1));
      id.node = NodeId{cells[2]};
      rec.instance = id;
    }
    if (!cells[3].empty()) rec.response_time = std::stod(cells[3]);
    rec.slo_pass = cells[4] == "1";
    rec.phase = std::stoi(cells[5]);
    records.push_back(rec);
  }
  return records;
}

std::string export_comparison(const std::vector<ComparisonRow>& rows,
                              ReportFormat format,
                              const std::string& primary_label,
                              const std::string& secondary_label) {
  const bool two = !rows.empty() && rows.front().secondary.has_value();
  std::vector<std::string> headers{"configuration"};
  if (two) {
    headers.push_back("avg_ms_" + primary_label);
    headers.push_back("avg_ms_" + secondary_label);
    headers.push_back("success_" + primary_label);
    headers.push_back("success_" + secondary_label);
  } else {
    headers.push_back("avg_ms");
    headers.push_back("success_rate");
  }

  auto avg_cell = [&](const MetricsReport& r) {
    return r.average_response_time ? format_ms(*r.average_response_time)
                                   : (format == ReportFormat::csv ? "" : "-");
  };
  auto rate_cell = [&](const MetricsReport& r) {
    return format == ReportFormat::csv ? format_rate(r.success_rate)
                                       : format_percent(r.success_rate);
  };

  std::string out;
  if (format == ReportFormat::csv) {
    for (std::size_t i = 0; i < headers.size(); ++i) {
      out += (i == 0 ? "" : ",") + headers[i];
    }
    out += "\n";
    for (const auto& row : rows) {
      out += row.configuration + "," + avg_cell(row.primary);
      if (two) out += "," + avg_cell(*row.secondary);
      out += "," + rate_cell(row.primary);
      if (two) out += "," + rate_cell(*row.secondary);
      out += "\n";
    }
    return out;
  }
  auto md_row = [&out](const std::vector<std::string>& cells) {
    out += "|";
    for (const auto& c : cells) out += " " + c + " |";
    out += "\n";
  };
  md_row(headers);
  out += "|";
  for (std::size_t i = 0; i < headers.size(); ++i) out += "---|";
  out += "\n";
  for (const auto& row : rows) {
    std::vector<std::string> cells{row.configuration, avg_cell(row.primary)};
    if (two) cells.push_back(avg_cell(*row.secondary));
    cells.push_back(rate_cell(row.primary));
    if (two) cells.push_back(rate_cell(*row.secondary));
    md_row(cells);
  }
  return out;
}

Scenario load_scenario(const std::string& text,
                       const std::string& topology_dir) {
  Scenario s;
  std::vector<std::string> diags;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  bool topology_set = false;
  std::vector<std::pair<int, InstanceId>> instances;  // line, instance

  auto parse_int = [](const std::string& tok, long long& out) {
    try {
      std::size_t pos = 0;
      out = std::stoll(tok, &pos);
      return pos == tok.size();
    } catch (const std::exception&) {
      return false;
    }
  };

  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    std::string line = hash == std::string::npos ? raw : raw.substr(0, hash);
    std::istringstream ls(line);
    std::vector<std::string> tok;
    std::string t;
    while (ls >> t) tok.push_back(t);
    if (tok.empty()) continue;
    auto complain = [&](const std::string& msg) {
      diags.push_back("line " + std::to_string(line_no) + ": " + msg);
    };

    if (tok[0] == "name" && tok.size() == 2) {
      s.name = tok[1];
    } else if (tok[0] == "topology" && tok.size() == 2) {
      if (tok[1] == "default") {
        s.topology = default_topology();
      } else {
        std::ifstream f(topology_dir + "/" + tok[1]);
        if (!f) {
          complain("cannot open topology file " + tok[1]);
          continue;
        }
        std::stringstream buf;
        buf << f.rdbuf();
        try {
          s.topology = load_topology(buf.str());
        } catch (const TopologyError& e) {
          complain("topology file " + tok[1] + ": " + e.what());
          continue;
        }
      }
      topology_set = true;
    } else if (tok[0] == "proxy-node" && tok.size() == 2) {
      s.proxy_node = NodeId{tok[1]};
    } else if (tok[0] == "service" && tok.size() == 3) {
      long long slo = 0;
      if (!parse_int(tok[2], slo) || slo <= 0) {
        complain("service SLO must be a positive integer of milliseconds");
        continue;
      }
      s.spec = ServiceSpec{ServiceName{tok[1]},
                           {static_cast<Millis>(slo)}};
    } else if (tok[0] == "requests" && tok.size() == 2) {
      long long n = 0;
      if (!parse_int(tok[1], n) || n <= 0) {
        complain("requests must be a positive integer");
        continue;
      }
      s.total_requests = static_cast<std::size_t>(n);
    } else if (tok[0] == "workload") {
      if (tok.size() == 2 && tok[1] == "closed-loop") {
        s.workload = {Workload::Kind::closed_loop, 0};
      } else if (tok.size() == 3 && tok[1] == "fixed-interval") {
        long long ms = 0;
        if (!parse_int(tok[2], ms) || ms <= 0) {
          complain("fixed-interval needs a positive millisecond value");
          continue;
        }
        s.workload = {Workload::Kind::fixed_interval,
                      static_cast<Millis>(ms)};
      } else {
        complain("workload is 'closed-loop' or 'fixed-interval <ms>'");
      }
    } else if (tok[0] == "base-processing-ms" && tok.size() == 2) {
      long long ms = 0;
      if (!parse_int(tok[1], ms) || ms < 0) {
        complain("base-processing-ms must be a non-negative integer");
        continue;
      }
      s.base_processing_ms = static_cast<Millis>(ms);
    } else if (tok[0] == "estimate-prior-ms" && tok.size() == 2) {
      long long ms = 0;
      if (!parse_int(tok[1], ms) || ms < 0) {
        complain("estimate-prior-ms must be a non-negative integer");
        continue;
      }
      s.estimate_prior_ms = static_cast<Millis>(ms);
    } else if (tok[0] == "nodeport-overhead-ms" && tok.size() == 2) {
      long long ms = 0;
      if (!parse_int(tok[1], ms) || ms < 0) {
        complain("nodeport-overhead-ms must be a non-negative integer");
        continue;
      }
      s.nodeport_overhead_ms = static_cast<Millis>(ms);
    } else if (tok[0] == "instance" && tok.size() == 3) {
      long long ordinal = 0;
      if (!parse_int(tok[1], ordinal) || ordinal <= 0) {
        complain("instance ordinal must be a positive integer");
        continue;
      }
      instances.emplace_back(
          line_no, InstanceId{{}, static_cast<int>(ordinal), NodeId{tok[2]}});
    } else if (tok[0] == "at" && tok.size() >= 3) {
      long long index = 0;
      if (!parse_int(tok[1], index) || index < 0) {
        complain("event index must be a non-negative integer");
        continue;
      }
      TimelineEvent ev;
      ev.at_request_index = static_cast<std::size_t>(index);
      if (tok[2] == "deploy" && tok.size() == 5) {
        long long ordinal = 0;
        if (!parse_int(tok[3], ordinal) || ordinal <= 0) {
          complain("deploy ordinal must be a positive integer");
          continue;
        }
        ev.action = TimelineEvent::Action::deploy_instance;
        ev.instance = InstanceId{{}, static_cast<int>(ordinal), NodeId{tok[4]}};
      } else if (tok[2] == "remove" && tok.size() == 4) {
        long long ordinal = 0;
        if (!parse_int(tok[3], ordinal) || ordinal <= 0) {
          complain("remove ordinal must be a positive integer");
          continue;
        }
        ev.action = TimelineEvent::Action::remove_instance;
        ev.instance = InstanceId{{}, static_cast<int>(ordinal), {}};
      } else if (tok[2] == "overload" && tok.size() == 5) {
        long long ordinal = 0, extra = 0;
        if (!parse_int(tok[3], ordinal) || ordinal <= 0 ||
            !parse_int(tok[4], extra) || extra < 0) {
          complain("overload needs '<ordinal> <extra-ms>'");
          continue;
        }
        ev.action = TimelineEvent::Action::set_overload;
        ev.instance = InstanceId{{}, static_cast<int>(ordinal), {}};
        ev.extra_ms = static_cast<Millis>(extra);
      } else if (tok[2] == "link-delay" && tok.size() == 6) {
        long long delta = 0;
        if (!parse_int(tok[5], delta)) {
          complain("link-delay delta must be an integer");
          continue;
        }
        ev.action = TimelineEvent::Action::add_link_delay;
        ev.link_a = tok[3];
        ev.link_b = tok[4];
        ev.delta_ms = static_cast<Millis>(delta);
      } else {
        complain("unknown timeline action '" + tok[2] + "'");
        continue;
      }
      s.timeline.push_back(ev);
    } else {
      complain("unrecognized directive '" + tok[0] + "'");
    }
  }

  if (!topology_set) s.topology = default_topology();
  // Instances and per-instance events inherit the scenario's service and,
  // for remove/overload, the node of the matching initial/deployed instance.
  for (auto& [ln, id] : instances) {
    id.service = s.spec.name;
    s.initial_instances.push_back(id);
  }
  auto find_node = [&](int ordinal) -> std::optional<NodeId> {
    for (const auto& id : s.initial_instances) {
      if (id.ordinal == ordinal) return id.node;
    }
    for (const auto& ev : s.timeline) {
      if (ev.action == TimelineEvent::Action::deploy_instance &&
          ev.instance.ordinal == ordinal) {
        return ev.instance.node;
      }
    }
    return std::nullopt;
  };
  for (auto& ev : s.timeline) {
    if (ev.action == TimelineEvent::Action::add_link_delay) continue;
    ev.instance.service = s.spec.name;
    if (ev.instance.node.name.empty()) {
      auto node = find_node(ev.instance.ordinal);
      if (!node) {
        diags.push_back("timeline references unknown instance ordinal " +
                        std::to_string(ev.instance.ordinal));
        continue;
      }
      ev.instance.node = *node;
    }
  }

  if (!diags.empty()) throw ScenarioError(std::move(diags));
  s.validate();
  return s;
}

}  // namespace qedge
