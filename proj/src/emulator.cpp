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

#include "qedge/emulator.hpp"

#include <algorithm>
#include <cstdio>
#include <deque>
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

const char* to_string(VertexKind kind) {
  switch (kind) {
    case VertexKind::node:
      return "node";
    case VertexKind::router:
      return "router";
    case VertexKind::device:
      return "device";
  }
  return "unknown";
}

std::optional<VertexKind> vertex_kind_from(const std::string& s) {
  if (s == "node") return VertexKind::node;
  if (s == "router") return VertexKind::router;
  if (s == "device") return VertexKind::device;
  return std::nullopt;
}

std::vector<std::string> split_tokens(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

}  // namespace

TopologyError::TopologyError(std::vector<std::string> diags)
    : std::runtime_error(join_lines(diags)), diagnostics(std::move(diags)) {}

void Topology::add_vertex(const std::string& name, VertexKind kind) {
  if (name.empty()) throw std::invalid_argument("vertex name must not be empty");
  if (index_.count(name) > 0) {
    throw std::invalid_argument("duplicate vertex " + name);
  }
  index_.emplace(name, vertices_.size());
  vertices_.push_back({name, kind});
}

void Topology::add_link(const std::string& a, const std::string& b,
                        Millis one_way_delay) {
  if (!has_vertex(a) || !has_vertex(b)) {
    throw std::invalid_argument("link endpoint unknown: " + a + " -- " + b);
  }
  if (a == b) throw std::invalid_argument("self-link on " + a);
  if (one_way_delay < 0) {
    throw std::invalid_argument("negative link delay on " + a + " -- " + b);
  }
  if (find_link(a, b) != nullptr) {
    throw std::invalid_argument("duplicate link " + a + " -- " + b);
  }
  links_.push_back({a, b, one_way_delay});
}

void Topology::add_link_delay(const std::string& a, const std::string& b,
                              Millis delta) {
  Link* link = find_link(a, b);
  if (link == nullptr) {
    throw std::invalid_argument("no link between " + a + " and " + b);
  }
  if (link->one_way_delay + delta < 0) {
    throw std::invalid_argument("link delay on " + a + " -- " + b +
                                " would become negative");
  }
  link->one_way_delay += delta;
}

bool Topology::has_vertex(const std::string& name) const {
  return index_.count(name) > 0;
}

const Vertex* Topology::vertex(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &vertices_[it->second];
}

std::size_t Topology::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw std::invalid_argument("unknown vertex " + name);
  }
  return it->second;
}

Link* Topology::find_link(const std::string& a, const std::string& b) {
  for (auto& link : links_) {
    if ((link.a == a && link.b == b) || (link.a == b && link.b == a)) {
      return &link;
    }
  }
  return nullptr;
}

void Topology::validate() const {
  std::vector<std::string> diags;
  if (vertices_.empty()) {
    throw TopologyError({"topology has no vertices"});
  }
  // Connectivity from vertex 0.
  std::vector<std::vector<std::size_t>> adj(vertices_.size());
  for (const auto& link : links_) {
    const auto ia = index_of(link.a);
    const auto ib = index_of(link.b);
    adj[ia].push_back(ib);
    adj[ib].push_back(ia);
  }
  std::vector<bool> seen(vertices_.size(), false);
  std::deque<std::size_t> queue{0};
  seen[0] = true;
  std::size_t reached = 0;
  while (!queue.empty()) {
    const auto v = queue.front();
    queue.pop_front();
    ++reached;
    for (auto n : adj[v]) {
      if (!seen[n]) {
        seen[n] = true;
        queue.push_back(n);
      }
    }
  }
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    if (!seen[i]) diags.push_back("vertex " + vertices_[i].name + " is disconnected");
  }
  if (reached == vertices_.size() && links_.size() != vertices_.size() - 1) {
    diags.push_back("topology contains a cycle; paths must be unique");
  }
  if (!diags.empty()) throw TopologyError(std::move(diags));
}

bool Topology::operator==(const Topology& other) const {
  auto vs = vertices_;
  auto ovs = other.vertices_;
  auto by_name = [](const Vertex& x, const Vertex& y) { return x.name < y.name; };
  std::sort(vs.begin(), vs.end(), by_name);
  std::sort(ovs.begin(), ovs.end(), by_name);
  if (vs != ovs) return false;

  auto normalize = [](std::vector<Link> ls) {
    for (auto& l : ls) {
      if (l.b < l.a) std::swap(l.a, l.b);
    }
    std::sort(ls.begin(), ls.end(), [](const Link& x, const Link& y) {
      return std::tie(x.a, x.b) < std::tie(y.a, y.b);
    });
    return ls;
  };
  return normalize(links_) == normalize(other.links_);
}

Topology default_topology() {
  Topology t;
  t.add_vertex("device", VertexKind::device);
  for (int i = 1; i <= 6; ++i) {
    t.add_vertex("worker-" + std::to_string(i), VertexKind::node);
  }
  t.add_vertex("master", VertexKind::node);
  t.add_vertex("r-far-a", VertexKind::router);
  t.add_vertex("r-far-b", VertexKind::router);
  t.add_vertex("r-near", VertexKind::router);
  t.add_vertex("r-cloud", VertexKind::router);

  // Far-edge LAN A: the device and worker-3 share a local network.
  t.add_link("device", "r-far-a", 0);
  t.add_link("worker-3", "r-far-a", 0);
  // Far-edge LAN B.
  t.add_link("worker-5", "r-far-b", 0);
  t.add_link("worker-6", "r-far-b", 0);
  // Near edge: worker-1 sits at the router, worker-2 and worker-4 hang off
  // it over extra 20 ms and 10 ms hops.
  t.add_link("worker-1", "r-near", 0);
  t.add_link("worker-2", "r-near", 20);
  t.add_link("worker-4", "r-near", 10);
  // Cloud.
  t.add_link("master", "r-cloud", 0);
  // Inter-router trunk links.
  t.add_link("r-far-a", "r-near", 20);
  t.add_link("r-far-b", "r-near", 20);
  t.add_link("r-near", "r-cloud", 50);
  t.validate();
  return t;
}

Millis one_way_latency(const Topology& t, const std::string& a,
                       const std::string& b) {
  const auto start = t.index_of(a);
  const auto goal = t.index_of(b);
  if (start == goal) return 0;

  // BFS over the tree; the unique path's delay sum is accumulated per vertex.
  std::vector<std::vector<std::pair<std::size_t, Millis>>> adj(
      t.vertices().size());
  for (const auto& link : t.links()) {
    const auto ia = t.index_of(link.a);
    const auto ib = t.index_of(link.b);
    adj[ia].emplace_back(ib, link.one_way_delay);
    adj[ib].emplace_back(ia, link.one_way_delay);
  }
  std::vector<Millis> dist(t.vertices().size(), -1);
  std::deque<std::size_t> queue{start};
  dist[start] = 0;
  while (!queue.empty()) {
    const auto v = queue.front();
    queue.pop_front();
    if (v == goal) return dist[v];
    for (const auto& [n, delay] : adj[v]) {
      if (dist[n] < 0) {
        dist[n] = dist[v] + delay;
        queue.push_back(n);
      }
    }
  }
  throw std::invalid_argument("no path between " + a + " and " + b);
}

Millis one_way_latency(const Topology& t, const NodeId& a, const NodeId& b) {
  return one_way_latency(t, a.name, b.name);
}

Topology load_topology(const std::string& config_text) {
  Topology t;
  std::vector<std::string> diags;
  enum class Section { none, vertices, links } section = Section::none;

  std::istringstream in(config_text);
  std::string raw;
  int line_no = 0;
  std::vector<std::tuple<int, std::string, std::string, long long>> links;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    std::string line = hash == std::string::npos ? raw : raw.substr(0, hash);
    const auto tokens = split_tokens(line);
    if (tokens.empty()) continue;
    auto complain = [&](const std::string& msg) {
      diags.push_back("line " + std::to_string(line_no) + ": " + msg);
    };
    if (tokens[0] == "[vertices]") {
      section = Section::vertices;
      continue;
    }
    if (tokens[0] == "[links]") {
      section = Section::links;
      continue;
    }
    switch (section) {
      case Section::none:
        complain("content before any section header");
        break;
      case Section::vertices: {
        if (tokens.size() != 2) {
          complain("expected '<name> <node|router|device>'");
          break;
        }
        const auto kind = vertex_kind_from(tokens[1]);
        if (!kind) {
          complain("unknown vertex kind '" + tokens[1] + "'");
          break;
        }
        try {
          t.add_vertex(tokens[0], *kind);
        } catch (const std::invalid_argument& e) {
          complain(e.what());
        }
        break;
      }
      case Section::links: {
        if (tokens.size() != 3) {
          complain("expected '<a> <b> <one-way-delay-ms>'");
          break;
        }
        long long delay = 0;
        try {
          std::size_t pos = 0;
          delay = std::stoll(tokens[2], &pos);
          if (pos != tokens[2].size()) throw std::invalid_argument("");
        } catch (const std::exception&) {
          complain("delay '" + tokens[2] + "' is not an integer");
          break;
        }
        links.emplace_back(line_no, tokens[0], tokens[1], delay);
        break;
      }
    }
  }
  for (const auto& [ln, a, b, delay] : links) {
    try {
      t.add_link(a, b, static_cast<Millis>(delay));
    } catch (const std::invalid_argument& e) {
      diags.push_back("line " + std::to_string(ln) + ": " + e.what());
    }
  }
  if (!diags.empty()) throw TopologyError(std::move(diags));
  t.validate();
  return t;
}

std::string dump_topology(const Topology& t) {
  std::string out;
  out += "# qedge topology: vertices and symmetric one-way link delays (ms)\n";
  out += "[vertices]\n";
  for (const auto& v : t.vertices()) {
    out += v.name;
    out += " ";
    out += to_string(v.kind);
    out += "\n";
  }
  out += "\n[links]\n";
  for (const auto& l : t.links()) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%lld",
                  static_cast<long long>(l.one_way_delay));
    out += l.a + " " + l.b + " " + buf + "\n";
  }
  return out;
}

Measurement simulate_request(const WorldState& world, const NodeId& proxy_node,
                             const InstanceId& target) {
  Measurement m;
  m.instance = target;
  m.at = world.clock;
  if (world.live_instances.count(target) == 0) {
    m.outcome = MeasurementOutcome::transport_error;
    m.response_time = 0;
    return m;
  }
  Millis processing = world.default_base_processing;
  if (auto it = world.processing.find(target); it != world.processing.end()) {
    processing = it->second.base_processing + it->second.overload_extra;
  }
  m.outcome = MeasurementOutcome::success;
  m.response_time =
      2 * one_way_latency(world.topology, proxy_node.name, target.node.name) +
      processing;
  return m;
}

AppliedEvent apply_event(WorldState& world, const TimelineEvent& ev) {
  AppliedEvent out;
  switch (ev.action) {
    case TimelineEvent::Action::deploy_instance: {
      if (world.live_instances.count(ev.instance) > 0) {
        throw std::invalid_argument("deploying already-live instance " +
                                    ev.instance.label());
      }
      if (!world.topology.has_vertex(ev.instance.node.name)) {
        throw std::invalid_argument("deploy target node " +
                                    ev.instance.node.name + " is unknown");
      }
      world.live_instances.insert(ev.instance);
      world.processing.try_emplace(
          ev.instance,
          ProcessingModel{ev.instance, world.default_base_processing, 0});
      out.cluster_event = ClusterEvent{ClusterEventKind::instance_added,
                                       ev.instance, world.clock};
      break;
    }
    case TimelineEvent::Action::remove_instance: {
      if (world.live_instances.erase(ev.instance) == 0) {
        throw std::invalid_argument("removing non-live instance " +
                                    ev.instance.label());
      }
      out.cluster_event = ClusterEvent{ClusterEventKind::instance_removed,
                                       ev.instance, world.clock};
      break;
    }
    case TimelineEvent::Action::set_overload: {
      auto it = world.processing
                    .try_emplace(ev.instance,
                                 ProcessingModel{ev.instance,
                                                 world.default_base_processing,
                                                 0})
                    .first;
      it->second.overload_extra = ev.extra_ms;
      // Silent: routers learn of this only through measurements or probes.
      break;
    }
    case TimelineEvent::Action::add_link_delay: {
      world.topology.add_link_delay(ev.link_a, ev.link_b, ev.delta_ms);
      // Silent as well.
      break;
    }
  }
  return out;
}

}  // namespace qedge
