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

#include "qedge/proxy_server.hpp"

#include <cctype>
#include <cmath>
#include <iostream>
#include <limits>
#include <map>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "qedge/registry.hpp"

namespace qedge {

namespace {

using nlohmann::json;

struct Address {
  std::string host;
  int port = 0;
};

std::optional<Address> split_address(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 >= address.size()) {
    return std::nullopt;
  }
  try {
    return Address{address.substr(0, colon),
                   std::stoi(address.substr(colon + 1))};
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

const char* to_string(EstimateSource source) {
  return source == EstimateSource::measured ? "measured"
                                            : "initial-approximation";
}

// Hop-scoped or proxy-internal headers that must not be forwarded.
bool skip_forward_header(const std::string& name,
                         const std::string& service_header) {
  static const char* kSkip[] = {"Host",       "Connection",
                                "Content-Length", "LOCAL_ADDR",
                                "LOCAL_PORT", "REMOTE_ADDR",
                                "REMOTE_PORT"};
  for (const char* s : kSkip) {
    if (httplib::detail::compare_case_ignore(name, s)) return true;
  }
  return httplib::detail::compare_case_ignore(name, service_header);
}

}  // namespace

std::optional<ServiceName> parse_target(std::string_view raw_header_value) {
  std::size_t begin = 0;
  std::size_t end = raw_header_value.size();
  while (begin < end &&
         std::isspace(static_cast<unsigned char>(raw_header_value[begin]))) {
    ++begin;
  }
  while (end > begin &&
         std::isspace(static_cast<unsigned char>(raw_header_value[end - 1]))) {
    --end;
  }
  if (begin == end) return std::nullopt;
  return ServiceName{std::string(raw_header_value.substr(begin, end - begin))};
}

struct ProxyServer::Impl {
  explicit Impl(ProxyConfig cfg) : config(std::move(cfg)) {
    if (config.services.empty()) {
      throw std::invalid_argument("proxy needs at least one service spec");
    }
  }

  ~Impl() { shutdown(); }

  ProxyConfig config;
  httplib::Server server;
  std::thread server_thread;
  int bound_port = 0;
  std::chrono::steady_clock::time_point started =
      std::chrono::steady_clock::now();

  // Lock order: mu before addr_mu, never the reverse. mu serializes the
  // router and the request counter; addr_mu is a leaf guarding the address
  // table so estimate probes (which fire under mu via cluster events) can
  // resolve addresses without re-entering mu. Neither lock is held across
  // backend I/O on the request path.
  mutable std::mutex mu;
  mutable std::mutex addr_mu;
  std::unique_ptr<Router> router;
  QedgeRouter* qedge_router = nullptr;
  std::map<InstanceId, std::string> addresses;
  std::size_t request_counter = 0;

  std::unique_ptr<RegistryWatcher> watcher;

  Tick now_ms() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now() - started)
        .count();
  }

  // One HEAD round trip against the backend; the initial estimate for every
  // newly discovered instance. Unreachable backends estimate as +inf, which
  // keeps them out of the pool until they answer a probe.
  std::optional<Millis> probe_backend(const InstanceId& id) {
    std::string address;
    {
      std::lock_guard<std::mutex> lock(addr_mu);
      auto it = addresses.find(id);
      if (it == addresses.end()) return std::nullopt;
      address = it->second;
    }
    const auto split = split_address(address);
    if (!split) return std::nullopt;
    httplib::Client cli(split->host, split->port);
    cli.set_connection_timeout(0, static_cast<time_t>(config.probe_timeout.count()) * 1000);
    cli.set_read_timeout(0, static_cast<time_t>(config.probe_timeout.count()) * 1000);
    const auto begin = std::chrono::steady_clock::now();
    auto res = cli.Head("/");
    if (!res) return std::nullopt;
    const auto elapsed = std::chrono::steady_clock::now() - begin;
    return std::chrono::duration<double, std::milli>(elapsed).count();
  }

  void build_router() {
    ClusterSnapshot snapshot;
    for (const auto& spec : config.services) {
      snapshot.services.try_emplace(spec.name);
    }
    EstimateFn estimate = [this](const InstanceId& id) -> Millis {
      auto rtt = probe_backend(id);
      return rtt ? *rtt : std::numeric_limits<Millis>::infinity();
    };
    ProbeFn probe = [this](const InstanceId& id) { return probe_backend(id); };
    switch (config.router.policy) {
      case RouterKind::Policy::qedge: {
        QedgeRouter::Options opts;
        opts.pool = config.pool;
        opts.fallback_on_empty = config.fallback_on_empty_pool;
        auto owned = std::make_unique<QedgeRouter>(
            config.services, snapshot, estimate, now_ms(), opts);
        qedge_router = owned.get();
        router = std::move(owned);
        break;
      }
      case RouterKind::Policy::nodeport:
        router = std::make_unique<NodePortRouter>(snapshot);
        break;
      case RouterKind::Policy::proximity: {
        ProximityRouter::Options opts;
        opts.alpha = config.router.alpha;
        opts.refresh_period = config.router.refresh_period;
        router = std::make_unique<ProximityRouter>(snapshot, probe, opts);
        break;
      }
    }
  }

  void handle_registry_change(const RegistrySnapshot& snapshot,
                              const std::vector<ClusterEvent>& events) {
    // Addresses must be visible before added events so the initial probe can
    // reach the backend; removed instances lose their address afterwards.
    {
      std::lock_guard<std::mutex> lock(addr_mu);
      for (const auto& entry : snapshot.entries) {
        addresses[entry.instance] = entry.address;
      }
    }
    for (const auto& ev : events) {
      std::lock_guard<std::mutex> lock(mu);
      router->on_cluster_event(ev);
    }
    {
      std::lock_guard<std::mutex> lock(addr_mu);
      for (auto it = addresses.begin(); it != addresses.end();) {
        if (snapshot.find(it->first) == nullptr) {
          it = addresses.erase(it);
        } else {
          ++it;
        }
      }
    }
  }

  void handle(const httplib::Request& req, httplib::Response& res) {
    if (!req.has_header(config.service_header)) {
      res.status = 400;
      res.set_content(json{{"error", "missing-service-header"},
                           {"header", config.service_header}}
                          .dump(),
                      "application/json");
      return;
    }
    const auto target =
        parse_target(req.get_header_value(config.service_header));
    if (!target) {
      res.status = 400;
      res.set_content(json{{"error", "empty-service-header"},
                           {"header", config.service_header}}
                          .dump(),
                      "application/json");
      return;
    }

    RouteResult decision;
    std::string address;
    {
      std::lock_guard<std::mutex> lock(mu);
      router->before_request(request_counter++, now_ms());
      decision = router->route(*target, now_ms());
    }
    if (decision.ok()) {
      std::lock_guard<std::mutex> lock(addr_mu);
      auto it = addresses.find(decision.decision->instance);
      if (it != addresses.end()) address = it->second;
    }
    if (!decision.ok()) {
      const bool unknown = decision.error == RouteError::unknown_service;
      res.status = unknown ? 404 : 503;
      res.set_content(json{{"error", to_string(decision.error)},
                           {"service", target->name}}
                          .dump(),
                      "application/json");
      return;
    }
    const InstanceId instance = decision.decision->instance;
    const auto split = split_address(address);
    if (!split) {
      res.status = 503;
      res.set_content(json{{"error", "no-backend-address"},
                           {"instance", instance.label()}}
                          .dump(),
                      "application/json");
      return;
    }

    httplib::Client cli(split->host, split->port);
    cli.set_connection_timeout(0, static_cast<time_t>(config.backend_timeout.count()) * 1000);
    cli.set_read_timeout(0, static_cast<time_t>(config.backend_timeout.count()) * 1000);

    httplib::Request forward;
    forward.method = req.method;
    forward.path = req.params.empty()
                       ? req.path
                       : httplib::append_query_params(req.path, req.params);
    forward.body = req.body;
    for (const auto& [name, value] : req.headers) {
      if (!skip_forward_header(name, config.service_header)) {
        forward.headers.emplace(name, value);
      }
    }

    const auto begin = std::chrono::steady_clock::now();
    httplib::Response backend_res;
    httplib::Error err = httplib::Error::Success;
    const bool sent = cli.send(forward, backend_res, err);
    const Millis rtt = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - begin)
                           .count();

    Measurement m;
    m.instance = instance;
    m.at = now_ms();
    if (sent) {
      m.outcome = MeasurementOutcome::success;
      m.response_time = rtt;
    } else {
      m.outcome = MeasurementOutcome::transport_error;
    }
    {
      std::lock_guard<std::mutex> lock(mu);
      router->on_measurement(m);
    }

    if (!sent) {
      res.status = 502;
      res.set_content(json{{"error", "backend-unreachable"},
                           {"instance", instance.label()},
                           {"detail", httplib::to_string(err)}}
                          .dump(),
                      "application/json");
      res.set_header("X-Qedge-Instance", instance.label());
      return;
    }

    res.status = backend_res.status;
    std::string content_type = backend_res.get_header_value("Content-Type");
    if (content_type.empty()) content_type = "application/octet-stream";
    res.set_content(backend_res.body, content_type);
    res.set_header("X-Qedge-Instance", instance.label());
    char rtt_buf[32];
    std::snprintf(rtt_buf, sizeof(rtt_buf), "%.3f", rtt);
    res.set_header("X-Qedge-Rtt-Ms", rtt_buf);
  }

  std::string pools_json_locked() const {
    json doc;
    doc["router"] = config.router.label();
    json services = json::object();
    for (const auto& spec : config.services) {
      json svc;
      svc["slo_ms"] = spec.requirement.max_response_time;
      if (qedge_router != nullptr) {
        const QoSPool* pool = qedge_router->pool(spec.name);
        json members = json::array();
        json instances = json::object();
        if (pool != nullptr) {
          for (const auto& id : pool->members) members.push_back(id.label());
          std::lock_guard<std::mutex> addr_lock(addr_mu);
          for (const auto& [id, h] : pool->histories) {
            json inst;
            inst["node"] = id.node.name;
            auto it = addresses.find(id);
            inst["address"] = it == addresses.end() ? "" : it->second;
            const Millis est = h.estimate.predicted_response_time;
            if (std::isfinite(est)) {
              inst["estimate_ms"] = est;
            } else {
              inst["estimate_ms"] = nullptr;  // unreachable at last probe
            }
            inst["samples"] = h.estimate.sample_count;
            inst["violations"] = h.consecutive_violations;
            inst["member"] = pool->is_member(id);
            inst["source"] = to_string(h.estimate.source);
            instances[id.label()] = std::move(inst);
          }
        }
        svc["members"] = std::move(members);
        svc["instances"] = std::move(instances);
      }
      services[spec.name.name] = std::move(svc);
    }
    doc["services"] = std::move(services);
    return doc.dump(2);
  }

  void shutdown() {
    if (watcher) watcher->stop();
    if (server.is_running()) server.stop();
    if (server_thread.joinable()) server_thread.join();
  }
};

ProxyServer::ProxyServer(ProxyConfig config)
    : impl_(std::make_unique<Impl>(std::move(config))) {}

ProxyServer::~ProxyServer() = default;

void ProxyServer::start() {
  Impl& impl = *impl_;
  impl.build_router();

  impl.watcher = std::make_unique<RegistryWatcher>(
      impl.config.registry_file,
      [this](const RegistrySnapshot& snapshot,
             const std::vector<ClusterEvent>& events) {
        impl_->handle_registry_change(snapshot, events);
      },
      impl.config.poll_interval);
  if (!impl.watcher->poll_once() && !impl.config.watch_registry) {
    throw std::runtime_error("registry file " +
                             impl.config.registry_file.string() +
                             " is unreadable");
  }
  if (impl.config.watch_registry) impl.watcher->start();

  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    impl_->handle(req, res);
  };
  impl.server.Get("/qedge/pools",
                  [this](const httplib::Request&, httplib::Response& res) {
                    res.set_content(pools_json(), "application/json");
                  });
  const char* any = R"(.*)";
  impl.server.Get(any, handler);
  impl.server.Post(any, handler);
  impl.server.Put(any, handler);
  impl.server.Patch(any, handler);
  impl.server.Delete(any, handler);
  impl.server.Options(any, handler);

  if (impl.config.bind_port == 0) {
    impl.bound_port = impl.server.bind_to_any_port(impl.config.bind_host);
    if (impl.bound_port < 0) {
      throw std::runtime_error("cannot bind " + impl.config.bind_host);
    }
  } else {
    if (!impl.server.bind_to_port(impl.config.bind_host,
                                  impl.config.bind_port)) {
      throw std::runtime_error("cannot bind " + impl.config.bind_host + ":" +
                               std::to_string(impl.config.bind_port));
    }
    impl.bound_port = impl.config.bind_port;
  }
  impl.server_thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl.server.wait_until_ready();
}

void ProxyServer::stop() { impl_->shutdown(); }

void ProxyServer::add_backend(const InstanceId& instance,
                              const std::string& address) {
  if (impl_->router == nullptr) {
    throw std::logic_error("add_backend requires a started server");
  }
  {
    std::lock_guard<std::mutex> lock(impl_->addr_mu);
    impl_->addresses[instance] = address;
  }
  std::lock_guard<std::mutex> lock(impl_->mu);
  impl_->router->on_cluster_event(
      {ClusterEventKind::instance_added, instance, impl_->now_ms()});
}

void ProxyServer::remove_backend(const InstanceId& instance) {
  if (impl_->router == nullptr) {
    throw std::logic_error("remove_backend requires a started server");
  }
  {
    std::lock_guard<std::mutex> lock(impl_->mu);
    impl_->router->on_cluster_event(
        {ClusterEventKind::instance_removed, instance, impl_->now_ms()});
  }
  std::lock_guard<std::mutex> lock(impl_->addr_mu);
  impl_->addresses.erase(instance);
}

void ProxyServer::wait() {
  if (impl_->server_thread.joinable()) impl_->server_thread.join();
}

int ProxyServer::port() const { return impl_->bound_port; }

std::string ProxyServer::pools_json() const {
  std::lock_guard<std::mutex> lock(impl_->mu);
  return impl_->pools_json_locked();
}

}  // namespace qedge
