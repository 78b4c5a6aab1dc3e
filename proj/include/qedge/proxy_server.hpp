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

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qedge/core.hpp"
#include "qedge/pool.hpp"
#include "qedge/routing.hpp"

namespace qedge {

/// Extracts the target service from the routing header's raw value:
/// surrounding whitespace is trimmed, case is preserved. nullopt when the
/// value is empty or blank.
std::optional<ServiceName> parse_target(std::string_view raw_header_value);

struct ProxyConfig {
  std::string bind_host = "127.0.0.1";
  int bind_port = 0;  // 0 picks any free port
  std::vector<ServiceSpec> services;
  std::filesystem::path registry_file;
  /// Keep polling the registry file for changes; one initial load otherwise.
  bool watch_registry = true;
  std::chrono::milliseconds poll_interval{1000};
  RouterKind router = RouterKind::qedge();
  PoolConfig pool;
  bool fallback_on_empty_pool = false;
  /// Request header naming the target service.
  std::string service_header = "X-Qedge-Service";
  std::chrono::milliseconds backend_timeout{2000};
  std::chrono::milliseconds probe_timeout{1000};
};

/// Wire-level reverse proxy in front of the routing engine: resolves the
/// target service from the request header, forwards to the instance picked
/// by the configured policy, relays the response, and feeds the measured
/// response time back into the engine. Backends come from the registry file.
class ProxyServer {
 public:
  explicit ProxyServer(ProxyConfig config);
  ~ProxyServer();

  ProxyServer(const ProxyServer&) = delete;
  ProxyServer& operator=(const ProxyServer&) = delete;

  /// Binds and serves on a background thread. Throws std::runtime_error when
  /// the address cannot be bound or a non-watched registry is unreadable.
  void start();
  void stop();
  /// Blocks until stop() is called from elsewhere (CLI serve mode).
  void wait();

  int port() const;

  /// In-process registry source: registers or withdraws a backend directly,
  /// bypassing the file watcher. For embedding the proxy next to an emulator
  /// or a custom discovery mechanism; safe to mix with a watched file, which
  /// only ever withdraws entries it announced itself.
  void add_backend(const InstanceId& instance, const std::string& address);
  void remove_backend(const InstanceId& instance);

  /// The same JSON document GET /qedge/pools serves.
  std::string pools_json() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace qedge
