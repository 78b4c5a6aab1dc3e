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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <memory>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "qedge/proxy_server.hpp"

using namespace qedge;
using nlohmann::json;

namespace {

struct StubBackend {
  explicit StubBackend(std::string reply) : reply_text(std::move(reply)) {
    server.Get("/", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(reply_text, "text/plain");
    });
    server.Post("/ingest",
                [this](const httplib::Request& req, httplib::Response& res) {
                  res.set_content(reply_text + ":" + req.body, "text/plain");
                });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~StubBackend() { stop(); }
  void stop() {
    if (server.is_running()) server.stop();
    if (thread.joinable()) thread.join();
  }
  std::string address() const { return "127.0.0.1:" + std::to_string(port); }

  std::string reply_text;
  httplib::Server server;
  int port = 0;
  std::thread thread;
};

struct TempRegistry {
  TempRegistry() {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("qedge-proxy-test-" + std::to_string(::getpid()) + "-" +
            std::to_string(counter++) + ".txt");
    std::ofstream(path) << "";
  }
  ~TempRegistry() { std::filesystem::remove(path); }
  void write(const std::string& text) const { std::ofstream(path) << text; }
  std::filesystem::path path;
};

ProxyConfig base_config(const TempRegistry& registry) {
  ProxyConfig config;
  config.services = {ServiceSpec{ServiceName{"dps"}, {200.0}}};
  config.registry_file = registry.path;
  config.poll_interval = std::chrono::milliseconds(25);
  return config;
}

// Polls the admin endpoint until the predicate holds or the deadline passes.
bool wait_for_pools(ProxyServer& proxy,
                    const std::function<bool(const json&)>& predicate,
                    std::chrono::milliseconds deadline =
                        std::chrono::milliseconds(5000)) {
  const auto until = std::chrono::steady_clock::now() + deadline;
  while (std::chrono::steady_clock::now() < until) {
    const auto doc = json::parse(proxy.pools_json());
    if (predicate(doc)) return true;
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  return false;
}

std::size_t member_count(const json& doc) {
  return doc["services"]["dps"]["members"].size();
}

}  // namespace

TEST_CASE("parse_target trims and validates the header value") {
  REQUIRE(parse_target("dps").has_value());
  CHECK(parse_target("dps")->name == "dps");
  CHECK(parse_target("  dps \t")->name == "dps");
  CHECK(parse_target("DPS")->name == "DPS");  // case preserved
  CHECK_FALSE(parse_target("").has_value());
  CHECK_FALSE(parse_target("   ").has_value());
}

TEST_CASE("the proxy validates requests before routing") {
  TempRegistry registry;
  ProxyServer proxy(base_config(registry));
  proxy.start();
  httplib::Client cli("127.0.0.1", proxy.port());

  SUBCASE("a missing service header is a 400") {
    const auto res = cli.Get("/");
    REQUIRE(res);
    CHECK(res->status == 400);
    CHECK(json::parse(res->body)["error"] == "missing-service-header");
  }

  SUBCASE("a blank service header is a 400") {
    const auto res = cli.Get("/", {{"X-Qedge-Service", "   "}});
    REQUIRE(res);
    CHECK(res->status == 400);
  }

  SUBCASE("an unknown service is a 404") {
    const auto res = cli.Get("/", {{"X-Qedge-Service", "nope"}});
    REQUIRE(res);
    CHECK(res->status == 404);
    CHECK(json::parse(res->body)["error"] == "unknown-service");
  }

  SUBCASE("an empty pool is a 503 with a machine-readable reason") {
    const auto res = cli.Get("/", {{"X-Qedge-Service", "dps"}});
    REQUIRE(res);
    CHECK(res->status == 503);
    const auto body = json::parse(res->body);
    CHECK(body["error"] == "no-eligible-instance");
    CHECK(body["service"] == "dps");
  }

  proxy.stop();
}

TEST_CASE("the proxy forwards, measures and rotates over the pool") {
  StubBackend a("alpha");
  StubBackend b("bravo");
  TempRegistry registry;
  registry.write("dps dps-1 node-a " + a.address() + "\n" +
                 "dps dps-2 node-b " + b.address() + "\n");

  ProxyServer proxy(base_config(registry));
  proxy.start();
  REQUIRE(wait_for_pools(proxy, [](const json& doc) {
    return member_count(doc) == 2;
  }));

  httplib::Client cli("127.0.0.1", proxy.port());
  std::map<std::string, int> replies;
  for (int i = 0; i < 6; ++i) {
    const auto res = cli.Post("/ingest", {{"X-Qedge-Service", "dps"}},
                              "reading-42", "text/plain");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(res->has_header("X-Qedge-Instance"));
    CHECK(res->has_header("X-Qedge-Rtt-Ms"));
    CHECK(res->body.find(":reading-42") != std::string::npos);
    ++replies[res->body.substr(0, res->body.find(':'))];
  }
  CHECK(replies["alpha"] == 3);  // equal-weight rotation across the pool
  CHECK(replies["bravo"] == 3);

  // The admin endpoint reflects measured estimates.
  const auto doc = json::parse(proxy.pools_json());
  const auto& instances = doc["services"]["dps"]["instances"];
  CHECK(instances["dps-1"]["samples"].get<int>() >= 1);
  CHECK(instances["dps-1"]["member"].get<bool>());
  CHECK(instances["dps-1"]["source"] == "measured");

  proxy.stop();
}

TEST_CASE("a dead backend is ejected after one transport error") {
  StubBackend a("alpha");
  auto doomed = std::make_unique<StubBackend>("doomed");
  TempRegistry registry;
  registry.write("dps dps-1 node-a " + a.address() + "\n" +
                 "dps dps-2 node-b " + doomed->address() + "\n");

  auto config = base_config(registry);
  config.backend_timeout = std::chrono::milliseconds(300);
  ProxyServer proxy(std::move(config));
  proxy.start();
  REQUIRE(wait_for_pools(proxy, [](const json& doc) {
    return member_count(doc) == 2;
  }));

  doomed->stop();

  httplib::Client cli("127.0.0.1", proxy.port());
  int gateway_errors = 0;
  for (int i = 0; i < 4 && gateway_errors == 0; ++i) {
    const auto res = cli.Get("/", {{"X-Qedge-Service", "dps"}});
    REQUIRE(res);
    if (res->status == 502) {
      ++gateway_errors;
      CHECK(json::parse(res->body)["error"] == "backend-unreachable");
    }
  }
  CHECK(gateway_errors == 1);
  REQUIRE(wait_for_pools(proxy, [](const json& doc) {
    return member_count(doc) == 1;
  }));

  for (int i = 0; i < 10; ++i) {
    const auto res = cli.Get("/", {{"X-Qedge-Service", "dps"}});
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(res->get_header_value("X-Qedge-Instance") == "dps-1");
  }
  proxy.stop();
}

TEST_CASE("a registry update brings an empty pool back to life") {
  StubBackend a("alpha");
  TempRegistry registry;

  ProxyServer proxy(base_config(registry));
  proxy.start();
  httplib::Client cli("127.0.0.1", proxy.port());

  auto res = cli.Get("/", {{"X-Qedge-Service", "dps"}});
  REQUIRE(res);
  CHECK(res->status == 503);

  registry.write("dps dps-1 node-a " + a.address() + "\n");
  REQUIRE(wait_for_pools(proxy, [](const json& doc) {
    return member_count(doc) == 1;
  }));

  res = cli.Get("/", {{"X-Qedge-Service", "dps"}});
  REQUIRE(res);
  CHECK(res->status == 200);  // recovered without a restart
  proxy.stop();
}
