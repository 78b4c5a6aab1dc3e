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

#include <filesystem>
#include <fstream>

#include "qedge/registry.hpp"

using namespace qedge;

namespace {

InstanceId dps(int ordinal, const std::string& node) {
  return InstanceId{ServiceName{"dps"}, ordinal, NodeId{node}};
}

struct TempFile {
  TempFile() {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("qedge-registry-test-" + std::to_string(::getpid()) + "-" +
            std::to_string(counter++) + ".txt");
  }
  ~TempFile() { std::filesystem::remove(path); }
  void write(const std::string& text) const {
    std::ofstream f(path);
    f << text;
  }
  std::filesystem::path path;
};

}  // namespace

TEST_CASE("parse_registry_text reads backend lines and skips comments") {
  const auto snap = parse_registry_text(
      "# backends for the data processing service\n"
      "\n"
      "dps dps-1 worker-1 127.0.0.1:9001\n"
      "dps 2 worker-2 127.0.0.1:9002   # bare ordinal form\n"
      "other other-1 worker-1 10.0.0.8:80\n");
  REQUIRE(snap.entries.size() == 3);
  CHECK(snap.find(dps(1, "worker-1")) != nullptr);
  CHECK(snap.find(dps(1, "worker-1"))->address == "127.0.0.1:9001");
  CHECK(snap.find(dps(2, "worker-2"))->address == "127.0.0.1:9002");
}

TEST_CASE("parse_registry_text reports every malformed line") {
  try {
    parse_registry_text(
        "dps dps-1 worker-1 127.0.0.1:9001\n"
        "dps nonsense worker-2 127.0.0.1:9002\n"
        "dps dps-3 worker-3 not-an-address\n"
        "dps dps-1 worker-1 127.0.0.1:9009\n"
        "short line\n");
    FAIL("expected RegistryError");
  } catch (const RegistryError& e) {
    REQUIRE(e.diagnostics.size() == 4);
    CHECK(e.diagnostics[0].find("line 2") != std::string::npos);
    CHECK(e.diagnostics[1].find("line 3") != std::string::npos);
    CHECK(e.diagnostics[2].find("duplicate") != std::string::npos);
    CHECK(e.diagnostics[3].find("line 5") != std::string::npos);
  }
}

TEST_CASE("diff_registry emits removals before additions") {
  const auto before = parse_registry_text(
      "dps dps-1 worker-1 127.0.0.1:9001\n"
      "dps dps-2 worker-2 127.0.0.1:9002\n");
  const auto after = parse_registry_text(
      "dps dps-2 worker-2 127.0.0.1:9002\n"
      "dps dps-3 worker-3 127.0.0.1:9003\n");
  const auto events = diff_registry(before, after, 5);
  REQUIRE(events.size() == 2);
  CHECK(events[0].kind == ClusterEventKind::instance_removed);
  CHECK(events[0].instance == dps(1, "worker-1"));
  CHECK(events[1].kind == ClusterEventKind::instance_added);
  CHECK(events[1].instance == dps(3, "worker-3"));
  CHECK(events[0].at == 5);
}

TEST_CASE("diff_registry treats an address change as remove plus add") {
  const auto before = parse_registry_text("dps dps-1 worker-1 127.0.0.1:9001\n");
  const auto after = parse_registry_text("dps dps-1 worker-1 127.0.0.1:9999\n");
  const auto events = diff_registry(before, after, 0);
  REQUIRE(events.size() == 2);
  CHECK(events[0].kind == ClusterEventKind::instance_removed);
  CHECK(events[1].kind == ClusterEventKind::instance_added);
}

TEST_CASE("diff_registry of identical snapshots is empty") {
  const auto snap = parse_registry_text("dps dps-1 worker-1 127.0.0.1:9001\n");
  CHECK(diff_registry(snap, snap, 0).empty());
}

TEST_CASE("a truncated registry removes every known instance") {
  const auto before = parse_registry_text(
      "dps dps-1 worker-1 127.0.0.1:9001\n"
      "dps dps-2 worker-2 127.0.0.1:9002\n"
      "dps dps-3 worker-3 127.0.0.1:9003\n");
  const auto events = diff_registry(before, parse_registry_text(""), 0);
  REQUIRE(events.size() == 3);
  for (const auto& ev : events) {
    CHECK(ev.kind == ClusterEventKind::instance_removed);
  }
}

TEST_CASE("the watcher emits diffs as the file evolves") {
  TempFile file;
  std::vector<ClusterEvent> seen;
  RegistryWatcher watcher(
      file.path,
      [&seen](const RegistrySnapshot&, const std::vector<ClusterEvent>& evs) {
        seen.insert(seen.end(), evs.begin(), evs.end());
      },
      std::chrono::milliseconds(10));

  SUBCASE("a line gained is one added event") {
    file.write("dps dps-1 worker-1 127.0.0.1:9001\n");
    CHECK(watcher.poll_once());
    REQUIRE(seen.size() == 1);
    CHECK(seen[0].kind == ClusterEventKind::instance_added);

    file.write(
        "dps dps-1 worker-1 127.0.0.1:9001\n"
        "dps dps-2 worker-2 127.0.0.1:9002\n");
    CHECK(watcher.poll_once());
    REQUIRE(seen.size() == 2);
    CHECK(seen[1].kind == ClusterEventKind::instance_added);
    CHECK(seen[1].instance == dps(2, "worker-2"));
  }

  SUBCASE("an unchanged re-read emits nothing") {
    file.write("dps dps-1 worker-1 127.0.0.1:9001\n");
    CHECK(watcher.poll_once());
    CHECK(watcher.poll_once());
    CHECK(watcher.poll_once());
    CHECK(seen.size() == 1);
  }

  SUBCASE("truncation to empty removes all known instances") {
    file.write(
        "dps dps-1 worker-1 127.0.0.1:9001\n"
        "dps dps-2 worker-2 127.0.0.1:9002\n");
    CHECK(watcher.poll_once());
    seen.clear();
    file.write("");
    CHECK(watcher.poll_once());
    REQUIRE(seen.size() == 2);
    CHECK(seen[0].kind == ClusterEventKind::instance_removed);
    CHECK(seen[1].kind == ClusterEventKind::instance_removed);
  }

  SUBCASE("an unreadable file keeps the stream open") {
    file.write("dps dps-1 worker-1 127.0.0.1:9001\n");
    CHECK(watcher.poll_once());
    std::filesystem::remove(file.path);
    CHECK_FALSE(watcher.poll_once());
    CHECK_FALSE(watcher.poll_once());
    CHECK(watcher.current().entries.size() == 1);  // last good state retained

    file.write(
        "dps dps-1 worker-1 127.0.0.1:9001\n"
        "dps dps-2 worker-2 127.0.0.1:9002\n");
    CHECK(watcher.poll_once());
    REQUIRE(seen.size() == 2);
    CHECK(seen[1].instance == dps(2, "worker-2"));
  }

  SUBCASE("a malformed rewrite is ignored until fixed") {
    file.write("dps dps-1 worker-1 127.0.0.1:9001\n");
    CHECK(watcher.poll_once());
    file.write("complete garbage\n");
    CHECK_FALSE(watcher.poll_once());
    CHECK(watcher.current().entries.size() == 1);
    file.write("dps dps-1 worker-1 127.0.0.1:9001\n");
    CHECK(watcher.poll_once());
    CHECK(seen.size() == 1);  // back to the known state: no new events
  }
}
