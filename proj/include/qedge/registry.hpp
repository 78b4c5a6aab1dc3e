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

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "qedge/core.hpp"

namespace qedge {

/// One backend: a service instance plus the network address it serves on.
struct RegistryEntry {
  InstanceId instance;
  std::string address;  // host:port

  auto operator<=>(const RegistryEntry&) const = default;
};

/// Point-in-time registry contents, sorted and unique by instance.
struct RegistrySnapshot {
  std::vector<RegistryEntry> entries;

  const RegistryEntry* find(const InstanceId& id) const;

  bool operator==(const RegistrySnapshot&) const = default;
};

struct RegistryError : std::runtime_error {
  explicit RegistryError(std::vector<std::string> diagnostics);
  std::vector<std::string> diagnostics;
};

/// Parses the registry file format: one `service instance-id node host:port`
/// line per backend, whitespace-separated, '#' comments. The instance-id is
/// either a bare ordinal or any token ending in "-<ordinal>". All problems
/// are collected into one RegistryError with line diagnostics.
RegistrySnapshot parse_registry_text(const std::string& text);

/// Instance-added / instance-removed diffs between two snapshots, removals
/// first, both in instance order. An address change shows up as a removal
/// followed by an addition so the backend gets re-probed.
std::vector<ClusterEvent> diff_registry(const RegistrySnapshot& before,
                                        const RegistrySnapshot& after,
                                        Tick now);

/// Polls a registry file and reports diffs. Unreadable or malformed reads
/// are retried with backoff; the stream never closes. poll_once() lets tests
/// drive the watcher without the background thread.
class RegistryWatcher {
 public:
  /// Called with the new snapshot and the events that lead to it from the
  /// previous one. Never called with an empty event list.
  using ChangeFn = std::function<void(const RegistrySnapshot& snapshot,
                                      const std::vector<ClusterEvent>& events)>;

  RegistryWatcher(std::filesystem::path file, ChangeFn on_change,
                  std::chrono::milliseconds poll_interval);
  ~RegistryWatcher();

  RegistryWatcher(const RegistryWatcher&) = delete;
  RegistryWatcher& operator=(const RegistryWatcher&) = delete;

  void start();
  void stop();

  /// Reads the file once; returns false when it was unreadable or malformed.
  bool poll_once();

  const RegistrySnapshot& current() const { return current_; }

 private:
  void loop();
  Tick now_ms() const;

  std::filesystem::path file_;
  ChangeFn on_change_;
  std::chrono::milliseconds poll_interval_;
  RegistrySnapshot current_;
  std::string last_text_;
  int consecutive_failures_ = 0;
  bool warned_unreadable_ = false;
  std::atomic<bool> running_{false};
  std::thread thread_;
  std::chrono::steady_clock::time_point started_ =
      std::chrono::steady_clock::now();
};

}  // namespace qedge
