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

#include "qedge/registry.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iostream>
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

bool all_digits(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isdigit(c) != 0;
  });
}

// "3" or "dps-3" -> 3; anything else fails.
std::optional<int> parse_ordinal(const std::string& token) {
  std::string digits = token;
  if (!all_digits(digits)) {
    const auto dash = token.rfind('-');
    if (dash == std::string::npos) return std::nullopt;
    digits = token.substr(dash + 1);
    if (!all_digits(digits)) return std::nullopt;
  }
  try {
    const int ordinal = std::stoi(digits);
    return ordinal > 0 ? std::optional<int>(ordinal) : std::nullopt;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

bool valid_address(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos || colon == 0 ||
      colon + 1 >= address.size()) {
    return false;
  }
  return all_digits(address.substr(colon + 1));
}

}  // namespace

RegistryError::RegistryError(std::vector<std::string> diags)
    : std::runtime_error(join_lines(diags)), diagnostics(std::move(diags)) {}

const RegistryEntry* RegistrySnapshot::find(const InstanceId& id) const {
  for (const auto& entry : entries) {
    if (entry.instance == id) return &entry;
  }
  return nullptr;
}

RegistrySnapshot parse_registry_text(const std::string& text) {
  RegistrySnapshot snapshot;
  std::vector<std::string> diags;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
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
    if (tok.size() != 4) {
      complain("expected 'service instance-id node host:port'");
      continue;
    }
    const auto ordinal = parse_ordinal(tok[1]);
    if (!ordinal) {
      complain("instance-id '" + tok[1] +
               "' must be an ordinal or end in '-<ordinal>'");
      continue;
    }
    if (!valid_address(tok[3])) {
      complain("address '" + tok[3] + "' is not host:port");
      continue;
    }
    RegistryEntry entry;
    entry.instance = InstanceId{ServiceName{tok[0]}, *ordinal, NodeId{tok[2]}};
    entry.address = tok[3];
    const bool duplicate =
        std::any_of(snapshot.entries.begin(), snapshot.entries.end(),
                    [&](const RegistryEntry& e) {
                      return e.instance.service == entry.instance.service &&
                             e.instance.ordinal == entry.instance.ordinal;
                    });
    if (duplicate) {
      complain("duplicate instance " + entry.instance.label());
      continue;
    }
    snapshot.entries.push_back(std::move(entry));
  }
  if (!diags.empty()) throw RegistryError(std::move(diags));
  std::sort(snapshot.entries.begin(), snapshot.entries.end());
  return snapshot;
}

std::vector<ClusterEvent> diff_registry(const RegistrySnapshot& before,
                                        const RegistrySnapshot& after,
                                        Tick now) {
  std::vector<ClusterEvent> events;
  for (const auto& entry : before.entries) {
    const RegistryEntry* current = after.find(entry.instance);
    if (current == nullptr || current->address != entry.address) {
      events.push_back(
          {ClusterEventKind::instance_removed, entry.instance, now});
    }
  }
  for (const auto& entry : after.entries) {
    const RegistryEntry* previous = before.find(entry.instance);
    if (previous == nullptr || previous->address != entry.address) {
      events.push_back(
          {ClusterEventKind::instance_added, entry.instance, now});
    }
  }
  return events;
}

RegistryWatcher::RegistryWatcher(std::filesystem::path file, ChangeFn on_change,
                                 std::chrono::milliseconds poll_interval)
    : file_(std::move(file)),
      on_change_(std::move(on_change)),
      poll_interval_(poll_interval) {}

RegistryWatcher::~RegistryWatcher() { stop(); }

void RegistryWatcher::start() {
  if (running_.exchange(true)) return;
  thread_ = std::thread(&RegistryWatcher::loop, this);
}

void RegistryWatcher::stop() {
  if (!running_.exchange(false)) return;
  if (thread_.joinable()) thread_.join();
}

bool RegistryWatcher::poll_once() {
  std::ifstream f(file_);
  if (!f) {
    if (!warned_unreadable_) {
      std::cerr << "qedge: registry " << file_.string()
                << " unreadable; retrying\n";
      warned_unreadable_ = true;
    }
    ++consecutive_failures_;
    return false;
  }
  std::stringstream buf;
  buf << f.rdbuf();
  std::string text = buf.str();
  if (text == last_text_ && consecutive_failures_ == 0 &&
      !warned_unreadable_) {
    return true;  // unchanged re-read: no events
  }
  RegistrySnapshot snapshot;
  try {
    snapshot = parse_registry_text(text);
  } catch (const RegistryError& e) {
    if (!warned_unreadable_) {
      std::cerr << "qedge: registry " << file_.string() << " malformed:\n"
                << e.what() << "\n";
      warned_unreadable_ = true;
    }
    ++consecutive_failures_;
    return false;
  }
  warned_unreadable_ = false;
  consecutive_failures_ = 0;
  last_text_ = std::move(text);
  auto events = diff_registry(current_, snapshot, now_ms());
  current_ = std::move(snapshot);
  if (!events.empty() && on_change_) on_change_(current_, events);
  return true;
}

void RegistryWatcher::loop() {
  while (running_.load()) {
    poll_once();
    // Back off while the file stays unreadable or malformed.
    const int factor = std::min(consecutive_failures_, 3);
    auto sleep_for = poll_interval_ * (1 << factor);
    const auto step = std::chrono::milliseconds(10);
    for (auto slept = std::chrono::milliseconds(0);
         slept < sleep_for && running_.load(); slept += step) {
      std::this_thread::sleep_for(step);
    }
  }
}

Tick RegistryWatcher::now_ms() const {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::steady_clock::now() - started_)
      .count();
}

}  // namespace qedge
