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

#include "qedge/core.hpp"

#include <cassert>

namespace qedge {

std::string InstanceId::label() const {
  return service.name + "-" + std::to_string(ordinal);
}

const std::set<InstanceId>* ClusterSnapshot::instances_of(
    const ServiceName& service) const {
  auto it = services.find(service);
  return it == services.end() ? nullptr : &it->second;
}

bool ClusterSnapshot::contains(const InstanceId& id) const {
  const auto* set = instances_of(id.service);
  return set != nullptr && set->count(id) > 0;
}

std::size_t ClusterSnapshot::instance_count(const ServiceName& service) const {
  const auto* set = instances_of(service);
  return set == nullptr ? 0 : set->size();
}

bool meets_requirement(Millis response_time, const QoSRequirement& req) {
  assert(response_time >= 0);
  return response_time < req.max_response_time;
}

SnapshotUpdate apply_cluster_event(ClusterSnapshot snapshot,
                                   const ClusterEvent& ev) {
  SnapshotUpdate out;
  switch (ev.kind) {
    case ClusterEventKind::instance_added:
      snapshot.services[ev.instance.service].insert(ev.instance);
      snapshot.nodes.insert(ev.instance.node);
      break;
    case ClusterEventKind::instance_removed: {
      auto it = snapshot.services.find(ev.instance.service);
      if (it == snapshot.services.end() || it->second.erase(ev.instance) == 0) {
        out.warning = "instance-removed for unknown instance " +
                      ev.instance.label() + "; snapshot unchanged";
      }
      break;
    }
  }
  out.snapshot = std::move(snapshot);
  return out;
}

}  // namespace qedge
