/*
 Copyright 2026 The distgame Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#include "distgame/game/comm_graph.h"

#include <algorithm>
#include <string>

#include "distgame/common/errors.h"

namespace distgame {

CommGraph::CommGraph(int robot_count,
                     const std::vector<std::pair<RobotId, RobotId>>& edges) {
  if (robot_count < 1) throw TopologyError("graph needs at least one robot");
  neighbors_.resize(robot_count);
  for (auto [a, b] : edges) {
    if (a < 0 || b < 0 || a >= robot_count || b >= robot_count) {
      throw TopologyError("edge (" + std::to_string(a) + ", " +
                          std::to_string(b) + ") references unknown robot");
    }
    if (a == b) throw TopologyError("self-loop at robot " + std::to_string(a));
    edges_.insert({std::min(a, b), std::max(a, b)});
  }
  for (auto [a, b] : edges_) {
    neighbors_[a].push_back(b);
    neighbors_[b].push_back(a);
  }
  for (auto& n : neighbors_) std::sort(n.begin(), n.end());

  std::vector<bool> seen(robot_count, false);
  std::vector<RobotId> stack{0};
  seen[0] = true;
  while (!stack.empty()) {
    RobotId i = stack.back();
    stack.pop_back();
    for (RobotId j : neighbors_[i]) {
      if (!seen[j]) {
        seen[j] = true;
        stack.push_back(j);
      }
    }
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
    throw TopologyError("communication graph is not connected");
  }
}

CommGraph CommGraph::complete(int robot_count) {
  std::vector<std::pair<RobotId, RobotId>> e;
  for (int i = 0; i < robot_count; ++i)
    for (int j = i + 1; j < robot_count; ++j) e.emplace_back(i, j);
  return CommGraph(robot_count, e);
}

CommGraph CommGraph::line(int robot_count) {
  std::vector<std::pair<RobotId, RobotId>> e;
  for (int i = 0; i + 1 < robot_count; ++i) e.emplace_back(i, i + 1);
  return CommGraph(robot_count, e);
}

const std::vector<RobotId>& CommGraph::neighbors(RobotId i) const {
  if (i < 0 || i >= size()) throw TopologyError("unknown robot " + std::to_string(i));
  return neighbors_[i];
}

bool CommGraph::adjacent(RobotId i, RobotId j) const {
  return edges_.count({std::min(i, j), std::max(i, j)}) > 0;
}

int CommGraph::max_degree() const {
  int d = 0;
  for (const auto& n : neighbors_) d = std::max(d, static_cast<int>(n.size()));
  return d;
}

}  // namespace distgame
