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

#pragma once

#include <set>
#include <utility>
#include <vector>

#include "distgame/common/types.h"

namespace distgame {

/// Undirected, connected communication graph over robots 0..m-1.
class CommGraph {
 public:
  /// Throws TopologyError on self-loops, out-of-range ids or a
  /// disconnected graph.
  CommGraph(int robot_count, const std::vector<std::pair<RobotId, RobotId>>& edges);

  static CommGraph complete(int robot_count);
  static CommGraph line(int robot_count);

  int size() const { return static_cast<int>(neighbors_.size()); }
  const std::vector<RobotId>& neighbors(RobotId i) const;
  bool adjacent(RobotId i, RobotId j) const;
  int degree(RobotId i) const { return static_cast<int>(neighbors(i).size()); }
  int max_degree() const;

  /// Each undirected edge once, as (smaller, larger).
  const std::set<std::pair<RobotId, RobotId>>& edges() const { return edges_; }

 private:
  std::set<std::pair<RobotId, RobotId>> edges_;
  std::vector<std::vector<RobotId>> neighbors_;
};

}  // namespace distgame
