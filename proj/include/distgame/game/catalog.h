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

#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "distgame/game/cost.h"
#include "distgame/game/dynamics.h"

namespace distgame {

/// Parameter bag consumed by the cost-term constructors. Each constructor
/// reads only the fields relevant to its kind.
struct TermSpec {
  StageMask stage = StageMask::kRunning;
  int horizon = 0;
  int pos_dim = 2;
  Vector reference;                            // effort
  Vector start, goal;                          // goal, centroid
  std::map<RobotId, Vector> offsets;           // formation, formation_velocity
  std::map<RobotId, double> distances;         // formation_distance, collision
  std::vector<Disk> obstacles;                 // obstacle
  double robot_radius = 0.0;                   // obstacle
  std::vector<std::pair<int, Vector>> waypoints;
  std::vector<RobotId> group;                  // centroid
};

using CostTermFactory = std::function<CostTermPtr(const TermSpec&)>;

/// effort, goal, waypoint, formation, formation_distance,
/// formation_velocity, obstacle, collision, centroid.
const std::map<std::string, CostTermFactory>& builtin_cost_terms();

struct DynamicsSpec {
  int dim = 2;              // integrators: spatial dimension
  double dt = 0.1;
  bool learnable_gain = false;
  double gain = 1.0;
  Matrix a, b;              // linear
  int position_dim = 1;     // linear
  bool has_velocity = false;
};

using DynamicsFactory = std::function<DynamicsPtr(const DynamicsSpec&)>;

/// single_integrator, double_integrator, unicycle, linear.
const std::map<std::string, DynamicsFactory>& builtin_dynamics();

}  // namespace distgame
