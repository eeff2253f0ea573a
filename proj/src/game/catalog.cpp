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

#include "distgame/game/catalog.h"

#include <memory>

#include "distgame/common/errors.h"

namespace distgame {

const std::map<std::string, CostTermFactory>& builtin_cost_terms() {
  static const std::map<std::string, CostTermFactory> catalog = {
      {"effort",
       [](const TermSpec& s) -> CostTermPtr {
         return std::make_shared<EffortTerm>(s.reference);
       }},
      {"goal",
       [](const TermSpec& s) -> CostTermPtr {
         return std::make_shared<GoalTerm>(s.goal, s.stage);
       }},
      {"waypoint",
       [](const TermSpec& s) -> CostTermPtr {
         if (s.waypoints.empty()) throw ConfigError("waypoint term needs at least one point");
         return std::make_shared<WaypointTerm>(s.waypoints, s.horizon);
       }},
      {"formation",
       [](const TermSpec& s) -> CostTermPtr {
         return std::make_shared<FormationOffsetTerm>(s.offsets, s.stage);
       }},
      {"formation_distance",
       [](const TermSpec& s) -> CostTermPtr {
         return std::make_shared<FormationDistanceTerm>(s.distances, s.pos_dim, s.stage);
       }},
      {"formation_velocity",
       [](const TermSpec& s) -> CostTermPtr {
         return std::make_shared<FormationVelocityTerm>(s.offsets, s.stage);
       }},
      {"obstacle",
       [](const TermSpec& s) -> CostTermPtr {
         return std::make_shared<ObstacleTerm>(s.obstacles, s.robot_radius, s.stage);
       }},
      {"collision",
       [](const TermSpec& s) -> CostTermPtr {
         return std::make_shared<CollisionTerm>(s.distances, s.pos_dim, s.stage);
       }},
      {"centroid",
       [](const TermSpec& s) -> CostTermPtr {
         return std::make_shared<CentroidTerm>(s.group, s.start, s.goal, s.horizon, s.stage);
       }},
  };
  return catalog;
}

const std::map<std::string, DynamicsFactory>& builtin_dynamics() {
  static const std::map<std::string, DynamicsFactory> catalog = {
      {"single_integrator",
       [](const DynamicsSpec& s) {
         return make_single_integrator(s.dim, s.dt, s.learnable_gain, s.gain);
       }},
      {"double_integrator",
       [](const DynamicsSpec& s) {
         return make_double_integrator(s.dim, s.dt, s.learnable_gain, s.gain);
       }},
      {"unicycle",
       [](const DynamicsSpec& s) { return make_unicycle(s.dt, s.learnable_gain, s.gain); }},
      {"linear",
       [](const DynamicsSpec& s) -> DynamicsPtr {
         return std::make_shared<LinearDynamics>("linear", s.a, s.b, s.position_dim,
                                                 s.has_velocity, s.learnable_gain, s.gain);
       }},
  };
  return catalog;
}

}  // namespace distgame
