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

#include <filesystem>
#include <random>
#include <string>

#include "distgame/fabric/comm_fabric.h"
#include "distgame/forward/nash.h"
#include "distgame/game/catalog.h"
#include "distgame/game/game.h"
#include "distgame/scenario/scenario.h"
#include "doctest.h"

namespace distgame::testing {

inline Scenario shipped(const std::string& name) {
  return load_scenario(scenario_dir() + "/" + name + ".yaml");
}

/// Three double integrators on a line graph with quadratic costs.
inline Scenario line3_lq() {
  return parse_scenario(R"(
name: line3
horizon: 6
dt: 0.2
graph: line
robots:
  - x0: [0.0, 0.0]
    dynamics: {type: double_integrator, dim: 1}
    cost:
      - {term: effort, weight: 1.0}
      - {term: goal, weight: 1.0, goal: [1.0], stage: both}
      - {term: formation, weight: 0.5, offsets: {1: [-1.0]}, stage: both}
  - x0: [1.0, 0.0]
    dynamics: {type: double_integrator, dim: 1, learnable_gain: true}
    cost:
      - {term: effort, weight: 1.0}
      - {term: formation, weight: 0.5, offsets: {0: [1.0], 2: [-1.0]}, stage: both}
  - x0: [2.5, 0.0]
    dynamics: {type: double_integrator, dim: 1}
    cost:
      - {term: effort, weight: 1.0}
      - {term: goal, weight: 0.8, goal: [3.0], stage: both}
      - {term: formation, weight: 0.5, offsets: {1: [1.0]}, stage: both}
shooting: {gamma: 0.1, eps_u: 1.0e-10, max_iters: 100000}
solver: {eps_v: 1.0e-10}
)",
                        "line3");
}

/// Fresh scratch directory under the system temp dir.
inline std::string scratch_dir(const std::string& tag) {
  namespace fs = std::filesystem;
  const fs::path p = fs::temp_directory_path() / ("distgame_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

inline Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double x : v) out(k++) = x;
  return out;
}

inline Matrix mat1(double v) { return Matrix::Constant(1, 1, v); }

inline Vector random_vector(std::mt19937_64& rng, int n, double scale = 1.0) {
  std::uniform_real_distribution<double> uni(-scale, scale);
  return Vector(Vector::NullaryExpr(n, [&] { return uni(rng); }));
}

/// Strict-locality fabric over the game's graph.
inline CommFabric strict_fabric(const GameProblem& game) {
  return CommFabric(game.graph(), FabricOptions{true, 1'000'000});
}

/// No violations and every counted link is a graph edge.
inline void check_local_traffic(const CommFabric& fabric) {
  CHECK(fabric.audit().clean());
  for (const auto& [key, count] : fabric.audit().counts) {
    CHECK(fabric.graph().adjacent(key.first, key.second));
    CHECK(count > 0);
  }
}

/// Scalar-state robot with linear dynamics x+ = a x + b u. The cost (or the
/// gain) must carry at least one learnable parameter.
inline RobotProblem scalar_robot(RobotId id, double a, double b, CostPtr cost, double x0,
                                 const CommGraph& graph, bool learnable_gain = false) {
  auto dyn = std::make_shared<LinearDynamics>("linear", mat1(a), mat1(b), 1, false,
                                              learnable_gain);
  const Vector theta = nominal_theta(*cost, learnable_gain ? vec({1.0}) : Vector());
  return make_robot(id, dyn, cost, vec({x0}), theta, graph);
}

}  // namespace distgame::testing
