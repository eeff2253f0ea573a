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

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "distgame/fabric/comm_fabric.h"
#include "distgame/forward/nash.h"
#include "distgame/game/game.h"
#include "distgame/learning/inverse.h"
#include "distgame/linsolve/dist_solver.h"

namespace distgame {

/// How synthetic demonstrations are drawn from the ground-truth game.
struct DemoConfig {
  int count = 1;
  /// Standard deviation of the Gaussian offset added to each initial position.
  double perturbation = 0.0;
  std::uint64_t seed = 0;
};

/// A loaded scenario. `game` carries the ground-truth parameters written in
/// the file; `theta_init` is where learning starts.
struct Scenario {
  explicit Scenario(GameProblem g) : game(std::move(g)) {}

  std::string name;
  std::string source;
  GameProblem game;
  std::vector<Disk> obstacles;
  /// Goal slot per robot, empty when the file gives no formation.
  std::vector<Vector> formation_slots;
  bool has_theta_star = true;
  Vector theta_init;
  ShootingConfig shooting;
  DistSolverConfig solver;
  LearningConfig learning;
  GlobalViewOptions view;
  DemoConfig demos;
  int threads = 1;

  Vector theta_star() const;
};

/// Throws ConfigError with the offending line on schema or semantic errors,
/// including starts inside an obstacle or collision safety radius.
Scenario load_scenario(const std::string& path);
Scenario parse_scenario(const std::string& text, const std::string& source = "<string>");

/// Directory holding the shipped scenario files.
std::string scenario_dir();

/// Smallest distance from any robot position to the edge of an obstacle's
/// safety disk (obstacle radius plus robot radius). Positive means clear.
double min_obstacle_clearance(const Scenario& scenario, const std::vector<Trajectory>& xi);
/// Smallest pairwise robot distance minus the configured safety distance.
double min_collision_clearance(const Scenario& scenario, const std::vector<Trajectory>& xi);

/// Demo files are demo_<d>_robot_<i>.csv with columns t, x*, u*.
std::vector<std::string> write_demo_set(const std::string& dir, const GameProblem& game,
                                        const DemonstrationSet& demos);
/// Reads every demo_<d>_robot_<i>.csv in `dir`; d must be contiguous from 0.
DemonstrationSet read_demo_set(const std::string& dir, const GameProblem& game);

struct Overrides {
  std::optional<std::uint64_t> seed;
  bool strict_locality = false;
  std::optional<int> max_iters;
  std::optional<double> eta;
  std::optional<double> alpha;
  std::optional<double> gamma;
  std::optional<double> tol;
  std::optional<int> demo_count;
};

enum class ExitCode : int {
  kSuccess = 0,
  kNonConvergence = 2,
  kConfigError = 3,
  kLocalityViolation = 4,
};

struct RunReport {
  std::string scenario;
  std::string mode;
  std::vector<std::string> files;
  std::map<std::string, double> summary;
  std::vector<std::string> notes;
  MessageAudit audit;
  ExitCode exit = ExitCode::kSuccess;

  /// Writes report.json into `dir` and appends it to `files`.
  void write(const std::string& dir);
};

/// Applies overrides to a copy of the scenario's settings. Iteration caps and
/// tolerances apply to the forward solver, or to the outer loop for inverse.
Scenario apply_overrides(const Scenario& scenario, const Overrides& o, const std::string& mode);

RunReport cmd_forward(const Scenario& scenario, const Overrides& o, const std::string& out);
RunReport cmd_make_demos(const Scenario& scenario, const Overrides& o, const std::string& out);

enum class InitMode { kScaled, kTruth };
RunReport cmd_inverse(const Scenario& scenario, const std::string& demo_dir, InitMode init,
                      const Overrides& o, const std::string& out);
RunReport cmd_verify(const Scenario& scenario, const std::string& solution_dir,
                     const Overrides& o, const std::string& out);

/// Draws one perturbed set of initial states per demo, redrawing any sample
/// that starts inside a safety radius.
std::vector<GameProblem> demo_games(const Scenario& scenario, const DemoConfig& cfg);

}  // namespace distgame
