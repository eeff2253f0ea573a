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

#include <vector>

#include "distgame/forward/nash.h"
#include "distgame/game/game.h"
#include "distgame/linsolve/dist_solver.h"
#include "distgame/sensitivity/assembly.h"

// Centralized reference computations for tests and verification. None of
// them touches a caller's communication fabric.
namespace distgame::oracles {

/// Global stacked sensitivity system A Y + C = 0.
struct DenseSystem {
  Matrix A;
  Matrix C;
  Matrix Y;
  RowLayout rows;
  RowLayout cols;
  double residual = 0.0;  // max |A Y + C|
  bool unique = false;    // true when A is invertible
};

struct DenseSensitivity {
  DenseSystem system;
  std::vector<Matrix> Y;  // per robot, layout of StackedRobotSystem
  std::vector<TrajectorySensitivity> sensitivity;
};

/// Dense global solve with a least-squares fallback. Throws OracleFailure
/// when no consistent solution exists.
DenseSystem dense_solve(const std::vector<StackedRobotSystem>& stacked);
DenseSensitivity dense_sensitivity_solve(const GameProblem& game, const NashSolution& solution);

struct FdOptions {
  ShootingConfig shooting;
  /// Forward tolerance used at the perturbed parameters is eps_u times this.
  double tighten = 1e-2;
  /// Start the perturbed solves from these inputs (usually the nominal solution).
  std::vector<VectorSeq> warm_u;
  /// Solve the perturbed games with dense_nash_lq instead of shooting.
  bool dense_lq = false;
};

/// Default step 1e-5 (1 + |theta_k|).
double fd_default_step(double theta_k);

/// Central difference of every robot's flattened trajectory with respect to
/// stacked parameter k. delta <= 0 selects the default step.
std::vector<Vector> fd_sensitivity(const GameProblem& game, int k, double delta,
                                   const FdOptions& options);
/// Same for every parameter; entry i is a (trajectory length) x r matrix.
std::vector<Matrix> fd_sensitivity_all(const GameProblem& game, double delta,
                                       const FdOptions& options);

struct BestResponse {
  double objective_before = 0.0;
  double objective_after = 0.0;
  double improvement = 0.0;           // before - after
  double relative_improvement = 0.0;  // improvement / max(1, |before|)
  double gradient_norm = 0.0;         // at the re-solved inputs
  int newton_iterations = 0;
  bool conclusive = false;
  Trajectory best;
};

/// Re-optimizes robot i's inputs with neighbour trajectories frozen, by
/// damped Newton on finite-difference derivatives of its objective.
BestResponse best_response_check(const GameProblem& game, const std::vector<Trajectory>& solution,
                                 RobotId i);

/// Exact equilibrium of an LQ game from one dense linear solve of the
/// stacked first-order conditions. Throws OracleFailure when the game is not
/// LQ or the system is singular.
NashSolution dense_nash_lq(const GameProblem& game);

/// Robot i's exact optimal response in an LQ game with the others frozen,
/// with its multipliers.
NashSolution dense_best_response_lq(const GameProblem& game,
                                    const std::vector<Trajectory>& frozen, RobotId i);

}  // namespace distgame::oracles
