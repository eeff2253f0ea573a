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
#include <string>
#include <vector>

#include "distgame/common/executor.h"
#include "distgame/common/types.h"
#include "distgame/fabric/comm_fabric.h"
#include "distgame/game/game.h"

namespace distgame {

/// lambda^{1:T}; lambda[t - 1] holds the costate at time t.
struct CostateTrajectory {
  VectorSeq lambda;

  int horizon() const { return static_cast<int>(lambda.size()); }
  const Vector& at(int t) const { return lambda.at(t - 1); }
};

struct ShootingConfig {
  double gamma = 1e-2;
  /// Per-robot step sizes; overrides `gamma` when non-empty.
  std::vector<double> robot_gamma;
  double eps_u = 1e-4;
  int max_iters = 10000;
  /// Halve a robot's step while its own objective (neighbours frozen) rises.
  bool backtracking = false;
  double shrink = 0.5;
  int max_backtracks = 30;

  void validate(int robot_count) const;
  double gamma_for(RobotId i) const;
};

struct NashSolution {
  std::vector<Trajectory> trajectories;
  std::vector<CostateTrajectory> costates;
  /// max_i ||du_i||_inf of every evaluated round.
  std::vector<double> residual_history;
  /// The per-robot values behind each entry of residual_history.
  std::vector<std::vector<double>> robot_residual_history;
  int iterations = 0;
  bool converged = false;

  double final_residual() const;
};

/// c^t + f^T lambda^{t+1} at a running stage.
double hamiltonian(const RobotProblem& robot, int t, const VectorSeq& x, const VectorSeq& u,
                   const NeighborStates& neighbors, const Vector& lambda_next);

/// lambda^T = dh/dx^T, lambda^t = dc^t/dx + f_x^T lambda^{t+1} for t = T-1..1.
/// Throws DivergenceError on a non-finite costate.
CostateTrajectory backward_costates(const RobotProblem& robot, const VectorSeq& x,
                                    const VectorSeq& u, const NeighborStates& neighbors);

/// dc^t/du + f_u^T lambda^{t+1}.
Vector input_gradient(const RobotProblem& robot, int t, const VectorSeq& x, const VectorSeq& u,
                      const NeighborStates& neighbors, const Vector& lambda_next);

/// Input gradients for t = 0..T-1 given the costates.
VectorSeq input_gradients(const RobotProblem& robot, const VectorSeq& x, const VectorSeq& u,
                          const NeighborStates& neighbors, const CostateTrajectory& lambda);

/// Observer called after every evaluated round with (round index, per-robot residuals).
using ShootingObserver = std::function<void(int, const std::vector<double>&)>;

/// Distributed shooting. Every round each robot rolls out its inputs, ships
/// its state sequence to its neighbours, runs the costate recursion and takes
/// a gradient step on its inputs. Stops before the step once
/// max_i ||du_i||_inf <= eps_u. Empty `init_u` means all-zero inputs.
NashSolution solve_nash(const GameProblem& game, const std::vector<VectorSeq>& init_u,
                        const ShootingConfig& cfg, CommFabric& fabric,
                        RobotExecutor* executor = nullptr,
                        const ShootingObserver& observer = nullptr);

std::vector<VectorSeq> zero_inputs(const GameProblem& game);

/// Neighbour state sequences of robot i read straight from a solution. For
/// verification code that has the whole solution at hand.
std::map<RobotId, VectorSeq> neighbor_states(const GameProblem& game,
                                             const std::vector<Trajectory>& trajectories,
                                             RobotId i);

/// Per robot: max_t ||du^t||_inf with costates recomputed from the given
/// trajectories.
std::vector<double> pmp_residual(const GameProblem& game, const NashSolution& solution);
std::vector<double> pmp_residual(const GameProblem& game,
                                 const std::vector<Trajectory>& trajectories);

/// Per robot: max_t ||x^{t+1} - f(x^t, u^t)||_inf (zero for rolled-out states).
std::vector<double> dynamics_defect(const GameProblem& game,
                                    const std::vector<Trajectory>& trajectories);

struct InputHessianReport {
  /// [robot][t]
  std::vector<std::vector<bool>> positive_definite;
  std::vector<std::vector<double>> min_eigenvalue;

  bool all_positive_definite() const;
};

/// Definiteness of d^2 H^t / du^2 along the solution.
InputHessianReport check_input_hessian(const GameProblem& game, const NashSolution& solution);

/// One file per robot named robot_<i>.csv with columns t, x*, u*, lambda*.
/// Cells without a value (u at T, lambda at 0) are left empty.
std::vector<std::string> write_solution_csv(const std::string& dir, const GameProblem& game,
                                            const NashSolution& solution);
/// Reads what write_solution_csv wrote; costates are read when present.
NashSolution read_solution_csv(const std::string& dir, const GameProblem& game);
/// Columns: iteration, max_residual, residual_<i>...
void write_residual_csv(const std::string& path, const NashSolution& solution);

}  // namespace distgame
