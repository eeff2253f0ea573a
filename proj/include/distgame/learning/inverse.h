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

#include "distgame/common/errors.h"
#include "distgame/common/executor.h"
#include "distgame/fabric/comm_fabric.h"
#include "distgame/forward/nash.h"
#include "distgame/game/game.h"
#include "distgame/linsolve/dist_solver.h"
#include "distgame/sensitivity/assembly.h"

namespace distgame {

/// One demonstrated equilibrium: a trajectory per robot. Its initial states
/// are the ones the forward game is solved from when matching it.
struct Demonstration {
  std::vector<Trajectory> robots;
};

struct DemonstrationSet {
  std::vector<Demonstration> demos;
  std::string provenance;

  int count() const { return static_cast<int>(demos.size()); }
  /// Throws ShapeError unless every demo fits the game's robots and horizon.
  void validate(const GameProblem& game) const;
  /// Demonstrations of robot i.
  std::vector<Trajectory> of_robot(RobotId i) const;
};

/// sum_d ||xi* - xi^d||^2 over the flattened (x, u) trajectory.
double loss(const RobotProblem& robot, const Trajectory& xi_star,
            const std::vector<Trajectory>& demos);
/// 2 sum_d (xi* - xi^d), flattened as x^0..x^T, u^0..u^{T-1}.
Vector loss_gradient_wrt_traj(const RobotProblem& robot, const Trajectory& xi_star,
                              const std::vector<Trajectory>& demos);
/// Chain rule through the trajectory sensitivity. Throws StalenessError when
/// the sensitivity was computed at a different theta_i.
Vector parameter_gradient(const RobotProblem& robot, const Trajectory& xi_star,
                          const std::vector<Trajectory>& demos,
                          const TrajectorySensitivity& sensitivity);

struct LearningConfig {
  double eta = 0.004;
  /// eta_k = eta * decay^k.
  double decay = 1.0;
  int max_outer_iters = 500;
  double loss_tol = 0.0;
  bool warm_start = true;
  /// Abort with a divergence error once the total loss exceeds this multiple
  /// of the starting loss.
  double abort_factor = 100.0;
  /// Ground truth used only for reporting parameter error. Empty when unknown.
  Vector theta_star;
  std::string checkpoint_path;
  int checkpoint_every = 0;
  /// Iteration index of the first step (resume support).
  int start_iteration = 0;
  GlobalViewOptions view;

  void validate() const;
};

struct OuterRecord {
  int k = 0;
  std::vector<double> robot_loss;
  double total_loss = 0.0;
  std::vector<Vector> theta;       // per robot
  std::vector<double> param_error; // per robot, empty without theta_star
  double total_param_error = -1.0; // ||theta - theta*||
  int forward_iterations = 0;
  int solver_iterations = 0;
};

enum class LearningStatus {
  kRunning,
  kConverged,
  kIterationCap,
  kForwardFailure,
  kSolverFailure,
  kDiverged,
};

struct LearningTrace {
  std::vector<OuterRecord> records;
  LearningStatus status = LearningStatus::kRunning;
  std::string message;
  /// Parameters after the last update.
  Vector final_theta;
  /// Equilibria at the last evaluated parameters, one per demonstration.
  std::vector<NashSolution> last_solutions;

  bool loss_below(double threshold) const;
};

/// Raised when learning cannot continue; carries everything recorded so far.
class LearningAborted : public Error {
 public:
  LearningAborted(const std::string& what, LearningTrace trace)
      : Error(what), trace_(std::move(trace)) {}
  const LearningTrace& trace() const { return trace_; }

 private:
  LearningTrace trace_;
};

using LearningObserver = std::function<void(const OuterRecord&)>;

/// Each outer step: solve the forward game per demonstration, assemble and
/// solve the sensitivity system, take a local gradient step on every theta_i
/// simultaneously. Non-convergence or divergence of an inner solve throws
/// LearningAborted.
LearningTrace learn(const GameProblem& game, const DemonstrationSet& demos,
                    const ShootingConfig& shooting, const DistSolverConfig& solver,
                    const LearningConfig& cfg, CommFabric& fabric,
                    RobotExecutor* executor = nullptr, const LearningObserver& observer = nullptr);

/// Columns: k, total_loss, loss_<i>..., param_error_<i>..., param_error,
/// forward_iterations, solver_iterations.
void write_learning_trace_csv(const std::string& path, const LearningTrace& trace);
void write_checkpoint(const std::string& path, int k, const Vector& theta);
/// Returns the iteration index and the stacked parameters.
std::pair<int, Vector> read_checkpoint(const std::string& path);

}  // namespace distgame
