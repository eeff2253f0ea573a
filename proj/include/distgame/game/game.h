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

#include <map>
#include <vector>

#include "distgame/common/types.h"
#include "distgame/game/comm_graph.h"
#include "distgame/game/cost.h"
#include "distgame/game/dynamics.h"

namespace distgame {

/// One robot's parameterised optimal-control problem.
///
/// theta layout: learnable cost weights (in cost-term order) followed by the
/// dynamics parameters.
struct RobotProblem {
  RobotId id = 0;
  DynamicsPtr dynamics;
  CostPtr cost;
  Vector x0;
  Vector theta;
  std::vector<RobotId> neighbors;  // sorted, from the communication graph

  int n() const { return dynamics->state_dim(); }
  int mu() const { return dynamics->input_dim(); }
  int r() const { return static_cast<int>(theta.size()); }
  int cost_param_dim() const { return cost->param_dim(); }
  Vector cost_weights() const { return theta.head(cost->param_dim()); }
  Vector dynamics_params() const { return theta.tail(dynamics->param_dim()); }

  /// Throws on inconsistent shapes, non-finite x0, empty theta, or cost terms
  /// that read non-neighbours.
  void validate() const;
};

/// Builds a robot and fills its neighbour list from the graph.
RobotProblem make_robot(RobotId id, DynamicsPtr dynamics, CostPtr cost, Vector x0,
                        Vector theta, const CommGraph& graph);

/// Default theta: nominal cost weights followed by `dynamics_params`.
Vector nominal_theta(const CostModel& cost, const Vector& dynamics_params = Vector());

/// x^{0:T} and u^{0:T-1} of one robot.
struct Trajectory {
  VectorSeq x;
  VectorSeq u;

  int horizon() const { return static_cast<int>(u.size()); }
  /// Throws ShapeError unless lengths are T+1 / T, dimensions match and all
  /// entries are finite.
  void validate(int horizon, int n, int mu) const;
  /// x^0..x^T then u^0..u^{T-1}.
  Vector flatten() const;
};

/// The game: one problem per robot over a shared horizon.
class GameProblem {
 public:
  GameProblem(CommGraph graph, std::vector<RobotProblem> robots, int horizon, double dt);

  const CommGraph& graph() const { return graph_; }
  const std::vector<RobotProblem>& robots() const { return robots_; }
  const RobotProblem& robot(RobotId i) const { return robots_.at(i); }
  int size() const { return static_cast<int>(robots_.size()); }
  int horizon() const { return horizon_; }
  double dt() const { return dt_; }

  /// r = sum_i r_i.
  int total_params() const;
  /// Column of theta_i's first entry inside the stacked parameter vector.
  int param_offset(RobotId i) const;
  Vector theta() const;
  GameProblem with_theta(const Vector& stacked) const;
  GameProblem with_robot_theta(RobotId i, const Vector& theta_i) const;
  GameProblem with_initial_state(RobotId i, const Vector& x0) const;

 private:
  CommGraph graph_;
  std::vector<RobotProblem> robots_;
  int horizon_;
  double dt_;
};

/// Neighbour state sequences aligned with `robot.neighbors`.
using NeighborStates = std::vector<const VectorSeq*>;

/// Aligns a neighbour map with the robot's neighbour list. The map must
/// cover exactly N_i; otherwise TopologyError.
NeighborStates align_neighbors(const RobotProblem& robot,
                               const std::map<RobotId, VectorSeq>& neighbor_x);

/// Stage point at time t; t == horizon yields the terminal stage.
StagePoint stage_point(const RobotProblem& robot, int t, int horizon, const VectorSeq& x,
                       const VectorSeq& u, const NeighborStates& neighbors);

/// x^0 = x0, x^{t+1} = f(x^t, u^t, theta). Throws DivergenceError naming the
/// first step that produced a non-finite state.
VectorSeq rollout(const RobotProblem& robot, const VectorSeq& u, int horizon);

/// sum_t c^t + h.
double eval_objective(const RobotProblem& robot, const Trajectory& xi,
                      const std::map<RobotId, VectorSeq>& neighbor_x);
double eval_objective(const RobotProblem& robot, const VectorSeq& x, const VectorSeq& u,
                      const NeighborStates& neighbors);

}  // namespace distgame
