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

#include "distgame/game/game.h"

#include <algorithm>
#include <string>
#include <utility>

#include "distgame/common/errors.h"

namespace distgame {

void RobotProblem::validate() const {
  if (!dynamics || !cost) throw ShapeError("robot " + std::to_string(id) + ": missing model");
  if (x0.size() != n()) {
    throw ShapeError("robot " + std::to_string(id) + ": x0 has " +
                     std::to_string(x0.size()) + " entries, expected " + std::to_string(n()));
  }
  if (!x0.allFinite()) throw ShapeError("robot " + std::to_string(id) + ": x0 not finite");
  if (theta.size() < 1) throw ShapeError("robot " + std::to_string(id) + ": empty theta");
  if (theta.size() != cost->param_dim() + dynamics->param_dim()) {
    throw ShapeError("robot " + std::to_string(id) + ": theta has " +
                     std::to_string(theta.size()) + " entries, expected " +
                     std::to_string(cost->param_dim() + dynamics->param_dim()));
  }
  for (RobotId j : cost->referenced_neighbors()) {
    if (!std::binary_search(neighbors.begin(), neighbors.end(), j)) {
      throw TopologyError("robot " + std::to_string(id) + ": cost reads robot " +
                          std::to_string(j) + ", which is not a neighbour");
    }
  }
}

RobotProblem make_robot(RobotId id, DynamicsPtr dynamics, CostPtr cost, Vector x0,
                        Vector theta, const CommGraph& graph) {
  RobotProblem r{id, std::move(dynamics), std::move(cost), std::move(x0), std::move(theta),
                 graph.neighbors(id)};
  r.validate();
  return r;
}

Vector nominal_theta(const CostModel& cost, const Vector& dynamics_params) {
  Vector theta(cost.param_dim() + dynamics_params.size());
  theta << cost.nominal_weights(), dynamics_params;
  return theta;
}

void Trajectory::validate(int horizon, int n, int mu) const {
  if (static_cast<int>(x.size()) != horizon + 1 || static_cast<int>(u.size()) != horizon) {
    throw ShapeError("trajectory lengths must be T+1 states and T inputs");
  }
  for (const auto& v : x)
    if (v.size() != n || !v.allFinite()) throw ShapeError("trajectory state invalid");
  for (const auto& v : u)
    if (v.size() != mu || !v.allFinite()) throw ShapeError("trajectory input invalid");
}

Vector Trajectory::flatten() const {
  Eigen::Index total = 0;
  for (const auto& v : x) total += v.size();
  for (const auto& v : u) total += v.size();
  Vector out(total);
  Eigen::Index k = 0;
  for (const auto& v : x) {
    out.segment(k, v.size()) = v;
    k += v.size();
  }
  for (const auto& v : u) {
    out.segment(k, v.size()) = v;
    k += v.size();
  }
  return out;
}

GameProblem::GameProblem(CommGraph graph, std::vector<RobotProblem> robots, int horizon,
                         double dt)
    : graph_(std::move(graph)), robots_(std::move(robots)), horizon_(horizon), dt_(dt) {
  if (horizon_ < 1) throw ShapeError("horizon must be at least 1");
  if (static_cast<int>(robots_.size()) != graph_.size()) {
    throw ShapeError("robot count does not match the communication graph");
  }
  for (int i = 0; i < size(); ++i) {
    if (robots_[i].id != i) throw ShapeError("robots must be listed in id order");
    if (robots_[i].neighbors != graph_.neighbors(i)) {
      throw TopologyError("robot " + std::to_string(i) +
                          " neighbour list disagrees with the graph");
    }
    robots_[i].validate();
  }
}

int GameProblem::total_params() const {
  int r = 0;
  for (const auto& rb : robots_) r += rb.r();
  return r;
}

int GameProblem::param_offset(RobotId i) const {
  int r = 0;
  for (RobotId k = 0; k < i; ++k) r += robots_.at(k).r();
  return r;
}

Vector GameProblem::theta() const {
  Vector out(total_params());
  int k = 0;
  for (const auto& rb : robots_) {
    out.segment(k, rb.r()) = rb.theta;
    k += rb.r();
  }
  return out;
}

GameProblem GameProblem::with_theta(const Vector& stacked) const {
  if (stacked.size() != total_params()) throw ShapeError("stacked theta size mismatch");
  GameProblem g = *this;
  int k = 0;
  for (auto& rb : g.robots_) {
    rb.theta = stacked.segment(k, rb.r());
    k += rb.r();
  }
  return g;
}

GameProblem GameProblem::with_robot_theta(RobotId i, const Vector& theta_i) const {
  GameProblem g = *this;
  if (theta_i.size() != g.robots_.at(i).r()) throw ShapeError("theta_i size mismatch");
  g.robots_[i].theta = theta_i;
  return g;
}

GameProblem GameProblem::with_initial_state(RobotId i, const Vector& x0) const {
  GameProblem g = *this;
  g.robots_.at(i).x0 = x0;
  g.robots_[i].validate();
  return g;
}

NeighborStates align_neighbors(const RobotProblem& robot,
                               const std::map<RobotId, VectorSeq>& neighbor_x) {
  NeighborStates out;
  out.reserve(robot.neighbors.size());
  for (RobotId j : robot.neighbors) {
    auto it = neighbor_x.find(j);
    if (it == neighbor_x.end()) {
      throw TopologyError("robot " + std::to_string(robot.id) + ": missing states of neighbour " +
                          std::to_string(j));
    }
    out.push_back(&it->second);
  }
  if (neighbor_x.size() != robot.neighbors.size()) {
    throw TopologyError("robot " + std::to_string(robot.id) +
                        ": neighbour map contains non-neighbours");
  }
  return out;
}

StagePoint stage_point(const RobotProblem& robot, int t, int horizon, const VectorSeq& x,
                       const VectorSeq& u, const NeighborStates& neighbors) {
  StagePoint p;
  p.t = t;
  p.stage = t == horizon ? Stage::kTerminal : Stage::kRunning;
  p.x = &x.at(t);
  p.u = t < horizon ? &u.at(t) : nullptr;
  p.neighbor_ids = &robot.neighbors;
  p.neighbor_x.reserve(neighbors.size());
  for (const VectorSeq* seq : neighbors) p.neighbor_x.push_back(&seq->at(t));
  return p;
}

VectorSeq rollout(const RobotProblem& robot, const VectorSeq& u, int horizon) {
  if (static_cast<int>(u.size()) != horizon) {
    throw ShapeError("rollout: input sequence length " + std::to_string(u.size()) +
                     " != horizon " + std::to_string(horizon));
  }
  const Vector dyn = robot.dynamics_params();
  VectorSeq x;
  x.reserve(horizon + 1);
  x.push_back(robot.x0);
  for (int t = 0; t < horizon; ++t) {
    if (u[t].size() != robot.mu()) throw ShapeError("rollout: input dimension mismatch");
    x.push_back(robot.dynamics->step(x[t], u[t], dyn));
    if (!x.back().allFinite()) {
      throw DivergenceError("robot " + std::to_string(robot.id) + ": non-finite state", t + 1);
    }
  }
  return x;
}

double eval_objective(const RobotProblem& robot, const VectorSeq& x, const VectorSeq& u,
                      const NeighborStates& neighbors) {
  const int horizon = static_cast<int>(u.size());
  const Vector w = robot.cost_weights();
  double total = 0.0;
  for (int t = 0; t <= horizon; ++t) {
    total += robot.cost->value(stage_point(robot, t, horizon, x, u, neighbors), w);
  }
  return total;
}

double eval_objective(const RobotProblem& robot, const Trajectory& xi,
                      const std::map<RobotId, VectorSeq>& neighbor_x) {
  const NeighborStates nb = align_neighbors(robot, neighbor_x);
  for (const VectorSeq* seq : nb) {
    if (seq->size() != xi.x.size()) throw ShapeError("neighbour sequence length mismatch");
  }
  return eval_objective(robot, xi.x, xi.u, nb);
}

}  // namespace distgame
