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

#include "distgame/game/cost.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <utility>

#include "distgame/common/errors.h"

namespace distgame {

int StagePoint::slot_of(RobotId id) const {
  if (neighbor_ids != nullptr) {
    for (std::size_t k = 0; k < neighbor_ids->size(); ++k) {
      if ((*neighbor_ids)[k] == id) return static_cast<int>(k);
    }
  }
  throw TopologyError("cost term reads robot " + std::to_string(id) +
                      ", which is not a neighbour");
}

void Expansion::reset(const StagePoint& p, int ord) {
  order = ord;
  value = 0.0;
  const Eigen::Index n = p.x->size();
  const Eigen::Index mu = p.u != nullptr ? p.u->size() : 0;
  const std::size_t k = p.neighbor_x.size();
  if (order >= 1) {
    gx.setZero(n);
    gu.setZero(mu);
    gxn.resize(k);
    for (std::size_t j = 0; j < k; ++j) gxn[j].setZero(p.neighbor_x[j]->size());
  }
  if (order >= 2) {
    hxx.setZero(n, n);
    hxu.setZero(n, mu);
    huu.setZero(mu, mu);
    hx_xn.resize(k);
    hu_xn.resize(k);
    for (std::size_t j = 0; j < k; ++j) {
      hx_xn[j].setZero(n, p.neighbor_x[j]->size());
      hu_xn[j].setZero(mu, p.neighbor_x[j]->size());
    }
  }
}

void Expansion::add_scaled(const Expansion& o, double s) {
  value += s * o.value;
  if (order >= 1) {
    gx += s * o.gx;
    gu += s * o.gu;
    for (std::size_t j = 0; j < gxn.size(); ++j) gxn[j] += s * o.gxn[j];
  }
  if (order >= 2) {
    hxx += s * o.hxx;
    hxu += s * o.hxu;
    huu += s * o.huu;
    for (std::size_t j = 0; j < hx_xn.size(); ++j) {
      hx_xn[j] += s * o.hx_xn[j];
      hu_xn[j] += s * o.hu_xn[j];
    }
  }
}

// ---------------------------------------------------------------------------

void CostModel::add(CostTermPtr term, double weight, bool learnable) {
  Entry e{std::move(term), learnable, weight, -1};
  if (learnable) e.theta_index = learnable_count_++;
  entries_.push_back(std::move(e));
}

Vector CostModel::nominal_weights() const {
  Vector w(learnable_count_);
  for (const auto& e : entries_)
    if (e.learnable) w(e.theta_index) = e.weight;
  return w;
}

bool CostModel::quadratic() const {
  return std::all_of(entries_.begin(), entries_.end(),
                     [](const Entry& e) { return e.term->quadratic(); });
}

std::vector<RobotId> CostModel::referenced_neighbors() const {
  std::set<RobotId> ids;
  for (const auto& e : entries_)
    for (RobotId j : e.term->neighbors()) ids.insert(j);
  return {ids.begin(), ids.end()};
}

CostExpansion CostModel::evaluate(const StagePoint& p, const Vector& weights,
                                  int order) const {
  if (weights.size() != learnable_count_) {
    throw ShapeError("cost model expects " + std::to_string(learnable_count_) +
                     " weights, got " + std::to_string(weights.size()));
  }
  CostExpansion out;
  out.reset(p, order);
  const Eigen::Index n = p.x->size();
  const Eigen::Index mu = p.u != nullptr ? p.u->size() : 0;
  if (order >= 1) out.gtheta.setZero(learnable_count_);
  if (order >= 2) {
    out.hx_theta.setZero(n, learnable_count_);
    out.hu_theta.setZero(mu, learnable_count_);
  }
  Expansion scratch;
  for (const auto& e : entries_) {
    if (!e.term->active(p.stage, p.t)) continue;
    if (!e.learnable) {
      e.term->accumulate(p, e.weight, out);
      continue;
    }
    scratch.reset(p, order);
    e.term->accumulate(p, 1.0, scratch);
    out.add_scaled(scratch, weights(e.theta_index));
    if (order == 0) continue;
    out.gtheta(e.theta_index) += scratch.value;
    if (order >= 2) {
      out.hx_theta.col(e.theta_index) += scratch.gx;
      out.hu_theta.col(e.theta_index) += scratch.gu;
    }
  }
  return out;
}

double CostModel::value(const StagePoint& p, const Vector& weights) const {
  return evaluate(p, weights, 0).value;
}

// ---------------------------------------------------------------------------

Reciprocal reciprocal_barrier(double s, double s0, double eps) {
  if (s >= s0) {
    const double z = s - s0 + eps;
    return {1.0 / z, -1.0 / (z * z), 2.0 / (z * z * z)};
  }
  const double d = s - s0;
  const double e2 = eps * eps, e3 = e2 * eps;
  return {1.0 / eps - d / e2 + d * d / e3, -1.0 / e2 + 2.0 * d / e3, 2.0 / e3};
}

namespace {

// Adds scale * (a quadratic bowl ||p - target||^2) on the leading block.
void add_position_bowl(const Vector& diff, double scale, Expansion& out) {
  const Eigen::Index d = diff.size();
  out.value += scale * diff.squaredNorm();
  if (out.order >= 1) out.gx.head(d) += 2.0 * scale * diff;
  if (out.order >= 2) out.hxx.topLeftCorner(d, d).diagonal().array() += 2.0 * scale;
}

// Adds scale * phi(delta) for delta = p_i - p_j given gradient g and Hessian h
// of phi with respect to delta, for the position block of width d.
void add_pair(int slot, Eigen::Index offset, const Vector& g, const Matrix& h,
              double scale, Expansion& out) {
  const Eigen::Index d = g.size();
  if (out.order >= 1) {
    out.gx.segment(offset, d) += scale * g;
    out.gxn[slot].segment(offset, d) -= scale * g;
  }
  if (out.order >= 2) {
    out.hxx.block(offset, offset, d, d) += scale * h;
    out.hx_xn[slot].block(offset, offset, d, d) -= scale * h;
  }
}

void require_dims(const Vector& x, Eigen::Index need, const std::string& who) {
  if (x.size() < need) throw ShapeError(who + ": state too short for its position block");
}

}  // namespace

EffortTerm::EffortTerm(Vector reference) : ref_(std::move(reference)) {}

void EffortTerm::accumulate(const StagePoint& p, double scale, Expansion& out) const {
  if (p.u == nullptr) return;
  if (p.u->size() != ref_.size()) throw ShapeError("effort: reference size mismatch");
  const Vector e = *p.u - ref_;
  out.value += scale * e.squaredNorm();
  if (out.order >= 1) out.gu += 2.0 * scale * e;
  if (out.order >= 2) out.huu.diagonal().array() += 2.0 * scale;
}

GoalTerm::GoalTerm(Vector goal, StageMask mask) : goal_(std::move(goal)), mask_(mask) {}

void GoalTerm::accumulate(const StagePoint& p, double scale, Expansion& out) const {
  require_dims(*p.x, goal_.size(), "goal");
  add_position_bowl(p.x->head(goal_.size()) - goal_, scale, out);
}

WaypointTerm::WaypointTerm(std::vector<std::pair<int, Vector>> waypoints, int horizon)
    : waypoints_(std::move(waypoints)), horizon_(horizon) {
  for (const auto& [t, w] : waypoints_) {
    if (t < 0 || t > horizon_) {
      throw ConfigError("waypoint time " + std::to_string(t) + " outside [0, horizon]");
    }
  }
}

const Vector* WaypointTerm::target(Stage s, int t) const {
  const int when = s == Stage::kTerminal ? horizon_ : t;
  if (s == Stage::kRunning && t >= horizon_) return nullptr;
  for (const auto& [wt, w] : waypoints_)
    if (wt == when) return &w;
  return nullptr;
}

bool WaypointTerm::active(Stage s, int t) const { return target(s, t) != nullptr; }

void WaypointTerm::accumulate(const StagePoint& p, double scale, Expansion& out) const {
  const Vector* w = target(p.stage, p.t);
  if (w == nullptr) return;
  require_dims(*p.x, w->size(), "waypoint");
  add_position_bowl(p.x->head(w->size()) - *w, scale, out);
}

FormationOffsetTerm::FormationOffsetTerm(std::map<RobotId, Vector> offsets, StageMask mask)
    : offsets_(std::move(offsets)), mask_(mask) {}

std::vector<RobotId> FormationOffsetTerm::neighbors() const {
  std::vector<RobotId> ids;
  for (const auto& [j, o] : offsets_) ids.push_back(j);
  return ids;
}

void FormationOffsetTerm::accumulate(const StagePoint& p, double scale,
                                     Expansion& out) const {
  for (const auto& [j, o] : offsets_) {
    const int k = p.slot_of(j);
    const Eigen::Index d = o.size();
    require_dims(*p.x, d, "formation");
    require_dims(*p.neighbor_x[k], d, "formation");
    const Vector e = p.x->head(d) - p.neighbor_x[k]->head(d) - o;
    out.value += scale * e.squaredNorm();
    add_pair(k, 0, 2.0 * e, 2.0 * Matrix::Identity(d, d), scale, out);
  }
}

FormationDistanceTerm::FormationDistanceTerm(std::map<RobotId, double> distances,
                                             int pos_dim, StageMask mask)
    : distances_(std::move(distances)), pos_dim_(pos_dim), mask_(mask) {
  for (const auto& [j, d] : distances_)
    if (!(d >= 0)) throw ConfigError("formation_distance: distance must be non-negative");
}

std::vector<RobotId> FormationDistanceTerm::neighbors() const {
  std::vector<RobotId> ids;
  for (const auto& [j, d] : distances_) ids.push_back(j);
  return ids;
}

void FormationDistanceTerm::accumulate(const StagePoint& p, double scale,
                                       Expansion& out) const {
  for (const auto& [j, target] : distances_) {
    const int k = p.slot_of(j);
    const Vector delta = p.x->head(pos_dim_) - p.neighbor_x[k]->head(pos_dim_);
    const double rho = std::sqrt(delta.squaredNorm() + 1e-12);
    const double e = rho - target;
    out.value += scale * e * e;
    const Vector dir = delta / rho;
    Matrix h;
    if (out.order >= 2) {
      const Matrix id = Matrix::Identity(pos_dim_, pos_dim_);
      h = 2.0 * dir * dir.transpose() + 2.0 * e * (id - dir * dir.transpose()) / rho;
    }
    add_pair(k, 0, 2.0 * e * dir, h, scale, out);
  }
}

FormationVelocityTerm::FormationVelocityTerm(std::map<RobotId, Vector> offsets,
                                             StageMask mask)
    : offsets_(std::move(offsets)), mask_(mask) {}

std::vector<RobotId> FormationVelocityTerm::neighbors() const {
  std::vector<RobotId> ids;
  for (const auto& [j, o] : offsets_) ids.push_back(j);
  return ids;
}

void FormationVelocityTerm::accumulate(const StagePoint& p, double scale,
                                       Expansion& out) const {
  for (const auto& [j, o] : offsets_) {
    const int k = p.slot_of(j);
    const Eigen::Index d = o.size();
    require_dims(*p.x, 2 * d, "formation_velocity");
    require_dims(*p.neighbor_x[k], 2 * d, "formation_velocity");
    const Vector e = p.x->segment(d, d) - p.neighbor_x[k]->segment(d, d) - o;
    out.value += scale * e.squaredNorm();
    add_pair(k, d, 2.0 * e, 2.0 * Matrix::Identity(d, d), scale, out);
  }
}

ObstacleTerm::ObstacleTerm(std::vector<Disk> obstacles, double robot_radius, StageMask mask)
    : obstacles_(std::move(obstacles)), robot_radius_(robot_radius), mask_(mask) {
  if (robot_radius_ < 0) throw ConfigError("obstacle: robot radius must be non-negative");
  for (const auto& o : obstacles_) {
    if (!(o.radius + robot_radius_ > 0)) {
      throw ConfigError("obstacle: safety radius must be positive");
    }
  }
}

void ObstacleTerm::accumulate(const StagePoint& p, double scale, Expansion& out) const {
  for (const auto& o : obstacles_) {
    const Eigen::Index d = o.center.size();
    require_dims(*p.x, d, "obstacle");
    const Vector q = p.x->head(d) - o.center;
    const double safe = o.radius + robot_radius_;
    const Reciprocal r = reciprocal_barrier(q.squaredNorm(), safe * safe, kBarrierSmoothing);
    out.value += scale * r.value;
    if (out.order >= 1) out.gx.head(d) += scale * 2.0 * r.d1 * q;
    if (out.order >= 2) {
      out.hxx.topLeftCorner(d, d) +=
          scale * (4.0 * r.d2 * q * q.transpose() + 2.0 * r.d1 * Matrix::Identity(d, d));
    }
  }
}

CollisionTerm::CollisionTerm(std::map<RobotId, double> safety_distance, int pos_dim,
                             StageMask mask)
    : safety_(std::move(safety_distance)), pos_dim_(pos_dim), mask_(mask) {
  for (const auto& [j, s] : safety_)
    if (!(s > 0)) throw ConfigError("collision: safety radius must be positive");
}

std::vector<RobotId> CollisionTerm::neighbors() const {
  std::vector<RobotId> ids;
  for (const auto& [j, s] : safety_) ids.push_back(j);
  return ids;
}

void CollisionTerm::accumulate(const StagePoint& p, double scale, Expansion& out) const {
  for (const auto& [j, safe] : safety_) {
    const int k = p.slot_of(j);
    const Vector delta = p.x->head(pos_dim_) - p.neighbor_x[k]->head(pos_dim_);
    const Reciprocal r =
        reciprocal_barrier(delta.squaredNorm(), safe * safe, kBarrierSmoothing);
    out.value += scale * r.value;
    Matrix h;
    if (out.order >= 2) {
      h = 4.0 * r.d2 * delta * delta.transpose() +
          2.0 * r.d1 * Matrix::Identity(pos_dim_, pos_dim_);
    }
    add_pair(k, 0, 2.0 * r.d1 * delta, h, scale, out);
  }
}

CentroidTerm::CentroidTerm(std::vector<RobotId> group, Vector start, Vector goal,
                           int horizon, StageMask mask)
    : group_(std::move(group)),
      start_(std::move(start)),
      goal_(std::move(goal)),
      horizon_(horizon),
      mask_(mask) {
  if (start_.size() != goal_.size()) throw ConfigError("centroid: start/goal size mismatch");
  if (horizon_ < 1) throw ConfigError("centroid: horizon must be positive");
}

void CentroidTerm::accumulate(const StagePoint& p, double scale, Expansion& out) const {
  const Eigen::Index d = start_.size();
  const double members = static_cast<double>(group_.size() + 1);
  const double frac = static_cast<double>(p.t) / horizon_;
  Vector c = p.x->head(d);
  std::vector<int> slots;
  for (RobotId j : group_) {
    slots.push_back(p.slot_of(j));
    c += p.neighbor_x[slots.back()]->head(d);
  }
  c /= members;
  const Vector e = c - (start_ + frac * (goal_ - start_));
  out.value += scale * e.squaredNorm();
  if (out.order >= 1) {
    out.gx.head(d) += scale * 2.0 * e / members;
    for (int k : slots) out.gxn[k].head(d) += scale * 2.0 * e / members;
  }
  if (out.order >= 2) {
    const double h = scale * 2.0 / (members * members);
    out.hxx.topLeftCorner(d, d).diagonal().array() += h;
    for (int k : slots) out.hx_xn[k].topLeftCorner(d, d).diagonal().array() += h;
  }
}

}  // namespace distgame
