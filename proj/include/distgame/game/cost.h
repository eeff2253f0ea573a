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
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "distgame/common/types.h"

namespace distgame {

enum class Stage { kRunning, kTerminal };

/// Which stages a cost term contributes to.
enum class StageMask { kRunning, kTerminal, kBoth };

inline bool stage_active(StageMask mask, Stage stage) {
  return mask == StageMask::kBoth ||
         (mask == StageMask::kRunning && stage == Stage::kRunning) ||
         (mask == StageMask::kTerminal && stage == Stage::kTerminal);
}

/// Point at which a stage cost is evaluated. Neighbour states are aligned
/// with `neighbor_ids` (the robot's full neighbour set, sorted).
struct StagePoint {
  int t = 0;
  Stage stage = Stage::kRunning;
  const Vector* x = nullptr;
  const Vector* u = nullptr;  // null at the terminal stage
  const std::vector<RobotId>* neighbor_ids = nullptr;
  std::vector<const Vector*> neighbor_x;

  int slot_of(RobotId id) const;
};

/// Value and derivatives of a scalar stage cost with respect to the robot's
/// own state and input and each neighbour state. Requested order: 0 value,
/// 1 adds gradients, 2 adds second derivatives. Neighbour-neighbour second
/// derivatives are never formed.
struct Expansion {
  int order = 0;
  double value = 0.0;
  Vector gx, gu;
  std::vector<Vector> gxn;
  Matrix hxx, hxu, huu;
  std::vector<Matrix> hx_xn;  // n x n_j
  std::vector<Matrix> hu_xn;  // mu x n_j

  void reset(const StagePoint& p, int order);
  /// this += scale * other (shapes must agree).
  void add_scaled(const Expansion& other, double scale);
};

/// Weighted cost expansion plus derivatives with respect to the cost
/// weights (the cost segment of theta).
struct CostExpansion : Expansion {
  Vector gtheta;     // r_c
  Matrix hx_theta;   // n x r_c
  Matrix hu_theta;   // mu x r_c
};

/// One unweighted cost term.
class CostTerm {
 public:
  virtual ~CostTerm() = default;
  virtual std::string kind() const = 0;
  virtual bool active(Stage stage, int t) const = 0;
  /// True when the term is a quadratic polynomial of its arguments.
  virtual bool quadratic() const = 0;
  /// Neighbours this term reads.
  virtual std::vector<RobotId> neighbors() const { return {}; }
  /// out += scale * term(p). `out` has been reset for p.
  virtual void accumulate(const StagePoint& p, double scale, Expansion& out) const = 0;
};

using CostTermPtr = std::shared_ptr<const CostTerm>;

/// Linear combination of cost terms. Learnable weights form the cost segment
/// of theta in insertion order; the remaining weights are constants.
class CostModel {
 public:
  struct Entry {
    CostTermPtr term;
    bool learnable = true;
    double weight = 1.0;  // constant weight, or nominal value when learnable
    int theta_index = -1;
  };

  void add(CostTermPtr term, double weight, bool learnable = true);

  int param_dim() const { return learnable_count_; }
  /// Weights of the learnable terms as given at construction.
  Vector nominal_weights() const;
  bool quadratic() const;
  std::vector<RobotId> referenced_neighbors() const;
  const std::vector<Entry>& entries() const { return entries_; }

  CostExpansion evaluate(const StagePoint& p, const Vector& weights, int order) const;
  double value(const StagePoint& p, const Vector& weights) const;

 private:
  std::vector<Entry> entries_;
  int learnable_count_ = 0;
};

using CostPtr = std::shared_ptr<const CostModel>;

/// Disk-shaped region to keep out of.
struct Disk {
  Vector center;
  double radius = 0.0;
};

/// Reciprocal repulsion on a squared distance s with safety threshold s0:
/// 1 / (s - s0 + eps) for s >= s0, continued below s0 by its second-order
/// Taylor expansion so derivatives stay finite.
struct Reciprocal {
  double value, d1, d2;
};
Reciprocal reciprocal_barrier(double s, double s0, double eps);

inline constexpr double kBarrierSmoothing = 1e-3;  // m^2

// ---------------------------------------------------------------------------
// Built-in terms. Positions are the leading `pos_dim` state coordinates.

/// ||u - ref||^2 on running stages.
class EffortTerm final : public CostTerm {
 public:
  explicit EffortTerm(Vector reference);
  std::string kind() const override { return "effort"; }
  bool active(Stage s, int) const override { return s == Stage::kRunning; }
  bool quadratic() const override { return true; }
  void accumulate(const StagePoint& p, double scale, Expansion& out) const override;

 private:
  Vector ref_;
};

/// ||p - goal||^2.
class GoalTerm final : public CostTerm {
 public:
  GoalTerm(Vector goal, StageMask mask);
  std::string kind() const override { return "goal"; }
  bool active(Stage s, int) const override { return stage_active(mask_, s); }
  bool quadratic() const override { return true; }
  void accumulate(const StagePoint& p, double scale, Expansion& out) const override;

 private:
  Vector goal_;
  StageMask mask_;
};

/// ||p^t - w_k||^2 at the listed time steps (t == horizon is the terminal stage).
class WaypointTerm final : public CostTerm {
 public:
  WaypointTerm(std::vector<std::pair<int, Vector>> waypoints, int horizon);
  std::string kind() const override { return "waypoint"; }
  bool active(Stage s, int t) const override;
  bool quadratic() const override { return true; }
  void accumulate(const StagePoint& p, double scale, Expansion& out) const override;

 private:
  const Vector* target(Stage s, int t) const;
  std::vector<std::pair<int, Vector>> waypoints_;
  int horizon_;
};

/// Sum over listed neighbours of ||(p_i - p_j) - offset_ij||^2.
class FormationOffsetTerm final : public CostTerm {
 public:
  FormationOffsetTerm(std::map<RobotId, Vector> offsets, StageMask mask);
  std::string kind() const override { return "formation"; }
  bool active(Stage s, int) const override { return stage_active(mask_, s); }
  bool quadratic() const override { return true; }
  std::vector<RobotId> neighbors() const override;
  void accumulate(const StagePoint& p, double scale, Expansion& out) const override;

 private:
  std::map<RobotId, Vector> offsets_;
  StageMask mask_;
};

/// Sum over listed neighbours of (||p_i - p_j|| - d_ij)^2.
class FormationDistanceTerm final : public CostTerm {
 public:
  FormationDistanceTerm(std::map<RobotId, double> distances, int pos_dim, StageMask mask);
  std::string kind() const override { return "formation_distance"; }
  bool active(Stage s, int) const override { return stage_active(mask_, s); }
  bool quadratic() const override { return false; }
  std::vector<RobotId> neighbors() const override;
  void accumulate(const StagePoint& p, double scale, Expansion& out) const override;

 private:
  std::map<RobotId, double> distances_;
  int pos_dim_;
  StageMask mask_;
};

/// Sum over listed neighbours of ||(v_i - v_j) - offset_ij||^2 on velocity
/// state coordinates.
class FormationVelocityTerm final : public CostTerm {
 public:
  FormationVelocityTerm(std::map<RobotId, Vector> offsets, StageMask mask);
  std::string kind() const override { return "formation_velocity"; }
  bool active(Stage s, int) const override { return stage_active(mask_, s); }
  bool quadratic() const override { return true; }
  std::vector<RobotId> neighbors() const override;
  void accumulate(const StagePoint& p, double scale, Expansion& out) const override;

 private:
  std::map<RobotId, Vector> offsets_;
  StageMask mask_;
};

/// Reciprocal repulsion from disks; safety radius is disk radius plus the
/// robot radius.
class ObstacleTerm final : public CostTerm {
 public:
  ObstacleTerm(std::vector<Disk> obstacles, double robot_radius, StageMask mask);
  std::string kind() const override { return "obstacle"; }
  bool active(Stage s, int) const override { return stage_active(mask_, s); }
  bool quadratic() const override { return false; }
  void accumulate(const StagePoint& p, double scale, Expansion& out) const override;
  const std::vector<Disk>& obstacles() const { return obstacles_; }
  double robot_radius() const { return robot_radius_; }

 private:
  std::vector<Disk> obstacles_;
  double robot_radius_;
  StageMask mask_;
};

/// Reciprocal repulsion between the robot and listed neighbours.
class CollisionTerm final : public CostTerm {
 public:
  CollisionTerm(std::map<RobotId, double> safety_distance, int pos_dim, StageMask mask);
  std::string kind() const override { return "collision"; }
  bool active(Stage s, int) const override { return stage_active(mask_, s); }
  bool quadratic() const override { return false; }
  std::vector<RobotId> neighbors() const override;
  void accumulate(const StagePoint& p, double scale, Expansion& out) const override;
  const std::map<RobotId, double>& safety_distances() const { return safety_; }

 private:
  std::map<RobotId, double> safety_;
  int pos_dim_;
  StageMask mask_;
};

/// ||centroid(p_i, p_group) - c^t||^2 where c^t moves linearly from `start`
/// at t = 0 to `goal` at t = horizon. Stands in for a carried payload.
class CentroidTerm final : public CostTerm {
 public:
  CentroidTerm(std::vector<RobotId> group, Vector start, Vector goal, int horizon,
               StageMask mask);
  std::string kind() const override { return "centroid"; }
  bool active(Stage s, int) const override { return stage_active(mask_, s); }
  bool quadratic() const override { return true; }
  std::vector<RobotId> neighbors() const override { return group_; }
  void accumulate(const StagePoint& p, double scale, Expansion& out) const override;

 private:
  std::vector<RobotId> group_;
  Vector start_, goal_;
  int horizon_;
  StageMask mask_;
};

}  // namespace distgame
