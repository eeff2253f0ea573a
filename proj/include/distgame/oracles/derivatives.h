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
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "distgame/game/cost.h"
#include "distgame/game/dynamics.h"

namespace distgame::oracles {

/// Worst blockwise error of analytic derivatives against central
/// differences. Errors are ||analytic - fd||_inf / max(1, ||fd||_inf, scale),
/// where scale is the largest derivative of the same differenced function.
struct DerivativeCheck {
  std::string subject;
  int points = 0;
  int blocks = 0;
  double worst = 0.0;
  std::string worst_block;

  bool passed(double tol) const { return worst <= tol; }
  void record(const std::string& block, const Matrix& analytic, const Matrix& fd,
              double scale = 0.0);
};

/// Central-difference Jacobian of f at z with one Richardson step.
Matrix fd_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& z,
                   double step = 1e-5);

/// Checks gradients and every second-derivative block of one cost term at a
/// point. `neighbor_x` is aligned with `neighbor_ids`.
void check_cost_term_at(const CostTerm& term, int t, Stage stage, const Vector& x,
                        const Vector& u, const std::vector<RobotId>& neighbor_ids,
                        const std::vector<Vector>& neighbor_x, DerivativeCheck& out);

/// Checks value-weight derivatives (gtheta, hx_theta, hu_theta) of a cost
/// model at a point, plus its combined state and input blocks.
void check_cost_model_at(const CostModel& cost, const Vector& weights, int t, Stage stage,
                         const Vector& x, const Vector& u,
                         const std::vector<RobotId>& neighbor_ids,
                         const std::vector<Vector>& neighbor_x, DerivativeCheck& out);

/// Checks f, its Jacobians and the curvature of lambda' f at a point.
void check_dynamics_at(const DynamicsModel& model, const Vector& x, const Vector& u,
                       const Vector& theta, const Vector& lambda, DerivativeCheck& out);

/// Every entry of the built-in cost and dynamics catalogs at `points`
/// random points each, plus a cost model combining all terms.
std::vector<DerivativeCheck> derivative_sweep(int points, std::uint64_t seed);

}  // namespace distgame::oracles
