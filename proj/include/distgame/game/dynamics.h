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

#include <memory>
#include <string>

#include "distgame/common/types.h"

namespace distgame {

/// First-order expansion of x' = f(x, u, theta).
struct DynamicsJacobians {
  Vector f;
  Matrix fx;      // n x n
  Matrix fu;      // n x mu
  Matrix ftheta;  // n x p
};

/// Second derivatives of lambda' f(x, u, theta) for a fixed costate lambda.
struct DynamicsCurvature {
  Matrix xx;      // n x n
  Matrix xu;      // n x mu
  Matrix uu;      // mu x mu
  Matrix xtheta;  // n x p
  Matrix utheta;  // mu x p
};

/// Discrete-time robot dynamics with analytic derivatives.
///
/// `theta` is the dynamics segment of the robot parameter vector and has
/// `param_dim()` entries (possibly zero). Positions occupy the leading
/// `position_dim()` state coordinates; when the model carries velocities they
/// occupy the next `position_dim()` coordinates.
class DynamicsModel {
 public:
  virtual ~DynamicsModel() = default;

  virtual std::string name() const = 0;
  virtual int state_dim() const = 0;
  virtual int input_dim() const = 0;
  virtual int param_dim() const = 0;
  virtual int position_dim() const = 0;
  virtual bool has_velocity_state() const { return false; }
  /// True when f is affine in (x, u) for every fixed theta.
  virtual bool is_linear() const { return false; }

  virtual Vector step(const Vector& x, const Vector& u, const Vector& theta) const = 0;
  virtual DynamicsJacobians linearize(const Vector& x, const Vector& u,
                                      const Vector& theta) const = 0;
  virtual DynamicsCurvature curvature(const Vector& x, const Vector& u,
                                      const Vector& theta,
                                      const Vector& lambda) const = 0;
};

using DynamicsPtr = std::shared_ptr<const DynamicsModel>;

/// x' = A x + g B u, where the input gain g is either fixed or the single
/// dynamics parameter.
class LinearDynamics final : public DynamicsModel {
 public:
  LinearDynamics(std::string name, Matrix a, Matrix b, int position_dim,
                 bool has_velocity, bool learnable_gain, double fixed_gain = 1.0);

  std::string name() const override { return name_; }
  int state_dim() const override { return static_cast<int>(a_.rows()); }
  int input_dim() const override { return static_cast<int>(b_.cols()); }
  int param_dim() const override { return learnable_gain_ ? 1 : 0; }
  int position_dim() const override { return position_dim_; }
  bool has_velocity_state() const override { return has_velocity_; }
  bool is_linear() const override { return true; }

  Vector step(const Vector& x, const Vector& u, const Vector& theta) const override;
  DynamicsJacobians linearize(const Vector& x, const Vector& u,
                              const Vector& theta) const override;
  DynamicsCurvature curvature(const Vector& x, const Vector& u, const Vector& theta,
                              const Vector& lambda) const override;

  const Matrix& a() const { return a_; }
  const Matrix& b() const { return b_; }

 private:
  double gain(const Vector& theta) const;

  std::string name_;
  Matrix a_;
  Matrix b_;
  int position_dim_;
  bool has_velocity_;
  bool learnable_gain_;
  double fixed_gain_;
};

/// Forward-Euler differential-drive model.
///   state (px, py, heading), input (speed, turn rate)
///   px' = px + dt g v cos(heading), py' = py + dt g v sin(heading),
///   heading' = heading + dt w
class UnicycleDynamics final : public DynamicsModel {
 public:
  UnicycleDynamics(double dt, bool learnable_gain, double fixed_gain = 1.0);

  std::string name() const override { return "unicycle"; }
  int state_dim() const override { return 3; }
  int input_dim() const override { return 2; }
  int param_dim() const override { return learnable_gain_ ? 1 : 0; }
  int position_dim() const override { return 2; }

  Vector step(const Vector& x, const Vector& u, const Vector& theta) const override;
  DynamicsJacobians linearize(const Vector& x, const Vector& u,
                              const Vector& theta) const override;
  DynamicsCurvature curvature(const Vector& x, const Vector& u, const Vector& theta,
                              const Vector& lambda) const override;

  double dt() const { return dt_; }

 private:
  double gain(const Vector& theta) const;

  double dt_;
  bool learnable_gain_;
  double fixed_gain_;
};

/// x' = x + dt g u in `dim` dimensions.
DynamicsPtr make_single_integrator(int dim, double dt, bool learnable_gain = false,
                                   double fixed_gain = 1.0);
/// Position/velocity pairs in `dim` dimensions, acceleration input.
DynamicsPtr make_double_integrator(int dim, double dt, bool learnable_gain = false,
                                   double fixed_gain = 1.0);
DynamicsPtr make_unicycle(double dt, bool learnable_gain = false, double fixed_gain = 1.0);

}  // namespace distgame
