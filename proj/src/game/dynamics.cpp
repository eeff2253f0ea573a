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

#include "distgame/game/dynamics.h"

#include <cmath>
#include <utility>

#include "distgame/common/errors.h"

namespace distgame {

LinearDynamics::LinearDynamics(std::string name, Matrix a, Matrix b, int position_dim,
                               bool has_velocity, bool learnable_gain, double fixed_gain)
    : name_(std::move(name)),
      a_(std::move(a)),
      b_(std::move(b)),
      position_dim_(position_dim),
      has_velocity_(has_velocity),
      learnable_gain_(learnable_gain),
      fixed_gain_(fixed_gain) {
  if (a_.rows() != a_.cols() || b_.rows() != a_.rows()) {
    throw ShapeError("linear dynamics: A must be n x n and B n x mu");
  }
  if (position_dim_ < 1 || position_dim_ * (has_velocity_ ? 2 : 1) > a_.rows()) {
    throw ShapeError("linear dynamics: position block does not fit the state");
  }
}

double LinearDynamics::gain(const Vector& theta) const {
  if (!learnable_gain_) return fixed_gain_;
  if (theta.size() != 1) throw ShapeError("linear dynamics expects one parameter");
  return theta(0);
}

Vector LinearDynamics::step(const Vector& x, const Vector& u, const Vector& theta) const {
  return a_ * x + gain(theta) * (b_ * u);
}

DynamicsJacobians LinearDynamics::linearize(const Vector& x, const Vector& u,
                                            const Vector& theta) const {
  const double g = gain(theta);
  DynamicsJacobians j;
  j.f = a_ * x + g * (b_ * u);
  j.fx = a_;
  j.fu = g * b_;
  j.ftheta = Matrix::Zero(state_dim(), param_dim());
  if (learnable_gain_) j.ftheta.col(0) = b_ * u;
  return j;
}

DynamicsCurvature LinearDynamics::curvature(const Vector&, const Vector&, const Vector&,
                                            const Vector& lambda) const {
  const int n = state_dim(), mu = input_dim(), p = param_dim();
  DynamicsCurvature c{Matrix::Zero(n, n), Matrix::Zero(n, mu), Matrix::Zero(mu, mu),
                      Matrix::Zero(n, p), Matrix::Zero(mu, p)};
  if (learnable_gain_) c.utheta.col(0) = b_.transpose() * lambda;
  return c;
}

UnicycleDynamics::UnicycleDynamics(double dt, bool learnable_gain, double fixed_gain)
    : dt_(dt), learnable_gain_(learnable_gain), fixed_gain_(fixed_gain) {
  if (!(dt > 0)) throw ShapeError("unicycle: dt must be positive");
}

double UnicycleDynamics::gain(const Vector& theta) const {
  if (!learnable_gain_) return fixed_gain_;
  if (theta.size() != 1) throw ShapeError("unicycle expects one parameter");
  return theta(0);
}

Vector UnicycleDynamics::step(const Vector& x, const Vector& u, const Vector& theta) const {
  const double g = gain(theta);
  Vector next(3);
  next << x(0) + dt_ * g * u(0) * std::cos(x(2)), x(1) + dt_ * g * u(0) * std::sin(x(2)),
      x(2) + dt_ * u(1);
  return next;
}

DynamicsJacobians UnicycleDynamics::linearize(const Vector& x, const Vector& u,
                                              const Vector& theta) const {
  const double g = gain(theta);
  const double c = std::cos(x(2)), s = std::sin(x(2)), v = u(0);
  DynamicsJacobians j;
  j.f = step(x, u, theta);
  j.fx = Matrix::Identity(3, 3);
  j.fx(0, 2) = -dt_ * g * v * s;
  j.fx(1, 2) = dt_ * g * v * c;
  j.fu = Matrix::Zero(3, 2);
  j.fu(0, 0) = dt_ * g * c;
  j.fu(1, 0) = dt_ * g * s;
  j.fu(2, 1) = dt_;
  j.ftheta = Matrix::Zero(3, param_dim());
  if (learnable_gain_) {
    j.ftheta(0, 0) = dt_ * v * c;
    j.ftheta(1, 0) = dt_ * v * s;
  }
  return j;
}

DynamicsCurvature UnicycleDynamics::curvature(const Vector& x, const Vector& u,
                                              const Vector& theta,
                                              const Vector& lambda) const {
  const double g = gain(theta);
  const double c = std::cos(x(2)), s = std::sin(x(2)), v = u(0);
  const double a = lambda(0), b = lambda(1);
  const int p = param_dim();
  DynamicsCurvature k{Matrix::Zero(3, 3), Matrix::Zero(3, 2), Matrix::Zero(2, 2),
                      Matrix::Zero(3, p), Matrix::Zero(2, p)};
  k.xx(2, 2) = dt_ * g * v * (-a * c - b * s);
  k.xu(2, 0) = dt_ * g * (-a * s + b * c);
  if (learnable_gain_) {
    k.xtheta(2, 0) = dt_ * v * (-a * s + b * c);
    k.utheta(0, 0) = dt_ * (a * c + b * s);
  }
  return k;
}

DynamicsPtr make_single_integrator(int dim, double dt, bool learnable_gain,
                                   double fixed_gain) {
  return std::make_shared<LinearDynamics>("single_integrator", Matrix::Identity(dim, dim),
                                          dt * Matrix::Identity(dim, dim), dim, false,
                                          learnable_gain, fixed_gain);
}

DynamicsPtr make_double_integrator(int dim, double dt, bool learnable_gain,
                                   double fixed_gain) {
  Matrix a = Matrix::Identity(2 * dim, 2 * dim);
  a.topRightCorner(dim, dim) = dt * Matrix::Identity(dim, dim);
  Matrix b = Matrix::Zero(2 * dim, dim);
  b.bottomRows(dim) = dt * Matrix::Identity(dim, dim);
  return std::make_shared<LinearDynamics>("double_integrator", a, b, dim, true,
                                          learnable_gain, fixed_gain);
}

DynamicsPtr make_unicycle(double dt, bool learnable_gain, double fixed_gain) {
  return std::make_shared<UnicycleDynamics>(dt, learnable_gain, fixed_gain);
}

}  // namespace distgame
