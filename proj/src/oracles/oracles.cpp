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

#include "distgame/oracles/oracles.h"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>

#include "distgame/common/errors.h"

namespace distgame::oracles {

// ---------------------------------------------------------------------------
// Dense sensitivity system

DenseSystem dense_solve(const std::vector<StackedRobotSystem>& stacked) {
  const int m = static_cast<int>(stacked.size());
  std::vector<int> rows(m), cols(m);
  for (int i = 0; i < m; ++i) {
    rows[i] = stacked[i].rows();
    cols[i] = stacked[i].cols();
  }
  DenseSystem sys;
  sys.rows = RowLayout::from(rows);
  sys.cols = RowLayout::from(cols);
  const int r = m > 0 ? stacked[0].r : 0;
  sys.A = Matrix::Zero(sys.rows.total, sys.cols.total);
  sys.C = Matrix::Zero(sys.rows.total, r);
  for (int i = 0; i < m; ++i) {
    const auto& s = stacked[i];
    sys.A.block(sys.rows.offset[i], sys.cols.offset[i], rows[i], cols[i]) = s.A_ii;
    for (const auto& [j, a] : s.A_ij) {
      sys.A.block(sys.rows.offset[i], sys.cols.offset[j], rows[i], cols[j]) += a;
    }
    sys.C.middleRows(sys.rows.offset[i], rows[i]) = s.C_bar;
  }
  const double scale = std::max(1.0, sys.C.cwiseAbs().maxCoeff());
  if (sys.A.rows() == sys.A.cols()) {
    Eigen::FullPivLU<Matrix> lu(sys.A);
    if (lu.isInvertible()) {
      sys.Y = lu.solve(-sys.C);
      sys.unique = true;
    }
  }
  if (!sys.unique) {
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(sys.A);
    sys.Y = cod.solve(-sys.C);
  }
  sys.residual = (sys.A * sys.Y + sys.C).cwiseAbs().maxCoeff();
  if (!sys.unique && sys.residual > 1e-8 * scale) {
    throw OracleFailure("sensitivity system has no consistent solution (residual " +
                        std::to_string(sys.residual) + ")");
  }
  return sys;
}

DenseSensitivity dense_sensitivity_solve(const GameProblem& game, const NashSolution& solution) {
  const auto stacked = stack_all(assemble_blocks(game, solution), game.horizon());
  DenseSensitivity out;
  out.system = dense_solve(stacked);
  const Vector theta = game.theta();
  for (int i = 0; i < game.size(); ++i) {
    out.Y.push_back(out.system.Y.middleRows(out.system.cols.offset[i], out.system.cols.rows[i]));
    out.sensitivity.push_back(extract_sensitivity(out.Y.back(), game.robot(i), game.horizon(),
                                                  game.param_offset(i), theta));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dense LQ equilibrium

namespace {

/// Unknowns of one optimized robot: x^{0..T}, u^{0..T-1}, lambda^{1..T}.
struct Unknowns {
  std::vector<int> active;
  std::vector<int> offset;  // per robot, -1 when frozen
  int total = 0;
  int T = 0;
};

Unknowns layout_for(const GameProblem& game, const std::vector<int>& active) {
  Unknowns u;
  u.active = active;
  u.T = game.horizon();
  u.offset.assign(game.size(), -1);
  for (int i : active) {
    u.offset[i] = u.total;
    const auto& r = game.robot(i);
    u.total += (u.T + 1) * r.n() + u.T * r.mu() + u.T * r.n();
  }
  return u;
}

struct Unpacked {
  std::vector<VectorSeq> x, u, lambda;  // lambda[i][t-1]
};

Unpacked unpack(const GameProblem& game, const Unknowns& L, const Vector& z,
                const std::vector<Trajectory>& frozen) {
  const int T = L.T;
  Unpacked p;
  p.x.resize(game.size());
  p.u.resize(game.size());
  p.lambda.resize(game.size());
  for (int i = 0; i < game.size(); ++i) {
    const auto& r = game.robot(i);
    if (L.offset[i] < 0) {
      p.x[i] = frozen.at(i).x;
      p.u[i] = frozen.at(i).u;
      continue;
    }
    int at = L.offset[i];
    for (int t = 0; t <= T; ++t, at += r.n()) p.x[i].push_back(z.segment(at, r.n()));
    for (int t = 0; t < T; ++t, at += r.mu()) p.u[i].push_back(z.segment(at, r.mu()));
    for (int t = 1; t <= T; ++t, at += r.n()) p.lambda[i].push_back(z.segment(at, r.n()));
  }
  return p;
}

/// Stacked first-order conditions of the active robots.
Vector conditions(const GameProblem& game, const Unknowns& L, const Vector& z,
                  const std::vector<Trajectory>& frozen) {
  const int T = L.T;
  const Unpacked p = unpack(game, L, z, frozen);
  Vector F(L.total);
  for (int i : L.active) {
    const auto& robot = game.robot(i);
    const int n = robot.n(), mu = robot.mu();
    NeighborStates nb;
    for (RobotId j : robot.neighbors) nb.push_back(&p.x[j]);
    const Vector w = robot.cost_weights();
    const Vector dyn = robot.dynamics_params();
    const auto& x = p.x[i];
    const auto& u = p.u[i];
    const auto& lam = p.lambda[i];
    int at = L.offset[i];
    F.segment(at, n) = x[0] - robot.x0;
    at += n;
    for (int t = 0; t < T; ++t, at += n) F.segment(at, n) = x[t + 1] - robot.dynamics->step(x[t], u[t], dyn);
    for (int t = 0; t < T; ++t, at += mu) {
      const auto e = robot.cost->evaluate(stage_point(robot, t, T, x, u, nb), w, 1);
      const auto J = robot.dynamics->linearize(x[t], u[t], dyn);
      F.segment(at, mu) = e.gu + J.fu.transpose() * lam[t];
    }
    for (int t = 1; t < T; ++t, at += n) {
      const auto e = robot.cost->evaluate(stage_point(robot, t, T, x, u, nb), w, 1);
      const auto J = robot.dynamics->linearize(x[t], u[t], dyn);
      F.segment(at, n) = lam[t - 1] - e.gx - J.fx.transpose() * lam[t];
    }
    const auto e = robot.cost->evaluate(stage_point(robot, T, T, x, u, nb), w, 1);
    F.segment(at, n) = lam[T - 1] - e.gx;
  }
  return F;
}

NashSolution solve_lq(const GameProblem& game, const std::vector<int>& active,
                      const std::vector<Trajectory>& frozen) {
  for (int i : active) {
    const auto& r = game.robot(i);
    if (!r.dynamics->is_linear() || !r.cost->quadratic()) {
      throw OracleFailure("robot " + std::to_string(i) + " is not linear-quadratic");
    }
  }
  const Unknowns L = layout_for(game, active);
  const Vector z0 = Vector::Zero(L.total);
  const Vector F0 = conditions(game, L, z0, frozen);
  Matrix J(L.total, L.total);
  for (int k = 0; k < L.total; ++k) {
    Vector e = Vector::Zero(L.total);
    e(k) = 1.0;
    J.col(k) = conditions(game, L, e, frozen) - F0;
  }
  // The conditions must be affine for the single solve to be exact.
  Vector probe = Vector::LinSpaced(L.total, -1.0, 1.0);
  const Vector Fp = conditions(game, L, probe, frozen);
  const double aff = (Fp - (J * probe + F0)).cwiseAbs().maxCoeff();
  if (aff > 1e-8 * std::max(1.0, Fp.cwiseAbs().maxCoeff())) {
    throw OracleFailure("first-order conditions are not affine; the game is not LQ");
  }
  Eigen::FullPivLU<Matrix> lu(J);
  if (!lu.isInvertible()) throw OracleFailure("degenerate game: singular first-order system");
  const Vector z = lu.solve(-F0);
  const Unpacked p = unpack(game, L, z, frozen);
  NashSolution sol;
  sol.trajectories.resize(game.size());
  sol.costates.resize(game.size());
  for (int i = 0; i < game.size(); ++i) {
    sol.trajectories[i] = Trajectory{p.x[i], p.u[i]};
    sol.costates[i].lambda = p.lambda[i];
  }
  sol.converged = true;
  sol.iterations = 1;
  return sol;
}

}  // namespace

NashSolution dense_nash_lq(const GameProblem& game) {
  std::vector<int> all(game.size());
  for (int i = 0; i < game.size(); ++i) all[i] = i;
  return solve_lq(game, all, {});
}

NashSolution dense_best_response_lq(const GameProblem& game,
                                    const std::vector<Trajectory>& frozen, RobotId i) {
  if (static_cast<int>(frozen.size()) != game.size()) throw ShapeError("need every trajectory");
  return solve_lq(game, {i}, frozen);
}

// ---------------------------------------------------------------------------
// Finite-difference sensitivity

double fd_default_step(double theta_k) { return 1e-5 * (1.0 + std::abs(theta_k)); }

namespace {

std::vector<Trajectory> forward(const GameProblem& game, const FdOptions& options) {
  if (options.dense_lq) return dense_nash_lq(game).trajectories;
  ShootingConfig cfg = options.shooting;
  cfg.eps_u *= options.tighten;
  CommFabric fabric(game.graph());  // private; never the caller's fabric
  const NashSolution sol = solve_nash(game, options.warm_u, cfg, fabric);
  if (!sol.converged) {
    throw OracleFailure("forward solve did not converge at a perturbed parameter (residual " +
                        std::to_string(sol.final_residual()) + ")");
  }
  return sol.trajectories;
}

}  // namespace

std::vector<Vector> fd_sensitivity(const GameProblem& game, int k, double delta,
                                   const FdOptions& options) {
  const Vector theta = game.theta();
  if (k < 0 || k >= theta.size()) throw ShapeError("fd_sensitivity: parameter index out of range");
  const double h = delta > 0.0 ? delta : fd_default_step(theta(k));
  Vector tp = theta, tm = theta;
  tp(k) += h;
  tm(k) -= h;
  const auto plus = forward(game.with_theta(tp), options);
  const auto minus = forward(game.with_theta(tm), options);
  std::vector<Vector> out;
  for (int i = 0; i < game.size(); ++i) {
    out.push_back((plus[i].flatten() - minus[i].flatten()) / (2.0 * h));
  }
  return out;
}

std::vector<Matrix> fd_sensitivity_all(const GameProblem& game, double delta,
                                       const FdOptions& options) {
  const int r = game.total_params();
  std::vector<Matrix> out(game.size());
  for (int k = 0; k < r; ++k) {
    const auto col = fd_sensitivity(game, k, delta, options);
    for (int i = 0; i < game.size(); ++i) {
      if (k == 0) out[i] = Matrix::Zero(col[i].size(), r);
      out[i].col(k) = col[i];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Best response

namespace {

struct FrozenObjective {
  const RobotProblem& robot;
  NeighborStates nb;
  int T;
  int mu;

  VectorSeq inputs(const Vector& z) const {
    VectorSeq u(T);
    for (int t = 0; t < T; ++t) u[t] = z.segment(t * mu, mu);
    return u;
  }
  double operator()(const Vector& z) const {
    try {
      const VectorSeq u = inputs(z);
      return eval_objective(robot, rollout(robot, u, T), u, nb);
    } catch (const DivergenceError&) {
      return std::numeric_limits<double>::infinity();
    }
  }
};

}  // namespace

BestResponse best_response_check(const GameProblem& game, const std::vector<Trajectory>& solution,
                                 RobotId i) {
  const RobotProblem& robot = game.robot(i);
  const int T = game.horizon(), mu = robot.mu();
  const int N = T * mu;
  std::map<RobotId, VectorSeq> nbmap;
  for (RobotId j : robot.neighbors) nbmap[j] = solution.at(j).x;
  FrozenObjective J{robot, align_neighbors(robot, nbmap), T, mu};

  Vector z(N);
  for (int t = 0; t < T; ++t) z.segment(t * mu, mu) = solution.at(i).u.at(t);
  BestResponse br;
  br.objective_before = J(z);
  double fz = br.objective_before;

  const double hg = 1e-6, hh = 1e-4;
  auto gradient = [&](const Vector& at) {
    Vector g(N);
    for (int k = 0; k < N; ++k) {
      Vector a = at, b = at;
      a(k) += hg;
      b(k) -= hg;
      g(k) = (J(a) - J(b)) / (2.0 * hg);
    }
    return g;
  };
  auto hessian = [&](const Vector& at) {
    Matrix H(N, N);
    const double f0 = J(at);
    for (int a = 0; a < N; ++a) {
      Vector pa = at, ma = at;
      pa(a) += hh;
      ma(a) -= hh;
      H(a, a) = (J(pa) - 2.0 * f0 + J(ma)) / (hh * hh);
      for (int b = a + 1; b < N; ++b) {
        Vector pp = at, pm = at, mp = at, mm = at;
        pp(a) += hh; pp(b) += hh;
        pm(a) += hh; pm(b) -= hh;
        mp(a) -= hh; mp(b) += hh;
        mm(a) -= hh; mm(b) -= hh;
        H(a, b) = H(b, a) = (J(pp) - J(pm) - J(mp) + J(mm)) / (4.0 * hh * hh);
      }
    }
    return H;
  };

  br.conclusive = true;
  for (int it = 0; it < 30; ++it) {
    const Vector g = gradient(z);
    br.gradient_norm = g.cwiseAbs().maxCoeff();
    if (br.gradient_norm < 1e-9) break;
    Matrix H = hessian(z);
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (H + H.transpose()));
    const double lo = es.eigenvalues().minCoeff();
    if (lo <= 1e-10) H += (1e-10 - lo + 1e-8 * std::abs(es.eigenvalues().maxCoeff())) * Matrix::Identity(N, N);
    const Vector dz = -H.ldlt().solve(g);
    double step = 1.0;
    bool accepted = false;
    for (int b = 0; b < 40; ++b) {
      const Vector trial = z + step * dz;
      const double ft = J(trial);
      if (ft < fz) {
        z = trial;
        fz = ft;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    ++br.newton_iterations;
    if (!accepted) break;
  }
  if (!std::isfinite(fz)) br.conclusive = false;
  br.objective_after = fz;
  br.improvement = br.objective_before - br.objective_after;
  br.relative_improvement = br.improvement / std::max(1.0, std::abs(br.objective_before));
  br.best.u = J.inputs(z);
  br.best.x = rollout(robot, br.best.u, T);
  return br;
}

}  // namespace distgame::oracles
