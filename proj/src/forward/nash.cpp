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

#include "distgame/forward/nash.h"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <filesystem>

#include "distgame/common/csv.h"
#include "distgame/common/errors.h"

namespace distgame {

void ShootingConfig::validate(int robot_count) const {
  if (!(gamma > 0.0)) throw ConfigError("shooting step size must be positive");
  if (!(eps_u > 0.0)) throw ConfigError("shooting tolerance must be positive");
  if (max_iters < 1) throw ConfigError("shooting iteration cap must be at least 1");
  if (!(shrink > 0.0 && shrink < 1.0)) throw ConfigError("backtracking shrink must be in (0, 1)");
  if (!robot_gamma.empty()) {
    if (static_cast<int>(robot_gamma.size()) != robot_count) {
      throw ConfigError("per-robot step sizes must list every robot");
    }
    for (double g : robot_gamma)
      if (!(g > 0.0)) throw ConfigError("shooting step size must be positive");
  }
}

double ShootingConfig::gamma_for(RobotId i) const {
  return robot_gamma.empty() ? gamma : robot_gamma.at(i);
}

double NashSolution::final_residual() const {
  return residual_history.empty() ? std::numeric_limits<double>::infinity()
                                  : residual_history.back();
}

double hamiltonian(const RobotProblem& robot, int t, const VectorSeq& x, const VectorSeq& u,
                   const NeighborStates& neighbors, const Vector& lambda_next) {
  const int T = static_cast<int>(u.size());
  if (t < 0 || t >= T) throw ShapeError("hamiltonian: time index out of range");
  if (lambda_next.size() != robot.n()) throw ShapeError("hamiltonian: costate dimension");
  const double c = robot.cost->value(stage_point(robot, t, T, x, u, neighbors),
                                     robot.cost_weights());
  const Vector f = robot.dynamics->step(x[t], u[t], robot.dynamics_params());
  return c + f.dot(lambda_next);
}

CostateTrajectory backward_costates(const RobotProblem& robot, const VectorSeq& x,
                                    const VectorSeq& u, const NeighborStates& neighbors) {
  const int T = static_cast<int>(u.size());
  if (static_cast<int>(x.size()) != T + 1) throw ShapeError("costates: state sequence length");
  const Vector w = robot.cost_weights();
  const Vector dyn = robot.dynamics_params();
  CostateTrajectory out;
  out.lambda.assign(T, Vector());
  out.lambda[T - 1] = robot.cost->evaluate(stage_point(robot, T, T, x, u, neighbors), w, 1).gx;
  if (!out.lambda[T - 1].allFinite()) throw DivergenceError("non-finite costate", T);
  for (int t = T - 1; t >= 1; --t) {
    const CostExpansion e = robot.cost->evaluate(stage_point(robot, t, T, x, u, neighbors), w, 1);
    const DynamicsJacobians J = robot.dynamics->linearize(x[t], u[t], dyn);
    out.lambda[t - 1] = e.gx + J.fx.transpose() * out.lambda[t];
    if (!out.lambda[t - 1].allFinite()) throw DivergenceError("non-finite costate", t);
  }
  return out;
}

Vector input_gradient(const RobotProblem& robot, int t, const VectorSeq& x, const VectorSeq& u,
                      const NeighborStates& neighbors, const Vector& lambda_next) {
  const int T = static_cast<int>(u.size());
  if (t < 0 || t >= T) throw ShapeError("input_gradient: time index out of range");
  const CostExpansion e =
      robot.cost->evaluate(stage_point(robot, t, T, x, u, neighbors), robot.cost_weights(), 1);
  const DynamicsJacobians J = robot.dynamics->linearize(x[t], u[t], robot.dynamics_params());
  return e.gu + J.fu.transpose() * lambda_next;
}

VectorSeq input_gradients(const RobotProblem& robot, const VectorSeq& x, const VectorSeq& u,
                          const NeighborStates& neighbors, const CostateTrajectory& lambda) {
  VectorSeq du(u.size());
  for (int t = 0; t < static_cast<int>(u.size()); ++t) {
    du[t] = input_gradient(robot, t, x, u, neighbors, lambda.at(t + 1));
  }
  return du;
}

namespace {

double seq_max_abs(const VectorSeq& s) {
  double m = 0.0;
  for (const auto& v : s)
    if (v.size() > 0) m = std::max(m, v.cwiseAbs().maxCoeff());
  return m;
}

void check_inputs(const GameProblem& game, const std::vector<VectorSeq>& u) {
  if (static_cast<int>(u.size()) != game.size()) throw ShapeError("one input sequence per robot");
  for (int i = 0; i < game.size(); ++i) {
    if (static_cast<int>(u[i].size()) != game.horizon()) {
      throw ShapeError("robot " + std::to_string(i) + ": input sequence length");
    }
    for (const auto& v : u[i]) {
      if (v.size() != game.robot(i).mu() || !v.allFinite()) {
        throw ShapeError("robot " + std::to_string(i) + ": bad input vector");
      }
    }
  }
}

}  // namespace

std::vector<VectorSeq> zero_inputs(const GameProblem& game) {
  std::vector<VectorSeq> u(game.size());
  for (int i = 0; i < game.size(); ++i) {
    u[i].assign(game.horizon(), Vector::Zero(game.robot(i).mu()));
  }
  return u;
}

NashSolution solve_nash(const GameProblem& game, const std::vector<VectorSeq>& init_u,
                        const ShootingConfig& cfg, CommFabric& fabric, RobotExecutor* executor,
                        const ShootingObserver& observer) {
  const int m = game.size();
  const int T = game.horizon();
  cfg.validate(m);
  std::vector<VectorSeq> u = init_u.empty() ? zero_inputs(game) : init_u;
  check_inputs(game, u);

  auto run = [&](const std::function<void(int)>& task) {
    if (executor != nullptr) {
      executor->run(m, task);
    } else {
      for (int i = 0; i < m; ++i) task(i);
    }
  };

  std::vector<VectorSeq> x(m);
  std::vector<std::map<RobotId, VectorSeq>> received(m);
  std::vector<CostateTrajectory> lambda(m);
  std::vector<VectorSeq> du(m);
  std::vector<double> res(m, 0.0);

  NashSolution sol;
  for (int k = 0; k < cfg.max_iters; ++k) {
    run([&](int i) { x[i] = rollout(game.robot(i), u[i], T); });

    std::vector<Payload> out(m);
    for (int i = 0; i < m; ++i) out[i].blocks = {pack_sequence(x[i])};
    Inbox inbox = fabric.broadcast_to_neighbors(out);
    for (int i = 0; i < m; ++i) {
      received[i].clear();
      for (auto& [j, payload] : inbox[i]) received[i][j] = unpack_sequence(payload.blocks.at(0));
    }

    run([&](int i) {
      const RobotProblem& robot = game.robot(i);
      const NeighborStates nb = align_neighbors(robot, received[i]);
      lambda[i] = backward_costates(robot, x[i], u[i], nb);
      du[i] = input_gradients(robot, x[i], u[i], nb, lambda[i]);
      res[i] = seq_max_abs(du[i]);
    });

    const double worst = *std::max_element(res.begin(), res.end());
    sol.residual_history.push_back(worst);
    sol.robot_residual_history.push_back(res);
    if (observer) observer(k, res);
    if (!std::isfinite(worst)) throw DivergenceError("non-finite input gradient", 0);
    if (worst <= cfg.eps_u) {
      sol.converged = true;
      break;
    }
    if (k + 1 == cfg.max_iters) break;

    run([&](int i) {
      const double g = cfg.gamma_for(i);
      if (!cfg.backtracking) {
        for (int t = 0; t < T; ++t) u[i][t] -= g * du[i][t];
        return;
      }
      const RobotProblem& robot = game.robot(i);
      const NeighborStates nb = align_neighbors(robot, received[i]);
      const double j0 = eval_objective(robot, x[i], u[i], nb);
      double step = g;
      VectorSeq trial(T);
      for (int b = 0; b <= cfg.max_backtracks; ++b) {
        for (int t = 0; t < T; ++t) trial[t] = u[i][t] - step * du[i][t];
        try {
          const VectorSeq xt = rollout(robot, trial, T);
          const double j = eval_objective(robot, xt, trial, nb);
          if (std::isfinite(j) && j <= j0) break;
        } catch (const DivergenceError&) {
        }
        step *= cfg.shrink;
      }
      u[i] = trial;
    });
  }

  sol.iterations = static_cast<int>(sol.residual_history.size());
  sol.trajectories.resize(m);
  for (int i = 0; i < m; ++i) sol.trajectories[i] = Trajectory{x[i], u[i]};
  sol.costates = lambda;
  return sol;
}

std::map<RobotId, VectorSeq> neighbor_states(const GameProblem& game,
                                             const std::vector<Trajectory>& trajectories,
                                             RobotId i) {
  std::map<RobotId, VectorSeq> nb;
  for (RobotId j : game.robot(i).neighbors) nb[j] = trajectories.at(j).x;
  return nb;
}

std::vector<double> pmp_residual(const GameProblem& game,
                                 const std::vector<Trajectory>& trajectories) {
  std::vector<double> out(game.size(), 0.0);
  for (int i = 0; i < game.size(); ++i) {
    const RobotProblem& robot = game.robot(i);
    const Trajectory& xi = trajectories.at(i);
    xi.validate(game.horizon(), robot.n(), robot.mu());
    const auto nbmap = neighbor_states(game, trajectories, i);
    const NeighborStates nb = align_neighbors(robot, nbmap);
    const CostateTrajectory lam = backward_costates(robot, xi.x, xi.u, nb);
    out[i] = seq_max_abs(input_gradients(robot, xi.x, xi.u, nb, lam));
  }
  return out;
}

std::vector<double> pmp_residual(const GameProblem& game, const NashSolution& solution) {
  return pmp_residual(game, solution.trajectories);
}

std::vector<double> dynamics_defect(const GameProblem& game,
                                    const std::vector<Trajectory>& trajectories) {
  std::vector<double> out(game.size(), 0.0);
  for (int i = 0; i < game.size(); ++i) {
    const RobotProblem& robot = game.robot(i);
    const Trajectory& xi = trajectories.at(i);
    double d = (xi.x.at(0) - robot.x0).cwiseAbs().maxCoeff();
    for (int t = 0; t < game.horizon(); ++t) {
      const Vector f = robot.dynamics->step(xi.x[t], xi.u[t], robot.dynamics_params());
      d = std::max(d, (xi.x[t + 1] - f).cwiseAbs().maxCoeff());
    }
    out[i] = d;
  }
  return out;
}

bool InputHessianReport::all_positive_definite() const {
  for (const auto& row : positive_definite)
    for (bool b : row)
      if (!b) return false;
  return true;
}

InputHessianReport check_input_hessian(const GameProblem& game, const NashSolution& solution) {
  const int T = game.horizon();
  InputHessianReport rep;
  rep.positive_definite.resize(game.size());
  rep.min_eigenvalue.resize(game.size());
  for (int i = 0; i < game.size(); ++i) {
    const RobotProblem& robot = game.robot(i);
    const Trajectory& xi = solution.trajectories.at(i);
    const auto nbmap = neighbor_states(game, solution.trajectories, i);
    const NeighborStates nb = align_neighbors(robot, nbmap);
    const CostateTrajectory lam = backward_costates(robot, xi.x, xi.u, nb);
    for (int t = 0; t < T; ++t) {
      const CostExpansion e = robot.cost->evaluate(stage_point(robot, t, T, xi.x, xi.u, nb),
                                                   robot.cost_weights(), 2);
      const DynamicsCurvature k = robot.dynamics->curvature(xi.x[t], xi.u[t],
                                                            robot.dynamics_params(), lam.at(t + 1));
      Matrix h = e.huu + k.uu;
      h = 0.5 * (h + h.transpose()).eval();
      Eigen::SelfAdjointEigenSolver<Matrix> es(h, Eigen::EigenvaluesOnly);
      const double lo = es.eigenvalues().minCoeff();
      const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
      rep.min_eigenvalue[i].push_back(lo);
      rep.positive_definite[i].push_back(lo > 1e-12 * scale);
    }
  }
  return rep;
}

std::vector<std::string> write_solution_csv(const std::string& dir, const GameProblem& game,
                                            const NashSolution& solution) {
  std::filesystem::create_directories(dir);
  const int T = game.horizon();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::string> paths;
  for (int i = 0; i < game.size(); ++i) {
    const RobotProblem& robot = game.robot(i);
    const Trajectory& xi = solution.trajectories.at(i);
    const bool has_lambda = i < static_cast<int>(solution.costates.size());
    CsvTable tab;
    tab.comments.push_back("distgame solution v1 robot=" + std::to_string(i) +
                           " horizon=" + std::to_string(T));
    tab.columns.push_back("t");
    for (int k = 0; k < robot.n(); ++k) tab.columns.push_back("x" + std::to_string(k));
    for (int k = 0; k < robot.mu(); ++k) tab.columns.push_back("u" + std::to_string(k));
    for (int k = 0; k < robot.n(); ++k) tab.columns.push_back("lambda" + std::to_string(k));
    for (int t = 0; t <= T; ++t) {
      std::vector<double> row{static_cast<double>(t)};
      for (int k = 0; k < robot.n(); ++k) row.push_back(xi.x[t](k));
      for (int k = 0; k < robot.mu(); ++k) row.push_back(t < T ? xi.u[t](k) : nan);
      for (int k = 0; k < robot.n(); ++k) {
        row.push_back(t > 0 && has_lambda ? solution.costates[i].at(t)(k) : nan);
      }
      tab.rows.push_back(std::move(row));
    }
    const std::string path = (std::filesystem::path(dir) / ("robot_" + std::to_string(i) + ".csv")).string();
    write_csv(path, tab);
    paths.push_back(path);
  }
  return paths;
}

NashSolution read_solution_csv(const std::string& dir, const GameProblem& game) {
  const int T = game.horizon();
  NashSolution sol;
  bool all_lambda = true;
  for (int i = 0; i < game.size(); ++i) {
    const RobotProblem& robot = game.robot(i);
    const std::string path = (std::filesystem::path(dir) / ("robot_" + std::to_string(i) + ".csv")).string();
    const CsvTable tab = read_csv(path);
    const int n = robot.n(), mu = robot.mu();
    if (static_cast<int>(tab.columns.size()) != 1 + 2 * n + mu ||
        static_cast<int>(tab.rows.size()) != T + 1) {
      throw ShapeError(path + ": table shape does not match the scenario");
    }
    Trajectory xi;
    CostateTrajectory lam;
    for (int t = 0; t <= T; ++t) {
      const auto& row = tab.rows[t];
      Vector x(n), u(mu), l(n);
      for (int k = 0; k < n; ++k) x(k) = row[1 + k];
      for (int k = 0; k < mu; ++k) u(k) = row[1 + n + k];
      for (int k = 0; k < n; ++k) l(k) = row[1 + n + mu + k];
      xi.x.push_back(x);
      if (t < T) xi.u.push_back(u);
      if (t > 0) {
        lam.lambda.push_back(l);
        all_lambda = all_lambda && l.allFinite();
      }
    }
    xi.validate(T, n, mu);
    sol.trajectories.push_back(std::move(xi));
    sol.costates.push_back(std::move(lam));
  }
  if (!all_lambda) sol.costates.clear();
  return sol;
}

void write_residual_csv(const std::string& path, const NashSolution& solution) {
  CsvTable tab;
  tab.comments.push_back("distgame residual v1");
  tab.columns = {"iteration", "max_residual"};
  const std::size_t m =
      solution.robot_residual_history.empty() ? 0 : solution.robot_residual_history[0].size();
  for (std::size_t i = 0; i < m; ++i) tab.columns.push_back("residual_" + std::to_string(i));
  for (std::size_t k = 0; k < solution.residual_history.size(); ++k) {
    std::vector<double> row{static_cast<double>(k), solution.residual_history[k]};
    for (double r : solution.robot_residual_history[k]) row.push_back(r);
    tab.rows.push_back(std::move(row));
  }
  write_csv(path, tab);
}

}  // namespace distgame
