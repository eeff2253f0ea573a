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

#include "distgame/learning/inverse.h"

#include <cmath>
#include <fstream>
#include <sstream>

#include "distgame/common/csv.h"

namespace distgame {

void DemonstrationSet::validate(const GameProblem& game) const {
  if (demos.empty()) throw ShapeError("at least one demonstration is required");
  for (const auto& d : demos) {
    if (static_cast<int>(d.robots.size()) != game.size()) {
      throw ShapeError("demonstration does not list every robot");
    }
    for (int i = 0; i < game.size(); ++i) {
      d.robots[i].validate(game.horizon(), game.robot(i).n(), game.robot(i).mu());
    }
  }
}

std::vector<Trajectory> DemonstrationSet::of_robot(RobotId i) const {
  std::vector<Trajectory> out;
  for (const auto& d : demos) out.push_back(d.robots.at(i));
  return out;
}

namespace {

Vector difference(const RobotProblem& robot, const Trajectory& xi_star, const Trajectory& demo) {
  const int T = xi_star.horizon();
  demo.validate(T, robot.n(), robot.mu());
  return xi_star.flatten() - demo.flatten();
}

}  // namespace

double loss(const RobotProblem& robot, const Trajectory& xi_star,
            const std::vector<Trajectory>& demos) {
  xi_star.validate(xi_star.horizon(), robot.n(), robot.mu());
  double total = 0.0;
  for (const auto& d : demos) total += difference(robot, xi_star, d).squaredNorm();
  return total;
}

Vector loss_gradient_wrt_traj(const RobotProblem& robot, const Trajectory& xi_star,
                              const std::vector<Trajectory>& demos) {
  xi_star.validate(xi_star.horizon(), robot.n(), robot.mu());
  Vector g = Vector::Zero(xi_star.flatten().size());
  for (const auto& d : demos) g += 2.0 * difference(robot, xi_star, d);
  return g;
}

Vector parameter_gradient(const RobotProblem& robot, const Trajectory& xi_star,
                          const std::vector<Trajectory>& demos,
                          const TrajectorySensitivity& sensitivity) {
  const int ri = robot.r();
  if (sensitivity.theta_tag.size() < sensitivity.theta_offset + ri ||
      sensitivity.theta_tag.segment(sensitivity.theta_offset, ri) != robot.theta) {
    throw StalenessError("robot " + std::to_string(robot.id) +
                         ": sensitivity was computed at different parameters");
  }
  const Matrix s = sensitivity.stacked();
  const Vector g = loss_gradient_wrt_traj(robot, xi_star, demos);
  if (s.rows() != g.size() || s.cols() != ri) {
    throw ShapeError("parameter_gradient: sensitivity shape does not match the trajectory");
  }
  return s.transpose() * g;
}

void LearningConfig::validate() const {
  if (!(eta > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(decay > 0.0)) throw ConfigError("learning-rate decay must be positive");
  if (!(loss_tol >= 0.0)) throw ConfigError("loss tolerance must be non-negative");
  if (max_outer_iters < 0) throw ConfigError("outer iteration cap must be non-negative");
}

bool LearningTrace::loss_below(double threshold) const {
  for (const auto& r : records)
    if (r.total_loss < threshold) return true;
  return false;
}

LearningTrace learn(const GameProblem& game, const DemonstrationSet& demos,
                    const ShootingConfig& shooting, const DistSolverConfig& solver,
                    const LearningConfig& cfg, CommFabric& fabric, RobotExecutor* executor,
                    const LearningObserver& observer) {
  cfg.validate();
  demos.validate(game);
  const int m = game.size();
  const int D = demos.count();
  const int T = game.horizon();
  if (cfg.theta_star.size() > 0 && cfg.theta_star.size() != game.total_params()) {
    throw ConfigError("ground-truth parameter vector has the wrong length");
  }

  // Game per demonstration: same parameters, the demonstration's initial states.
  auto game_for = [&](const Vector& theta, int d) {
    GameProblem g = game.with_theta(theta);
    for (int i = 0; i < m; ++i) g = g.with_initial_state(i, demos.demos[d].robots[i].x.at(0));
    return g;
  };

  LearningTrace trace;
  Vector theta = game.theta();
  std::vector<std::vector<VectorSeq>> warm_u(D);
  std::vector<DistSolveResult> warm_y(D);
  std::vector<bool> have_y(D, false);
  double start_loss = -1.0;

  for (int k = cfg.start_iteration;; ++k) {
    OuterRecord rec;
    rec.k = k;
    rec.robot_loss.assign(m, 0.0);
    std::vector<Vector> grad(m);
    for (int i = 0; i < m; ++i) grad[i] = Vector::Zero(game.robot(i).r());
    std::vector<NashSolution> solutions(D);
    std::vector<GameProblem> games;
    for (int d = 0; d < D; ++d) games.push_back(game_for(theta, d));

    for (int d = 0; d < D; ++d) {
      const GameProblem& g = games[d];
      const auto& init = cfg.warm_start ? warm_u[d] : std::vector<VectorSeq>();
      std::string reason = "did not converge";
      auto forward = [&](const std::vector<VectorSeq>& start) {
        try {
          NashSolution sol = solve_nash(g, start, shooting, fabric, executor);
          rec.forward_iterations += sol.iterations;
          return sol;
        } catch (const DivergenceError& e) {
          reason = std::string("diverged: ") + e.what();
          return NashSolution{};
        }
      };
      solutions[d] = forward(init);
      if (!solutions[d].converged && !init.empty()) {
        // A warm start can sit in a stiff region of a barrier; retry cold.
        solutions[d] = forward({});
      }
      if (!solutions[d].converged) {
        trace.status = LearningStatus::kForwardFailure;
        trace.final_theta = theta;
        trace.message = "forward solve " + reason + " at outer iteration " + std::to_string(k) +
                        "; try a smaller learning rate";
        throw LearningAborted(trace.message, trace);
      }
      if (cfg.warm_start) {
        warm_u[d].clear();
        for (const auto& tr : solutions[d].trajectories) warm_u[d].push_back(tr.u);
      }
      for (int i = 0; i < m; ++i) {
        rec.robot_loss[i] +=
            loss(g.robot(i), solutions[d].trajectories[i], {demos.demos[d].robots[i]});
      }
    }
    for (double l : rec.robot_loss) rec.total_loss += l;
    for (int i = 0; i < m; ++i) rec.theta.push_back(theta.segment(game.param_offset(i), game.robot(i).r()));
    if (cfg.theta_star.size() > 0) {
      for (int i = 0; i < m; ++i) {
        const int off = game.param_offset(i), ri = game.robot(i).r();
        rec.param_error.push_back((theta.segment(off, ri) - cfg.theta_star.segment(off, ri)).norm());
      }
      rec.total_param_error = (theta - cfg.theta_star).norm();
    }
    trace.last_solutions = solutions;
    trace.final_theta = theta;

    if (start_loss < 0.0) start_loss = rec.total_loss;
    const bool done = rec.total_loss <= cfg.loss_tol;
    const bool capped = k - cfg.start_iteration >= cfg.max_outer_iters;
    if (rec.total_loss > cfg.abort_factor * start_loss && start_loss > 0.0) {
      trace.records.push_back(rec);
      trace.status = LearningStatus::kDiverged;
      trace.message = "loss grew past " + std::to_string(cfg.abort_factor) +
                      "x its starting value; reduce the learning rate";
      throw LearningAborted(trace.message, trace);
    }
    if (done || capped) {
      trace.records.push_back(rec);
      if (observer) observer(trace.records.back());
      trace.status = done ? LearningStatus::kConverged : LearningStatus::kIterationCap;
      break;
    }

    // Sensitivities and local gradients, all at the same theta.
    for (int d = 0; d < D; ++d) {
      const GameProblem& g = games[d];
      const auto stacked = stack_all(assemble_blocks(g, solutions[d]), T);
      const auto views = build_global_view(stacked, g.graph(), fabric, cfg.view);
      DistSolveResult y = solve_distributed(views, g.graph(), fabric, solver,
                                            cfg.warm_start && have_y[d] ? &warm_y[d] : nullptr,
                                            executor);
      rec.solver_iterations += y.iterations;
      if (!y.converged) {
        trace.records.push_back(rec);
        trace.status = LearningStatus::kSolverFailure;
        trace.message = "sensitivity solve did not converge at outer iteration " + std::to_string(k);
        throw LearningAborted(trace.message, trace);
      }
      for (int i = 0; i < m; ++i) {
        const RobotProblem& robot = g.robot(i);
        const TrajectorySensitivity s =
            extract_sensitivity(y.Y[i], robot, T, g.param_offset(i), g.theta());
        grad[i] += parameter_gradient(robot, solutions[d].trajectories[i],
                                      {demos.demos[d].robots[i]}, s);
      }
      if (cfg.warm_start) {
        warm_y[d] = std::move(y);
        have_y[d] = true;
      }
    }
    trace.records.push_back(rec);
    if (observer) observer(trace.records.back());

    const double eta = cfg.eta * std::pow(cfg.decay, k - cfg.start_iteration);
    for (int i = 0; i < m; ++i) {
      theta.segment(game.param_offset(i), game.robot(i).r()) -= eta * grad[i];
    }
    if (!theta.allFinite()) {
      trace.status = LearningStatus::kDiverged;
      trace.message = "parameters became non-finite; reduce the learning rate";
      throw LearningAborted(trace.message, trace);
    }
    trace.final_theta = theta;
    if (!cfg.checkpoint_path.empty() && cfg.checkpoint_every > 0 &&
        (k + 1 - cfg.start_iteration) % cfg.checkpoint_every == 0) {
      write_checkpoint(cfg.checkpoint_path, k + 1, theta);
    }
  }
  return trace;
}

void write_learning_trace_csv(const std::string& path, const LearningTrace& trace) {
  CsvTable tab;
  tab.comments.push_back("distgame learning trace v1");
  tab.columns = {"k", "total_loss"};
  const std::size_t m = trace.records.empty() ? 0 : trace.records[0].robot_loss.size();
  const bool has_err = !trace.records.empty() && !trace.records[0].param_error.empty();
  for (std::size_t i = 0; i < m; ++i) tab.columns.push_back("loss_" + std::to_string(i));
  if (has_err) {
    for (std::size_t i = 0; i < m; ++i) tab.columns.push_back("param_error_" + std::to_string(i));
    tab.columns.push_back("param_error");
  }
  tab.columns.push_back("forward_iterations");
  tab.columns.push_back("solver_iterations");
  for (const auto& r : trace.records) {
    std::vector<double> row{static_cast<double>(r.k), r.total_loss};
    row.insert(row.end(), r.robot_loss.begin(), r.robot_loss.end());
    if (has_err) {
      row.insert(row.end(), r.param_error.begin(), r.param_error.end());
      row.push_back(r.total_param_error);
    }
    row.push_back(r.forward_iterations);
    row.push_back(r.solver_iterations);
    tab.rows.push_back(std::move(row));
  }
  write_csv(path, tab);
}

void write_checkpoint(const std::string& path, int k, const Vector& theta) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write checkpoint " + path);
  out << "# distgame checkpoint v1\n";
  out << "k " << k << "\n";
  for (Eigen::Index j = 0; j < theta.size(); ++j) out << format_double(theta(j)) << "\n";
}

std::pair<int, Vector> read_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read checkpoint " + path);
  std::string line;
  int k = -1;
  std::vector<double> vals;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("k ", 0) == 0) {
      k = std::stoi(line.substr(2));
      continue;
    }
    char* end = nullptr;
    const double v = std::strtod(line.c_str(), &end);
    if (end == line.c_str()) throw ConfigError("checkpoint: bad value", lineno);
    vals.push_back(v);
  }
  if (k < 0) throw ConfigError("checkpoint: missing iteration index");
  return {k, Eigen::Map<Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()))};
}

}  // namespace distgame
