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

// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "distgame/oracles/derivatives.h"
#include "distgame/oracles/oracles.h"
#include "distgame/scenario/scenario.h"
#include "pipeline.h"
#include "random_systems.h"

using namespace distgame;
using namespace distgame::testing;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double amax(const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

Scenario shipped(const std::string& name) {
  return load_scenario(scenario_dir() + "/" + name + ".yaml");
}

/// Every fabric handed out is strict and kept for the locality audit.
class FabricPool {
 public:
  CommFabric& make(const CommGraph& graph) {
    fabrics_.emplace_back(graph, FabricOptions{true, 1'000'000});
    return fabrics_.back();
  }
  const std::deque<CommFabric>& all() const { return fabrics_; }

 private:
  std::deque<CommFabric> fabrics_;
};

FabricPool pool;

/// Certificates of every converged forward run made by this binary.
struct Certificate {
  std::string label;
  double worst_relative = 0.0;
  bool pd = false;
  bool conclusive = true;
};
std::vector<Certificate> certificates;

void certify(const std::string& label, const GameProblem& game, const NashSolution& sol) {
  Certificate c{label};
  for (RobotId i = 0; i < game.size(); ++i) {
    const oracles::BestResponse br = oracles::best_response_check(game, sol.trajectories, i);
    c.worst_relative = std::max(c.worst_relative, br.relative_improvement);
    c.conclusive = c.conclusive && br.conclusive;
  }
  c.pd = check_input_hessian(game, sol).all_positive_definite();
  certificates.push_back(c);
}

NashSolution forward(const std::string& label, const GameProblem& game,
                     const ShootingConfig& cfg) {
  NashSolution sol = solve_nash(game, {}, cfg, pool.make(game.graph()));
  if (sol.converged) certify(label, game, sol);
  return sol;
}

struct Outcome {
  bool passed = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  failures += !o.passed;
  std::printf("%s criterion %d: %s | %s | %.1f s\n", o.passed ? "PASS" : "FAIL", id, name.c_str(),
              o.detail.c_str(), seconds_since(t0));
  std::fflush(stdout);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double max_traj_diff(const std::vector<Trajectory>& a, const std::vector<Trajectory>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, amax(a[i].flatten() - b[i].flatten()));
  return d;
}

/// Distributed sensitivity of a converged forward solution.
DistSolveResult distributed_sensitivity(const GameProblem& game, const NashSolution& sol,
                                        const DistSolverConfig& cfg) {
  CommFabric& fabric = pool.make(game.graph());
  const auto st = stack_all(assemble_blocks(game, sol), game.horizon());
  const auto views = build_global_view(st, game.graph(), fabric, {});
  return solve_distributed(views, game.graph(), fabric, cfg);
}

Outcome forward_oracle() {
  const Scenario s = shipped("lq_pair");
  const auto t0 = Clock::now();
  const NashSolution sol = forward("lq_pair", s.game, s.shooting);
  const double elapsed = seconds_since(t0);
  const double err = max_traj_diff(sol.trajectories, oracles::dense_nash_lq(s.game).trajectories);
  return {sol.converged && err <= 1e-6 && elapsed <= 5.0,
          "max |xi - xi_dense| = " + fmt(err) + " in " + std::to_string(sol.iterations) +
              " iterations, " + fmt(elapsed) + " s"};
}

Outcome exponential_rate() {
  const Scenario s = shipped("lq_pair");
  const NashSolution sol = forward("lq_pair", s.game, s.shooting);
  const std::vector<double>& h = sol.residual_history;
  const std::size_t burn = 10;
  if (!sol.converged || h.size() < burn + 3) return {false, "too few iterations"};
  std::size_t ok = 0, total = 0;
  for (std::size_t k = burn; k + 1 < h.size(); ++k, ++total) ok += h[k + 1] / h[k] <= 0.99;
  // Least-squares slope of log residual against iteration.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(h.size() - burn);
  for (std::size_t k = burn; k < h.size(); ++k) {
    const double x = static_cast<double>(k), y = std::log(h[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double frac = static_cast<double>(ok) / static_cast<double>(total);
  return {frac >= 0.95 && slope < 0.0,
          "contracting fraction " + fmt(frac) + ", log slope " + fmt(slope) + ", mean ratio " +
              fmt(std::exp(slope))};
}

Outcome distributed_vs_dense() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  bool converged = true;
  std::ostringstream os;
  for (const char* name : {"lq_pair", "scenario_a"}) {
    const Scenario s = shipped(name);
    const NashSolution sol = forward(name, s.game, s.shooting);
    converged = converged && sol.converged;
    DistSolverConfig cfg = s.solver;
    cfg.eps_v = 1e-10;
    cfg.max_iters = 2'000'000;
    const DistSolveResult res = distributed_sensitivity(s.game, sol, cfg);
    const oracles::DenseSensitivity d = oracles::dense_sensitivity_solve(s.game, sol);
    converged = converged && res.converged;
    double e = 0.0;
    for (RobotId i = 0; i < s.game.size(); ++i) e = std::max(e, amax(res.Y[i] - d.Y[i]));
    worst = std::max(worst, e);
    os << name << " " << fmt(e) << " (" << res.iterations << " it) ";
  }
  const double elapsed = seconds_since(t0);
  os << "total " << fmt(elapsed) << " s";
  return {converged && worst <= 1e-8 && elapsed <= 30.0, os.str()};
}

Outcome sensitivity_vs_fd() {
  const Scenario s = shipped("scenario_a");
  const GameProblem& game = s.game;
  const NashSolution sol = forward("scenario_a", game, s.shooting);
  DistSolverConfig cfg = s.solver;
  cfg.eps_v = 1e-10;
  cfg.max_iters = 2'000'000;
  const DistSolveResult res = distributed_sensitivity(game, sol, cfg);
  const oracles::DenseSensitivity d = oracles::dense_sensitivity_solve(game, sol);

  oracles::FdOptions fo;
  fo.shooting = s.shooting;
  fo.shooting.eps_u = 1e-9;
  fo.tighten = 1.0;
  for (const Trajectory& xi : sol.trajectories) fo.warm_u.push_back(xi.u);
  const std::vector<Matrix> fd = oracles::fd_sensitivity_all(game, -1.0, fo);

  double worst_dist = 0.0, worst_dense = 0.0;
  for (RobotId i = 0; i < game.size(); ++i) {
    const TrajectorySensitivity dist = extract_sensitivity(res.Y[i], game.robot(i), game.horizon(),
                                                           game.param_offset(i), game.theta());
    const Matrix cols = fd[i].middleCols(game.param_offset(i), game.robot(i).r());
    for (int k = 0; k < cols.cols(); ++k) {
      const double scale = std::max(1e-12, amax(cols.col(k)));
      worst_dist = std::max(worst_dist, amax(dist.stacked().col(k) - cols.col(k)) / scale);
      worst_dense =
          std::max(worst_dense, amax(d.sensitivity[i].stacked().col(k) - cols.col(k)) / scale);
    }
  }
  return {res.converged && worst_dist <= 1e-3 && worst_dense <= 1e-3,
          "distributed " + fmt(worst_dist) + ", dense " + fmt(worst_dense) + " over " +
              std::to_string(game.total_params()) + " coordinates"};
}

Outcome gradient_check() {
  std::ostringstream os;
  bool ok = true;
  {
    const Scenario s = shipped("lq_pair");
    const DemonstrationSet demos = single_demo(oracles::dense_nash_lq(s.game));
    const GameProblem off = s.game.with_theta(1.2 * s.game.theta());
    const auto an = pipeline_gradient(off, demos, s.shooting, s.solver, pool.make(off.graph()));
    const auto fd = fd_loss_gradient(off, demos, [](const GameProblem& g) {
      return oracles::dense_nash_lq(g);
    });
    double w = 0.0;
    for (RobotId i = 0; i < off.size(); ++i) w = std::max(w, relative_gap(an[i], fd[i]));
    ok = ok && w <= 1e-3;
    os << "lq_pair " << fmt(w);
  }
  {
    const Scenario s = shipped("scenario_a");
    const NashSolution truth = forward("scenario_a", s.game, s.shooting);
    const DemonstrationSet demos = single_demo(truth);
    const GameProblem off = s.game.with_theta(1.2 * s.game.theta());
    ShootingConfig tight = s.shooting;
    tight.eps_u = 1e-10;
    tight.max_iters = 50'000;
    DistSolverConfig solver = s.solver;
    solver.eps_v = 1e-10;
    solver.max_iters = 2'000'000;
    const auto an = pipeline_gradient(off, demos, tight, solver, pool.make(off.graph()));
    std::vector<VectorSeq> warm;
    for (const Trajectory& xi : truth.trajectories) warm.push_back(xi.u);
    const auto fd = fd_loss_gradient(off, demos, [&](const GameProblem& g) {
      NashSolution sol = solve_nash(g, warm, tight, pool.make(g.graph()));
      if (!sol.converged) throw std::runtime_error("perturbed forward solve did not converge");
      return sol;
    });
    double w = 0.0;
    for (RobotId i = 0; i < off.size(); ++i) w = std::max(w, relative_gap(an[i], fd[i]));
    ok = ok && w <= 1e-3;
    os << ", scenario_a " << fmt(w);
  }
  return {ok, os.str()};
}

Outcome inverse_self_consistency() {
  const Scenario s = shipped("scenario_a");
  const NashSolution truth = forward("scenario_a", s.game, s.shooting);
  if (!truth.converged) return {false, "demo synthesis did not converge"};
  LearningConfig lc = s.learning;
  lc.eta = 0.004;
  lc.max_outer_iters = 500;
  lc.theta_star = s.game.theta();
  const auto t0 = Clock::now();
  const LearningTrace trace = learn(s.game.with_theta(1.5 * s.game.theta()), single_demo(truth),
                                    s.shooting, s.solver, lc, pool.make(s.game.graph()));
  const double elapsed = seconds_since(t0);
  double best = trace.records.front().total_loss;
  int first = -1;
  for (const OuterRecord& r : trace.records) {
    best = std::min(best, r.total_loss);
    if (first < 0 && r.total_loss < 0.03) first = r.k;
  }
  return {first >= 0 && first <= 500 && elapsed <= 600.0,
          "loss " + fmt(trace.records.front().total_loss) + " -> " +
              fmt(trace.records.back().total_loss) + ", below 0.03 at outer iteration " +
              std::to_string(first) + ", " + fmt(elapsed) + " s"};
}

Outcome nash_certificate() {
  bool converged = true;
  for (const char* name :
       {"lq_pair", "scenario_a", "scenario_a_side", "trivial", "scenario_b", "scenario_c"}) {
    const Scenario s = shipped(name);
    converged = converged && forward(name, s.game, s.shooting).converged;
  }
  double worst = 0.0;
  bool pd = true, conclusive = true;
  for (const Certificate& c : certificates) {
    worst = std::max(worst, c.worst_relative);
    pd = pd && c.pd;
    conclusive = conclusive && c.conclusive;
  }
  return {converged && worst <= 1e-6 && pd && conclusive,
          std::to_string(certificates.size()) + " converged runs, worst relative improvement " +
              fmt(worst) + (pd ? ", Hessians PD" : ", Hessian not PD")};
}

Outcome locality_audit() {
  std::size_t messages = 0, violations = 0, off_edge = 0;
  for (const CommFabric& f : pool.all()) {
    messages += f.audit().total_messages();
    violations += f.audit().violations.size();
    for (const auto& [pair, count] : f.audit().counts) {
      off_edge += !f.graph().adjacent(pair.first, pair.second);
    }
  }
  return {violations == 0 && off_edge == 0 && messages > 0,
          std::to_string(pool.all().size()) + " strict fabrics, " + std::to_string(messages) +
              " messages, " + std::to_string(violations) + " violations, " +
              std::to_string(off_edge) + " off-edge links"};
}

Outcome telescoping() {
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  long checks = 0;
  for (int k = 0; k < 100; ++k) {
    const int m = 1 + static_cast<int>(rng() % 5);
    const RandomSystem sys = random_system(rng, m, 2);
    DistSolverConfig cfg;
    cfg.max_iters = 60;
    cfg.divergence_factor = 1e300;
    solve_distributed(sys.views, sys.graph, pool.make(sys.graph), cfg, nullptr, nullptr,
                      [&](const SolverState& st) {
                        Matrix a = Matrix::Zero(st.v[0].rows(), st.v[0].cols()), b = a;
                        for (int i = 0; i < m; ++i) {
                          a += st.v[i];
                          b += sys.views[i].apply(st.Y[i]) + sys.views[i].dense_chat();
                        }
                        worst = std::max(worst, amax(a - b));
                        ++checks;
                      });
  }
  return {worst <= 1e-12, "100 systems, " + std::to_string(checks) +
                              " iterations, worst |sum v - sum (Psi Y + C)| = " + fmt(worst)};
}

Outcome derivative_sweep() {
  double worst = 0.0;
  std::string where;
  bool ok = true;
  const auto checks = oracles::derivative_sweep(100, 2024);
  for (const oracles::DerivativeCheck& c : checks) {
    ok = ok && c.passed(1e-5) && c.points >= 50;
    if (c.worst > worst) {
      worst = c.worst;
      where = c.subject + "/" + c.worst_block;
    }
  }
  return {ok, std::to_string(checks.size()) + " subjects, worst " + fmt(worst) + " at " + where};
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  report(1, "forward oracle equivalence (LQ)", forward_oracle);
  report(2, "exponential convergence of shooting", exponential_rate);
  report(3, "distributed vs dense sensitivity", distributed_vs_dense);
  report(4, "sensitivity vs finite differences", sensitivity_vs_fd);
  report(5, "end-to-end gradient check", gradient_check);
  report(6, "inverse self-consistency", inverse_self_consistency);
  report(7, "Nash certificate", nash_certificate);
  report(8, "locality audit", locality_audit);
  report(9, "telescoping invariant", telescoping);
  report(10, "derivative validation sweep", derivative_sweep);
  std::printf("%d of 10 criteria failed, %.1f s total\n", failures, seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
