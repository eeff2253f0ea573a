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

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>

#include "distgame/common/csv.h"
#include "distgame/common/errors.h"
#include "distgame/oracles/oracles.h"
#include "distgame/scenario/scenario.h"

namespace distgame {

namespace fs = std::filesystem;

namespace {

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

std::unique_ptr<RobotExecutor> make_executor(const Scenario& s) {
  return s.threads > 1 ? std::make_unique<RobotExecutor>(s.threads) : nullptr;
}

/// Per-edge totals, one row per directed pair that carried traffic.
std::string write_edge_audit(const std::string& dir, const MessageAudit& audit,
                             const CommGraph& graph) {
  CsvTable tab;
  tab.comments.push_back("distgame audit-edges v1");
  tab.columns = {"sender", "receiver", "messages", "bytes", "graph_edge"};
  for (const auto& [pair, count] : audit.counts) {
    const auto b = audit.bytes.find(pair);
    tab.rows.push_back({static_cast<double>(pair.first), static_cast<double>(pair.second),
                        static_cast<double>(count),
                        b == audit.bytes.end() ? 0.0 : static_cast<double>(b->second),
                        graph.adjacent(pair.first, pair.second) ? 1.0 : 0.0});
  }
  const std::string path = join(dir, "audit_edges.csv");
  write_csv(path, tab);
  return path;
}

void finish_audit(RunReport& rep, const std::string& dir, const CommFabric& fabric) {
  rep.audit = fabric.audit();
  const std::string path = join(dir, "audit.csv");
  rep.audit.write_csv(path);
  rep.files.push_back(path);
  rep.files.push_back(write_edge_audit(dir, rep.audit, fabric.graph()));
  rep.summary["messages"] = static_cast<double>(rep.audit.total_messages());
  rep.summary["locality_violations"] = static_cast<double>(rep.audit.violations.size());
}

std::string write_hessian_csv(const std::string& dir, const InputHessianReport& h) {
  CsvTable tab;
  tab.comments.push_back("distgame hessian v1");
  tab.columns = {"robot", "t", "min_eigenvalue", "positive_definite"};
  for (std::size_t i = 0; i < h.min_eigenvalue.size(); ++i) {
    for (std::size_t t = 0; t < h.min_eigenvalue[i].size(); ++t) {
      tab.rows.push_back({static_cast<double>(i), static_cast<double>(t), h.min_eigenvalue[i][t],
                          h.positive_definite[i][t] ? 1.0 : 0.0});
    }
  }
  const std::string path = join(dir, "hessian_pd.csv");
  write_csv(path, tab);
  return path;
}

double min_eigen(const InputHessianReport& h) {
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& row : h.min_eigenvalue)
    for (double v : row) lo = std::min(lo, v);
  return lo;
}

std::string vector_text(const Vector& v) {
  std::ostringstream os;
  for (Eigen::Index k = 0; k < v.size(); ++k) os << (k ? "," : "") << format_double(v(k));
  return os.str();
}

RunReport report_for(const Scenario& s, const std::string& mode) {
  RunReport rep;
  rep.scenario = s.name;
  rep.mode = mode;
  return rep;
}

FabricOptions fabric_options(const Overrides& o) {
  FabricOptions f;
  f.strict = o.strict_locality;
  return f;
}

}  // namespace

void RunReport::write(const std::string& dir) {
  fs::create_directories(dir);
  const std::string path = join(dir, "report.json");
  files.push_back(path);
  nlohmann::json j;
  j["format"] = "distgame report v1";
  j["scenario"] = scenario;
  j["mode"] = mode;
  j["exit_code"] = static_cast<int>(exit);
  j["files"] = files;
  nlohmann::json s = nlohmann::json::object();
  for (const auto& [k, v] : summary) {
    if (std::isfinite(v)) {
      s[k] = v;
    } else {
      s[k] = nullptr;
    }
  }
  j["summary"] = s;
  j["notes"] = notes;
  j["audit"] = {{"messages", audit.total_messages()},
                {"violations", audit.violations.size()},
                {"truncated", audit.truncated}};
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << j.dump(2) << "\n";
}

Scenario apply_overrides(const Scenario& scenario, const Overrides& o, const std::string& mode) {
  Scenario s = scenario;
  const bool inverse = mode == "inverse";
  if (o.seed) {
    s.demos.seed = *o.seed;
    s.solver.seed = *o.seed;
  }
  if (o.gamma) {
    s.shooting.gamma = *o.gamma;
    s.shooting.robot_gamma.clear();
  }
  if (o.alpha) s.solver.alpha = *o.alpha;
  if (o.eta) s.learning.eta = *o.eta;
  if (o.max_iters) {
    if (inverse) {
      s.learning.max_outer_iters = *o.max_iters;
    } else {
      s.shooting.max_iters = *o.max_iters;
    }
  }
  if (o.tol) {
    if (inverse) {
      s.learning.loss_tol = *o.tol;
    } else {
      s.shooting.eps_u = *o.tol;
    }
  }
  if (o.demo_count) s.demos.count = *o.demo_count;
  s.shooting.validate(s.game.size());
  s.learning.validate();
  if (s.solver.alpha < 0.0) throw ConfigError("solver step size must be non-negative");
  if (s.demos.count < 1) throw ConfigError("demo count must be at least 1");
  return s;
}

RunReport cmd_forward(const Scenario& scenario, const Overrides& o, const std::string& out) {
  const Scenario s = apply_overrides(scenario, o, "forward");
  fs::create_directories(out);
  RunReport rep = report_for(s, "forward");
  CommFabric fabric(s.game.graph(), fabric_options(o));
  const auto exec = make_executor(s);
  const NashSolution sol = solve_nash(s.game, {}, s.shooting, fabric, exec.get());

  for (const auto& f : write_solution_csv(out, s.game, sol)) rep.files.push_back(f);
  rep.files.push_back(join(out, "residuals.csv"));
  write_residual_csv(rep.files.back(), sol);
  const InputHessianReport h = check_input_hessian(s.game, sol);
  rep.files.push_back(write_hessian_csv(out, h));
  finish_audit(rep, out, fabric);

  rep.summary["converged"] = sol.converged ? 1.0 : 0.0;
  rep.summary["iterations"] = sol.iterations;
  rep.summary["final_residual"] = sol.final_residual();
  rep.summary["hessian_pd"] = h.all_positive_definite() ? 1.0 : 0.0;
  rep.summary["min_hessian_eigenvalue"] = min_eigen(h);
  if (!s.obstacles.empty()) {
    rep.summary["obstacle_clearance"] = min_obstacle_clearance(s, sol.trajectories);
  }
  const double cc = min_collision_clearance(s, sol.trajectories);
  if (std::isfinite(cc)) rep.summary["collision_clearance"] = cc;
  if (!sol.converged) {
    rep.exit = ExitCode::kNonConvergence;
    rep.notes.push_back("forward solve stopped at the iteration cap");
  }
  rep.write(out);
  return rep;
}

RunReport cmd_make_demos(const Scenario& scenario, const Overrides& o, const std::string& out) {
  const Scenario s = apply_overrides(scenario, o, "make-demos");
  if (!s.has_theta_star) throw ConfigError("scenario " + s.name + " has no ground-truth parameters");
  fs::create_directories(out);
  RunReport rep = report_for(s, "make-demos");
  CommFabric fabric(s.game.graph(), fabric_options(o));
  const auto exec = make_executor(s);

  DemonstrationSet set;
  std::ostringstream prov;
  prov << "scenario=" << s.name << " seed=" << s.demos.seed << " count=" << s.demos.count
       << " perturbation=" << format_double(s.demos.perturbation)
       << " theta_star=" << vector_text(s.game.theta());
  set.provenance = prov.str();
  int total_iters = 0;
  const std::vector<GameProblem> games = demo_games(s, s.demos);
  for (std::size_t d = 0; d < games.size(); ++d) {
    const NashSolution sol = solve_nash(games[d], {}, s.shooting, fabric, exec.get());
    total_iters += sol.iterations;
    if (!sol.converged) {
      rep.exit = ExitCode::kNonConvergence;
      rep.notes.push_back("forward solve for demo " + std::to_string(d) +
                          " did not converge; no demos written");
      finish_audit(rep, out, fabric);
      rep.write(out);
      return rep;
    }
    set.demos.push_back(Demonstration{sol.trajectories});
  }
  for (const auto& f : write_demo_set(out, s.game, set)) rep.files.push_back(f);
  finish_audit(rep, out, fabric);
  rep.summary["demos"] = set.count();
  rep.summary["forward_iterations"] = total_iters;
  rep.write(out);
  return rep;
}

RunReport cmd_inverse(const Scenario& scenario, const std::string& demo_dir, InitMode init,
                      const Overrides& o, const std::string& out) {
  const Scenario s = apply_overrides(scenario, o, "inverse");
  const DemonstrationSet demos = read_demo_set(demo_dir, s.game);
  fs::create_directories(out);
  RunReport rep = report_for(s, "inverse");
  CommFabric fabric(s.game.graph(), fabric_options(o));
  const auto exec = make_executor(s);

  LearningConfig lc = s.learning;
  if (s.has_theta_star) lc.theta_star = s.game.theta();
  const Vector theta0 = init == InitMode::kTruth ? s.theta_star() : s.theta_init;
  const GameProblem start = s.game.with_theta(theta0);

  LearningTrace trace;
  try {
    trace = learn(start, demos, s.shooting, s.solver, lc, fabric, exec.get());
  } catch (const LearningAborted& e) {
    trace = e.trace();
    rep.exit = ExitCode::kNonConvergence;
    rep.notes.push_back(std::string(e.what()) + "; try a smaller learning rate");
  }

  rep.files.push_back(join(out, "learning_trace.csv"));
  write_learning_trace_csv(rep.files.back(), trace);

  CsvTable th;
  th.comments.push_back("distgame theta v1");
  th.columns = {"robot", "index", "theta", "theta_init", "theta_star"};
  const Vector fin = trace.final_theta.size() ? trace.final_theta : theta0;
  for (int i = 0; i < s.game.size(); ++i) {
    const int off = s.game.param_offset(i);
    for (int k = 0; k < s.game.robot(i).r(); ++k) {
      th.rows.push_back({static_cast<double>(i), static_cast<double>(k), fin(off + k),
                         theta0(off + k),
                         s.has_theta_star ? s.game.theta()(off + k)
                                          : std::numeric_limits<double>::quiet_NaN()});
    }
  }
  rep.files.push_back(join(out, "theta.csv"));
  write_csv(rep.files.back(), th);

  for (std::size_t d = 0; d < trace.last_solutions.size(); ++d) {
    const std::string sub = join(out, "reproduced_" + std::to_string(d));
    fs::create_directories(sub);
    GameProblem g = s.game.with_theta(fin);
    for (int i = 0; i < g.size(); ++i) g = g.with_initial_state(i, demos.demos[d].robots[i].x[0]);
    for (const auto& f : write_solution_csv(sub, g, trace.last_solutions[d])) rep.files.push_back(f);
  }
  finish_audit(rep, out, fabric);

  if (!trace.records.empty()) {
    const OuterRecord& first = trace.records.front();
    const OuterRecord& last = trace.records.back();
    rep.summary["outer_iterations"] = static_cast<double>(trace.records.size());
    rep.summary["initial_loss"] = first.total_loss;
    rep.summary["final_loss"] = last.total_loss;
    if (s.has_theta_star) {
      rep.summary["initial_param_error"] = first.total_param_error;
      rep.summary["final_param_error"] = (fin - s.game.theta()).norm();
    }
  }
  rep.summary["status"] = static_cast<double>(trace.status);
  if (rep.exit == ExitCode::kSuccess && trace.status != LearningStatus::kConverged &&
      lc.loss_tol > 0.0) {
    rep.notes.push_back("loss tolerance not reached within the iteration cap");
  }
  rep.write(out);
  return rep;
}

RunReport cmd_verify(const Scenario& scenario, const std::string& solution_dir,
                     const Overrides& o, const std::string& out) {
  const Scenario s = apply_overrides(scenario, o, "verify");
  const NashSolution sol = read_solution_csv(solution_dir, s.game);
  fs::create_directories(out);
  RunReport rep = report_for(s, "verify");

  const std::vector<double> res = pmp_residual(s.game, sol.trajectories);
  const InputHessianReport h = check_input_hessian(s.game, sol);
  double lq_mismatch = std::numeric_limits<double>::quiet_NaN();
  try {
    const NashSolution ref = oracles::dense_nash_lq(s.game);
    lq_mismatch = 0.0;
    for (int i = 0; i < s.game.size(); ++i) {
      lq_mismatch = std::max(lq_mismatch, (sol.trajectories[i].flatten() -
                                           ref.trajectories[i].flatten()).cwiseAbs().maxCoeff());
    }
  } catch (const OracleFailure&) {
    rep.notes.push_back("game is not linear-quadratic; dense equilibrium comparison skipped");
  }

  CsvTable tab;
  tab.comments.push_back("distgame verify v1");
  tab.columns = {"robot", "pmp_residual", "best_response_improvement",
                 "relative_improvement", "hessian_pd", "min_hessian_eigenvalue"};
  double worst = 0.0;
  bool pd = true;
  for (int i = 0; i < s.game.size(); ++i) {
    const oracles::BestResponse br = oracles::best_response_check(s.game, sol.trajectories, i);
    bool robot_pd = true;
    double lo = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < h.positive_definite[i].size(); ++t) {
      robot_pd = robot_pd && h.positive_definite[i][t];
      lo = std::min(lo, h.min_eigenvalue[i][t]);
    }
    pd = pd && robot_pd;
    worst = std::max(worst, br.relative_improvement);
    tab.rows.push_back({static_cast<double>(i), res[i], br.improvement, br.relative_improvement,
                        robot_pd ? 1.0 : 0.0, lo});
    if (br.relative_improvement > 1e-6) {
      rep.notes.push_back("robot " + std::to_string(i) + " can improve its objective unilaterally");
    }
  }
  rep.files.push_back(join(out, "verification.csv"));
  write_csv(rep.files.back(), tab);

  double max_res = 0.0;
  for (double r : res) max_res = std::max(max_res, r);
  rep.summary["max_pmp_residual"] = max_res;
  rep.summary["max_relative_improvement"] = worst;
  rep.summary["hessian_pd"] = pd ? 1.0 : 0.0;
  rep.summary["certified"] = (worst <= 1e-6 && pd) ? 1.0 : 0.0;
  if (std::isfinite(lq_mismatch)) rep.summary["lq_mismatch"] = lq_mismatch;
  rep.write(out);
  return rep;
}

}  // namespace distgame
