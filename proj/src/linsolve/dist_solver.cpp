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

#include "distgame/linsolve/dist_solver.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "distgame/common/csv.h"
#include "distgame/common/errors.h"

namespace distgame {

Matrix local_residual(const GlobalSystemView& view, const std::vector<RobotId>& neighbors,
                      const Matrix& Y_i, const Matrix& Z_i,
                      const std::map<RobotId, Matrix>& neighbor_Z) {
  if (neighbor_Z.size() != neighbors.size()) {
    throw TopologyError("robot " + std::to_string(view.robot) +
                        ": auxiliary states must come from exactly the neighbours");
  }
  if (Y_i.rows() != view.cols || Z_i.rows() != view.layout.total) {
    throw ShapeError("local_residual: state shapes do not match the system view");
  }
  Matrix v = view.apply(Y_i);
  v.middleRows(view.layout.offset[view.robot], view.chat.rows()) += view.chat;
  for (RobotId l : neighbors) {
    auto it = neighbor_Z.find(l);
    if (it == neighbor_Z.end()) {
      throw TopologyError("robot " + std::to_string(view.robot) + ": missing auxiliary state of " +
                          std::to_string(l));
    }
    v -= Z_i - it->second;
  }
  return v;
}

double default_alpha(const std::vector<GlobalSystemView>& views, const CommGraph& graph) {
  double psi2 = 0.0;
  for (const auto& v : views) psi2 = std::max(psi2, std::pow(v.spectral_norm(), 2));
  return 0.9 / (psi2 + 2.0 * graph.max_degree());
}

namespace {

double max_abs(const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

DistSolveResult solve_distributed(const std::vector<GlobalSystemView>& views,
                                  const CommGraph& graph, CommFabric& fabric,
                                  const DistSolverConfig& cfg, const DistSolveResult* warm,
                                  RobotExecutor* executor, const SolverObserver& observer) {
  const int m = static_cast<int>(views.size());
  if (m != graph.size()) throw ShapeError("one system view per robot");
  if (!(cfg.eps_v > 0.0)) throw ConfigError("solver tolerance must be positive");
  if (cfg.max_iters < 1) throw ConfigError("solver iteration cap must be at least 1");

  SolverState st;
  st.alpha = cfg.alpha > 0.0 ? cfg.alpha : default_alpha(views, graph);
  st.eps_v = cfg.eps_v;
  st.Y.resize(m);
  st.Z.resize(m);
  st.v.resize(m);
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int i = 0; i < m; ++i) {
    const int R = views[i].layout.total, c = views[i].cols, r = views[i].r;
    if (warm != nullptr) {
      if (warm->Y.at(i).rows() != c || warm->Y[i].cols() != r || warm->Z.at(i).rows() != R ||
          warm->Z[i].cols() != r) {
        throw ShapeError("warm start shapes do not match the system");
      }
      st.Y[i] = warm->Y[i];
      if (views[i].unknown_scale.size() == c) {
        st.Y[i] = views[i].unknown_scale.cwiseInverse().asDiagonal() * st.Y[i];
      }
      st.Z[i] = warm->Z[i];
    } else if (cfg.init == SolverInit::kRandom) {
      st.Y[i] = Matrix::NullaryExpr(c, r, [&] { return gauss(rng); });
      st.Z[i] = Matrix::NullaryExpr(R, r, [&] { return gauss(rng); });
    } else {
      st.Y[i] = Matrix::Zero(c, r);
      st.Z[i] = Matrix::Zero(R, r);
    }
  }

  auto run = [&](const std::function<void(int)>& task) {
    if (executor != nullptr) {
      executor->run(m, task);
    } else {
      for (int i = 0; i < m; ++i) task(i);
    }
  };

  DistSolveResult res;
  res.alpha = st.alpha;
  std::vector<std::map<RobotId, Matrix>> received(m);
  std::vector<double> vmax(m), vnorm2(m);
  double start_norm = -1.0;
  for (st.tau = 0; st.tau < cfg.max_iters; ++st.tau) {
    std::vector<Payload> out(m);
    for (int i = 0; i < m; ++i) out[i].blocks = {st.Z[i]};
    Inbox inbox = fabric.broadcast_to_neighbors(out);
    for (int i = 0; i < m; ++i) {
      received[i].clear();
      for (auto& [l, payload] : inbox[i]) received[i][l] = std::move(payload.blocks.at(0));
    }

    run([&](int i) {
      st.v[i] = local_residual(views[i], graph.neighbors(i), st.Y[i], st.Z[i], received[i]);
      vmax[i] = max_abs(st.v[i]);
      vnorm2[i] = st.v[i].squaredNorm();
    });
    if (observer) observer(st);
    ++res.iterations;
    const double worst = *std::max_element(vmax.begin(), vmax.end());
    double total = 0.0;
    for (double x : vnorm2) total += x;
    total = std::sqrt(total);
    if (cfg.record_trace) res.trace.push_back(vmax);
    res.final_residual = worst;
    if (!std::isfinite(worst)) {
      throw StepSizeError("distributed solve produced non-finite residuals; reduce alpha");
    }
    if (worst <= cfg.eps_v) {
      res.converged = true;
      break;
    }
    if (start_norm < 0.0) start_norm = total;
    if (total > cfg.divergence_factor * start_norm) {
      throw StepSizeError("distributed solve residual grew by more than " +
                          std::to_string(cfg.divergence_factor) + "x at iteration " +
                          std::to_string(st.tau) + "; reduce alpha (now " +
                          std::to_string(st.alpha) + ")");
    }
    if (st.tau + 1 == cfg.max_iters) break;
    run([&](int i) {
      st.Y[i].noalias() -= st.alpha * views[i].apply_transpose(st.v[i]);
      st.Z[i].noalias() += st.alpha * st.v[i];
    });
  }
  res.Y = std::move(st.Y);
  for (int i = 0; i < m; ++i) {
    if (views[i].unknown_scale.size() == views[i].cols) {
      res.Y[i] = views[i].unknown_scale.asDiagonal() * res.Y[i];
    }
  }
  res.Z = std::move(st.Z);
  return res;
}

void write_solver_trace_csv(const std::string& path, const DistSolveResult& result) {
  CsvTable tab;
  tab.comments.push_back("distgame linear solver trace v1 alpha=" + format_double(result.alpha));
  tab.columns.push_back("iteration");
  const std::size_t m = result.trace.empty() ? result.Y.size() : result.trace[0].size();
  for (std::size_t i = 0; i < m; ++i) tab.columns.push_back("residual_" + std::to_string(i));
  for (std::size_t k = 0; k < result.trace.size(); ++k) {
    std::vector<double> row{static_cast<double>(k)};
    row.insert(row.end(), result.trace[k].begin(), result.trace[k].end());
    tab.rows.push_back(std::move(row));
  }
  write_csv(path, tab);
}

Matrix TrajectorySensitivity::stacked() const {
  Matrix s(dx.rows() + du.rows(), dx.cols());
  s << dx, du;
  return s;
}

TrajectorySensitivity extract_sensitivity(const Matrix& Y_i, const RobotProblem& robot,
                                          int horizon, int theta_offset,
                                          const Vector& theta_tag) {
  const int n = robot.n(), mu = robot.mu(), ri = robot.r();
  if (Y_i.rows() != stacked_cols(n, mu, horizon)) {
    throw ShapeError("extract_sensitivity: unknown stack has " + std::to_string(Y_i.rows()) +
                     " rows, expected " + std::to_string(stacked_cols(n, mu, horizon)));
  }
  if (theta_offset < 0 || theta_offset + ri > Y_i.cols()) {
    throw ShapeError("extract_sensitivity: parameter columns out of range");
  }
  TrajectorySensitivity s;
  s.robot = robot.id;
  s.n = n;
  s.mu = mu;
  s.horizon = horizon;
  s.dx = Y_i.block(0, theta_offset, (horizon + 1) * n, ri);
  // The initial state does not depend on theta; drop the solver's round-off.
  s.dx.topRows(n).setZero();
  s.du = Y_i.block((horizon + 1) * n, theta_offset, horizon * mu, ri);
  s.theta_tag = theta_tag;
  s.theta_offset = theta_offset;
  return s;
}

}  // namespace distgame
