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

#include "distgame/sensitivity/assembly.h"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "distgame/common/errors.h"

namespace distgame {

namespace {

void check_block(const Matrix& m, RobotId i, int t, const char* name) {
  if (!m.allFinite()) {
    throw AssemblyError("non-finite block " + std::string(name) + " for robot " +
                        std::to_string(i) + " at t=" + std::to_string(t));
  }
}

/// n_rows x r matrix with `cost` in the cost-weight columns and `dyn` in the
/// dynamics-parameter columns of robot i.
Matrix theta_block(int rows, int r, int offset, const Matrix& cost, const Matrix& dyn) {
  Matrix out = Matrix::Zero(rows, r);
  if (cost.cols() > 0) out.block(0, offset, rows, cost.cols()) = cost;
  if (dyn.cols() > 0) out.block(0, offset + cost.cols(), rows, dyn.cols()) = dyn;
  return out;
}

}  // namespace

SensitivityBlocks assemble_robot_blocks(const GameProblem& game, const NashSolution& solution,
                                        RobotId i) {
  const RobotProblem& robot = game.robot(i);
  const int T = game.horizon();
  const Trajectory& xi = solution.trajectories.at(i);
  xi.validate(T, robot.n(), robot.mu());
  const auto nbmap = neighbor_states(game, solution.trajectories, i);
  const NeighborStates nb = align_neighbors(robot, nbmap);
  const CostateTrajectory lam = i < static_cast<int>(solution.costates.size())
                                    ? solution.costates[i]
                                    : backward_costates(robot, xi.x, xi.u, nb);
  if (lam.horizon() != T) throw AssemblyError("costate sequence has the wrong length");

  SensitivityBlocks b;
  b.robot = i;
  b.n = robot.n();
  b.mu = robot.mu();
  b.r = game.total_params();
  b.theta_offset = game.param_offset(i);
  b.theta_dim = robot.r();
  for (RobotId j : robot.neighbors) b.neighbor_dims[j] = {game.robot(j).n(), game.robot(j).mu()};

  const Vector w = robot.cost_weights();
  const Vector dyn = robot.dynamics_params();
  const int n = b.n, mu = b.mu, r = b.r, off = b.theta_offset;
  const int p = robot.dynamics->param_dim();

  b.stages.resize(T);
  for (int t = 0; t < T; ++t) {
    StageBlocks& s = b.stages[t];
    const CostExpansion e = robot.cost->evaluate(stage_point(robot, t, T, xi.x, xi.u, nb), w, 2);
    const DynamicsJacobians J = robot.dynamics->linearize(xi.x[t], xi.u[t], dyn);
    const DynamicsCurvature K = robot.dynamics->curvature(xi.x[t], xi.u[t], dyn, lam.at(t + 1));

    s.M_lambda = J.fx;
    s.N_lambda = J.fu;
    s.C_lambda = theta_block(n, r, off, Matrix::Zero(n, w.size()), J.ftheta);
    s.M_u = e.hxu.transpose() + K.xu.transpose();
    s.N_u = e.huu + K.uu;
    s.S_u = J.fu.transpose();
    s.C_u = theta_block(mu, r, off, e.hu_theta, p > 0 ? K.utheta : Matrix(mu, 0));
    s.M_x = e.hxx + K.xx;
    s.N_x = e.hxu + K.xu;
    s.S_x = J.fx.transpose();
    s.C_x = theta_block(n, r, off, e.hx_theta, p > 0 ? K.xtheta : Matrix(n, 0));
    for (std::size_t k = 0; k < robot.neighbors.size(); ++k) {
      s.Q_u[robot.neighbors[k]] = e.hu_xn[k];
      s.Q_x[robot.neighbors[k]] = e.hx_xn[k];
    }

    check_block(s.M_lambda, i, t, "M_lambda");
    check_block(s.N_lambda, i, t, "N_lambda");
    check_block(s.C_lambda, i, t, "C_lambda");
    check_block(s.M_u, i, t, "M_u");
    check_block(s.N_u, i, t, "N_u");
    check_block(s.C_u, i, t, "C_u");
    check_block(s.M_x, i, t, "M_x");
    check_block(s.N_x, i, t, "N_x");
    check_block(s.C_x, i, t, "C_x");
    for (const auto& [j, q] : s.Q_u) check_block(q, i, t, "Q_u");
    for (const auto& [j, q] : s.Q_x) check_block(q, i, t, "Q_x");
  }

  const CostExpansion e = robot.cost->evaluate(stage_point(robot, T, T, xi.x, xi.u, nb), w, 2);
  b.terminal.M_x = e.hxx;
  b.terminal.C_x = theta_block(n, r, off, e.hx_theta, Matrix(n, 0));
  for (std::size_t k = 0; k < robot.neighbors.size(); ++k) {
    b.terminal.Q_x[robot.neighbors[k]] = e.hx_xn[k];
  }
  check_block(b.terminal.M_x, i, T, "terminal M_x");
  check_block(b.terminal.C_x, i, T, "terminal C_x");
  for (const auto& [j, q] : b.terminal.Q_x) check_block(q, i, T, "terminal Q_x");
  return b;
}

std::vector<SensitivityBlocks> assemble_blocks(const GameProblem& game,
                                               const NashSolution& solution) {
  std::vector<SensitivityBlocks> out;
  out.reserve(game.size());
  for (int i = 0; i < game.size(); ++i) out.push_back(assemble_robot_blocks(game, solution, i));
  return out;
}

int stacked_rows(int n, int mu, int horizon) { return horizon * (2 * n + mu) + 2 * n; }
int stacked_cols(int n, int mu, int horizon) { return 2 * (horizon + 1) * n + horizon * mu; }

StackedRobotSystem stack_time(const SensitivityBlocks& b, int T) {
  if (static_cast<int>(b.stages.size()) != T) {
    throw AssemblyError("stack_time: expected " + std::to_string(T) + " stages, got " +
                        std::to_string(b.stages.size()));
  }
  StackedRobotSystem s;
  s.robot = b.robot;
  s.n = b.n;
  s.mu = b.mu;
  s.horizon = T;
  s.r = b.r;
  const int n = b.n, mu = b.mu;
  const int rows = stacked_rows(n, mu, T);
  s.A_ii = Matrix::Zero(rows, stacked_cols(n, mu, T));
  s.C_bar = Matrix::Zero(rows, b.r);
  for (const auto& [j, d] : b.neighbor_dims) {
    s.A_ij[j] = Matrix::Zero(rows, stacked_cols(d.n, d.mu, T));
  }

  auto place = [](Matrix& dst, int row, int col, const Matrix& blk) {
    if (blk.rows() == 0 || blk.cols() == 0) return;
    if (row + blk.rows() > dst.rows() || col + blk.cols() > dst.cols()) {
      throw AssemblyError("stack_time: block does not fit the stacked layout");
    }
    dst.block(row, col, blk.rows(), blk.cols()) += blk;
  };
  auto place_neighbors = [&](const std::map<RobotId, Matrix>& q, int row, int t) {
    for (const auto& [j, blk] : q) {
      auto it = s.A_ij.find(j);
      if (it == s.A_ij.end()) throw AssemblyError("coupling block for unknown neighbour");
      if (blk.cols() != b.neighbor_dims.at(j).n) throw AssemblyError("coupling block width");
      place(it->second, row, t * b.neighbor_dims.at(j).n, blk);
    }
  };

  for (int t = 0; t < T; ++t) {
    const StageBlocks& st = b.stages[t];
    if (st.M_lambda.rows() != n || st.N_u.rows() != mu || st.C_x.cols() != b.r) {
      throw AssemblyError("stack_time: block shape mismatch at t=" + std::to_string(t));
    }
    // dynamics: X^{t+1} - f_x X^t - f_u U^t - f_theta = 0
    int row = s.dyn_row(t);
    place(s.A_ii, row, s.x_col(t + 1), Matrix::Identity(n, n));
    place(s.A_ii, row, s.x_col(t), -st.M_lambda);
    place(s.A_ii, row, s.u_col(t), -st.N_lambda);
    s.C_bar.middleRows(row, n) -= st.C_lambda;
    // stationarity
    row = s.stat_row(t);
    place(s.A_ii, row, s.x_col(t), st.M_u);
    place(s.A_ii, row, s.u_col(t), st.N_u);
    place(s.A_ii, row, s.lambda_col(t + 1), st.S_u);
    place_neighbors(st.Q_u, row, t);
    s.C_bar.middleRows(row, mu) += st.C_u;
    // costate: -Lambda^t + H_xx X^t + H_xu U^t + f_x' Lambda^{t+1} + ... = 0
    row = s.costate_row(t);
    place(s.A_ii, row, s.lambda_col(t), -Matrix::Identity(n, n));
    place(s.A_ii, row, s.x_col(t), st.M_x);
    place(s.A_ii, row, s.u_col(t), st.N_x);
    place(s.A_ii, row, s.lambda_col(t + 1), st.S_x);
    place_neighbors(st.Q_x, row, t);
    s.C_bar.middleRows(row, n) += st.C_x;
  }
  int row = s.terminal_row();
  place(s.A_ii, row, s.lambda_col(T), -Matrix::Identity(n, n));
  place(s.A_ii, row, s.x_col(T), b.terminal.M_x);
  place_neighbors(b.terminal.Q_x, row, T);
  s.C_bar.middleRows(row, n) += b.terminal.C_x;
  row = s.initial_row();
  place(s.A_ii, row, s.x_col(0), Matrix::Identity(n, n));
  return s;
}

std::vector<StackedRobotSystem> stack_all(const std::vector<SensitivityBlocks>& blocks, int T) {
  std::vector<StackedRobotSystem> out;
  out.reserve(blocks.size());
  for (const auto& b : blocks) out.push_back(stack_time(b, T));
  return out;
}

Matrix stacked_residual(const StackedRobotSystem& sys, const Matrix& Y_i,
                        const std::map<RobotId, Matrix>& Y_neighbors) {
  Matrix res = sys.A_ii * Y_i + sys.C_bar;
  for (const auto& [j, a] : sys.A_ij) {
    auto it = Y_neighbors.find(j);
    if (it == Y_neighbors.end()) throw TopologyError("stacked_residual: missing neighbour block");
    res += a * it->second;
  }
  return res;
}

RowLayout RowLayout::from(const std::vector<int>& rows) {
  RowLayout l;
  l.rows = rows;
  l.offset.resize(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    l.offset[k] = l.total;
    l.total += rows[k];
  }
  return l;
}

Matrix GlobalSystemView::dense_psi() const {
  Matrix d = Matrix::Zero(layout.total, cols);
  for (const auto& [l, b] : psi) {
    if (b.m.cols() > 0) d.block(layout.offset[l], b.col_begin, b.m.rows(), b.m.cols()) = b.m;
  }
  return d;
}

Matrix GlobalSystemView::dense_chat() const {
  Matrix d = Matrix::Zero(layout.total, r);
  d.middleRows(layout.offset[robot], chat.rows()) = chat;
  return d;
}

Matrix GlobalSystemView::apply(const Matrix& Y) const {
  Matrix out = Matrix::Zero(layout.total, Y.cols());
  for (const auto& [l, b] : psi) {
    if (b.m.cols() == 0) continue;
    auto rows = out.middleRows(layout.offset[l], b.m.rows());
    if (b.identity) {
      rows = Y.middleRows(b.col_begin, b.m.cols());
    } else {
      rows.noalias() = b.m * Y.middleRows(b.col_begin, b.m.cols());
    }
  }
  return out;
}

Matrix GlobalSystemView::apply_transpose(const Matrix& V) const {
  Matrix out = Matrix::Zero(cols, V.cols());
  for (const auto& [l, b] : psi) {
    if (b.m.cols() == 0) continue;
    auto src = V.middleRows(layout.offset[l], b.m.rows());
    if (b.identity) {
      out.middleRows(b.col_begin, b.m.cols()) += src;
    } else {
      out.middleRows(b.col_begin, b.m.cols()).noalias() += b.m.transpose() * src;
    }
  }
  return out;
}

double GlobalSystemView::spectral_norm() const {
  if (cols == 0) return 0.0;
  Matrix v = Matrix::Ones(cols, 1) / std::sqrt(static_cast<double>(cols));
  double est = 0.0;
  for (int k = 0; k < 500; ++k) {
    Matrix w = apply_transpose(apply(v));
    const double nrm = w.norm();
    if (nrm == 0.0) return 0.0;
    v = w / nrm;
    if (std::abs(nrm - est) <= 1e-12 * nrm) {
      est = nrm;
      break;
    }
    est = nrm;
  }
  return std::sqrt(est);
}

namespace {

/// Smallest column range holding every nonzero entry.
PsiBlock trimmed(const Matrix& m) {
  int first = -1, last = -1;
  for (int c = 0; c < m.cols(); ++c) {
    if ((m.col(c).array() != 0.0).any()) {
      if (first < 0) first = c;
      last = c;
    }
  }
  PsiBlock b;
  if (first < 0) {
    b.m = Matrix(m.rows(), 0);
    return b;
  }
  b.col_begin = first;
  b.m = m.middleCols(first, last - first + 1);
  return b;
}

}  // namespace

double costate_scale(const StackedRobotSystem& sys, const std::vector<Matrix>& coupling,
                     double floor) {
  const int split = sys.lambda_col(0);
  double top = 0.0, bottom = 0.0;
  for (const Matrix& b : coupling) {
    top += b.topRows(split).squaredNorm();
    bottom += b.bottomRows(b.rows() - split).squaredNorm();
  }
  if (bottom == 0.0) return 1.0;
  return std::clamp(std::sqrt(top / bottom), floor, 1.0);
}

std::vector<GlobalSystemView> build_global_view(const std::vector<StackedRobotSystem>& stacked,
                                                const CommGraph& graph, CommFabric& fabric,
                                                const GlobalViewOptions& options) {
  const int m = static_cast<int>(stacked.size());
  if (m != graph.size()) throw ShapeError("one stacked system per robot");
  std::vector<int> rows(m);
  for (int i = 0; i < m; ++i) rows[i] = stacked[i].rows();
  const RowLayout layout = RowLayout::from(rows);

  // Local step: robot l (optionally) normalizes its own block row.
  std::vector<std::map<RobotId, Matrix>> outgoing(m);
  std::vector<Matrix> chat(m);
  std::vector<Vector> scale(m);
  for (int l = 0; l < m; ++l) {
    const StackedRobotSystem& s = stacked[l];
    if (s.A_ii.rows() != s.A_ii.cols()) {
      if (options.normalize) throw AssemblyError("normalization needs a square diagonal block");
    }
    if (options.normalize) {
      Eigen::FullPivLU<Matrix> lu(s.A_ii);
      if (!lu.isInvertible()) {
        throw AssemblyError("robot " + std::to_string(l) +
                            ": diagonal block is singular; disable normalization");
      }
      chat[l] = lu.solve(s.C_bar);
      for (const auto& [i, a] : s.A_ij) outgoing[l][i] = lu.solve(a);
      scale[l] = Vector::Ones(s.cols());
      if (options.scale_costates && s.rows() == s.cols()) {
        std::vector<Matrix> blocks;
        for (const auto& [i, b] : outgoing[l]) blocks.push_back(b);
        const double sl = costate_scale(s, blocks, options.min_costate_scale);
        const int split = s.lambda_col(0);
        chat[l].bottomRows(s.rows() - split) *= sl;
        for (auto& [i, b] : outgoing[l]) b.bottomRows(s.rows() - split) *= sl;
        scale[l].tail(s.cols() - split).setConstant(1.0 / sl);
      }
    } else {
      scale[l] = Vector::Ones(s.cols());
      chat[l] = s.C_bar;
      for (const auto& [i, a] : s.A_ij) outgoing[l][i] = a;
    }
  }

  // Exchange: l -> i carries A_{l,i}.
  Outbox out;
  for (int l = 0; l < m; ++l) {
    for (RobotId i : graph.neighbors(l)) {
      auto it = outgoing[l].find(i);
      const Matrix a = it != outgoing[l].end()
                           ? it->second
                           : Matrix::Zero(stacked[l].rows(), stacked[i].cols());
      PsiBlock b = trimmed(a);
      Matrix meta(1, 1);
      meta(0, 0) = b.col_begin;
      out[l][i].blocks = {std::move(b.m), std::move(meta)};
    }
  }
  Inbox in = fabric.exchange(out);

  std::vector<GlobalSystemView> views(m);
  for (int i = 0; i < m; ++i) {
    GlobalSystemView& v = views[i];
    v.robot = i;
    v.layout = layout;
    v.cols = stacked[i].cols();
    v.r = stacked[i].r;
    v.normalized = options.normalize;
    v.chat = chat[i];
    v.unknown_scale = scale[i];
    if (options.normalize) {
      PsiBlock own;
      own.m = Matrix::Identity(v.cols, v.cols);
      own.identity = true;
      v.psi[i] = std::move(own);
    } else {
      PsiBlock own;
      own.m = stacked[i].A_ii;
      v.psi[i] = std::move(own);
    }
    for (auto& [l, payload] : in[i]) {
      PsiBlock b;
      b.m = payload.blocks.at(0);
      b.col_begin = static_cast<int>(payload.blocks.at(1)(0, 0));
      if (b.m.rows() != layout.rows[l]) throw AssemblyError("received block has wrong height");
      // Receiver side of the similarity: columns act on scaled unknowns.
      for (int c = 0; c < b.m.cols(); ++c) b.m.col(c) *= v.unknown_scale(b.col_begin + c);
      v.psi[l] = std::move(b);
    }
  }
  return views;
}

void write_stacked_system(const std::string& path, const StackedRobotSystem& sys) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << std::setprecision(17);
  auto dump = [&](const std::string& name, const Matrix& a) {
    long nnz = 0;
    for (int c = 0; c < a.cols(); ++c)
      for (int r = 0; r < a.rows(); ++r)
        if (a(r, c) != 0.0) ++nnz;
    out << "%%MatrixMarket matrix coordinate real general\n";
    out << "% " << name << "\n";
    out << a.rows() << ' ' << a.cols() << ' ' << nnz << '\n';
    for (int c = 0; c < a.cols(); ++c)
      for (int r = 0; r < a.rows(); ++r)
        if (a(r, c) != 0.0) out << r + 1 << ' ' << c + 1 << ' ' << a(r, c) << '\n';
  };
  out << "% distgame stacked system robot=" << sys.robot << " horizon=" << sys.horizon
      << " n=" << sys.n << " mu=" << sys.mu << " r=" << sys.r << '\n';
  dump("A_ii", sys.A_ii);
  for (const auto& [j, a] : sys.A_ij) dump("A_i" + std::to_string(j), a);
  dump("C_bar", sys.C_bar);
}

}  // namespace distgame
