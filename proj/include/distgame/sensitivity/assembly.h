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

#include <map>
#include <string>
#include <vector>

#include "distgame/common/types.h"
#include "distgame/fabric/comm_fabric.h"
#include "distgame/forward/nash.h"
#include "distgame/game/game.h"

namespace distgame {

/// Second derivatives of the Hamiltonian at one running stage. Columns of
/// the C blocks span the whole stacked parameter vector.
struct StageBlocks {
  Matrix M_lambda, N_lambda, C_lambda;  // df/dx, df/du, df/dtheta
  Matrix M_u, N_u, S_u, C_u;            // H_ux, H_uu, f_u', H_utheta
  Matrix M_x, N_x, S_x, C_x;            // H_xx, H_xu, f_x', H_xtheta
  std::map<RobotId, Matrix> Q_u;        // H_u x_j
  std::map<RobotId, Matrix> Q_x;        // H_x x_j
};

struct TerminalBlocks {
  Matrix M_x, C_x;
  std::map<RobotId, Matrix> Q_x;
};

struct NeighborDims {
  int n = 0;
  int mu = 0;
};

struct SensitivityBlocks {
  RobotId robot = 0;
  int n = 0, mu = 0;
  int r = 0;  // columns: full stacked parameter dimension
  int theta_offset = 0, theta_dim = 0;
  std::map<RobotId, NeighborDims> neighbor_dims;
  std::vector<StageBlocks> stages;  // t = 0..T-1
  TerminalBlocks terminal;
};

/// Evaluates every block along the solution. Throws AssemblyError naming
/// (robot, t, block) on a non-finite entry.
std::vector<SensitivityBlocks> assemble_blocks(const GameProblem& game,
                                               const NashSolution& solution);
SensitivityBlocks assemble_robot_blocks(const GameProblem& game, const NashSolution& solution,
                                        RobotId i);

/// Unknown layout of Y_i: X^{0..T}, U^{0..T-1}, Lambda^{0..T}.
/// Row layout: dynamics t = 0..T-1, stationarity t = 0..T-1, costate
/// t = 0..T-1, terminal costate, initial condition.
struct StackedRobotSystem {
  RobotId robot = 0;
  int n = 0, mu = 0, horizon = 0, r = 0;
  Matrix A_ii;
  std::map<RobotId, Matrix> A_ij;
  Matrix C_bar;

  int rows() const { return static_cast<int>(A_ii.rows()); }
  int cols() const { return static_cast<int>(A_ii.cols()); }
  int x_col(int t) const { return t * n; }
  int u_col(int t) const { return (horizon + 1) * n + t * mu; }
  int lambda_col(int t) const { return (horizon + 1) * n + horizon * mu + t * n; }
  int dyn_row(int t) const { return t * n; }
  int stat_row(int t) const { return horizon * n + t * mu; }
  int costate_row(int t) const { return horizon * (n + mu) + t * n; }
  int terminal_row() const { return horizon * (2 * n + mu); }
  int initial_row() const { return horizon * (2 * n + mu) + n; }
};

int stacked_rows(int n, int mu, int horizon);
int stacked_cols(int n, int mu, int horizon);

StackedRobotSystem stack_time(const SensitivityBlocks& blocks, int horizon);
std::vector<StackedRobotSystem> stack_all(const std::vector<SensitivityBlocks>& blocks,
                                          int horizon);

/// A_ii Y_i + sum_j A_ij Y_j + C_bar_i.
Matrix stacked_residual(const StackedRobotSystem& sys, const Matrix& Y_i,
                        const std::map<RobotId, Matrix>& Y_neighbors);

/// Row blocks of the global system: one per robot, in robot order.
struct RowLayout {
  std::vector<int> rows;
  std::vector<int> offset;
  int total = 0;

  static RowLayout from(const std::vector<int>& rows);
};

/// One nonzero row block of Psi_i: A_{l,i} restricted to its nonzero columns.
struct PsiBlock {
  int col_begin = 0;
  Matrix m;
  bool identity = false;
};

/// Robot i's column of the global system.
struct GlobalSystemView {
  RobotId robot = 0;
  RowLayout layout;
  int cols = 0;
  int r = 0;
  bool normalized = false;
  std::map<RobotId, PsiBlock> psi;  // keyed by block row l
  Matrix chat;                      // C_bar_i, block row i
  /// The view is written in scaled unknowns W_i with Y_i = diag(unknown_scale) W_i.
  Vector unknown_scale;

  /// Zero-padded R x cols matrix.
  Matrix dense_psi() const;
  /// Zero-padded R x r matrix.
  Matrix dense_chat() const;
  /// Psi_i Y (R x r).
  Matrix apply(const Matrix& Y) const;
  /// Psi_i' V (cols x r).
  Matrix apply_transpose(const Matrix& V) const;
  /// Largest singular value of Psi_i by power iteration.
  double spectral_norm() const;
};

struct GlobalViewOptions {
  /// Each robot premultiplies its own block row by A_ii^{-1} before the
  /// exchange. The solution set is unchanged.
  bool normalize = true;
  /// With normalization: each robot also scales its costate equations and
  /// unknowns by a common factor s_i (a diagonal similarity, so the own
  /// block stays the identity). s_i balances the costate rows of the
  /// coupling blocks against the state and input rows.
  bool scale_costates = true;
  double min_costate_scale = 1e-2;
};

/// Costate scaling robot l would pick for its normalized coupling blocks.
double costate_scale(const StackedRobotSystem& sys, const std::vector<Matrix>& coupling,
                     double floor);

/// Each robot l ships A_{l,i} to every neighbour i over the fabric; robot i
/// then holds Psi_i and Chat_i.
std::vector<GlobalSystemView> build_global_view(const std::vector<StackedRobotSystem>& stacked,
                                                const CommGraph& graph, CommFabric& fabric,
                                                const GlobalViewOptions& options = {});

/// Matrix-market style text dump of one stacked system.
void write_stacked_system(const std::string& path, const StackedRobotSystem& sys);

}  // namespace distgame
