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

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "distgame/common/executor.h"
#include "distgame/common/types.h"
#include "distgame/fabric/comm_fabric.h"
#include "distgame/game/game.h"
#include "distgame/sensitivity/assembly.h"

namespace distgame {

enum class SolverInit { kZero, kRandom };

struct DistSolverConfig {
  double alpha = 0.0;  // <= 0 selects 0.9 / (max_i ||Psi_i||^2 + 2 max_degree)
  double eps_v = 1e-9;
  int max_iters = 200000;
  SolverInit init = SolverInit::kZero;
  std::uint64_t seed = 0;
  /// Stop with StepSizeError once the total residual norm exceeds this
  /// multiple of its starting value.
  double divergence_factor = 10.0;
  /// Keep per-robot max|v_i| of every iteration.
  bool record_trace = false;
};

/// Iterate of the solver. Y holds the unknowns in the views' scaled
/// coordinates (see GlobalSystemView::unknown_scale).
struct SolverState {
  std::vector<Matrix> Y;
  std::vector<Matrix> Z;
  std::vector<Matrix> v;
  double alpha = 0.0;
  double eps_v = 0.0;
  int tau = 0;
};

struct DistSolveResult {
  std::vector<Matrix> Y;  // unscaled
  std::vector<Matrix> Z;
  bool converged = false;
  int iterations = 0;
  double alpha = 0.0;
  double final_residual = 0.0;  // max_i max|v_i| at exit
  std::vector<std::vector<double>> trace;  // [iteration][robot]
};

/// v_i = Psi_i Y_i + Chat_i - sum_{l in N_i} (Z_i - Z_l). `neighbor_Z` must
/// cover exactly `neighbors`.
Matrix local_residual(const GlobalSystemView& view, const std::vector<RobotId>& neighbors,
                      const Matrix& Y_i, const Matrix& Z_i,
                      const std::map<RobotId, Matrix>& neighbor_Z);

double default_alpha(const std::vector<GlobalSystemView>& views, const CommGraph& graph);

/// Called with the state after v has been formed and before the update.
using SolverObserver = std::function<void(const SolverState&)>;

/// Y_i <- Y_i - alpha Psi_i' v_i, Z_i <- Z_i + alpha v_i with Z exchanged
/// between neighbours every round, until max_i max|v_i| <= eps_v. A
/// non-null `warm` state seeds Y and Z (shapes must match).
DistSolveResult solve_distributed(const std::vector<GlobalSystemView>& views,
                                  const CommGraph& graph, CommFabric& fabric,
                                  const DistSolverConfig& cfg,
                                  const DistSolveResult* warm = nullptr,
                                  RobotExecutor* executor = nullptr,
                                  const SolverObserver& observer = nullptr);

/// Columns: iteration, residual_<i>...
void write_solver_trace_csv(const std::string& path, const DistSolveResult& result);

/// d(xi_i)/d(theta_i) in the flattened trajectory order x^0..x^T, u^0..u^{T-1}.
struct TrajectorySensitivity {
  RobotId robot = 0;
  int n = 0, mu = 0, horizon = 0;
  Matrix dx;  // (T+1) n x r_i
  Matrix du;  // T mu x r_i
  /// Stacked parameter vector the sensitivity was computed at.
  Vector theta_tag;
  int theta_offset = 0;

  Matrix stacked() const;
  /// Block of dx for time t (n x r_i).
  Matrix state_at(int t) const { return dx.middleRows(t * n, n); }
};

/// Unstacks X and U from Y_i and keeps the theta_i columns. The X^0 rows are
/// exactly zero.
TrajectorySensitivity extract_sensitivity(const Matrix& Y_i, const RobotProblem& robot,
                                          int horizon, int theta_offset,
                                          const Vector& theta_tag);

}  // namespace distgame
