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

#include "distgame/common/errors.h"
#include "distgame/oracles/derivatives.h"
#include "distgame/oracles/oracles.h"
#include "distgame/sensitivity/assembly.h"
#include "fixtures.h"

using namespace distgame;
using namespace distgame::testing;

namespace {

double amax(const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

void check_close(const Matrix& a, const Matrix& fd, double tol, const char* what) {
  REQUIRE(a.rows() == fd.rows());
  REQUIRE(a.cols() == fd.cols());
  CHECK_MESSAGE(amax(a - fd) <= tol * std::max(1.0, amax(fd)), what);
}

// First derivatives of robot i's Hamiltonian (or of h at t == T).
struct HamiltonianGradient {
  Vector hx, hu;
};

HamiltonianGradient h_grad(const RobotProblem& r, int t, int T, const VectorSeq& x,
                           const VectorSeq& u, const NeighborStates& ns, const Vector& lam) {
  const StagePoint p = stage_point(r, t, T, x, u, ns);
  const CostExpansion e = r.cost->evaluate(p, r.cost_weights(), 1);
  if (t == T) return {e.gx, Vector()};
  const DynamicsJacobians j = r.dynamics->linearize(x[t], u[t], r.dynamics_params());
  return {e.gx + j.fx.transpose() * lam, e.gu + j.fu.transpose() * lam};
}

NashSolution solve(const Scenario& s) {
  CommFabric fabric = strict_fabric(s.game);
  NashSolution sol = solve_nash(s.game, {}, s.shooting, fabric);
  REQUIRE(sol.converged);
  return sol;
}

}  // namespace

TEST_CASE("LQ blocks are the known constant matrices") {
  const Scenario s = shipped("lq_pair");
  const NashSolution sol = oracles::dense_nash_lq(s.game);
  const std::vector<SensitivityBlocks> blocks = assemble_blocks(s.game, sol);
  REQUIRE(blocks.size() == 2);
  const double dt = s.game.dt();
  Matrix A(2, 2);
  A << 1, dt, 0, 1;
  Matrix Mx = Matrix::Zero(2, 2);
  Mx(0, 0) = 2.0 * 1.0 + 2.0 * 0.3;
  Matrix Qx = Matrix::Zero(2, 2);
  Qx(0, 0) = -2.0 * 0.3;
  const SensitivityBlocks& b = blocks[0];
  for (int t = 0; t < s.game.horizon(); ++t) {
    const StageBlocks& st = b.stages[t];
    CHECK(amax(st.M_lambda - A) < 1e-15);
    CHECK(amax(st.N_lambda - b.stages[0].N_lambda) == 0.0);
    CHECK(amax(st.N_u - mat1(2.0)) < 1e-15);
    CHECK(amax(st.M_x - Mx) < 1e-14);
    CHECK(amax(st.Q_x.at(1) - Qx) < 1e-14);
    CHECK(amax(st.M_u) == 0.0);
    CHECK(amax(st.Q_u.at(1)) == 0.0);
    CHECK(amax(st.S_u - st.N_lambda.transpose()) == 0.0);
    CHECK(amax(st.S_x - st.M_lambda.transpose()) == 0.0);
  }
  CHECK(amax(b.terminal.M_x - Mx) < 1e-14);
}

TEST_CASE("blocks match central differences of the Hamiltonian gradient") {
  const Scenario s = shipped("scenario_a");
  const GameProblem& game = s.game;
  const NashSolution sol = solve(s);
  const std::vector<SensitivityBlocks> blocks = assemble_blocks(game, sol);
  const int T = game.horizon();
  const double tol = 1e-4;
  for (RobotId i = 0; i < game.size(); ++i) {
    const RobotProblem& r = game.robot(i);
    const SensitivityBlocks& b = blocks[i];
    const VectorSeq& x = sol.trajectories[i].x;
    const VectorSeq& u = sol.trajectories[i].u;
    const std::map<RobotId, VectorSeq> nx = neighbor_states(game, sol.trajectories, i);
    const int off = game.param_offset(i);
    for (int t : {0, 1, T / 2, T - 1, T}) {
      const bool terminal = t == T;
      const Vector lam = terminal ? Vector() : Vector(sol.costates[i].at(t + 1));
      auto grad_of = [&](const VectorSeq& xx, const VectorSeq& uu,
                         const std::map<RobotId, VectorSeq>& nn, const RobotProblem& rr) {
        return h_grad(rr, t, T, xx, uu, align_neighbors(rr, nn), lam);
      };
      auto along_x = [&](bool want_u) {
        return oracles::fd_jacobian(
            [&](const Vector& z) {
              VectorSeq xx = x;
              xx[t] = z;
              const HamiltonianGradient g = grad_of(xx, u, nx, r);
              return want_u ? g.hu : g.hx;
            },
            x[t]);
      };
      auto along_theta = [&](bool want_u) {
        return oracles::fd_jacobian(
            [&](const Vector& z) {
              RobotProblem rr = r;
              rr.theta = z;
              const HamiltonianGradient g = grad_of(x, u, nx, rr);
              return want_u ? g.hu : g.hx;
            },
            r.theta);
      };
      auto along_neighbor = [&](RobotId j, bool want_u) {
        return oracles::fd_jacobian(
            [&](const Vector& z) {
              std::map<RobotId, VectorSeq> nn = nx;
              nn[j][t] = z;
              const HamiltonianGradient g = grad_of(x, u, nn, r);
              return want_u ? g.hu : g.hx;
            },
            nx.at(j)[t]);
      };
      if (terminal) {
        check_close(b.terminal.M_x, along_x(false), tol, "terminal M_x");
        check_close(b.terminal.C_x.middleCols(off, r.r()), along_theta(false), tol, "terminal C_x");
        for (RobotId j : r.neighbors) {
          check_close(b.terminal.Q_x.at(j), along_neighbor(j, false), tol, "terminal Q_x");
        }
        continue;
      }
      const StageBlocks& st = b.stages[t];
      auto along_u = [&](bool want_u) {
        return oracles::fd_jacobian(
            [&](const Vector& z) {
              VectorSeq uu = u;
              uu[t] = z;
              const HamiltonianGradient g = grad_of(x, uu, nx, r);
              return want_u ? g.hu : g.hx;
            },
            u[t]);
      };
      check_close(st.M_x, along_x(false), tol, "M_x");
      check_close(st.N_x, along_u(false), tol, "N_x");
      check_close(st.M_u, along_x(true), tol, "M_u");
      check_close(st.N_u, along_u(true), tol, "N_u");
      check_close(st.C_x.middleCols(off, r.r()), along_theta(false), tol, "C_x");
      check_close(st.C_u.middleCols(off, r.r()), along_theta(true), tol, "C_u");
      for (RobotId j : r.neighbors) {
        check_close(st.Q_x.at(j), along_neighbor(j, false), tol, "Q_x");
        check_close(st.Q_u.at(j), along_neighbor(j, true), tol, "Q_u");
      }
      CHECK(amax(st.S_u - st.N_lambda.transpose()) == 0.0);
      CHECK(amax(st.S_x - st.M_lambda.transpose()) == 0.0);
      // Parameter columns of other robots stay empty.
      const int r_all = game.total_params();
      CHECK(amax(st.C_x.leftCols(off)) == 0.0);
      CHECK(amax(st.C_u.rightCols(r_all - off - r.r())) == 0.0);
      CHECK(amax(st.C_lambda.rightCols(r_all - off - r.r())) == 0.0);
    }
  }
}

TEST_CASE("robot without neighbours has no coupling blocks") {
  const CommGraph g(1, {});
  auto cost = std::make_shared<CostModel>();
  cost->add(std::make_shared<EffortTerm>(vec({0.0})), 1.0, false);
  cost->add(std::make_shared<GoalTerm>(vec({1.0}), StageMask::kBoth), 1.0);
  const GameProblem game(g, {scalar_robot(0, 1.0, 0.2, cost, 0.0, g)}, 4, 0.2);
  const NashSolution sol = oracles::dense_nash_lq(game);
  const SensitivityBlocks b = assemble_robot_blocks(game, sol, 0);
  for (const StageBlocks& st : b.stages) {
    CHECK(st.Q_x.empty());
    CHECK(st.Q_u.empty());
  }
  CHECK(b.terminal.Q_x.empty());
  CHECK(stack_time(b, 4).A_ij.empty());
}

TEST_CASE("one-step horizon has five block rows in the documented order") {
  const CommGraph g(1, {});
  auto cost = std::make_shared<CostModel>();
  cost->add(std::make_shared<EffortTerm>(vec({0.0})), 1.0, false);
  cost->add(std::make_shared<GoalTerm>(vec({1.0}), StageMask::kBoth), 1.0);
  const double a = 0.9, bb = 0.5;
  const GameProblem game(g, {scalar_robot(0, a, bb, cost, 0.3, g)}, 1, 0.2);
  const NashSolution sol = oracles::dense_nash_lq(game);
  const SensitivityBlocks blk = assemble_robot_blocks(game, sol, 0);
  const StackedRobotSystem sys = stack_time(blk, 1);
  CHECK(stacked_rows(1, 1, 1) == 5);
  CHECK(sys.rows() == 5);
  CHECK(sys.cols() == 5);  // X^0, X^1, U^0, Lambda^0, Lambda^1
  // Stage cost 1*(x-1)^2 + u^2 and terminal (x-1)^2: H_xx = 2, H_uu = 2.
  Matrix expect(5, 5);
  expect << -a, 1, -bb, 0, 0,   // dynamics
      0, 0, 2, 0, bb,           // stationarity
      2, 0, 0, -1, a,           // costate t = 0
      0, 2, 0, 0, -1,           // terminal costate
      1, 0, 0, 0, 0;            // initial condition
  CHECK(amax(sys.A_ii - expect) < 1e-15);
  // Only the goal weight is learnable: C rows hold d(grad)/d(weight).
  const Vector xs = sol.trajectories[0].x[0], x1 = sol.trajectories[0].x[1];
  Matrix c(5, 1);
  c << 0, 0, 2 * (xs(0) - 1), 2 * (x1(0) - 1), 0;
  CHECK(amax(sys.C_bar - c) < 1e-14);
  // A deterministic one-step problem: the dense solve gives the same sensitivity
  // as the hand derivation u = -w b (a x0 - 1) / (1 + w b^2) with terminal weight w.
  const oracles::DenseSensitivity dense = oracles::dense_sensitivity_solve(game, sol);
  const double w = 1.0, x0 = 0.3;
  const double du = -bb * (a * x0 - 1) / ((1 + w * bb * bb) * (1 + w * bb * bb));
  CHECK(dense.sensitivity[0].du(0, 0) == doctest::Approx(du).epsilon(1e-12));
  CHECK(dense.sensitivity[0].dx(1, 0) == doctest::Approx(bb * du).epsilon(1e-12));
}

TEST_CASE("zero-coupling game has empty coupling blocks") {
  const CommGraph g = CommGraph::line(2);
  auto cost = std::make_shared<CostModel>();
  cost->add(std::make_shared<EffortTerm>(vec({0.0})), 1.0, false);
  cost->add(std::make_shared<GoalTerm>(vec({1.0}), StageMask::kBoth), 1.0);
  const GameProblem game(g, {scalar_robot(0, 1.0, 0.2, cost, 0.0, g),
                             scalar_robot(1, 1.0, 0.2, cost, 2.0, g)},
                         5, 0.2);
  const NashSolution sol = oracles::dense_nash_lq(game);
  for (const StackedRobotSystem& sys : stack_all(assemble_blocks(game, sol), 5)) {
    for (const auto& [j, m] : sys.A_ij) CHECK(amax(m) == 0.0);
  }
}

TEST_CASE("stacked form equals the row-by-row sensitivity equations") {
  const Scenario s = shipped("scenario_a");
  const NashSolution sol = solve(s);
  const std::vector<SensitivityBlocks> blocks = assemble_blocks(s.game, sol);
  const int T = s.game.horizon();
  const std::vector<StackedRobotSystem> stacked = stack_all(blocks, T);
  std::mt19937_64 rng(12);
  const int r = s.game.total_params();
  std::vector<Matrix> Y;
  for (const StackedRobotSystem& sys : stacked) {
    CHECK(sys.C_bar.rows() == sys.rows());
    CHECK(sys.C_bar.cols() == r);
    Y.push_back(Matrix::NullaryExpr(sys.cols(), r, [&] { return random_vector(rng, 1)(0); }));
  }
  for (RobotId i = 0; i < s.game.size(); ++i) {
    const StackedRobotSystem& sys = stacked[i];
    const SensitivityBlocks& b = blocks[i];
    const int n = sys.n, mu = sys.mu;
    std::map<RobotId, Matrix> yn;
    for (RobotId j : s.game.robot(i).neighbors) yn[j] = Y[j];
    const Matrix res = stacked_residual(sys, Y[i], yn);
    auto X = [&](const Matrix& y, int t, int nj) { return y.middleRows(t * nj, nj); };
    auto U = [&](int t) { return Y[i].middleRows(sys.u_col(t), mu); };
    auto L = [&](int t) { return Y[i].middleRows(sys.lambda_col(t), n); };
    Matrix expect(res.rows(), r);
    for (int t = 0; t < T; ++t) {
      const StageBlocks& st = b.stages[t];
      expect.middleRows(sys.dyn_row(t), n) =
          X(Y[i], t + 1, n) - st.M_lambda * X(Y[i], t, n) - st.N_lambda * U(t) - st.C_lambda;
      Matrix stat = st.M_u * X(Y[i], t, n) + st.N_u * U(t) + st.S_u * L(t + 1) + st.C_u;
      Matrix co = -L(t) + st.M_x * X(Y[i], t, n) + st.N_x * U(t) + st.S_x * L(t + 1) + st.C_x;
      for (const auto& [j, q] : st.Q_u) stat += q * X(Y[j], t, static_cast<int>(q.cols()));
      for (const auto& [j, q] : st.Q_x) co += q * X(Y[j], t, static_cast<int>(q.cols()));
      expect.middleRows(sys.stat_row(t), mu) = stat;
      expect.middleRows(sys.costate_row(t), n) = co;
    }
    Matrix term = -L(T) + b.terminal.M_x * X(Y[i], T, n) + b.terminal.C_x;
    for (const auto& [j, q] : b.terminal.Q_x) term += q * X(Y[j], T, static_cast<int>(q.cols()));
    expect.middleRows(sys.terminal_row(), n) = term;
    expect.middleRows(sys.initial_row(), n) = X(Y[i], 0, n);
    CHECK(amax(res - expect) <= 1e-12 * std::max(1.0, amax(expect)));
  }
}

TEST_CASE("finite-difference ground truth satisfies the stacked system") {
  const Scenario s = shipped("lq_pair");
  const GameProblem& game = s.game;
  const NashSolution sol = oracles::dense_nash_lq(game);
  const std::vector<StackedRobotSystem> stacked = stack_all(assemble_blocks(game, sol), game.horizon());
  const int T = game.horizon(), r = game.total_params();

  // (X, U, Lambda) of every robot at a parameter vector, with Lambda^0 from
  // the t = 0 costate relation.
  auto unknowns = [&](const GameProblem& g) {
    const NashSolution ns = oracles::dense_nash_lq(g);
    std::vector<Vector> out;
    for (RobotId i = 0; i < g.size(); ++i) {
      const RobotProblem& rob = g.robot(i);
      const Trajectory& xi = ns.trajectories[i];
      const std::map<RobotId, VectorSeq> nx = neighbor_states(g, ns.trajectories, i);
      const StagePoint p = stage_point(rob, 0, T, xi.x, xi.u, align_neighbors(rob, nx));
      const Vector gx = rob.cost->evaluate(p, rob.cost_weights(), 1).gx;
      const Matrix fx = rob.dynamics->linearize(xi.x[0], xi.u[0], rob.dynamics_params()).fx;
      Vector y(stacked[i].cols());
      const int n = rob.n();
      y.head((T + 1) * n + T * rob.mu()) = xi.flatten();
      y.segment(stacked[i].lambda_col(0), n) = gx + fx.transpose() * ns.costates[i].at(1);
      for (int t = 1; t <= T; ++t) y.segment(stacked[i].lambda_col(t), n) = ns.costates[i].at(t);
      out.push_back(y);
    }
    return out;
  };
  std::vector<Matrix> Y;
  for (const StackedRobotSystem& sys : stacked) Y.push_back(Matrix(sys.cols(), r));
  const Vector theta = game.theta();
  for (int k = 0; k < r; ++k) {
    const double h = oracles::fd_default_step(theta(k));
    Vector tp = theta, tm = theta;
    tp(k) += h;
    tm(k) -= h;
    const std::vector<Vector> yp = unknowns(game.with_theta(tp)), ym = unknowns(game.with_theta(tm));
    for (RobotId i = 0; i < game.size(); ++i) Y[i].col(k) = (yp[i] - ym[i]) / (2 * h);
  }
  for (RobotId i = 0; i < game.size(); ++i) {
    std::map<RobotId, Matrix> yn;
    for (RobotId j : game.robot(i).neighbors) yn[j] = Y[j];
    CHECK(amax(stacked_residual(stacked[i], Y[i], yn)) <= 1e-3);
  }
}

TEST_CASE("global view") {
  GlobalViewOptions raw;
  raw.normalize = false;
  raw.scale_costates = false;

  SUBCASE("two robots") {
    const Scenario s = shipped("lq_pair");
    const NashSolution sol = oracles::dense_nash_lq(s.game);
    const std::vector<StackedRobotSystem> st = stack_all(assemble_blocks(s.game, sol), s.game.horizon());
    CommFabric fabric = strict_fabric(s.game);
    const std::vector<GlobalSystemView> views = build_global_view(st, s.game.graph(), fabric, raw);
    Matrix psi1(st[0].rows() + st[1].rows(), st[0].cols());
    psi1 << st[0].A_ii, st[1].A_ij.at(0);
    Matrix psi2(st[0].rows() + st[1].rows(), st[1].cols());
    psi2 << st[0].A_ij.at(1), st[1].A_ii;
    CHECK(amax(views[0].dense_psi() - psi1) == 0.0);
    CHECK(amax(views[1].dense_psi() - psi2) == 0.0);
    CHECK(amax(views[1].dense_chat().topRows(st[0].rows())) == 0.0);
    CHECK(amax(views[1].dense_chat().bottomRows(st[1].rows()) - st[1].C_bar) == 0.0);
    check_local_traffic(fabric);
  }
  SUBCASE("three robots on a line") {
    const Scenario s = line3_lq();
    const NashSolution sol = oracles::dense_nash_lq(s.game);
    const std::vector<StackedRobotSystem> st = stack_all(assemble_blocks(s.game, sol), s.game.horizon());
    CommFabric fabric = strict_fabric(s.game);
    const std::vector<GlobalSystemView> views = build_global_view(st, s.game.graph(), fabric, raw);
    const Matrix psi0 = views[0].dense_psi();
    CHECK(amax(psi0.bottomRows(st[2].rows())) == 0.0);
    CHECK(amax(psi0.middleRows(st[0].rows(), st[1].rows())) > 0.0);
    const oracles::DenseSystem dense = oracles::dense_solve(st);
    Matrix stackedPsi(dense.A.rows(), dense.A.cols());
    int col = 0;
    for (const GlobalSystemView& v : views) {
      stackedPsi.middleCols(col, v.cols) = v.dense_psi();
      col += v.cols;
    }
    CHECK(amax(stackedPsi - dense.A) == 0.0);
    CHECK(dense.unique);
    CHECK(dense.residual <= 1e-10);
    check_local_traffic(fabric);
    for (const auto& [link, count] : fabric.audit().counts) CHECK(link != std::make_pair(0, 2));
  }
}
