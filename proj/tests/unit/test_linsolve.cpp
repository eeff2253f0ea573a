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
#include "distgame/common/executor.h"
#include "distgame/linsolve/dist_solver.h"
#include "distgame/oracles/oracles.h"
#include "fixtures.h"
#include "random_systems.h"

using namespace distgame;
using namespace distgame::testing;

namespace {

double amax(const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

struct LqSystem {
  Scenario scenario;
  NashSolution solution;
  std::vector<StackedRobotSystem> stacked;
  std::vector<GlobalSystemView> views;
  oracles::DenseSensitivity dense;
};

LqSystem lq_system(const GlobalViewOptions& opts = {}) {
  Scenario s = shipped("lq_pair");
  NashSolution sol = oracles::dense_nash_lq(s.game);
  std::vector<StackedRobotSystem> st = stack_all(assemble_blocks(s.game, sol), s.game.horizon());
  CommFabric fabric = strict_fabric(s.game);
  std::vector<GlobalSystemView> views = build_global_view(st, s.game.graph(), fabric, opts);
  oracles::DenseSensitivity dense = oracles::dense_sensitivity_solve(s.game, sol);
  return LqSystem{std::move(s), std::move(sol), std::move(st), std::move(views), std::move(dense)};
}

std::map<RobotId, Matrix> neighbor_blocks(const CommGraph& g, const std::vector<Matrix>& Z,
                                          RobotId i) {
  std::map<RobotId, Matrix> out;
  for (RobotId l : g.neighbors(i)) out[l] = Z[l];
  return out;
}

}  // namespace

TEST_CASE("local residual") {
  std::mt19937_64 rng(1);
  const RandomSystem sys = random_system(rng, 4, 2);
  const int R = sys.views[0].layout.total;
  std::vector<Matrix> Y, Z;
  for (const GlobalSystemView& v : sys.views) {
    Y.push_back(Matrix::NullaryExpr(v.cols, 2, [&] { return random_vector(rng, 1)(0); }));
    Z.push_back(Matrix::NullaryExpr(R, 2, [&] { return random_vector(rng, 1)(0); }));
  }
  SUBCASE("equal Z and zero Y leave the own constant") {
    for (RobotId i = 0; i < 4; ++i) {
      const std::vector<Matrix> same(4, Z[0]);
      const Matrix v = local_residual(sys.views[i], sys.graph.neighbors(i),
                                      Matrix::Zero(sys.views[i].cols, 2), same[i],
                                      neighbor_blocks(sys.graph, same, i));
      CHECK(amax(v - sys.views[i].dense_chat()) == 0.0);
    }
  }
  SUBCASE("lone robot") {
    GlobalSystemView v;
    v.robot = 0;
    v.layout = RowLayout::from({3});
    v.cols = 2;
    v.r = 1;
    v.psi[0] = PsiBlock{0, Matrix::Random(3, 2), false};
    v.chat = Matrix::Random(3, 1);
    const Matrix y = Matrix::Random(2, 1);
    const Matrix res = local_residual(v, {}, y, Matrix::Random(3, 1), {});
    CHECK(amax(res - (v.dense_psi() * y + v.chat)) < 1e-15);
  }
  SUBCASE("Z differences cancel in the sum") {
    Matrix sum_v = Matrix::Zero(R, 2), sum_direct = Matrix::Zero(R, 2);
    for (RobotId i = 0; i < 4; ++i) {
      sum_v += local_residual(sys.views[i], sys.graph.neighbors(i), Y[i], Z[i],
                              neighbor_blocks(sys.graph, Z, i));
      sum_direct += sys.views[i].apply(Y[i]) + sys.views[i].dense_chat();
    }
    CHECK(amax(sum_v - sum_direct) <= 1e-12);
  }
  SUBCASE("missing neighbour") {
    std::map<RobotId, Matrix> partial = neighbor_blocks(sys.graph, Z, 0);
    partial.erase(partial.begin());
    CHECK_THROWS_AS(local_residual(sys.views[0], sys.graph.neighbors(0), Y[0], Z[0], partial),
                    TopologyError);
  }
}

TEST_CASE("telescoping identity holds at every iteration") {
  std::mt19937_64 rng(77);
  int systems = 0;
  for (int k = 0; k < 20; ++k) {
    const int m = 1 + static_cast<int>(rng() % 5);
    const RandomSystem sys = random_system(rng, m, 2);
    CommFabric fabric(sys.graph);
    DistSolverConfig cfg;
    cfg.max_iters = 40;
    cfg.divergence_factor = 1e300;
    double worst = 0.0;
    solve_distributed(sys.views, sys.graph, fabric, cfg, nullptr, nullptr,
                      [&](const SolverState& st) {
                        Matrix a = Matrix::Zero(st.v[0].rows(), st.v[0].cols()), b = a;
                        for (int i = 0; i < m; ++i) {
                          a += st.v[i];
                          b += sys.views[i].apply(st.Y[i]) + sys.views[i].dense_chat();
                        }
                        worst = std::max(worst, amax(a - b));
                      });
    CHECK(worst <= 1e-12);
    check_local_traffic(fabric);
    ++systems;
  }
  CHECK(systems == 20);
}

TEST_CASE("scalar two-robot sum constraint") {
  const CommGraph g = CommGraph::line(2);
  std::vector<GlobalSystemView> views(2);
  for (RobotId i = 0; i < 2; ++i) {
    views[i].robot = i;
    views[i].layout = RowLayout::from({1, 1});
    views[i].cols = 1;
    views[i].r = 1;
    views[i].psi[0] = PsiBlock{0, mat1(1.0), false};
    views[i].chat = mat1(i == 0 ? -2.0 : 0.0);
  }
  CommFabric fabric(g);
  DistSolverConfig cfg;
  cfg.eps_v = 1e-12;
  const DistSolveResult res = solve_distributed(views, g, fabric, cfg);
  REQUIRE(res.converged);
  CHECK(res.Y[0](0, 0) + res.Y[1](0, 0) == doctest::Approx(2.0).epsilon(1e-10));
  check_local_traffic(fabric);
}

TEST_CASE("LQ sensitivity system") {
  LqSystem lq = lq_system();
  const GameProblem& game = lq.scenario.game;
  CommFabric fabric = strict_fabric(game);
  DistSolverConfig cfg = lq.scenario.solver;
  const DistSolveResult res = solve_distributed(lq.views, game.graph(), fabric, cfg);
  REQUIRE(res.converged);
  CHECK(res.final_residual <= cfg.eps_v);
  for (RobotId i = 0; i < game.size(); ++i) CHECK(amax(res.Y[i] - lq.dense.Y[i]) <= 1e-8);
  check_local_traffic(fabric);

  SUBCASE("fixed point solves the global system to m eps_v") {
    Matrix sum = Matrix::Zero(lq.views[0].layout.total, res.Y[0].cols());
    for (RobotId i = 0; i < game.size(); ++i) {
      const Matrix w = lq.views[i].unknown_scale.cwiseInverse().asDiagonal() * res.Y[i];
      sum += lq.views[i].apply(w) + lq.views[i].dense_chat();
    }
    CHECK(amax(sum) <= game.size() * cfg.eps_v * (1 + 1e-9));
  }
  SUBCASE("extraction") {
    for (RobotId i = 0; i < game.size(); ++i) {
      const TrajectorySensitivity ts = extract_sensitivity(res.Y[i], game.robot(i), game.horizon(),
                                                           game.param_offset(i), game.theta());
      CHECK(amax(ts.state_at(0)) == 0.0);
      CHECK(ts.dx.cols() == game.robot(i).r());
      CHECK(amax(ts.stacked() - lq.dense.sensitivity[i].stacked()) <= 1e-8);
    }
    CHECK_THROWS_AS(extract_sensitivity(res.Y[0].topRows(3), game.robot(0), game.horizon(), 0,
                                        game.theta()),
                    ShapeError);
  }
  SUBCASE("matches central differences") {
    oracles::FdOptions fd;
    fd.dense_lq = true;
    const std::vector<Matrix> num = oracles::fd_sensitivity_all(game, -1.0, fd);
    for (RobotId i = 0; i < game.size(); ++i) {
      const TrajectorySensitivity ts = extract_sensitivity(res.Y[i], game.robot(i), game.horizon(),
                                                           game.param_offset(i), game.theta());
      const Matrix cols = num[i].middleCols(game.param_offset(i), game.robot(i).r());
      for (int k = 0; k < cols.cols(); ++k) {
        CHECK(amax(ts.stacked().col(k) - cols.col(k)) <= 1e-3 * std::max(1.0, amax(cols.col(k))));
      }
    }
  }
  SUBCASE("oracle-seeded start stays on the solution") {
    DistSolveResult warm;
    warm.Y = lq.dense.Y;
    for (const GlobalSystemView& v : lq.views) warm.Z.push_back(Matrix::Zero(v.layout.total, v.r));
    CommFabric f2 = strict_fabric(game);
    const DistSolveResult again = solve_distributed(lq.views, game.graph(), f2, cfg, &warm);
    CHECK(again.converged);
    for (RobotId i = 0; i < game.size(); ++i) CHECK(amax(again.Y[i] - lq.dense.Y[i]) <= 1e-8);
  }
  SUBCASE("serial and threaded runs agree bit for bit") {
    RobotExecutor pool(2);
    CommFabric f2 = strict_fabric(game);
    const DistSolveResult threaded = solve_distributed(lq.views, game.graph(), f2, cfg, nullptr, &pool);
    CHECK(threaded.iterations == res.iterations);
    for (RobotId i = 0; i < game.size(); ++i) CHECK(amax(threaded.Y[i] - res.Y[i]) == 0.0);
  }
  SUBCASE("seeded random start reaches the same unique solution") {
    DistSolverConfig rnd = cfg;
    rnd.init = SolverInit::kRandom;
    rnd.seed = 3;
    CommFabric f2 = strict_fabric(game);
    const DistSolveResult r2 = solve_distributed(lq.views, game.graph(), f2, rnd);
    REQUIRE(r2.converged);
    for (RobotId i = 0; i < game.size(); ++i) CHECK(amax(r2.Y[i] - lq.dense.Y[i]) <= 1e-8);
  }
  SUBCASE("squared residual decreases after burn-in") {
    std::vector<double> energy;
    CommFabric f2 = strict_fabric(game);
    solve_distributed(lq.views, game.graph(), f2, cfg, nullptr, nullptr, [&](const SolverState& st) {
      double e = 0.0;
      for (const Matrix& v : st.v) e += v.squaredNorm();
      energy.push_back(e);
    });
    const std::size_t burn = energy.size() / 10;
    std::size_t rises = 0;
    for (std::size_t k = burn + 1; k < energy.size(); ++k) rises += energy[k] > energy[k - 1];
    CHECK(energy.back() < 1e-6 * energy[burn]);
    CHECK(rises == 0);
  }
  SUBCASE("oversized step is reported") {
    DistSolverConfig big = cfg;
    big.alpha = 50.0 * res.alpha;
    CommFabric f2 = strict_fabric(game);
    CHECK_THROWS_AS(solve_distributed(lq.views, game.graph(), f2, big), StepSizeError);
  }
  SUBCASE("iteration cap") {
    DistSolverConfig capped = cfg;
    capped.max_iters = 10;
    CommFabric f2 = strict_fabric(game);
    const DistSolveResult r2 = solve_distributed(lq.views, game.graph(), f2, capped);
    CHECK_FALSE(r2.converged);
    CHECK(r2.iterations == 10);
  }
}

TEST_CASE("parameter-free robot has zero sensitivity") {
  const CommGraph g = CommGraph::line(2);
  auto still = std::make_shared<CostModel>();
  still->add(std::make_shared<EffortTerm>(vec({0.0})), 1.0, true);
  auto moving = std::make_shared<CostModel>();
  moving->add(std::make_shared<EffortTerm>(vec({0.0})), 1.0, false);
  moving->add(std::make_shared<GoalTerm>(vec({1.0}), StageMask::kBoth), 1.0);
  const GameProblem game(g, {scalar_robot(0, 1.0, 0.0, still, 0.0, g),
                             scalar_robot(1, 1.0, 0.3, moving, 0.0, g)},
                         5, 0.2);
  const NashSolution sol = oracles::dense_nash_lq(game);
  const std::vector<StackedRobotSystem> st = stack_all(assemble_blocks(game, sol), 5);
  CommFabric fabric = strict_fabric(game);
  const std::vector<GlobalSystemView> views = build_global_view(st, g, fabric);
  DistSolverConfig cfg;
  cfg.eps_v = 1e-11;
  const DistSolveResult res = solve_distributed(views, g, fabric, cfg);
  REQUIRE(res.converged);
  const TrajectorySensitivity ts =
      extract_sensitivity(res.Y[0], game.robot(0), 5, game.param_offset(0), game.theta());
  CHECK(amax(ts.stacked()) <= 1e-9);
  const TrajectorySensitivity t1 =
      extract_sensitivity(res.Y[1], game.robot(1), 5, game.param_offset(1), game.theta());
  CHECK(amax(t1.stacked()) > 1e-3);
}
