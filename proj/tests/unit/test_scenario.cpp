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

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "distgame/common/csv.h"
#include "distgame/common/errors.h"
#include "distgame/oracles/oracles.h"
#include "fixtures.h"

using namespace distgame;
using namespace distgame::testing;

namespace fs = std::filesystem;

namespace {

Overrides strict() {
  Overrides o;
  o.strict_locality = true;
  return o;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void check_files_exist(const RunReport& rep) {
  CHECK_FALSE(rep.files.empty());
  for (const auto& f : rep.files) CHECK_MESSAGE(fs::exists(f), f);
}

int config_error_line(const std::string& text) {
  try {
    parse_scenario(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return -1;
}

const char* kPair = R"(name: pair
horizon: 5
dt: 0.2
graph: line
robots:
  - x0: [0.0, 0.0, 0.0]
    dynamics: {type: unicycle}
    cost:
      - {term: effort, weight: 1.0, learnable: true}
      - {term: collision, weight: 0.01, safety: 0.3}
  - x0: [X1, 0.0, 0.0]
    dynamics: {type: unicycle}
    cost:
      - {term: effort, weight: 1.0, learnable: true}
      - {term: collision, weight: 0.01, safety: 0.3}
)";

std::string pair_at(double x1) {
  std::string s = kPair;
  s.replace(s.find("X1"), 2, std::to_string(x1));
  return s;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(DISTGAME_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("shipped scenarios load") {
  for (const char* name : {"lq_pair", "scenario_a", "scenario_a_side", "trivial", "scenario_b",
                           "scenario_c"}) {
    const Scenario s = shipped(name);
    CHECK(s.name == name);
    CHECK(s.game.size() >= 2);
    CHECK(s.theta_init.size() == s.game.total_params());
  }
  CHECK(shipped("scenario_c").game.size() == 6);
  CHECK(shipped("scenario_a").obstacles.size() == 1);
}

TEST_CASE("scenario validation") {
  CHECK(config_error_line(pair_at(1.0) + "bogus: 1\n") == 16);
  std::string typo = pair_at(1.0);
  typo.replace(typo.find("weight"), 6, "wieght");
  CHECK(config_error_line(typo) == 9);
  CHECK_NOTHROW(parse_scenario(pair_at(1.0)));
  // Starts closer than the safety radius.
  CHECK_THROWS_AS(parse_scenario(pair_at(0.2)), ConfigError);
  std::string bad_radius = pair_at(1.0);
  bad_radius.insert(bad_radius.find("robots:"), "obstacles:\n  - {center: [5.0, 5.0], radius: 0.0}\n");
  CHECK_THROWS_AS(parse_scenario(bad_radius), ConfigError);
  std::string bad_edge = pair_at(1.0);
  bad_edge.replace(bad_edge.find("graph: line"), 11, "graph: {edges: [[0, 2]]}");
  CHECK_THROWS_AS(parse_scenario(bad_edge), ConfigError);
  CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.yaml"), ConfigError);
}

TEST_CASE("forward command") {
  SUBCASE("formation scenario") {
    const Scenario s = shipped("scenario_a");
    const RunReport rep = cmd_forward(s, strict(), scratch_dir("cli_fwd_a"));
    CHECK(rep.exit == ExitCode::kSuccess);
    CHECK(rep.summary.at("converged") == 1.0);
    CHECK(rep.summary.at("final_residual") <= 1e-4);
    CHECK(rep.summary.at("hessian_pd") == 1.0);
    CHECK(rep.summary.at("locality_violations") == 0.0);
    check_files_exist(rep);
  }
  SUBCASE("start at rest in formation") {
    const RunReport rep = cmd_forward(shipped("trivial"), strict(), scratch_dir("cli_fwd_trivial"));
    CHECK(rep.exit == ExitCode::kSuccess);
    CHECK(rep.summary.at("iterations") <= 5);
  }
  SUBCASE("obstacle moved to the side") {
    const RunReport rep = cmd_forward(shipped("scenario_a_side"), strict(),
                                      scratch_dir("cli_fwd_side"));
    CHECK(rep.exit == ExitCode::kSuccess);
    CHECK(rep.summary.at("obstacle_clearance") > 0.0);
    CHECK(rep.summary.at("collision_clearance") > 0.0);
  }
  SUBCASE("iteration cap reports non-convergence and keeps outputs") {
    Overrides o = strict();
    o.max_iters = 2;
    const RunReport rep = cmd_forward(shipped("scenario_a"), o, scratch_dir("cli_fwd_cap"));
    CHECK(rep.exit == ExitCode::kNonConvergence);
    check_files_exist(rep);
  }
}

TEST_CASE("edge audit lists only graph edges") {
  const std::string dir = scratch_dir("cli_audit");
  cmd_forward(shipped("lq_pair"), strict(), dir);
  const CsvTable tab = read_csv(dir + "/audit_edges.csv");
  REQUIRE(tab.columns.back() == "graph_edge");
  CHECK_FALSE(tab.rows.empty());
  for (const auto& row : tab.rows) CHECK(row.back() == 1.0);
}

TEST_CASE("demo generation") {
  SUBCASE("single unperturbed demo equals the forward output") {
    const Scenario s = shipped("lq_pair");
    const std::string fwd = scratch_dir("cli_demo_fwd"), dem = scratch_dir("cli_demo_one");
    cmd_forward(s, strict(), fwd);
    Overrides o = strict();
    o.demo_count = 1;
    Scenario z = s;
    z.demos.perturbation = 0.0;
    CHECK(cmd_make_demos(z, o, dem).exit == ExitCode::kSuccess);
    const NashSolution sol = read_solution_csv(fwd, s.game);
    const DemonstrationSet demos = read_demo_set(dem, s.game);
    REQUIRE(demos.count() == 1);
    for (int i = 0; i < s.game.size(); ++i) {
      CHECK(demos.demos[0].robots[i].flatten() == sol.trajectories[i].flatten());
    }
    CHECK(demos.provenance.find("seed=") != std::string::npos);
  }
  SUBCASE("seeded perturbed demos are bit-identical across reruns") {
    Scenario s = shipped("lq_pair");
    s.demos.perturbation = 0.1;
    Overrides o = strict();
    o.demo_count = 2;
    o.seed = 99;
    const std::string a = scratch_dir("cli_demo_a"), b = scratch_dir("cli_demo_b");
    cmd_make_demos(s, o, a);
    cmd_make_demos(s, o, b);
    for (const char* f : {"demo_0_robot_0.csv", "demo_0_robot_1.csv", "demo_1_robot_0.csv",
                          "demo_1_robot_1.csv"}) {
      CHECK(slurp(a + "/" + f) == slurp(b + "/" + f));
    }
    const DemonstrationSet demos = read_demo_set(a, s.game);
    CHECK(demos.demos[0].robots[0].x[0] != demos.demos[1].robots[0].x[0]);
  }
  SUBCASE("reloaded demos have zero loss at the truth") {
    Scenario s = shipped("scenario_a");
    const std::string dir = scratch_dir("cli_demo_loss");
    cmd_make_demos(s, strict(), dir);
    const DemonstrationSet demos = read_demo_set(dir, s.game);
    CommFabric fabric(s.game.graph());
    const NashSolution sol = solve_nash(s.game, {}, s.shooting, fabric);
    for (int i = 0; i < s.game.size(); ++i) {
      CHECK(loss(s.game.robot(i), sol.trajectories[i], demos.of_robot(i)) <= 1e-10);
    }
  }
}

TEST_CASE("inverse command started at the truth") {
  const Scenario s = shipped("lq_pair");
  const std::string dem = scratch_dir("cli_inv_demos"), out = scratch_dir("cli_inv_out");
  cmd_make_demos(s, strict(), dem);
  Scenario t = s;
  t.learning.loss_tol = 1e-8;
  const RunReport rep = cmd_inverse(t, dem, InitMode::kTruth, strict(), out);
  CHECK(rep.exit == ExitCode::kSuccess);
  CHECK(rep.summary.at("outer_iterations") == 1.0);
  CHECK(rep.summary.at("final_loss") <= 1e-8);
  CHECK(rep.summary.at("final_param_error") == 0.0);
  check_files_exist(rep);
  CHECK(fs::exists(out + "/theta.csv"));
  CHECK(fs::exists(out + "/reproduced_0/robot_0.csv"));
}

TEST_CASE("verify command") {
  SUBCASE("forward output of a nonlinear game is certified") {
    const Scenario s = shipped("scenario_a");
    const std::string sol = scratch_dir("cli_ver_sol");
    cmd_forward(s, strict(), sol);
    const RunReport rep = cmd_verify(s, sol, strict(), scratch_dir("cli_ver_out"));
    CHECK(rep.summary.at("max_relative_improvement") <= 1e-6);
    CHECK(rep.summary.at("certified") == 1.0);
    CHECK(rep.summary.count("lq_mismatch") == 0);
  }
  SUBCASE("corrupted solution is flagged") {
    const Scenario s = shipped("scenario_a");
    const std::string sol = scratch_dir("cli_ver_bad");
    cmd_forward(s, strict(), sol);
    CsvTable tab = read_csv(sol + "/robot_1.csv");
    const std::size_t col = std::find(tab.columns.begin(), tab.columns.end(), "u0") -
                            tab.columns.begin();
    REQUIRE(col < tab.columns.size());
    for (std::size_t t = 0; t + 1 < tab.rows.size(); ++t) tab.rows[t][col] += 0.2;
    write_csv(sol + "/robot_1.csv", tab);
    const RunReport rep = cmd_verify(s, sol, strict(), scratch_dir("cli_ver_bad_out"));
    CHECK(rep.summary.at("max_relative_improvement") > 1e-6);
    CHECK(rep.summary.at("certified") == 0.0);
  }
  SUBCASE("LQ game reports the dense mismatch") {
    const Scenario s = shipped("lq_pair");
    const std::string sol = scratch_dir("cli_ver_lq");
    cmd_forward(s, strict(), sol);
    const RunReport rep = cmd_verify(s, sol, strict(), scratch_dir("cli_ver_lq_out"));
    CHECK(rep.summary.at("lq_mismatch") <= 1e-6);
  }
}

TEST_CASE("command-line exit codes") {
  const std::string out = scratch_dir("cli_exit");
  CHECK(run_cli("forward --scenario trivial --out " + out + " --strict-locality") == 0);
  CHECK(run_cli("forward --scenario scenario_a --out " + out + " --max-iters 2") == 2);
  CHECK(run_cli("forward --scenario /nonexistent.yaml --out " + out) == 3);
  CHECK(run_cli("forward --out " + out) == 3);
  CHECK(run_cli("inverse --scenario trivial --demos " + out + "/missing --out " + out) == 3);
  CHECK(fs::exists(out + "/report.json"));
}
