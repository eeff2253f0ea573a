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

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <string>

#include "distgame/common/errors.h"
#include "distgame/scenario/scenario.h"

namespace fs = std::filesystem;
using namespace distgame;

namespace {

/// Accepts a path, or the bare name of a shipped scenario.
std::string resolve_scenario(const std::string& arg) {
  if (fs::exists(arg)) return arg;
  const fs::path shipped = fs::path(scenario_dir()) / (arg + ".yaml");
  if (fs::exists(shipped)) return shipped.string();
  return arg;
}

void print(const RunReport& rep) {
  std::cout << rep.mode << " " << rep.scenario << " exit=" << static_cast<int>(rep.exit) << "\n";
  for (const auto& [k, v] : rep.summary) std::cout << "  " << k << " = " << v << "\n";
  for (const auto& n : rep.notes) std::cout << "  note: " << n << "\n";
  std::cout << "  files: " << rep.files.size() << " written\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed dynamic games: forward equilibria, sensitivities, inverse learning"};
  app.require_subcommand(1);

  std::string scenario_arg, out;
  Overrides o;
  std::uint64_t seed = 0;
  int max_iters = 0, count = 0;
  double eta = 0, alpha = 0, gamma = 0, tol = 0;

  auto* fwd = app.add_subcommand("forward", "Solve the forward game");
  auto* mk = app.add_subcommand("make-demos", "Synthesize demonstrations at the ground truth");
  auto* inv = app.add_subcommand("inverse", "Learn objective parameters from demonstrations");
  auto* ver = app.add_subcommand("verify", "Certify a solution as an equilibrium");

  std::string demo_dir, solution_dir, init = "scaled";
  mk->add_option("--count", count, "Number of demonstrations")->check(CLI::PositiveNumber);
  inv->add_option("--demos", demo_dir, "Directory with demo_<d>_robot_<i>.csv files")->required();
  inv->add_option("--init", init, "Initial parameters: scaled (from the file) or truth")
      ->check(CLI::IsMember({"scaled", "truth"}));
  ver->add_option("--solution", solution_dir, "Directory with robot_<i>.csv files")->required();

  for (auto* sub : {fwd, mk, inv, ver}) {
    sub->add_option("--scenario", scenario_arg, "Scenario file or shipped scenario name")->required();
    sub->add_option("--out", out, "Output directory")->required();
    sub->add_option("--seed", seed, "Seed for demo perturbations and random solver starts");
    sub->add_flag("--strict-locality", o.strict_locality, "Fail on any non-neighbour message");
    sub->add_option("--max-iters", max_iters, "Forward iteration cap (outer cap for inverse)");
    sub->add_option("--eta", eta, "Learning rate");
    sub->add_option("--alpha", alpha, "Linear-solver step size (0 picks one)");
    sub->add_option("--gamma", gamma, "Forward step size");
    sub->add_option("--tol", tol, "Forward tolerance (loss tolerance for inverse)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::kConfigError);
  }

  auto given = [](CLI::App* sub, const char* name) { return sub->count(name) > 0; };
  CLI::App* sub = app.get_subcommands().front();
  if (given(sub, "--seed")) o.seed = seed;
  if (given(sub, "--max-iters")) o.max_iters = max_iters;
  if (given(sub, "--eta")) o.eta = eta;
  if (given(sub, "--alpha")) o.alpha = alpha;
  if (given(sub, "--gamma")) o.gamma = gamma;
  if (given(sub, "--tol")) o.tol = tol;
  if (sub == mk && given(mk, "--count")) o.demo_count = count;

  try {
    const Scenario scn = load_scenario(resolve_scenario(scenario_arg));
    RunReport rep;
    if (sub == fwd) {
      rep = cmd_forward(scn, o, out);
    } else if (sub == mk) {
      rep = cmd_make_demos(scn, o, out);
    } else if (sub == inv) {
      rep = cmd_inverse(scn, demo_dir, init == "truth" ? InitMode::kTruth : InitMode::kScaled, o, out);
    } else {
      rep = cmd_verify(scn, solution_dir, o, out);
    }
    print(rep);
    return static_cast<int>(rep.exit);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kConfigError);
  } catch (const ShapeError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kConfigError);
  } catch (const LocalityViolation& e) {
    std::cerr << "locality violation: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kLocalityViolation);
  } catch (const Error& e) {
    std::cerr << "run failed: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kNonConvergence);
  }
}
