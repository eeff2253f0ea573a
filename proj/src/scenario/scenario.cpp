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

#include "distgame/scenario/scenario.h"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <regex>
#include <set>
#include <sstream>

#include "distgame/common/csv.h"
#include "distgame/common/errors.h"
#include "distgame/game/catalog.h"

namespace distgame {

namespace fs = std::filesystem;

namespace {

int line_of(const YAML::Node& n) {
  const YAML::Mark m = n.Mark();
  return m.line >= 0 ? m.line + 1 : 0;
}

[[noreturn]] void fail(const YAML::Node& n, const std::string& msg) {
  throw ConfigError(msg, line_of(n));
}

void check_keys(const YAML::Node& n, const std::set<std::string>& allowed,
                const std::string& what) {
  if (!n.IsMap()) fail(n, what + " must be a mapping");
  for (const auto& kv : n) {
    const std::string key = kv.first.as<std::string>();
    if (!allowed.count(key)) fail(kv.first, "unknown key '" + key + "' in " + what);
  }
}

template <typename T>
T as(const YAML::Node& n, const std::string& what) {
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    fail(n, what + " has the wrong type");
  }
}

template <typename T>
T get_or(const YAML::Node& parent, const std::string& key, T fallback) {
  const YAML::Node n = parent[key];
  return n ? as<T>(n, key) : fallback;
}

double positive(const YAML::Node& parent, const std::string& key, double fallback) {
  const double v = get_or<double>(parent, key, fallback);
  if (!(v > 0.0) || !std::isfinite(v)) fail(parent[key] ? parent[key] : parent, key + " must be positive");
  return v;
}

Vector vec(const YAML::Node& n, const std::string& what, int size = -1) {
  if (!n.IsSequence()) fail(n, what + " must be a list of numbers");
  Vector v(static_cast<Eigen::Index>(n.size()));
  for (std::size_t k = 0; k < n.size(); ++k) v(k) = as<double>(n[k], what);
  if (size >= 0 && v.size() != size) {
    fail(n, what + " must have " + std::to_string(size) + " entries");
  }
  if (!v.allFinite()) fail(n, what + " must be finite");
  return v;
}

Matrix mat(const YAML::Node& n, const std::string& what) {
  if (!n.IsSequence() || n.size() == 0) fail(n, what + " must be a list of rows");
  const Vector first = vec(n[0], what);
  Matrix out(static_cast<Eigen::Index>(n.size()), first.size());
  for (std::size_t r = 0; r < n.size(); ++r) out.row(r) = vec(n[r], what, first.size()).transpose();
  return out;
}

StageMask stage_of(const YAML::Node& n, StageMask fallback) {
  if (!n) return fallback;
  const std::string s = as<std::string>(n, "stage");
  if (s == "running") return StageMask::kRunning;
  if (s == "terminal") return StageMask::kTerminal;
  if (s == "both") return StageMask::kBoth;
  fail(n, "stage must be running, terminal or both");
}

template <typename T, typename F>
std::map<RobotId, T> id_map(const YAML::Node& n, const std::string& what, int robot_count,
                            F&& parse) {
  if (!n.IsMap()) fail(n, what + " must map robot ids to values");
  std::map<RobotId, T> out;
  for (const auto& kv : n) {
    const int id = as<int>(kv.first, what + " key");
    if (id < 0 || id >= robot_count) fail(kv.first, what + " names unknown robot " + std::to_string(id));
    out[id] = parse(kv.second);
  }
  return out;
}

CommGraph parse_graph(const YAML::Node& n, int m) {
  try {
    if (!n) return CommGraph::complete(m);
    if (n.IsScalar()) {
      const std::string kind = n.as<std::string>();
      if (kind == "complete") return CommGraph::complete(m);
      if (kind == "line") return CommGraph::line(m);
      fail(n, "graph must be complete, line or a list of edges");
    }
    check_keys(n, {"edges"}, "graph");
    const YAML::Node e = n["edges"];
    if (!e || !e.IsSequence()) fail(n, "graph.edges must be a list of pairs");
    std::vector<std::pair<RobotId, RobotId>> edges;
    for (const auto& pair : e) {
      if (!pair.IsSequence() || pair.size() != 2) fail(pair, "each edge is a pair of robot ids");
      const int a = as<int>(pair[0], "edge"), b = as<int>(pair[1], "edge");
      if (a < 0 || a >= m || b < 0 || b >= m) fail(pair, "edge names an unknown robot");
      edges.emplace_back(a, b);
    }
    return CommGraph(m, edges);
  } catch (const TopologyError& err) {
    fail(n, err.what());
  }
}

std::vector<Vector> parse_formation(const YAML::Node& n, int m) {
  if (!n) return {};
  check_keys(n, {"type", "spacing", "center", "axis", "slots"}, "formation");
  const std::string type = get_or<std::string>(n, "type", "line");
  std::vector<Vector> slots;
  if (type == "explicit") {
    const YAML::Node s = n["slots"];
    if (!s || !s.IsSequence() || static_cast<int>(s.size()) != m) {
      fail(n, "formation.slots must list one position per robot");
    }
    for (const auto& p : s) slots.push_back(vec(p, "formation slot"));
    return slots;
  }
  if (type != "line") fail(n, "formation type must be line or explicit");
  const double spacing = positive(n, "spacing", 1.0);
  if (!n["center"]) fail(n, "line formation needs a center");
  const Vector center = vec(n["center"], "formation.center");
  Vector axis = Vector::Zero(center.size());
  if (n["axis"]) {
    axis = vec(n["axis"], "formation.axis", static_cast<int>(center.size()));
  } else {
    axis(axis.size() - 1) = 1.0;
  }
  if (axis.norm() == 0.0) fail(n, "formation.axis must be nonzero");
  axis.normalize();
  for (int i = 0; i < m; ++i) slots.push_back(center + (0.5 * (m - 1) - i) * spacing * axis);
  return slots;
}

DynamicsPtr parse_dynamics(const YAML::Node& n, double dt, Vector& params) {
  check_keys(n, {"type", "dim", "dt", "learnable_gain", "gain", "a", "b", "position_dim",
                 "has_velocity"},
             "dynamics");
  const std::string type = get_or<std::string>(n, "type", "");
  const auto& catalog = builtin_dynamics();
  const auto it = catalog.find(type);
  if (it == catalog.end()) fail(n, "unknown dynamics type '" + type + "'");
  DynamicsSpec spec;
  spec.dim = get_or<int>(n, "dim", 2);
  if (spec.dim < 1) fail(n, "dynamics.dim must be at least 1");
  spec.dt = positive(n, "dt", dt);
  spec.learnable_gain = get_or<bool>(n, "learnable_gain", false);
  spec.gain = get_or<double>(n, "gain", 1.0);
  if (type == "linear") {
    if (!n["a"] || !n["b"]) fail(n, "linear dynamics need a and b");
    spec.a = mat(n["a"], "dynamics.a");
    spec.b = mat(n["b"], "dynamics.b");
    if (spec.a.rows() != spec.a.cols() || spec.b.rows() != spec.a.rows()) {
      fail(n, "linear dynamics: a must be square and b must have as many rows");
    }
    spec.position_dim = get_or<int>(n, "position_dim", 1);
    spec.has_velocity = get_or<bool>(n, "has_velocity", false);
  }
  try {
    DynamicsPtr dyn = it->second(spec);
    params = dyn->param_dim() > 0 ? Vector::Constant(dyn->param_dim(), spec.gain) : Vector();
    return dyn;
  } catch (const Error& e) {
    fail(n, e.what());
  }
}

struct RobotContext {
  RobotId id;
  int m;
  int horizon;
  const DynamicsModel* dyn;
  const std::vector<RobotId>* neighbors;
  const std::vector<Vector>* slots;
  const std::vector<Disk>* obstacles;
};

Vector slot_of(const RobotContext& c, RobotId j, const YAML::Node& at) {
  if (c.slots->empty()) fail(at, "term needs explicit values when no formation is given");
  return c.slots->at(j);
}

void parse_term(const YAML::Node& n, const RobotContext& c, CostModel& cost) {
  if (!n.IsMap() || !n["term"]) fail(n, "cost entry needs a 'term'");
  const std::string kind = as<std::string>(n["term"], "term");
  const auto& catalog = builtin_cost_terms();
  const auto it = catalog.find(kind);
  if (it == catalog.end()) fail(n["term"], "unknown cost term '" + kind + "'");

  std::set<std::string> keys = {"term", "weight", "learnable", "stage"};
  const int pd = c.dyn->position_dim();
  TermSpec s;
  s.horizon = c.horizon;
  s.pos_dim = get_or<int>(n, "pos_dim", pd);
  keys.insert("pos_dim");
  bool learnable_default = true;
  StageMask stage_default = StageMask::kBoth;

  if (kind == "effort") {
    keys.insert("reference");
    learnable_default = false;
    stage_default = StageMask::kRunning;
    s.reference = n["reference"] ? vec(n["reference"], "reference", c.dyn->input_dim())
                                 : Vector::Zero(c.dyn->input_dim());
  } else if (kind == "goal") {
    keys.insert("goal");
    s.goal = n["goal"] ? vec(n["goal"], "goal", pd) : slot_of(c, c.id, n);
  } else if (kind == "waypoint") {
    keys.insert("points");
    const YAML::Node pts = n["points"];
    if (!pts || !pts.IsSequence()) fail(n, "waypoint term needs a list of points");
    for (const auto& p : pts) {
      check_keys(p, {"t", "p"}, "waypoint");
      const int t = as<int>(p["t"], "waypoint t");
      if (t < 0 || t > c.horizon) fail(p, "waypoint time outside the horizon");
      s.waypoints.emplace_back(t, vec(p["p"], "waypoint p", pd));
    }
  } else if (kind == "formation" || kind == "formation_velocity") {
    keys.insert("offsets");
    if (n["offsets"]) {
      s.offsets = id_map<Vector>(n["offsets"], "offsets", c.m,
                                 [&](const YAML::Node& v) { return vec(v, "offset", pd); });
    } else {
      for (RobotId j : *c.neighbors) {
        s.offsets[j] = kind == "formation" ? Vector(slot_of(c, c.id, n) - slot_of(c, j, n))
                                           : Vector(Vector::Zero(pd));
      }
    }
  } else if (kind == "formation_distance") {
    keys.insert("distances");
    if (n["distances"]) {
      s.distances = id_map<double>(n["distances"], "distances", c.m,
                                   [](const YAML::Node& v) { return as<double>(v, "distance"); });
    } else {
      for (RobotId j : *c.neighbors) {
        s.distances[j] = (slot_of(c, c.id, n) - slot_of(c, j, n)).norm();
      }
    }
  } else if (kind == "obstacle") {
    keys.insert("robot_radius");
    keys.insert("obstacles");
    learnable_default = false;
    stage_default = StageMask::kRunning;
    s.robot_radius = get_or<double>(n, "robot_radius", 0.0);
    if (s.robot_radius < 0.0) fail(n, "robot_radius must be non-negative");
    if (n["obstacles"]) {
      for (const auto& o : n["obstacles"]) {
        check_keys(o, {"center", "radius"}, "obstacle");
        Disk d{vec(o["center"], "obstacle center", pd), positive(o, "radius", 0.0)};
        s.obstacles.push_back(d);
      }
    } else {
      s.obstacles = *c.obstacles;
    }
    if (s.obstacles.empty()) fail(n, "obstacle term without obstacles");
    for (const Disk& d : s.obstacles) {
      if (d.center.size() != pd) fail(n, "obstacle center dimension does not match the robot");
    }
  } else if (kind == "collision") {
    keys.insert("safety");
    learnable_default = false;
    stage_default = StageMask::kRunning;
    const YAML::Node sn = n["safety"];
    if (!sn) fail(n, "collision term needs a safety distance");
    if (sn.IsScalar()) {
      const double d = as<double>(sn, "safety");
      for (RobotId j : *c.neighbors) s.distances[j] = d;
    } else {
      s.distances = id_map<double>(sn, "safety", c.m,
                                   [](const YAML::Node& v) { return as<double>(v, "safety"); });
    }
    for (const auto& [j, d] : s.distances) {
      if (!(d > 0.0)) fail(sn, "safety distances must be positive");
    }
  } else if (kind == "centroid") {
    keys.insert("group");
    keys.insert("start");
    keys.insert("goal");
    if (!n["start"] || !n["goal"]) fail(n, "centroid term needs start and goal");
    s.start = vec(n["start"], "start", pd);
    s.goal = vec(n["goal"], "goal", pd);
    if (n["group"]) {
      for (const auto& g : n["group"]) s.group.push_back(as<int>(g, "group"));
    } else {
      s.group = *c.neighbors;
    }
  }
  check_keys(n, keys, kind + " term");
  s.stage = stage_of(n["stage"], stage_default);
  const double w = get_or<double>(n, "weight", 1.0);
  if (!std::isfinite(w)) fail(n, "weight must be finite");
  try {
    cost.add(it->second(s), w, get_or<bool>(n, "learnable", learnable_default));
  } catch (const Error& e) {
    fail(n, e.what());
  }
}

Vector position(const RobotProblem& r, const Vector& x) {
  return x.head(r.dynamics->position_dim());
}

template <typename Term>
const Term* find_term(const RobotProblem& r) {
  for (const auto& e : r.cost->entries()) {
    if (auto t = dynamic_cast<const Term*>(e.term.get())) return t;
  }
  return nullptr;
}

/// Throws ConfigError(line) when a start lies inside a safety radius.
void check_starts(const GameProblem& game, const std::vector<int>& lines) {
  for (int i = 0; i < game.size(); ++i) {
    const RobotProblem& r = game.robot(i);
    const Vector p = position(r, r.x0);
    for (const auto& e : r.cost->entries()) {
      if (auto ob = dynamic_cast<const ObstacleTerm*>(e.term.get())) {
        for (const Disk& d : ob->obstacles()) {
          if ((p - d.center).norm() <= d.radius + ob->robot_radius()) {
            throw ConfigError("robot " + std::to_string(i) +
                                  " starts inside an obstacle safety radius",
                              lines[i]);
          }
        }
      }
      if (auto col = dynamic_cast<const CollisionTerm*>(e.term.get())) {
        for (const auto& [j, d] : col->safety_distances()) {
          const RobotProblem& o = game.robot(j);
          if ((p - position(o, o.x0)).norm() <= d) {
            throw ConfigError("robots " + std::to_string(i) + " and " + std::to_string(j) +
                                  " start inside their collision safety distance",
                              lines[i]);
          }
        }
      }
    }
  }
}

void parse_shooting(const YAML::Node& n, int m, ShootingConfig& c) {
  if (!n) return;
  check_keys(n, {"gamma", "robot_gamma", "eps_u", "max_iters", "backtracking", "shrink",
                 "max_backtracks"},
             "shooting");
  c.gamma = get_or<double>(n, "gamma", c.gamma);
  if (n["robot_gamma"]) {
    const Vector g = vec(n["robot_gamma"], "robot_gamma", m);
    c.robot_gamma.assign(g.data(), g.data() + g.size());
  }
  c.eps_u = get_or<double>(n, "eps_u", c.eps_u);
  c.max_iters = get_or<int>(n, "max_iters", c.max_iters);
  c.backtracking = get_or<bool>(n, "backtracking", c.backtracking);
  c.shrink = get_or<double>(n, "shrink", c.shrink);
  c.max_backtracks = get_or<int>(n, "max_backtracks", c.max_backtracks);
  try {
    c.validate(m);
  } catch (const ConfigError& e) {
    fail(n, e.what());
  }
}

void parse_solver(const YAML::Node& n, DistSolverConfig& c) {
  if (!n) return;
  check_keys(n, {"alpha", "eps_v", "max_iters", "init", "seed", "divergence_factor"}, "solver");
  c.alpha = get_or<double>(n, "alpha", c.alpha);
  c.eps_v = get_or<double>(n, "eps_v", c.eps_v);
  c.max_iters = get_or<int>(n, "max_iters", c.max_iters);
  if (n["init"]) {
    const std::string s = as<std::string>(n["init"], "init");
    if (s == "zero") {
      c.init = SolverInit::kZero;
    } else if (s == "random") {
      c.init = SolverInit::kRandom;
    } else {
      fail(n["init"], "solver.init must be zero or random");
    }
  }
  c.seed = get_or<std::uint64_t>(n, "seed", c.seed);
  c.divergence_factor = get_or<double>(n, "divergence_factor", c.divergence_factor);
  if (c.alpha < 0.0 || !(c.eps_v > 0.0) || c.max_iters < 1 || !(c.divergence_factor > 1.0)) {
    fail(n, "solver settings out of range");
  }
}

void parse_view(const YAML::Node& n, GlobalViewOptions& v) {
  if (!n) return;
  check_keys(n, {"normalize", "scale_costates", "min_costate_scale"}, "view");
  v.normalize = get_or<bool>(n, "normalize", v.normalize);
  v.scale_costates = get_or<bool>(n, "scale_costates", v.scale_costates);
  v.min_costate_scale = get_or<double>(n, "min_costate_scale", v.min_costate_scale);
  if (!(v.min_costate_scale > 0.0 && v.min_costate_scale <= 1.0)) {
    fail(n, "view.min_costate_scale must be in (0, 1]");
  }
}

}  // namespace

Vector Scenario::theta_star() const {
  if (!has_theta_star) throw ConfigError("scenario " + name + " has no ground-truth parameters");
  return game.theta();
}

Scenario parse_scenario(const std::string& text, const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(source + ": " + e.msg, e.mark.line + 1);
  }
  try {
    check_keys(root, {"name", "horizon", "dt", "graph", "obstacles", "formation", "defaults",
                      "robots", "shooting", "solver", "view", "learning", "demos", "threads",
                      "ground_truth"},
               "scenario");
    const int T = get_or<int>(root, "horizon", 25);
    if (T < 1) fail(root["horizon"], "horizon must be at least 1");
    const double dt = positive(root, "dt", 0.2);
    const YAML::Node rn = root["robots"];
    if (!rn || !rn.IsSequence() || rn.size() == 0) fail(root, "scenario needs a list of robots");
    const int m = static_cast<int>(rn.size());
    const CommGraph graph = parse_graph(root["graph"], m);

    std::vector<Disk> obstacles;
    if (root["obstacles"]) {
      for (const auto& o : root["obstacles"]) {
        check_keys(o, {"center", "radius"}, "obstacle");
        if (!o["center"]) fail(o, "obstacle needs a center");
        obstacles.push_back(Disk{vec(o["center"], "obstacle center"), positive(o, "radius", 0.0)});
      }
    }
    const std::vector<Vector> slots = parse_formation(root["formation"], m);

    const YAML::Node defaults = root["defaults"];
    if (defaults) check_keys(defaults, {"dynamics", "cost"}, "defaults");

    std::vector<RobotProblem> robots;
    std::vector<int> lines;
    for (int i = 0; i < m; ++i) {
      const YAML::Node r = rn[i];
      check_keys(r, {"x0", "dynamics", "cost"}, "robot");
      lines.push_back(line_of(r));
      const YAML::Node dn = r["dynamics"] ? r["dynamics"] : (defaults ? defaults["dynamics"] : YAML::Node());
      if (!dn) fail(r, "robot " + std::to_string(i) + " has no dynamics");
      Vector dyn_params;
      DynamicsPtr dyn = parse_dynamics(dn, dt, dyn_params);
      if (!r["x0"]) fail(r, "robot " + std::to_string(i) + " needs x0");
      const Vector x0 = vec(r["x0"], "x0", dyn->state_dim());

      const YAML::Node cn = r["cost"] ? r["cost"] : (defaults ? defaults["cost"] : YAML::Node());
      if (!cn || !cn.IsSequence() || cn.size() == 0) {
        fail(r, "robot " + std::to_string(i) + " has no cost terms");
      }
      auto cost = std::make_shared<CostModel>();
      const RobotContext ctx{i, m, T, dyn.get(), &graph.neighbors(i), &slots, &obstacles};
      for (const auto& term : cn) parse_term(term, ctx, *cost);
      try {
        robots.push_back(make_robot(i, dyn, cost, x0, nominal_theta(*cost, dyn_params), graph));
      } catch (const Error& e) {
        fail(r, e.what());
      }
    }
    if (!slots.empty()) {
      for (const Vector& s : slots) {
        if (s.size() != robots[0].dynamics->position_dim()) {
          fail(root["formation"], "formation slots must match the position dimension");
        }
      }
    }

    Scenario sc(GameProblem(graph, robots, T, dt));
    sc.source = source;
    sc.name = get_or<std::string>(root, "name", fs::path(source).stem().string());
    sc.obstacles = obstacles;
    sc.formation_slots = slots;
    sc.has_theta_star = get_or<bool>(root, "ground_truth", true);
    check_starts(sc.game, lines);

    parse_shooting(root["shooting"], m, sc.shooting);
    parse_solver(root["solver"], sc.solver);
    parse_view(root["view"], sc.view);
    sc.learning.view = sc.view;

    sc.theta_init = 1.5 * sc.game.theta();
    if (const YAML::Node ln = root["learning"]) {
      check_keys(ln, {"eta", "decay", "max_outer_iters", "loss_tol", "warm_start", "abort_factor",
                      "init_scale", "init_theta"},
                 "learning");
      LearningConfig& l = sc.learning;
      l.eta = get_or<double>(ln, "eta", l.eta);
      l.decay = get_or<double>(ln, "decay", l.decay);
      l.max_outer_iters = get_or<int>(ln, "max_outer_iters", l.max_outer_iters);
      l.loss_tol = get_or<double>(ln, "loss_tol", l.loss_tol);
      l.warm_start = get_or<bool>(ln, "warm_start", l.warm_start);
      l.abort_factor = get_or<double>(ln, "abort_factor", l.abort_factor);
      if (ln["init_theta"]) {
        sc.theta_init = vec(ln["init_theta"], "init_theta", sc.game.total_params());
      } else {
        sc.theta_init = get_or<double>(ln, "init_scale", 1.5) * sc.game.theta();
      }
      try {
        l.validate();
      } catch (const ConfigError& e) {
        fail(ln, e.what());
      }
    }
    if (const YAML::Node dm = root["demos"]) {
      check_keys(dm, {"count", "perturbation", "seed"}, "demos");
      sc.demos.count = get_or<int>(dm, "count", sc.demos.count);
      sc.demos.perturbation = get_or<double>(dm, "perturbation", sc.demos.perturbation);
      sc.demos.seed = get_or<std::uint64_t>(dm, "seed", sc.demos.seed);
      if (sc.demos.count < 1 || sc.demos.perturbation < 0.0) fail(dm, "demos settings out of range");
    }
    sc.threads = get_or<int>(root, "threads", 1);
    if (sc.threads < 1) fail(root["threads"], "threads must be at least 1");
    return sc;
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": ", e);
  } catch (const YAML::Exception& e) {
    throw ConfigError(source + ": " + e.msg, e.mark.line + 1);
  }
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), path);
}

std::string scenario_dir() { return DISTGAME_SCENARIO_DIR; }

double min_obstacle_clearance(const Scenario& scenario, const std::vector<Trajectory>& xi) {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < scenario.game.size(); ++i) {
    const RobotProblem& r = scenario.game.robot(i);
    const ObstacleTerm* ob = find_term<ObstacleTerm>(r);
    const double radius = ob ? ob->robot_radius() : 0.0;
    const std::vector<Disk>& disks = ob ? ob->obstacles() : scenario.obstacles;
    for (const Vector& x : xi.at(i).x) {
      for (const Disk& d : disks) {
        best = std::min(best, (position(r, x) - d.center).norm() - d.radius - radius);
      }
    }
  }
  return best;
}

double min_collision_clearance(const Scenario& scenario, const std::vector<Trajectory>& xi) {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < scenario.game.size(); ++i) {
    const RobotProblem& r = scenario.game.robot(i);
    const CollisionTerm* col = find_term<CollisionTerm>(r);
    if (!col) continue;
    for (const auto& [j, d] : col->safety_distances()) {
      const RobotProblem& o = scenario.game.robot(j);
      for (std::size_t t = 0; t < xi.at(i).x.size(); ++t) {
        const double dist = (position(r, xi[i].x[t]) - position(o, xi.at(j).x[t])).norm();
        best = std::min(best, dist - d);
      }
    }
  }
  return best;
}

std::vector<std::string> write_demo_set(const std::string& dir, const GameProblem& game,
                                        const DemonstrationSet& demos) {
  demos.validate(game);
  fs::create_directories(dir);
  std::vector<std::string> files;
  for (int d = 0; d < demos.count(); ++d) {
    for (int i = 0; i < game.size(); ++i) {
      const RobotProblem& r = game.robot(i);
      const Trajectory& xi = demos.demos[d].robots[i];
      CsvTable tab;
      tab.comments.push_back("distgame demo v1 demo=" + std::to_string(d) + " robot=" +
                             std::to_string(i) + " n=" + std::to_string(r.n()) +
                             " mu=" + std::to_string(r.mu()) +
                             " horizon=" + std::to_string(game.horizon()));
      if (!demos.provenance.empty()) tab.comments.push_back("provenance " + demos.provenance);
      tab.columns.push_back("t");
      for (int k = 0; k < r.n(); ++k) tab.columns.push_back("x" + std::to_string(k));
      for (int k = 0; k < r.mu(); ++k) tab.columns.push_back("u" + std::to_string(k));
      for (int t = 0; t <= game.horizon(); ++t) {
        std::vector<double> row{static_cast<double>(t)};
        for (int k = 0; k < r.n(); ++k) row.push_back(xi.x[t](k));
        for (int k = 0; k < r.mu(); ++k) {
          row.push_back(t < game.horizon() ? xi.u[t](k) : std::numeric_limits<double>::quiet_NaN());
        }
        tab.rows.push_back(std::move(row));
      }
      const std::string path =
          (fs::path(dir) / ("demo_" + std::to_string(d) + "_robot_" + std::to_string(i) + ".csv"))
              .string();
      write_csv(path, tab);
      files.push_back(path);
    }
  }
  return files;
}

DemonstrationSet read_demo_set(const std::string& dir, const GameProblem& game) {
  if (!fs::is_directory(dir)) throw ConfigError("demo directory " + dir + " does not exist");
  const std::regex pattern(R"(demo_(\d+)_robot_(\d+)\.csv)");
  std::map<int, std::map<int, std::string>> found;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch mt;
    const std::string fname = entry.path().filename().string();
    if (std::regex_match(fname, mt, pattern)) {
      found[std::stoi(mt[1])][std::stoi(mt[2])] = entry.path().string();
    }
  }
  if (found.empty()) throw ConfigError("no demo files in " + dir);
  DemonstrationSet set;
  int expect = 0;
  const int T = game.horizon();
  for (const auto& [d, files] : found) {
    if (d != expect++) throw ConfigError("demo indices in " + dir + " are not contiguous");
    if (static_cast<int>(files.size()) != game.size()) {
      throw ConfigError("demo " + std::to_string(d) + " does not cover every robot");
    }
    Demonstration demo;
    for (int i = 0; i < game.size(); ++i) {
      const auto it = files.find(i);
      if (it == files.end()) throw ConfigError("demo " + std::to_string(d) + " misses robot " + std::to_string(i));
      const CsvTable tab = read_csv(it->second);
      for (const std::string& c : tab.comments) {
        if (c.rfind("provenance ", 0) == 0 && set.provenance.empty()) set.provenance = c.substr(11);
      }
      const RobotProblem& r = game.robot(i);
      if (static_cast<int>(tab.columns.size()) != 1 + r.n() + r.mu() ||
          static_cast<int>(tab.rows.size()) != T + 1) {
        throw ShapeError(it->second + ": demo does not match the robot's dimensions or horizon");
      }
      Trajectory xi;
      for (int t = 0; t <= T; ++t) {
        const auto& row = tab.rows[t];
        xi.x.push_back(Eigen::Map<const Vector>(row.data() + 1, r.n()));
        if (t < T) xi.u.push_back(Eigen::Map<const Vector>(row.data() + 1 + r.n(), r.mu()));
      }
      xi.validate(T, r.n(), r.mu());
      demo.robots.push_back(std::move(xi));
    }
    set.demos.push_back(std::move(demo));
  }
  set.validate(game);
  return set;
}

std::vector<GameProblem> demo_games(const Scenario& scenario, const DemoConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<GameProblem> games;
  for (int d = 0; d < cfg.count; ++d) {
    for (int attempt = 0;; ++attempt) {
      if (attempt == 100) {
        throw ConfigError("could not draw a feasible perturbed start for demo " + std::to_string(d));
      }
      GameProblem g = scenario.game;
      if (cfg.perturbation > 0.0) {
        for (int i = 0; i < g.size(); ++i) {
          Vector x0 = g.robot(i).x0;
          for (int k = 0; k < g.robot(i).dynamics->position_dim(); ++k) {
            x0(k) += cfg.perturbation * normal(rng);
          }
          g = g.with_initial_state(i, x0);
        }
      }
      try {
        check_starts(g, std::vector<int>(g.size(), 0));
      } catch (const ConfigError&) {
        continue;
      }
      games.push_back(std::move(g));
      break;
    }
  }
  return games;
}

}  // namespace distgame
