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

#include "distgame/oracles/derivatives.h"

#include <algorithm>
#include <cmath>

#include "distgame/game/catalog.h"

namespace distgame::oracles {

void DerivativeCheck::record(const std::string& block, const Matrix& analytic, const Matrix& fd,
                             double scale) {
  ++blocks;
  if (analytic.rows() != fd.rows() || analytic.cols() != fd.cols()) {
    worst = std::numeric_limits<double>::infinity();
    worst_block = block + " (shape)";
    return;
  }
  if (analytic.size() == 0) return;
  const double err = (analytic - fd).cwiseAbs().maxCoeff() /
                     std::max({1.0, fd.cwiseAbs().maxCoeff(), scale});
  if (!(err <= worst) || !std::isfinite(err)) {
    worst = std::isfinite(err) ? std::max(worst, err) : std::numeric_limits<double>::infinity();
    worst_block = block;
  }
}

Matrix fd_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& z, double step) {
  const Vector f0 = f(z);
  Matrix jac(f0.size(), z.size());
  for (Eigen::Index k = 0; k < z.size(); ++k) {
    const double h = step * (1.0 + std::abs(z(k)));
    auto central = [&](double hh) {
      Vector zp = z, zm = z;
      zp(k) += hh;
      zm(k) -= hh;
      return Vector((f(zp) - f(zm)) / (2.0 * hh));
    };
    jac.col(k) = (4.0 * central(0.5 * h) - central(h)) / 3.0;
  }
  return jac;
}

namespace {

struct PointState {
  int t;
  Stage stage;
  Vector x, u;
  const std::vector<RobotId>* ids;
  std::vector<Vector> xn;
};

Expansion expand(const CostTerm& term, const PointState& s, int order) {
  StagePoint p;
  p.t = s.t;
  p.stage = s.stage;
  p.x = &s.x;
  p.u = s.stage == Stage::kRunning ? &s.u : nullptr;
  p.neighbor_ids = s.ids;
  for (const Vector& v : s.xn) p.neighbor_x.push_back(&v);
  Expansion e;
  e.reset(p, order);
  term.accumulate(p, 1.0, e);
  return e;
}

CostExpansion expand_model(const CostModel& cost, const Vector& w, const PointState& s,
                           int order) {
  StagePoint p;
  p.t = s.t;
  p.stage = s.stage;
  p.x = &s.x;
  p.u = s.stage == Stage::kRunning ? &s.u : nullptr;
  p.neighbor_ids = s.ids;
  for (const Vector& v : s.xn) p.neighbor_x.push_back(&v);
  return cost.evaluate(p, w, order);
}

Vector scalar(double v) { return Vector::Constant(1, v); }

// Checks one expansion-valued function against differences of itself.
template <typename Eval>
void check_expansion(const PointState& base, Eval&& eval, DerivativeCheck& out) {
  const bool running = base.stage == Stage::kRunning;
  const Expansion e2 = eval(base, 2);

  auto vary_x = [&](auto&& pick) {
    return [&, pick](const Vector& z) {
      PointState s = base;
      s.x = z;
      return Vector(pick(eval(s, 1)));
    };
  };
  auto vary_u = [&](auto&& pick) {
    return [&, pick](const Vector& z) {
      PointState s = base;
      s.u = z;
      return Vector(pick(eval(s, 1)));
    };
  };
  auto vary_n = [&](std::size_t k, auto&& pick) {
    return [&, k, pick](const Vector& z) {
      PointState s = base;
      s.xn[k] = z;
      return Vector(pick(eval(s, 1)));
    };
  };
  // Roundoff in a differenced function follows its largest derivative, so
  // every block is judged against that row scale.
  auto amax = [](const Matrix& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; };
  double sg = std::max(amax(e2.gx), amax(e2.gu));
  double sx = std::max(amax(e2.hxx), amax(e2.hxu));
  double su = std::max(amax(e2.huu), amax(e2.hxu));
  for (std::size_t k = 0; k < base.xn.size(); ++k) {
    sg = std::max(sg, amax(e2.gxn[k]));
    sx = std::max(sx, amax(e2.hx_xn[k]));
    if (running) su = std::max(su, amax(e2.hu_xn[k]));
  }
  auto value = [](const Expansion& e) { return scalar(e.value); };
  auto gx = [](const Expansion& e) { return e.gx; };
  auto gu = [](const Expansion& e) { return e.gu; };

  out.record("gx", e2.gx.transpose(), fd_jacobian(vary_x(value), base.x), sg);
  out.record("hxx", e2.hxx, fd_jacobian(vary_x(gx), base.x), sx);
  if (running) {
    out.record("gu", e2.gu.transpose(), fd_jacobian(vary_u(value), base.u), sg);
    out.record("hxu", e2.hxu, fd_jacobian(vary_u(gx), base.u), sx);
    out.record("hux", e2.hxu.transpose(), fd_jacobian(vary_x(gu), base.x), su);
    out.record("huu", e2.huu, fd_jacobian(vary_u(gu), base.u), su);
  }
  for (std::size_t k = 0; k < base.xn.size(); ++k) {
    const std::string tag = "[" + std::to_string(k) + "]";
    out.record("gxn" + tag, e2.gxn[k].transpose(),
               fd_jacobian(vary_n(k, value), base.xn[k]), sg);
    out.record("hx_xn" + tag, e2.hx_xn[k], fd_jacobian(vary_n(k, gx), base.xn[k]), sx);
    if (running) out.record("hu_xn" + tag, e2.hu_xn[k], fd_jacobian(vary_n(k, gu), base.xn[k]), su);
  }
}

PointState make_state(int t, Stage stage, const Vector& x, const Vector& u,
                      const std::vector<RobotId>& ids, const std::vector<Vector>& xn) {
  return PointState{t, stage, x, u, &ids, xn};
}

}  // namespace

void check_cost_term_at(const CostTerm& term, int t, Stage stage, const Vector& x,
                        const Vector& u, const std::vector<RobotId>& neighbor_ids,
                        const std::vector<Vector>& neighbor_x, DerivativeCheck& out) {
  const PointState base = make_state(t, stage, x, u, neighbor_ids, neighbor_x);
  check_expansion(base, [&](const PointState& s, int order) { return expand(term, s, order); },
                  out);
}

void check_cost_model_at(const CostModel& cost, const Vector& weights, int t, Stage stage,
                         const Vector& x, const Vector& u,
                         const std::vector<RobotId>& neighbor_ids,
                         const std::vector<Vector>& neighbor_x, DerivativeCheck& out) {
  const PointState base = make_state(t, stage, x, u, neighbor_ids, neighbor_x);
  check_expansion(
      base,
      [&](const PointState& s, int order) -> Expansion { return expand_model(cost, weights, s, order); },
      out);
  if (weights.size() == 0) return;
  const CostExpansion e = expand_model(cost, weights, base, 2);
  auto vary_w = [&](auto&& pick) {
    return [&, pick](const Vector& w) { return Vector(pick(expand_model(cost, w, base, 1))); };
  };
  out.record("gtheta", e.gtheta.transpose(),
             fd_jacobian(vary_w([](const CostExpansion& c) { return scalar(c.value); }), weights));
  out.record("hx_theta", e.hx_theta,
             fd_jacobian(vary_w([](const CostExpansion& c) { return c.gx; }), weights));
  if (stage == Stage::kRunning) {
    out.record("hu_theta", e.hu_theta,
               fd_jacobian(vary_w([](const CostExpansion& c) { return c.gu; }), weights));
  }
}

void check_dynamics_at(const DynamicsModel& model, const Vector& x, const Vector& u,
                       const Vector& theta, const Vector& lambda, DerivativeCheck& out) {
  const DynamicsJacobians j = model.linearize(x, u, theta);
  const DynamicsCurvature k = model.curvature(x, u, theta, lambda);
  out.record("f", j.f, model.step(x, u, theta));
  auto fx_l = [&](const Vector& xx, const Vector& uu, const Vector& th) {
    return Vector(model.linearize(xx, uu, th).fx.transpose() * lambda);
  };
  auto fu_l = [&](const Vector& xx, const Vector& uu, const Vector& th) {
    return Vector(model.linearize(xx, uu, th).fu.transpose() * lambda);
  };
  out.record("fx", j.fx, fd_jacobian([&](const Vector& z) { return model.step(z, u, theta); }, x));
  out.record("fu", j.fu, fd_jacobian([&](const Vector& z) { return model.step(x, z, theta); }, u));
  out.record("xx", k.xx, fd_jacobian([&](const Vector& z) { return fx_l(z, u, theta); }, x));
  out.record("xu", k.xu, fd_jacobian([&](const Vector& z) { return fx_l(x, z, theta); }, u));
  out.record("ux", k.xu.transpose(), fd_jacobian([&](const Vector& z) { return fu_l(z, u, theta); }, x));
  out.record("uu", k.uu, fd_jacobian([&](const Vector& z) { return fu_l(x, z, theta); }, u));
  if (theta.size() > 0) {
    out.record("ftheta", j.ftheta,
               fd_jacobian([&](const Vector& z) { return model.step(x, u, z); }, theta));
    out.record("xtheta", k.xtheta, fd_jacobian([&](const Vector& z) { return fx_l(x, u, z); }, theta));
    out.record("utheta", k.utheta, fd_jacobian([&](const Vector& z) { return fu_l(x, u, z); }, theta));
  }
}

std::vector<DerivativeCheck> derivative_sweep(int points, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  auto rnd = [&](int n, double scale = 1.0) {
    return Vector(Vector::NullaryExpr(n, [&] { return scale * uni(rng); }));
  };
  std::vector<DerivativeCheck> out;

  // Cost terms on a planar double integrator (position then velocity), with
  // two neighbours.
  const int n = 4, mu = 2, T = 10;
  const std::vector<RobotId> ids{1, 2};
  TermSpec spec;
  spec.horizon = T;
  spec.pos_dim = 2;
  spec.reference = rnd(mu, 0.5);
  spec.start = rnd(2);
  spec.goal = rnd(2);
  spec.offsets = {{1, rnd(2)}, {2, rnd(2)}};
  spec.distances = {{1, 0.6}, {2, 0.9}};
  spec.obstacles = {Disk{rnd(2, 0.5), 0.3}, Disk{rnd(2, 0.5), 0.2}};
  spec.robot_radius = 0.1;
  spec.waypoints = {{3, rnd(2)}, {T, rnd(2)}};
  spec.group = ids;
  spec.stage = StageMask::kBoth;

  auto model = std::make_shared<CostModel>();
  for (const auto& [name, factory] : builtin_cost_terms()) {
    const CostTermPtr term = factory(spec);
    model->add(term, 0.5 + 0.5 * (uni(rng) + 1.0), true);
    DerivativeCheck chk;
    chk.subject = "cost:" + name;
    for (int k = 0; k < points; ++k) {
      const bool terminal = k % 4 == 3;
      int t = terminal ? T : static_cast<int>((uni(rng) + 1.0) * 0.5 * (T - 1));
      if (name == "waypoint" && !terminal) t = 3;
      const Stage stage = terminal ? Stage::kTerminal : Stage::kRunning;
      if (!term->active(stage, t)) continue;
      check_cost_term_at(*term, t, stage, rnd(n), rnd(mu), ids, {rnd(n), rnd(n)}, chk);
      ++chk.points;
    }
    out.push_back(chk);
  }
  {
    DerivativeCheck chk;
    chk.subject = "cost:model";
    for (int k = 0; k < points; ++k) {
      const bool terminal = k % 4 == 3;
      const int t = terminal ? T : 3;
      check_cost_model_at(*model, rnd(model->param_dim()).cwiseAbs(), t,
                          terminal ? Stage::kTerminal : Stage::kRunning, rnd(n), rnd(mu), ids,
                          {rnd(n), rnd(n)}, chk);
      ++chk.points;
    }
    out.push_back(chk);
  }

  // Dynamics, with and without a learnable gain.
  for (const auto& [name, factory] : builtin_dynamics()) {
    for (bool learnable : {false, true}) {
      DynamicsSpec ds;
      ds.dim = 2;
      ds.dt = 0.1 + 0.2 * (uni(rng) + 1.0);
      ds.learnable_gain = learnable;
      ds.gain = 1.0 + 0.3 * uni(rng);
      if (name == "linear") {
        ds.a = Matrix::Identity(3, 3) + 0.2 * Matrix(rnd(9)).reshaped(3, 3);
        ds.b = Matrix(rnd(6)).reshaped(3, 2);
        ds.position_dim = 1;
      }
      const DynamicsPtr dyn = factory(ds);
      DerivativeCheck chk;
      chk.subject = "dynamics:" + name + (learnable ? "+gain" : "");
      for (int k = 0; k < points; ++k) {
        const Vector th = Vector::Constant(dyn->param_dim(), 1.0) + rnd(dyn->param_dim(), 0.3);
        check_dynamics_at(*dyn, rnd(dyn->state_dim(), 2.0), rnd(dyn->input_dim(), 2.0), th,
                          rnd(dyn->state_dim(), 2.0), chk);
        ++chk.points;
      }
      out.push_back(chk);
    }
  }
  return out;
}

}  // namespace distgame::oracles
