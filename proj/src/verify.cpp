#include "confdyn/verify.hpp"

#include "confdyn/diagnostics.hpp"
#include "confdyn/error.hpp"
#include "confdyn/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

namespace confdyn {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Angles uniform in [0, 1), Line components uniform in [-line, line].
State random_state(const CoordinateSpec& spec, std::mt19937_64& rng, double line = 1.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  State x(spec.dim());
  for (int i = 0; i < spec.dim(); ++i) {
    const double v = u(rng);
    x[i] = spec.is_angle(i) ? v : line * (2.0 * v - 1.0);
  }
  return x;
}

ModelSpec pendulum(double alpha, int d = 1) {
  return instantiate_model("damped-mechanical", {{"alpha", {alpha}}, {"d", {double(d)}}});
}

CheckEntry negative_control(CheckEntry e, bool defect_present) {
  e.verdict = defect_present ? Verdict::NegativeControl : Verdict::Fail;
  return e;
}

// ------------------------------------------------------------------ geometry

CheckEntry conformality_ratio(const VerifyContext& ctx) {
  const auto m = instantiate_model("nonexact-linear");
  const double target = (7.0 - 3.0 * std::sqrt(5.0)) / 2.0;
  std::mt19937_64 rng(ctx.seed);
  double lo = 1e300, hi = -1e300, worst = 0.0, ls = 0.0;
  for (int k = 0; k < 100; ++k) {
    const State x = random_state(m.spec, rng);
    const auto est = conformality_ratio_estimate(m.map_jacobian(x), m.two_form(x), m.two_form(m.map(x)));
    lo = std::min(lo, est.ratio);
    hi = std::max(hi, est.ratio);
    worst = std::max(worst, std::abs(est.ratio - target));
    ls = std::max(ls, est.residual);
  }
  auto e = make_check("conformality-ratio", &m, std::max({worst, hi - lo, ls}), 1e-12, "closed-form");
  e.values = {{"ratio_min", lo}, {"ratio_max", hi}, {"target", target}, {"spread", hi - lo}};
  return e;
}

CheckEntry map_pullback(const VerifyContext& ctx) {
  const double a = 0.5;
  const auto m = instantiate_model("radial-contraction", {{"a", {a}}});
  std::mt19937_64 rng(ctx.seed);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const State x = random_state(m.spec, rng);
    worst = std::max(worst, pullback_residual(m.map_jacobian(x), m.two_form(x), m.two_form(m.map(x)), a));
  }
  return make_check("map-pullback-ratio", &m, worst, 1e-14, "closed-form");
}

CheckEntry loop_integral_oracle(const VerifyContext&) {
  // r dtheta over the circle r = 1 is 1; over r = 2 it is 2.
  const auto m = instantiate_model("circle-linear");
  double worst = 0.0;
  for (double r : {1.0, 2.0}) {
    std::vector<State> loop;
    for (int k = 0; k <= 64; ++k) loop.push_back(State{{wrap_unit(k / 64.0), r}});
    worst = std::max(worst, std::abs(loop_integral(m.spec, m.liouville, loop) - r));
  }
  return make_check("loop-integral", &m, worst, 1e-14, "closed-form");
}

// ------------------------------------------------------------------- models

CheckEntry exact_identity(const VerifyContext& ctx) {
  std::mt19937_64 rng(ctx.seed);
  double worst = 0.0;
  const std::vector<ModelSpec> models{
      instantiate_model("circle-linear", {{"alpha", {0.7}}}), pendulum(0.5), pendulum(0.3, 2),
      instantiate_model("mane", {{"alpha", {0.3}}, {"Y", {0, 1, 0.2, 0.1}}})};
  for (const auto& m : models) {
    for (int k = 0; k < 200; ++k) {
      const State x = random_state(m.spec, rng, 2.0);
      const Covector lhs = m.two_form(x).interior(m.field(x));
      const Covector rhs = m.alpha * m.liouville(x) + m.hamiltonian_gradient(x);
      worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff() / (1.0 + rhs.cwiseAbs().maxCoeff()));
    }
  }
  auto e = make_check("identity-exact", nullptr, worst, 1e-12, "construction");
  e.model = "circle-linear, damped-mechanical (d=1,2), mane";
  return e;
}

CheckEntry pair_identity(const VerifyContext& ctx) {
  std::mt19937_64 rng(ctx.seed);
  double worst = 0.0;
  for (const char* name : {"t2-pair-theta1", "t2-pair-theta2"}) {
    const auto m = instantiate_model(name);
    for (int k = 0; k < 200; ++k) {
      const State x = random_state(m.spec, rng);
      const Covector lhs = m.two_form(x).interior(m.field(x));
      const Covector rhs = m.hamiltonian_gradient(x) - m.hamiltonian(x) * m.lee(x);
      worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff());
    }
  }
  auto e = make_check("identity-conformal-pair", nullptr, worst, 1e-12, "construction");
  e.model = "t2-pair-theta1, t2-pair-theta2";
  return e;
}

CheckEntry trapping(const VerifyContext&) {
  const auto m = pendulum(0.5);
  const double R = trapping_level(m);
  auto e = make_check("trapping-level", &m, std::abs(R - 1.0), 1e-6, "closed-form");
  e.values["R"] = R;
  return e;
}

// -------------------------------------------------------------- flow-engine

CheckEntry transport(const VerifyContext& ctx, const std::string& name, const ModelSpec& m) {
  std::mt19937_64 rng(ctx.seed);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const auto tr = integrate_variational(m, random_state(m.spec, rng), 0.0, 1.0, 11);
    const auto r = transport_residuals(m, tr);
    worst = std::max({worst, r.omega, r.hamiltonian_checked ? r.hamiltonian : 0.0});
  }
  return make_check(name, &m, worst, 1e-6, "closed-form");
}

CheckEntry splitting_conformality(const VerifyContext& ctx) {
  const double alpha = 0.5;
  const auto m = pendulum(alpha);
  std::mt19937_64 rng(ctx.seed);
  const TwoForm om = m.two_form(State::Zero(2));
  double worst = 0.0;
  for (double h : {0.1, 0.01, 0.001}) {
    for (int k = 0; k < 50; ++k) {
      const auto s = conformal_splitting_step(m, random_state(m.spec, rng, 3.0), h);
      worst = std::max(worst, pullback_residual(s.jacobian, om, om, std::exp(-alpha * h)));
    }
  }
  return make_check("splitting-conformality", &m, worst, 5e-13, "closed-form");
}

CheckEntry blowup(const VerifyContext&) {
  const auto m = instantiate_model("circle-quadratic", {{"alpha", {1.0}}});
  // Riccati r' = -r -+ 2 pi r^2 on theta = 0 resp. 1/2
  const double expected = std::log(kTwoPi / (kTwoPi - 1.0));
  double worst = 0.0;
  std::ostringstream detail;
  for (const State& x0 : {State{{0.0, -1.0}}, State{{0.5, 1.0}}}) {
    const auto tr = integrate_flow(m, x0, 0.0, 2.0, 3);
    if (tr.status != TrajectoryStatus::BlowUp) {
      worst = std::numeric_limits<double>::infinity();
      detail << "no escape from (" << x0[0] << ", " << x0[1] << "); ";
      continue;
    }
    worst = std::max(worst, std::abs(tr.t_escape - expected));
  }
  auto e = make_check("blowup-riccati", &m, worst, 1e-6, "closed-form");
  e.values["t_expected"] = expected;
  e.detail = detail.str();
  return e;
}

// -------------------------------------------------------------- diagnostics

CheckEntry floquet_attracting(const VerifyContext&) {
  const auto m = instantiate_model("t2-pair-theta2");
  const auto orb = find_periodic_orbit(m, SectionSpec::on_axis(2, 0, 0.0), State{{0.0, 0.02}});
  const double lam2 = std::exp(-kTwoPi);
  const double r = std::max({std::abs(orb.period - 1.0 / kTwoPi) / 1e-8,
                             std::abs(orb.multipliers[0] - 1.0) / 1e-6,
                             std::abs(orb.multipliers[1] - lam2) / 1e-6,
                             std::abs(orb.pairing_target - lam2) / 1e-8,
                             orb.pairing_modulus_defect * lam2 / 1e-8,
                             orb.h_anchor ? *orb.h_anchor / 1e-9 : 1e300});
  // residual is the worst error in units of its own tolerance
  auto e = make_check("floquet-attracting", &m, r, 1.0, "closed-form");
  e.values = {{"period", orb.period},
              {"mu1", std::abs(orb.multipliers[0])},
              {"mu2", std::abs(orb.multipliers[1])},
              {"pairing_target", orb.pairing_target},
              {"h_anchor", orb.h_anchor.value_or(std::numeric_limits<double>::quiet_NaN())}};
  return e;
}

CheckEntry floquet_repelling(const VerifyContext&) {
  const auto m = instantiate_model("t2-pair-theta2");
  const auto orb = find_periodic_orbit(m, SectionSpec::on_axis(2, 0, 0.0, 0), State{{0.0, 0.5001}});
  const double big = std::exp(kTwoPi);
  const double r = std::max({std::abs(orb.anchor[1] - 0.5) / 1e-10,
                             std::abs(orb.multipliers[0] - big) / (1e-6 * big),
                             std::abs(orb.multipliers[1] - 1.0) / 1e-6,
                             orb.pairing_modulus_defect / 1e-6});
  auto e = make_check("floquet-repelling", &m, r, 1.0, "closed-form");
  e.values = {{"mu1", std::abs(orb.multipliers[0])}, {"mu2", std::abs(orb.multipliers[1])}};
  return e;
}

CheckEntry lyapunov_pairing(const VerifyContext&) {
  const double alpha = 0.5;
  const auto m = pendulum(alpha);
  const auto res = lyapunov_spectrum(m, State{{0.2, 0.0}}, 200.0, 400);
  const double sum = res.exponents[0] + res.exponents[1];
  auto e = make_check("lyapunov-pairing", &m, std::abs(sum + alpha), 1e-3, "closed-form");
  e.values = {{"chi1", res.exponents[0]}, {"chi2", res.exponents[1]}, {"sum", sum}};
  if (!res.converged) e.detail = "not converged";
  return e;
}

CheckEntry loop_cohomology(const VerifyContext&) {
  const auto m = instantiate_model("circle-linear", {{"alpha", {1.0}}});
  std::vector<State> loop;
  for (int k = 0; k <= 256; ++k) loop.push_back(State{{wrap_unit(k / 256.0), 1.0}});
  const auto r = loop_transport(m, loop, 1.0);
  auto e = make_check("loop-cohomology", &m, std::abs(r.it - r.expected) / std::abs(r.expected), 1e-7,
                      "closed-form");
  e.values = {{"I0", r.i0}, {"It", r.it}, {"expected", r.expected}};
  return e;
}

CheckEntry escape_circle(const VerifyContext& ctx) {
  const auto flow = instantiate_model("circle-linear", {{"alpha", {1.0}}});
  const auto f = time_t_map(flow, 1.0);
  // the null set: the zero section and the circle theta = 1/2
  auto away = [](const State& x) {
    return std::abs(x[1]) > 1e-3 && std::abs(x[0] - 0.5) > 1e-3;
  };
  const auto st = escape_statistics(f, Vec{{0.0, -1.0}}, Vec{{1.0, 1.0}}, 200, 1000, ctx.seed, away, ctx.jobs);
  const double frac = static_cast<double>(st.escaped) / static_cast<double>(st.total);
  auto e = make_check("escape-circle-linear", &flow, 1.0 - frac, 0.01, "sampling");
  e.values = {{"escaped", double(st.escaped)}, {"total", double(st.total)}};
  return e;
}

CheckEntry escape_shear(const VerifyContext& ctx) {
  const auto m = instantiate_model("shear-contraction", {{"a", {0.5}}});
  const auto st = escape_statistics(m, Vec{{0.0, -1.0}}, Vec{{1.0, 1.0}}, 200, 1000, ctx.seed, {}, ctx.jobs);
  std::size_t late = 0;
  for (long s : st.escape_step) late += (s < 0 || s > 2) ? 1 : 0;
  auto e = make_check("escape-shear", &m, static_cast<double>(late), 0.0, "closed-form");
  e.values = {{"escaped", double(st.escaped)}, {"total", double(st.total)}};
  return e;
}

CheckEntry attractor_cloud(const VerifyContext& ctx) {
  const auto m = pendulum(0.5);
  AttractorOptions opt;
  opt.t_relax = 60.0;
  opt.grid = 24;
  opt.jobs = ctx.jobs;
  const auto est = attractor_estimate(m, opt);
  // reference set: the equilibria and the saddle's unstable manifold, grown
  // independently of the cloud's own traces
  std::vector<State> ref = est.equilibria;
  const State saddle = State::Zero(2);
  const auto wu = unstable_manifold_cloud(m, saddle, 60.0, IntegratorConfig::reference(1e-11, 1e-13), 1e-6, 5e-4);
  ref.insert(ref.end(), wu.points.begin(), wu.points.end());
  const auto dist = nearest_distances(m.spec, est.cloud, ref, 1e-2, ctx.jobs);
  double far = 0.0;
  for (double d : dist) far = std::max(far, d);
  const double sink = nearest_distance(m.spec, State{{0.5, 0.0}}, est.cloud);
  auto e = make_check("attractor-cloud", &m, std::max(far, sink), 1e-2, "reference-integration");
  e.values = {{"cloud", double(est.cloud.size())},
              {"max_dist_to_Wu", far},
              {"sink_dist", sink},
              {"trap_level", est.trap_level},
              {"invariance_residual", est.invariance_residual}};
  if (!est.trapping) e.verdict = Verdict::Fail;
  e.detail = est.detail;
  return e;
}

CheckEntry mane_fixed_point(const VerifyContext&) {
  const double alpha = 0.5, c = 0.3;
  // Y(q) = c - (alpha / 2 pi) sin 2 pi q: Y(0) = c, Y'(0) = -alpha
  const auto m = instantiate_model("mane", {{"alpha", {alpha}}, {"Y0", {c}}, {"Y", {0, 1, 0, -alpha / kTwoPi}}});
  const auto eq = find_equilibria(m, Vec{{0.0, -2.0}}, Vec{{1.0, 2.0}});
  double best = std::numeric_limits<double>::infinity(), field = std::numeric_limits<double>::infinity();
  for (const auto& x : eq) {
    const double d = torus_distance(m.spec, x, State{{0.0, -c}});
    if (d < best) {
      best = d;
      field = m.field(x).norm();
    }
  }
  auto e = make_check("mane-fixed-point", &m, field, 1e-10, "closed-form");
  // the zero is degenerate in q (Y' + alpha vanishes to second order), so its
  // location is only resolved to about sqrt of the field tolerance
  if (!(best <= 1e-6)) e.verdict = Verdict::Fail;
  e.values = {{"field_norm", field}, {"distance", best}, {"equilibria", double(eq.size())}};
  return e;
}

CheckEntry isotropy_zero_section(const VerifyContext& ctx) {
  const auto m = pendulum(0.5, 2);
  std::mt19937_64 rng(ctx.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<State> pts;
  std::vector<Mat> frames;
  for (int k = 0; k < 100; ++k) {
    pts.push_back(State{{u(rng), u(rng), 0.0, 0.0}});
    Mat f = Mat::Zero(4, 2);
    f(0, 0) = 1.0;
    f(1, 1) = 1.0;
    frames.push_back(f);
  }
  const double d = isotropy_defect(pts, frames, [&](const State& x) { return m.two_form(x); });
  return make_check("isotropy-zero-section", &m, d, 1e-14, "closed-form");
}

CheckEntry isotropy_unstable(const VerifyContext&) {
  const auto m = pendulum(0.5, 2);
  const auto split = IntegratorConfig::splitting(0.01);
  const auto om = [&](const State& x) { return m.two_form(x); };
  const auto w5 = unstable_manifold_cloud(m, State::Zero(4), 5.0, split);
  const auto w10 = unstable_manifold_cloud(m, State::Zero(4), 10.0, split);
  const double d5 = isotropy_defect(w5.points, w5.frames, om);
  const double d10 = isotropy_defect(w10.points, w10.frames, om);
  // both sit at the rounding floor of exactly conformal steps; growth above
  // that floor counts as an increase
  const bool decreasing = d10 <= std::max(d5, 1e-12);
  auto e = make_check("isotropy-unstable-d2", &m, std::max(d5, d10), 1e-4, "closed-form");
  if (!decreasing) e.verdict = Verdict::Fail;
  e.values = {{"defect_t5", d5}, {"defect_t10", d10}, {"unstable_dim", double(w5.unstable_dim)}};
  return e;
}

CheckEntry lee_no_return(const VerifyContext& ctx) {
  const auto m = instantiate_model("lee-twisted-t1t2");
  std::mt19937_64 rng(ctx.seed);
  std::vector<State> starts;
  for (int k = 0; k < 20; ++k) starts.push_back(random_state(m.spec, rng));
  std::vector<double> mins(starts.size());
  parallel_for(starts.size(), ctx.jobs, [&](std::size_t k) {
    mins[k] = recurrence_scan(m, starts[k], 200.0, 0.01, 1e-2).min_dist;
  });
  double worst = std::numeric_limits<double>::infinity();
  for (double v : mins) worst = std::min(worst, v);
  // residual: how far the closest return falls below 1e-2
  auto e = make_check("lee-no-return", &m, std::max(0.0, 1e-2 - worst), 0.0, "closed-form");
  e.values = {{"min_return", worst}};
  return e;
}

CheckEntry classify(const VerifyContext& ctx, bool dissipative) {
  const auto m = instantiate_model(dissipative ? "t2-pair-theta2" : "t2-pair-theta1");
  std::mt19937_64 rng(ctx.seed);
  std::vector<State> starts;
  for (int k = 0; k < 100; ++k) starts.push_back(random_state(m.spec, rng));
  std::vector<OrbitClass> out(starts.size());
  parallel_for(starts.size(), ctx.jobs, [&](std::size_t k) {
    out[k] = classify_orbit(m, starts[k], 10.0);
  });
  std::size_t hits = 0;
  for (const auto& oc : out) {
    if (dissipative) {
      hits += oc.verdict == OrbitVerdict::Dissipative &&
                      std::abs(oc.r_slope / (-4.0 * kPi * kPi) - 1.0) <= 0.01 && oc.omega_H_max <= 1e-3
                  ? 1 : 0;
    } else {
      hits += oc.verdict == OrbitVerdict::Conservative && oc.r_max_abs <= 1e-4 ? 1 : 0;
    }
  }
  const double frac = static_cast<double>(hits) / static_cast<double>(out.size());
  auto e = make_check(dissipative ? "classify-dissipative" : "classify-conservative", &m, 0.95 - frac, 0.0,
                      "sampling");
  e.values = {{"fraction", frac}};
  return e;
}

// --------------------------------------------------------- negative controls

CheckEntry nonclosed_graph(const VerifyContext&) {
  // graph of sin(2 pi q1) dq2 in T*T^2 is not closed: Omega(d/dq1, d/dq2) =
  // -2 pi cos 2 pi q1 on its parametrized tangent vectors
  const auto m = pendulum(0.5, 2);
  std::vector<State> pts;
  std::vector<Mat> frames;
  for (int k = 0; k < 64; ++k) {
    const double q1 = k / 64.0;
    pts.push_back(State{{q1, 0.0, 0.0, std::sin(kTwoPi * q1)}});
    Mat f = Mat::Zero(4, 2);
    f(0, 0) = 1.0;
    f(3, 0) = kTwoPi * std::cos(kTwoPi * q1);
    f(1, 1) = 1.0;
    frames.push_back(f);
  }
  const double d = isotropy_defect(pts, frames, [&](const State& x) { return m.two_form(x); },
                                   IsotropyNormalization::Parametrized);
  auto e = make_check("isotropy-non-closed-graph", &m, d, 1e-4, "closed-form");
  e.values = {{"defect", d}, {"expected", kTwoPi}};
  return negative_control(e, std::abs(d - kTwoPi) <= 1e-6);
}

CheckEntry rational_recurrence(const VerifyContext&) {
  const auto m = instantiate_model("lee-twisted-t1t2", {{"a1", {1.0}}, {"a2", {2.0}}});
  const auto r = recurrence_scan(m, State{{0.3, 0.6, 0.0, 0.2}}, 3.0, 0.01, 1e-6);
  auto e = make_check("recurrence-rational-beta", &m, std::max(0.0, 1e-2 - r.min_dist), 0.0, "closed-form");
  e.values = {{"min_return_dist", r.min_dist}, {"first_return", r.first_below}};
  return negative_control(e, r.min_dist < 1e-6 && std::abs(r.first_below - 1.0) < 1e-9);
}

CheckEntry wrong_rate_transport(const VerifyContext& ctx) {
  // circle-linear alpha = 1 checked against the factor of alpha = 0.5
  auto m = instantiate_model("circle-linear", {{"alpha", {1.0}}});
  std::mt19937_64 rng(ctx.seed);
  const auto tr = integrate_variational(m, random_state(m.spec, rng), 0.0, 1.0, 11);
  m.alpha = 0.5;
  const auto r = transport_residuals(m, tr);
  auto e = make_check("transport-wrong-rate", &m, r.omega, 1e-6, "closed-form");
  return negative_control(e, r.omega > 1e-2);
}

CheckEntry literal_scale(const VerifyContext& ctx) {
  const auto m = instantiate_model("nonexact-linear", {{"r_scale", {(3.0 - std::sqrt(5.0)) / 2.0}}});
  std::mt19937_64 rng(ctx.seed);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const State x = random_state(m.spec, rng);
    worst = std::max(worst, conformality_ratio_estimate(m.map_jacobian(x), m.two_form(x), m.two_form(m.map(x))).residual);
  }
  auto e = make_check("conformality-literal-scale", &m, worst, 1e-12, "construction");
  return negative_control(e, worst > 1e-2);
}

}  // namespace

const std::vector<VerifyCheck>& verify_checks() {
  static const std::vector<VerifyCheck> checks = [] {
    std::vector<VerifyCheck> c;
    auto add = [&](std::string name, std::string scope, std::function<CheckEntry(const VerifyContext&)> fn) {
      c.push_back({std::move(name), std::move(scope), std::move(fn)});
    };
    add("conformality-ratio", "geometry", conformality_ratio);
    add("map-pullback-ratio", "geometry", map_pullback);
    add("loop-integral", "geometry", loop_integral_oracle);
    add("identity-exact", "models", exact_identity);
    add("identity-conformal-pair", "models", pair_identity);
    add("trapping-level", "models", trapping);
    add("transport-circle-linear-0.5", "flow-engine", [](const VerifyContext& ctx) {
      return transport(ctx, "transport-circle-linear-0.5", instantiate_model("circle-linear", {{"alpha", {0.5}}}));
    });
    add("transport-circle-linear-1", "flow-engine", [](const VerifyContext& ctx) {
      return transport(ctx, "transport-circle-linear-1", instantiate_model("circle-linear", {{"alpha", {1.0}}}));
    });
    add("transport-t2-pair-theta2", "flow-engine", [](const VerifyContext& ctx) {
      return transport(ctx, "transport-t2-pair-theta2", instantiate_model("t2-pair-theta2"));
    });
    add("splitting-conformality", "flow-engine", splitting_conformality);
    add("blowup-riccati", "flow-engine", blowup);
    add("floquet-attracting", "diagnostics", floquet_attracting);
    add("floquet-repelling", "diagnostics", floquet_repelling);
    add("lyapunov-pairing", "diagnostics", lyapunov_pairing);
    add("loop-cohomology", "diagnostics", loop_cohomology);
    add("escape-circle-linear", "diagnostics", escape_circle);
    add("escape-shear", "diagnostics", escape_shear);
    add("attractor-cloud", "diagnostics", attractor_cloud);
    add("mane-fixed-point", "diagnostics", mane_fixed_point);
    add("isotropy-zero-section", "diagnostics", isotropy_zero_section);
    add("isotropy-unstable-d2", "diagnostics", isotropy_unstable);
    add("lee-no-return", "diagnostics", lee_no_return);
    add("classify-dissipative", "diagnostics", [](const VerifyContext& ctx) { return classify(ctx, true); });
    add("classify-conservative", "diagnostics", [](const VerifyContext& ctx) { return classify(ctx, false); });
    add("isotropy-non-closed-graph", "diagnostics-negative-controls", nonclosed_graph);
    add("recurrence-rational-beta", "diagnostics-negative-controls", rational_recurrence);
    add("transport-wrong-rate", "diagnostics-negative-controls", wrong_rate_transport);
    add("conformality-literal-scale", "diagnostics-negative-controls", literal_scale);
    return c;
  }();
  return checks;
}

const std::vector<std::string>& verify_scopes() {
  static const std::vector<std::string> scopes = {"all", "geometry", "models", "flow-engine", "diagnostics",
                                                  "diagnostics-negative-controls"};
  return scopes;
}

DiagnosticsReport verify_suite(const std::string& scope, const VerifyContext& ctx) {
  const auto& scopes = verify_scopes();
  if (std::find(scopes.begin(), scopes.end(), scope) == scopes.end()) {
    throw Error(ErrorCode::Config, "unknown verify scope '" + scope + "'");
  }
  DiagnosticsReport report;
  for (const auto& c : verify_checks()) {
    if (scope != "all" && c.scope != scope) continue;
    const auto t0 = std::chrono::steady_clock::now();
    CheckEntry e;
    try {
      e = c.run(ctx);
    } catch (const std::exception& ex) {
      e = make_check(c.name, nullptr, std::numeric_limits<double>::quiet_NaN(), 0.0, "none");
      e.detail = ex.what();
    }
    e.check = c.name;
    e.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.entries.push_back(std::move(e));
  }
  return report;
}

}  // namespace confdyn
