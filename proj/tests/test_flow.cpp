#include "doctest.h"

#include "confdyn/error.hpp"
#include "confdyn/flow.hpp"
#include "confdyn/models.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace confdyn;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Riccati r' = -alpha r - s 2 pi r^2 (s = +-1) through u = 1/r:
// u' = alpha u + s 2 pi, so u hits zero at the escape time.
double riccati_escape(double alpha, double r0, double s) {
  const double u0 = 1.0 / r0;
  const double c = s * kTwoPi / alpha;
  return std::log(c / (u0 + c)) / alpha;
}

double max_abs(const Mat& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("config validation") {
  IntegratorConfig c;
  c.rel_tol = 0.1;
  CHECK_THROWS_AS(c.validate(), Error);
  CHECK_THROWS_AS(IntegratorConfig::splitting(0.6).validate(), Error);
  CHECK_NOTHROW(IntegratorConfig::reference().validate());
}

TEST_CASE("maps are rejected by the flow integrator") {
  const auto m = instantiate_model("radial-contraction", {{"a", {0.5}}});
  CHECK_THROWS_AS(integrate_flow(m, State{{0.3, 1.0}}, 0.0, 1.0, 2), Error);
  const auto f = instantiate_model("circle-linear");
  CHECK_THROWS_AS(integrate_flow(f, State{{0.3, 1.0}}, 1.0, 1.0, 2), Error);
}

TEST_CASE("quadratic circle field escapes at the Riccati time") {
  const auto m = instantiate_model("circle-quadratic", {{"alpha", {1.0}}});
  const double expected = std::log(kTwoPi / (kTwoPi - 1.0));
  SUBCASE("theta = 0, r negative") {
    const auto tr = integrate_flow(m, State{{0.0, -1.0}}, 0.0, 2.0, 5);
    REQUIRE(tr.status == TrajectoryStatus::BlowUp);
    CHECK(tr.t_escape == doctest::Approx(riccati_escape(1.0, -1.0, 1.0)).epsilon(1e-7));
    CHECK(std::abs(tr.t_escape - expected) < 1e-6);
  }
  SUBCASE("theta = 1/2, r positive") {
    const auto tr = integrate_flow(m, State{{0.5, 1.0}}, 0.0, 2.0, 5);
    REQUIRE(tr.status == TrajectoryStatus::BlowUp);
    CHECK(std::abs(tr.t_escape - riccati_escape(1.0, 1.0, -1.0)) < 1e-6);
    CHECK(std::abs(tr.t_escape - expected) < 1e-6);
  }
  SUBCASE("theta = 1/2, r negative decays") {
    const auto tr = integrate_flow(m, State{{0.5, -1.0}}, 0.0, 2.0, 5);
    CHECK(tr.status == TrajectoryStatus::Completed);
    CHECK(std::abs(tr.states.back()[1]) < 0.2);
  }
  SUBCASE("other rates") {
    const auto m2 = instantiate_model("circle-quadratic", {{"alpha", {2.0}}});
    const auto tr = integrate_flow(m2, State{{0.0, -1.0}}, 0.0, 2.0, 3);
    REQUIRE(tr.status == TrajectoryStatus::BlowUp);
    CHECK(std::abs(tr.t_escape - riccati_escape(2.0, -1.0, 1.0)) < 1e-6);
  }
}

TEST_CASE("damped pendulum energy is non-increasing") {
  const auto m = instantiate_model("damped-mechanical", {{"alpha", {0.5}}});
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> q(0, 1), p(-3, 3);
  for (int trial = 0; trial < 5; ++trial) {
    const State x0{{q(rng), p(rng)}};
    const auto tr = integrate_flow(m, x0, 0.0, 50.0, 2001);
    REQUIRE(tr.status == TrajectoryStatus::Completed);
    double worst = 0.0;
    for (std::size_t i = 1; i < tr.size(); ++i) {
      worst = std::max(worst, m.hamiltonian(tr.states[i]) - m.hamiltonian(tr.states[i - 1]));
    }
    CHECK(worst < 1e-9);
  }
}

TEST_CASE("tangent flow") {
  SUBCASE("Abel-Liouville for the circle field") {
    const auto m = instantiate_model("circle-linear", {{"alpha", {1.0}}});
    const auto tr = integrate_variational(m, State{{0.3, 0.7}}, 0.0, 1.0, 3);
    CHECK(max_abs(tr.frames.front() - Mat::Identity(2, 2)) == 0.0);
    CHECK(std::abs(tr.frames.back().determinant() - std::exp(-1.0)) < 1e-8);
    const auto r = conformality_ratio_estimate(tr.frames.back(), TwoForm::canonical(1),
                                               TwoForm::canonical(1));
    CHECK(std::abs(r.ratio - std::exp(-1.0)) < 1e-8);
  }
  SUBCASE("conformal pair transport") {
    const auto m = instantiate_model("t2-pair-theta2");
    const auto tr = integrate_variational(m, State{{0.1, 0.3}}, 0.0, 1.0, 11);
    REQUIRE(tr.has_rotation());
    CHECK(tr.r_accum.front() == 0.0);
    const Mat om = m.two_form(tr.states.back()).matrix;
    const Mat& J = tr.frames.back();
    CHECK(max_abs(J.transpose() * om * J - std::exp(tr.r_accum.back()) * om) < 1e-7);
    for (const auto& f : tr.frames) CHECK(f.determinant() > 0);
  }
  SUBCASE("volume contraction in four dimensions") {
    const auto m = instantiate_model("damped-mechanical", {{"d", {2.0}}, {"alpha", {0.5}}});
    const auto tr = integrate_variational(m, State{{0.1, 0.2, 0.4, -0.3}}, 0.0, 1.0, 2);
    CHECK(std::abs(tr.frames.back().determinant() - std::exp(-2 * 0.5)) < 1e-7);
  }
  SUBCASE("finite differences need the reference method") {
    auto m = instantiate_model("circle-linear");
    m.field_jacobian = nullptr;
    CHECK_THROWS_AS(integrate_variational(m, State{{0.1, 0.2}}, 0.0, 1.0, 2,
                                          IntegratorConfig::rk4(0.01)),
                    Error);
    const auto tr = integrate_variational(m, State{{0.1, 0.2}}, 0.0, 1.0, 2,
                                          IntegratorConfig::reference(1e-10, 1e-12));
    CHECK(std::abs(tr.frames.back().determinant() - std::exp(-1.0)) < 1e-6);
  }
}

TEST_CASE("backward then forward returns to the start") {
  const auto m = instantiate_model("mane", {{"alpha", {0.3}}, {"Y", {0, 1, 0.2, 0.1}}});
  const State x0{{0.2, 0.4}};
  const auto fwd = integrate_flow(m, x0, 0.0, 3.0, 2);
  const auto back = integrate_flow(m, fwd.states.back(), 3.0, 0.0, 2);
  CHECK(back.backward);
  CHECK(torus_distance(m.spec, back.states.back(), x0) < 1e-6);
}

TEST_CASE("splitting step") {
  const auto m = instantiate_model("damped-mechanical", {{"alpha", {0.5}}});
  const TwoForm om = TwoForm::canonical(1);
  SUBCASE("exact conformality") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-2, 2);
    for (double h : {0.01, 0.1, 0.5}) {
      const auto s = conformal_splitting_step(m, State{{u(rng), u(rng)}}, h);
      CHECK(pullback_residual(s.jacobian, om, om, std::exp(-0.5 * h)) < 5e-13);
    }
    const auto mn = instantiate_model("mane", {{"d", {2.0}}, {"Y", {0, 1, 0, 0.3, 0, 1, 0, 1, 0, 0.2}}});
    const auto s = conformal_splitting_step(mn, State{{0.1, 0.7, 0.5, -1.0}}, 0.05);
    CHECK(pullback_residual(s.jacobian, TwoForm::canonical(2), TwoForm::canonical(2),
                            std::exp(-0.5 * 0.05)) < 5e-13);
  }
  SUBCASE("zero step") {
    const State x{{0.3, 0.8}};
    const auto s = conformal_splitting_step(m, x, 0.0);
    CHECK(max_abs(s.state - x) == 0.0);
    CHECK(max_abs(s.jacobian - Mat::Identity(2, 2)) == 0.0);
  }
  SUBCASE("third-order local error") {
    const State x{{0.2, 0.9}};
    std::vector<double> errs;
    for (double h : {0.02, 0.01, 0.005}) {
      const auto s = conformal_splitting_step(m, x, h);
      const double ts[2] = {0.0, h};
      const auto ref = integrate_flow(m, x, ts, IntegratorConfig::reference(1e-12, 1e-14));
      errs.push_back((s.state - ref.states.back()).norm());
    }
    for (std::size_t i = 1; i < errs.size(); ++i) {
      const double order = std::log2(errs[i - 1] / errs[i]);
      CHECK(order > 2.7);
      CHECK(order < 3.3);
    }
  }
  SUBCASE("bad inputs") {
    CHECK_THROWS_AS(conformal_splitting_step(m, State{{0.0, 0.0}}, 0.6), Error);
    CHECK_THROWS_AS(conformal_splitting_step(instantiate_model("circle-linear"),
                                             State{{0.0, 0.0}}, 0.1),
                    Error);
  }
  SUBCASE("integrated frames stay conformal") {
    const auto tr = integrate_variational(m, State{{0.3, 1.5}}, 0.0, 2.0, 5,
                                          IntegratorConfig::splitting(0.01));
    CHECK(pullback_residual(tr.frames.back(), om, om, std::exp(-0.5 * 2.0)) < 1e-11);
  }
}

TEST_CASE("map iteration") {
  const auto shear = instantiate_model("shear-contraction", {{"a", {0.5}}});
  auto tr = iterate_map(shear, State{{0.0, 1.0}}, 3);
  CHECK(tr.states.back()[0] == doctest::Approx(3.0));
  CHECK(tr.states.back()[1] == doctest::Approx(0.125));

  const auto radial = instantiate_model("radial-contraction", {{"a", {0.5}}});
  tr = iterate_map(radial, State{{0.3, 1.0}}, -10);
  CHECK(tr.states.back()[0] == doctest::Approx(0.3));
  CHECK(tr.states.back()[1] == doctest::Approx(1024.0));

  const auto ne = instantiate_model("nonexact-linear");
  const State x{{0.1, 0.2, 0.3, 0.4, 0.5, -0.6}};
  const auto back = iterate_map(ne, x, -1);
  const auto there = iterate_map(ne, back.states.back(), 1);
  CHECK(torus_distance(ne.spec, there.states.back(), x) < 1e-12);

  auto no_inv = radial;
  no_inv.inverse = nullptr;
  CHECK_THROWS_AS(iterate_map(no_inv, State{{0.3, 1.0}}, -1), Error);

  const auto fr = iterate_map(radial, State{{0.3, 1.0}}, 4, true);
  CHECK(fr.frames.back()(1, 1) == doctest::Approx(std::pow(0.5, 4)));
}

TEST_CASE("time-t map") {
  const auto flow = instantiate_model("circle-linear", {{"alpha", {1.0}}});
  const auto f1 = time_t_map(flow, 1.0);
  CHECK_FALSE(f1.is_flow());
  CHECK(f1.map(State{{0.0, 0.0}}).norm() < 1e-14);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 5; ++i) {
    const State x{{u(rng), 2 * u(rng) - 1}};
    const auto r = conformality_ratio_estimate(f1.map_jacobian(x), TwoForm::canonical(1),
                                               TwoForm::canonical(1));
    CHECK(std::abs(r.ratio - std::exp(-1.0)) < 1e-8);
    const auto fh = time_t_map(flow, 0.4);
    const auto fs = time_t_map(flow, 0.6);
    CHECK(torus_distance(flow.spec, fs.map(fh.map(x)), f1.map(x)) < 1e-8);
    CHECK(torus_distance(flow.spec, f1.inverse(f1.map(x)), x) < 1e-8);
  }
  CHECK_THROWS_AS(time_t_map(flow, 0.0), Error);
  const auto quad = time_t_map(instantiate_model("circle-quadratic"), 2.0);
  CHECK_THROWS_AS(quad.map(State{{0.0, -1.0}}), BlowUpError);
}

TEST_CASE("Poincare sections") {
  SUBCASE("invariant circle of the second pair example") {
    const auto m = instantiate_model("t2-pair-theta2");
    const auto res = poincare_return(m, SectionSpec::on_axis(2, 0, 0.0), State{{0.0, 0.0}}, 3);
    REQUIRE(res.return_times.size() == 3);
    for (double T : res.return_times) CHECK(std::abs(T - 1.0 / kTwoPi) < 1e-8);
    // theta2 contracts by exp(-2 pi) per turn
    CHECK(std::abs(res.return_jacobians[0](1, 1) - std::exp(-kTwoPi)) < 1e-8);
    CHECK(std::abs(res.return_jacobians[0](0, 0)) < 1e-8);
    CHECK(std::abs(res.rotations[0] + kTwoPi) < 1e-8);
  }
  SUBCASE("Lee flow crossings are equally spaced") {
    const auto m = instantiate_model("lee-twisted-t1t2");
    const double v = 0.1;
    const double rate = std::sqrt(2.0) * std::cos(kTwoPi * v) + std::sqrt(3.0) * std::sin(kTwoPi * v);
    const auto res = poincare_return(m, SectionSpec::on_axis(4, 3, 0.0), State{{0.2, 0.3, v, 0.25}}, 4);
    CHECK(std::abs(res.return_times[0] - 0.75 / rate) < 1e-9);
    for (std::size_t i = 1; i < res.return_times.size(); ++i) {
      CHECK(std::abs(res.return_times[i] - 1.0 / rate) < 1e-9);
    }
  }
  SUBCASE("general functional, both directions") {
    const auto m = instantiate_model("damped-mechanical", {{"alpha", {0.0}}});
    SectionSpec s;
    s.normal = Vec{{0.0, 1.0}};
    s.offset = 0.0;
    s.direction = 0;
    const auto res = poincare_return(m, s, State{{0.25, 0.5}}, 2);
    for (const auto& x : res.crossings) CHECK(std::abs(x[1]) < 1e-10);
  }
  SUBCASE("errors") {
    const auto m = instantiate_model("t2-pair-theta2");
    SectionSpec s;
    s.normal = Vec::Zero(2);
    CHECK_THROWS_AS(poincare_return(m, s, State{{0.0, 0.0}}, 1), Error);
    // theta1 never moves under the first example
    const auto eq = instantiate_model("t2-pair-theta1");
    CHECK_THROWS_AS(poincare_return(eq, SectionSpec::on_axis(2, 0, 0.5), State{{0.0, 0.0}}, 1,
                                    IntegratorConfig{}, 5.0),
                    Error);
  }
}
