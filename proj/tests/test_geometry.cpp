#include "doctest.h"

#include "confdyn/error.hpp"
#include "confdyn/geometry.hpp"
#include "confdyn/models.hpp"

#include <cmath>
#include <random>

using namespace confdyn;

namespace {

const CoordinateSpec kCircleLine({Axis::Angle, Axis::Line});

std::vector<State> circle_loop(double r, int n) {
  std::vector<State> loop;
  for (int k = 0; k <= n; ++k) loop.push_back(State{{wrap_unit(double(k) / n), r}});
  return loop;
}

}  // namespace

TEST_CASE("coordinate specs") {
  CHECK_THROWS_AS(CoordinateSpec({Axis::Angle}), Error);
  CHECK_THROWS_AS(CoordinateSpec({Axis::Angle, Axis::Line, Axis::Line}), Error);
  const auto s = CoordinateSpec::cotangent_torus(2);
  CHECK(s.dim() == 4);
  CHECK(s.is_angle(1));
  CHECK_FALSE(s.is_angle(2));
  const State x = s.normalize(State{{-0.25, 3.5, 7.0, -7.0}});
  CHECK(x[0] == doctest::Approx(0.75));
  CHECK(x[1] == doctest::Approx(0.5));
  CHECK(x[2] == 7.0);
  CHECK(x[3] == -7.0);
  CHECK(wrap_unit(-1e-18) < 1.0);
  CHECK_THROWS_AS(s.check_state(State::Zero(3)), Error);
}

TEST_CASE("two-form evaluation") {
  const TwoForm om = TwoForm::canonical(1);
  CHECK(eval_two_form(om, Tangent{{1, 0}}, Tangent{{0, 1}}) == 1.0);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  const auto ne = instantiate_model("nonexact-linear");
  const TwoForm big = ne.two_form(State::Zero(6));
  for (int i = 0; i < 100; ++i) {
    Tangent u(6), v(6);
    for (int k = 0; k < 6; ++k) {
      u[k] = g(rng);
      v[k] = g(rng);
    }
    CHECK(eval_two_form(big, u, v) == -eval_two_form(big, v, u));
    CHECK(eval_two_form(big, u, u) == doctest::Approx(0.0).epsilon(1e-14));
  }
  CHECK_THROWS_AS(eval_two_form(om, Tangent{{1, 0, 0}}, Tangent{{0, 1}}), Error);

  // Independent expansion: canonical form of T*T^4 plus Omega_1 in eight
  // coordinates, pulled back along r2 = p r1, r4 = p r3.
  const double p = (std::sqrt(5.0) - 1.0) / 2.0;
  Mat w8 = Mat::Zero(8, 8);
  for (int i = 0; i < 4; ++i) {
    w8(i, 4 + i) = 1.0;
    w8(4 + i, i) = -1.0;
  }
  Vec a = Vec::Zero(8), b = Vec::Zero(8);
  a[1] = 1.0;
  a[0] = -p;
  b[3] = 1.0;
  b[2] = -p;
  w8 += a * b.transpose() - b * a.transpose();
  Mat emb = Mat::Zero(8, 6);
  for (int i = 0; i < 4; ++i) emb(i, i) = 1.0;
  emb(4, 4) = 1.0;
  emb(5, 4) = p;
  emb(6, 5) = 1.0;
  emb(7, 5) = p;
  const Mat oracle = emb.transpose() * w8 * emb;
  CHECK((big.matrix - oracle).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(eval_two_form(big, Tangent::Unit(6, 0), Tangent::Unit(6, 1)) == doctest::Approx(oracle(0, 1)));
  CHECK_NOTHROW(big.validate());
}

TEST_CASE("conformality ratio") {
  const TwoForm om = TwoForm::canonical(1);
  auto r = conformality_ratio_estimate(Mat::Identity(2, 2), om, om);
  CHECK(r.ratio == 1.0);
  CHECK(r.residual == 0.0);
  CHECK_THROWS_AS(conformality_ratio_estimate(Mat::Identity(2, 2), TwoForm{Mat::Zero(2, 2)}, om),
                  Error);

  const auto ne = instantiate_model("nonexact-linear");
  const State x = State::Zero(6);
  r = conformality_ratio_estimate(ne.map_jacobian(x), ne.two_form(x), ne.two_form(ne.map(x)));
  CHECK(std::abs(r.ratio - (7.0 - 3.0 * std::sqrt(5.0)) / 2.0) < 1e-12);
  CHECK(r.residual < 1e-12);

  // the literal (3 - sqrt 5)/2 radial factor is not conformal for this form
  const auto lit = instantiate_model("nonexact-linear", {{"r_scale", {(3.0 - std::sqrt(5.0)) / 2.0}}});
  r = conformality_ratio_estimate(lit.map_jacobian(x), lit.two_form(x), lit.two_form(x));
  CHECK(r.residual > 0.1);
  CHECK_FALSE(lit.ratio_a.has_value());
}

TEST_CASE("pullback residual") {
  const TwoForm om = TwoForm::canonical(1);
  CHECK(pullback_residual(Mat::Identity(2, 2), om, om, 1.0) == 0.0);
  const double a = 0.3;
  const Mat j{{1.0, 0.0}, {0.0, a}};
  CHECK(pullback_residual(j, om, om, a) == 0.0);
  CHECK_THROWS_AS(pullback_residual(j, om, om, 0.0), Error);
}

TEST_CASE("loop integrals") {
  const CovectorField rdtheta = [](const State& x) { return Covector{{x[1], 0.0}}; };
  CHECK(std::abs(loop_integral(kCircleLine, rdtheta, circle_loop(1.0, 2048)) - 1.0) < 1e-10);
  CHECK(std::abs(loop_integral(kCircleLine, rdtheta, circle_loop(2.5, 2048)) - 2.5) < 1e-10);
  CHECK(std::abs(loop_integral(kCircleLine, rdtheta, circle_loop(-0.7, 64)) + 0.7) < 1e-10);

  std::vector<State> constant(32, State{{0.4, 1.0}});
  CHECK(loop_integral(kCircleLine, rdtheta, constant) == 0.0);

  auto open = circle_loop(1.0, 32);
  open.back()[1] = 1.5;
  CHECK_THROWS_AS(loop_integral(kCircleLine, rdtheta, open), Error);
  CHECK_THROWS_AS(loop_integral(kCircleLine, rdtheta, circle_loop(1.0, 8)), Error);

  // r = 1 + s(1-s)/2 has a slope jump at s = 0, so the trapezoid rule is
  // only second order: the error drops by ~4 per doubling.
  const CovectorField r2 = [](const State& x) { return Covector{{x[1] * x[1], 0.0}}; };
  const double exact = 1.0 + 1.0 / 6.0 + 1.0 / 120.0;
  auto kinked = [](int n) {
    std::vector<State> loop;
    for (int k = 0; k <= n; ++k) {
      const double s = double(k) / n;
      loop.push_back(State{{wrap_unit(s), 1.0 + 0.5 * s * (1.0 - s)}});
    }
    return loop;
  };
  double prev = std::abs(loop_integral(kCircleLine, r2, kinked(64)) - exact);
  for (int n : {128, 256, 512}) {
    const double err = std::abs(loop_integral(kCircleLine, r2, kinked(n)) - exact);
    CHECK(prev / err > 3.5);
    CHECK(prev / err < 4.5);
    prev = err;
  }
}

TEST_CASE("torus distance") {
  const CoordinateSpec tt({Axis::Angle, Axis::Angle});
  CHECK(torus_distance(tt, State{{0.95, 0.0}}, State{{0.05, 0.0}}) == doctest::Approx(0.1));
  CHECK(torus_distance(kCircleLine, State{{0.3, 2.0}}, State{{0.3, 2.0}}) == 0.0);
  CHECK(torus_distance(kCircleLine, State{{0.0, 1.0}}, State{{0.5, -1.0}}) ==
        doctest::Approx(std::sqrt(4.25)).epsilon(1e-14));

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1), l(-3, 3);
  for (const auto& spec : {tt, kCircleLine, CoordinateSpec::cotangent_torus(2)}) {
    auto draw = [&] {
      State x(spec.dim());
      for (int i = 0; i < spec.dim(); ++i) x[i] = spec.is_angle(i) ? u(rng) : l(rng);
      return x;
    };
    int violations = 0;
    for (int i = 0; i < 1000; ++i) {
      const State x = draw(), y = draw(), z = draw();
      if (torus_distance(spec, x, z) > torus_distance(spec, x, y) + torus_distance(spec, y, z) + 1e-12) {
        ++violations;
      }
      if (torus_distance(spec, x, y) != torus_distance(spec, y, x)) ++violations;
    }
    CHECK(violations == 0);
  }
}
