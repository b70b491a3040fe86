#include "doctest.h"

#include "confdyn/error.hpp"
#include "confdyn/models.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace confdyn;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

State random_state(const ModelSpec& m, std::mt19937_64& rng, double spread = 2.0) {
  std::uniform_real_distribution<double> u(0, 1), l(-spread, spread);
  State x(m.dim());
  for (int i = 0; i < m.dim(); ++i) x[i] = m.spec.is_angle(i) ? u(rng) : l(rng);
  return x;
}

Covector fd_gradient(const std::function<double(const State&)>& f, const State& x) {
  const double h = 1e-6;
  Covector g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    State a = x, b = x;
    a[i] += h;
    b[i] -= h;
    g[i] = (f(a) - f(b)) / (2 * h);
  }
  return g;
}

// -d lambda as a matrix, by central differences of the components.
Mat fd_minus_exterior(const std::function<Covector(const State&)>& lam, const State& x) {
  const double h = 1e-6;
  const Eigen::Index n = x.size();
  Mat d(n, n);  // d(i, j) = d_i lambda_j
  for (Eigen::Index i = 0; i < n; ++i) {
    State a = x, b = x;
    a[i] += h;
    b[i] -= h;
    d.row(i) = ((lam(a) - lam(b)) / (2 * h)).transpose();
  }
  return -(d - d.transpose());
}

std::vector<ModelSpec> flows_with(bool exact) {
  std::vector<ModelSpec> out;
  for (const auto& name : registered_models()) {
    auto m = instantiate_model(name);
    if (!m.is_flow()) continue;
    if (exact ? m.flags.exact_symplectic : m.flags.conformal_pair) out.push_back(m);
  }
  if (exact) {
    out.push_back(instantiate_model("mane", {{"d", {2.0}}, {"Y", {0, 1, 0, 0.3, 0.1, 1, 1, 1, 0.2, 0}}}));
    out.push_back(instantiate_model("damped-mechanical", {{"d", {2.0}}}));
  }
  return out;
}

}  // namespace

TEST_CASE("registry") {
  CHECK(registered_models().size() == 11);
  CHECK_THROWS_AS(instantiate_model("no-such-model"), Error);
  CHECK_THROWS_AS(instantiate_model("radial-contraction", {{"a", {1.5}}}), Error);
  CHECK_THROWS_AS(instantiate_model("radial-contraction", {{"alpha", {1.0}}}), Error);
  CHECK_THROWS_AS(instantiate_model("mane", {{"d", {3.0}}}), Error);
  const auto warn = instantiate_model("circle-linear", {{"alpha", {7.0}}});
  CHECK_FALSE(warn.warnings.empty());
  CHECK(instantiate_model("circle-linear", {{"alpha", {1.0}}}).warnings.empty());
  for (const auto& name : registered_models()) {
    const auto m = instantiate_model(name);
    CHECK(m.name == name);
    CHECK(static_cast<bool>(m.field) == m.is_flow());
    CHECK(static_cast<bool>(m.map) == !m.is_flow());
    if (m.flags.cotangent_splittable) {
      CHECK(m.is_flow());
      CHECK(m.flags.exact_symplectic);
      CHECK(m.has_hamiltonian());
    }
  }
}

TEST_CASE("displayed examples") {
  const auto radial = instantiate_model("radial-contraction", {{"a", {0.5}}});
  const State fx = radial.map(State{{0.3, 2.0}});
  CHECK(fx[0] == doctest::Approx(0.3));
  CHECK(fx[1] == doctest::Approx(1.0));

  const auto cl = instantiate_model("circle-linear", {{"alpha", {1.0}}});
  const Tangent v = eval_vector_field(cl, State{{0.25, 1.0}});
  CHECK(v[0] == doctest::Approx(1.0));
  CHECK(v[1] == doctest::Approx(-1.0));
  CHECK_THROWS_AS(eval_vector_field(radial, State{{0.3, 2.0}}), Error);

  const auto obs = eval_observables(cl, State{{0.25, 2.0}});
  CHECK(*obs.hamiltonian == doctest::Approx(2.0));
  CHECK((*obs.liouville)[0] == 2.0);
  CHECK((*obs.liouville)[1] == 0.0);
  CHECK(obs.two_form.matrix(0, 1) == 1.0);
  CHECK(obs.two_form.matrix(1, 0) == -1.0);

  const auto t2 = instantiate_model("t2-pair-theta2");
  const Tangent w = eval_vector_field(t2, State{{0.4, 0.0}});
  CHECK(w[0] == doctest::Approx(kTwoPi));
  CHECK(w[1] == doctest::Approx(0.0));
  const auto t1 = instantiate_model("t2-pair-theta1");
  const auto eta = *eval_observables(t1, State{{0.7, 0.1}}).lee;
  CHECK(eta[0] == doctest::Approx(-kTwoPi));
  CHECK(eta[1] == 0.0);

  const double c = 0.35;
  const auto mane = instantiate_model("mane", {{"Y0", {c}}});
  const Tangent z = eval_vector_field(mane, State{{0.6, 0.0}});
  CHECK(z[0] == doctest::Approx(c));
  CHECK(z[1] == 0.0);

  const auto mech = instantiate_model("damped-mechanical");
  const Tangent e = eval_vector_field(mech, State{{0.0, 0.0}});
  CHECK(e.norm() < 1e-12);
}

TEST_CASE("defining identities") {
  std::mt19937_64 rng(42);
  SUBCASE("exact symplectic: Omega X = alpha lambda + dH") {
    for (const auto& m : flows_with(true)) {
      double worst = 0.0, worst_fd = 0.0, worst_ext = 0.0;
      for (int i = 0; i < 1000; ++i) {
        const State x = random_state(m, rng);
        const Covector lhs = m.two_form(x).interior(m.field(x));
        const Covector rhs = m.alpha * m.liouville(x) + m.hamiltonian_gradient(x);
        worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff());
        if (i < 10) {
          worst_fd = std::max(worst_fd,
                              (fd_gradient(m.hamiltonian, x) - m.hamiltonian_gradient(x)).cwiseAbs().maxCoeff());
        }
        if (i < 100) {
          worst_ext = std::max(worst_ext,
                               (fd_minus_exterior(m.liouville, x) - m.two_form(x).matrix).cwiseAbs().maxCoeff());
        }
      }
      INFO(m.name);
      CHECK(worst < 1e-9);
      CHECK(worst_fd < 1e-5);
      CHECK(worst_ext < 1e-6);
    }
  }
  SUBCASE("conformal pair: Omega X = dH - H eta, d Omega = eta ^ Omega") {
    for (const auto& m : flows_with(false)) {
      double worst = 0.0, worst_d = 0.0;
      for (int i = 0; i < 1000; ++i) {
        const State x = random_state(m, rng);
        const Covector lhs = m.two_form(x).interior(m.field(x));
        const Covector rhs = m.hamiltonian_gradient(x) - m.hamiltonian(x) * m.lee(x);
        worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff());
        if (i < 100) {
          const int n = m.dim();
          const double h = 1e-6;
          std::vector<Mat> dom;
          for (int k = 0; k < n; ++k) {
            State a = x, b = x;
            a[k] += h;
            b[k] -= h;
            dom.push_back((m.two_form(a).matrix - m.two_form(b).matrix) / (2 * h));
          }
          const Mat om = m.two_form(x).matrix;
          const Covector eta = m.lee(x);
          for (int p = 0; p < n; ++p)
            for (int q = 0; q < n; ++q)
              for (int r = 0; r < n; ++r) {
                const double d3 = dom[p](q, r) + dom[q](r, p) + dom[r](p, q);
                const double w3 = eta[p] * om(q, r) + eta[q] * om(r, p) + eta[r] * om(p, q);
                worst_d = std::max(worst_d, std::abs(d3 - w3));
              }
        }
      }
      INFO(m.name);
      CHECK(worst < 1e-9);
      CHECK(worst_d < 1e-6);
    }
  }
}

TEST_CASE("Liouville decomposition of the circle field") {
  std::mt19937_64 rng(9);
  const auto full = instantiate_model("circle-linear", {{"alpha", {1.3}}});
  const auto free = instantiate_model("circle-linear", {{"alpha", {0.0}}});
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const State x = random_state(full, rng);
    const Tangent z{{0.0, -x[1]}};
    worst = std::max(worst, (full.field(x) - (1.3 * z + free.field(x))).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("gauge equivalence on the second pair example") {
  const auto m = instantiate_model("t2-pair-theta2");
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1), v(0.05, 0.45);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const State x{{u(rng), v(rng)}};
    const double H = m.hamiltonian(x);
    const Covector dH = m.hamiltonian_gradient(x);
    // f = -log H, so e^f H = 1 and d(e^f H) = 0
    const double ef = 1.0 / H;
    const Covector df = -dH / H;
    const Mat om = ef * m.two_form(x).matrix;
    const Covector eta = m.lee(x) + df;
    const Covector rhs = Covector::Zero(2) - 1.0 * eta;
    const Tangent X = om.transpose().partialPivLu().solve(rhs);
    worst = std::max(worst, (X - m.field(x)).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("Lee field of the twisted bundle") {
  const auto m = instantiate_model("lee-twisted-t1t2");
  std::mt19937_64 rng(8);
  for (int i = 0; i < 100; ++i) {
    const State x = random_state(m, rng);
    CHECK(m.lee(x).dot(m.field(x)) == doctest::Approx(0.0).epsilon(1e-15));
    // i_L Omega = -eta
    CHECK((m.two_form(x).interior(m.field(x)) + m.lee(x)).cwiseAbs().maxCoeff() < 1e-12);
    const double t = 0.37;
    const State y = m.closed_form_flow(x, t);
    const double c = std::cos(kTwoPi * x[2]), s = std::sin(kTwoPi * x[2]);
    CHECK(torus_distance(m.spec, y, m.spec.normalize(State{{x[0] + t * c, x[1] + t * s, x[2],
                                                           x[3] + t * (std::sqrt(2.0) * c + std::sqrt(3.0) * s)}})) < 1e-14);
  }
  CHECK_THROWS_AS(instantiate_model("lee-twisted-t1t2",
                                    {{"a1", {0.5}}, {"a2", {std::sqrt(2.0)}}, {"certify_no_periodic", {1.0}}}),
                  Error);
  CHECK_NOTHROW(instantiate_model("lee-twisted-t1t2", {{"a1", {0.5}}, {"a2", {std::sqrt(2.0)}}}));
  CHECK_NOTHROW(instantiate_model("lee-twisted-t1t2", {{"certify_no_periodic", {1.0}}}));
  CHECK(rationally_dependent(1.5, 0.25));
  CHECK_FALSE(rationally_dependent(std::sqrt(2.0), std::sqrt(3.0)));
}

TEST_CASE("contact lift") {
  const FlatContactData contact;
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0, 1);
  auto one = [](const State&) { return 1.0; };
  auto zero = [](const State&) { return Covector::Zero(3); };
  const auto lee = instantiate_model("lee-twisted-t1t2");
  const auto lift = contact_lift(contact, one, zero, std::sqrt(2.0), std::sqrt(3.0));
  const auto geo = contact_lift(contact, one, zero, 0.0, 0.0);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const State x{{u(rng), u(rng), u(rng), u(rng)}};
    worst = std::max(worst, (lift.field(x) - lee.field(x)).cwiseAbs().maxCoeff());
    const Tangent g = geo.field(x);
    CHECK(std::abs(g[0] - std::cos(kTwoPi * x[2])) < 1e-14);
    CHECK(std::abs(g[1] - std::sin(kTwoPi * x[2])) < 1e-14);
    CHECK(std::abs(g[2]) < 1e-14);
    CHECK(std::abs(g[3]) < 1e-14);
  }
  CHECK(worst < 1e-14);

  // H = cos 2 pi v: check the contact identities on the lifted field by
  // differencing alpha_c directly.
  auto h = [](const State& y) { return std::cos(kTwoPi * y[2]); };
  auto dh = [](const State& y) { return Covector{{0.0, 0.0, -kTwoPi * std::sin(kTwoPi * y[2])}}; };
  const auto m = contact_lift(contact, h, dh, 0.0, 0.0);
  auto alpha = [](const State& y) {
    return Covector{{std::cos(kTwoPi * y[2]), std::sin(kTwoPi * y[2]), 0.0}};
  };
  double worst_id = 0.0;
  for (int i = 0; i < 20; ++i) {
    const State x{{u(rng), u(rng), u(rng), u(rng)}};
    const State y = x.head(3);
    const Tangent X = m.field(x).head(3);
    const Mat da = -fd_minus_exterior(alpha, y);  // d alpha, da(i,j) = d_i a_j - d_j a_i
    const Covector reeb{{std::cos(kTwoPi * y[2]), std::sin(kTwoPi * y[2]), 0.0}};
    const Covector dhv = fd_gradient(h, y);
    const Covector lhs = da.transpose() * X;
    const Covector rhs = dhv.dot(reeb) * alpha(y) - dhv;
    worst_id = std::max(worst_id, (lhs - rhs).cwiseAbs().maxCoeff());
    worst_id = std::max(worst_id, std::abs(alpha(y).dot(X) - h(y)));
  }
  CHECK(worst_id < 1e-6);
  FlatContactData curved;
  curved.flat = false;
  CHECK_THROWS_AS(contact_lift(curved, one, zero, 0.0, 0.0), Error);
}

TEST_CASE("map conformality is constant (Libermann)") {
  std::mt19937_64 rng(21);
  for (const auto& name : {"radial-contraction", "shear-contraction", "nonexact-linear"}) {
    const auto m = instantiate_model(name);
    REQUIRE(m.ratio_a.has_value());
    double lo = 1e300, hi = -1e300, worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const State x = random_state(m, rng);
      const auto r = conformality_ratio_estimate(m.map_jacobian(x), m.two_form(x), m.two_form(m.map(x)));
      lo = std::min(lo, r.ratio);
      hi = std::max(hi, r.ratio);
      worst = std::max(worst, r.residual);
      CHECK(std::abs(r.ratio - *m.ratio_a) < 1e-12);
    }
    INFO(name);
    CHECK(hi - lo < 1e-10);
    CHECK(worst < 1e-10);
  }
}

TEST_CASE("suspension frame on the cover") {
  const auto m = instantiate_model("anosov-cover");
  const double lm = (3.0 - std::sqrt(5.0)) / 2.0;
  const State x{{0.1, 0.2, 0.0, 1.0}};
  const State y = m.closed_form_flow(x, 2.0);
  CHECK(y[2] == doctest::Approx(2.0));
  CHECK(y[3] == doctest::Approx(std::pow(lm, 4.0)));
  const Tangent v = m.field(x);
  CHECK(v[3] == doctest::Approx(2.0 * std::log(lm)));
  // the form restricted to the zero section (s = 0 directions) is nonzero
  const Mat om = m.two_form(x).matrix;
  CHECK(std::abs(om.topLeftCorner(3, 3).cwiseAbs().maxCoeff()) > 0.1);
}

TEST_CASE("finite-difference Jacobian fallback") {
  const auto m = instantiate_model("mane", {{"Y", {0, 1, 0.2, 0.1}}});
  std::mt19937_64 rng(2);
  auto stripped = m;
  stripped.field_jacobian = nullptr;
  for (int i = 0; i < 10; ++i) {
    const State x = random_state(m, rng);
    CHECK((vector_field_jacobian(stripped, x) - m.field_jacobian(x)).cwiseAbs().maxCoeff() < 1e-6);
  }
}
