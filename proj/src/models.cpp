#include "confdyn/models.hpp"

#include "confdyn/error.hpp"
#include "trig_poly.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace confdyn {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

using detail::TrigField;
using detail::TrigPoly;

void reject_unknown_keys(std::string_view model, const ModelParams& params) {
  const auto keys = model_parameter_keys(model);
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [key, value] : params.values()) {
    if (allowed.count(key) == 0) {
      throw Error(ErrorCode::InvalidArgument,
                  "model '" + std::string(model) + "' has no parameter '" + key + "'");
    }
  }
}

double contraction_ratio(const ModelParams& params) {
  const double a = params.scalar("a", 0.5);
  if (!(a > 0.0 && a < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "conformality ratio a must lie in (0,1)");
  }
  return a;
}

double nonnegative_alpha(const ModelParams& params, double fallback) {
  const double alpha = params.scalar("alpha", fallback);
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw Error(ErrorCode::InvalidArgument, "alpha must be a finite number >= 0");
  }
  return alpha;
}

int torus_dimension(const ModelParams& params) {
  const double d = params.scalar("d", 1.0);
  if (d != 1.0 && d != 2.0) {
    throw Error(ErrorCode::InvalidArgument, "d must be 1 or 2");
  }
  return static_cast<int>(d);
}

Vec head(const State& x, int d) { return x.head(d); }
Vec tail(const State& x, int d) { return x.tail(d); }

ModelSpec radial_contraction(const ModelParams& params) {
  const double a = contraction_ratio(params);
  ModelSpec m;
  m.name = "radial-contraction";
  m.spec = CoordinateSpec({Axis::Angle, Axis::Line});
  m.kind = ModelKind::Map;
  m.ratio_a = a;
  m.map = [a](const State& x) { return State{{wrap_unit(x[0]), a * x[1]}}; };
  m.map_jacobian = [a](const State&) { return Mat{{1.0, 0.0}, {0.0, a}}; };
  m.inverse = [a](const State& x) { return State{{wrap_unit(x[0]), x[1] / a}}; };
  m.liouville = [](const State& x) { return Covector{{x[1], 0.0}}; };
  m.two_form = [](const State&) { return TwoForm::canonical(1); };
  m.flags.exact_symplectic = true;
  return m;
}

ModelSpec shear_contraction(const ModelParams& params) {
  const double a = contraction_ratio(params);
  ModelSpec m;
  m.name = "shear-contraction";
  m.spec = CoordinateSpec({Axis::Line, Axis::Line});
  m.kind = ModelKind::Map;
  m.ratio_a = a;
  m.map = [a](const State& x) { return State{{x[0] + 1.0, a * x[1]}}; };
  m.map_jacobian = [a](const State&) { return Mat{{1.0, 0.0}, {0.0, a}}; };
  m.inverse = [a](const State& x) { return State{{x[0] - 1.0, x[1] / a}}; };
  m.liouville = [](const State& x) { return Covector{{x[1], 0.0}}; };
  m.two_form = [](const State&) { return TwoForm::canonical(1); };
  m.flags.exact_symplectic = true;
  return m;
}

ModelSpec circle_linear(const ModelParams& params) {
  const double alpha = nonnegative_alpha(params, 1.0);
  ModelSpec m;
  m.name = "circle-linear";
  m.spec = CoordinateSpec({Axis::Angle, Axis::Line});
  m.alpha = alpha;
  if (!(alpha > 0.0 && alpha < kTwoPi)) {
    m.warnings.push_back("alpha outside (0, 2 pi): the saddle at (1/2, 0) changes type");
  }
  m.field = [alpha](const State& x) {
    const double s = kTwoPi * x[0];
    return Tangent{{std::sin(s), -(alpha + kTwoPi * std::cos(s)) * x[1]}};
  };
  m.field_jacobian = [alpha](const State& x) {
    const double s = kTwoPi * x[0];
    return Mat{{kTwoPi * std::cos(s), 0.0},
               {kTwoPi * kTwoPi * std::sin(s) * x[1], -(alpha + kTwoPi * std::cos(s))}};
  };
  m.hamiltonian = [](const State& x) { return x[1] * std::sin(kTwoPi * x[0]); };
  m.hamiltonian_gradient = [](const State& x) {
    const double s = kTwoPi * x[0];
    return Covector{{kTwoPi * x[1] * std::cos(s), std::sin(s)}};
  };
  m.liouville = [](const State& x) { return Covector{{x[1], 0.0}}; };
  m.two_form = [](const State&) { return TwoForm::canonical(1); };
  m.flags.exact_symplectic = true;
  return m;
}

ModelSpec circle_quadratic(const ModelParams& params) {
  const double alpha = nonnegative_alpha(params, 1.0);
  ModelSpec m;
  m.name = "circle-quadratic";
  m.spec = CoordinateSpec({Axis::Angle, Axis::Line});
  m.alpha = alpha;
  m.field = [alpha](const State& x) {
    const double s = kTwoPi * x[0];
    const double r = x[1];
    return Tangent{{2.0 * r * std::sin(s), -alpha * r - kTwoPi * r * r * std::cos(s)}};
  };
  m.field_jacobian = [alpha](const State& x) {
    const double s = kTwoPi * x[0];
    const double r = x[1];
    return Mat{{2.0 * kTwoPi * r * std::cos(s), 2.0 * std::sin(s)},
               {kTwoPi * kTwoPi * r * r * std::sin(s), -alpha - 2.0 * kTwoPi * r * std::cos(s)}};
  };
  m.hamiltonian = [](const State& x) { return x[1] * x[1] * std::sin(kTwoPi * x[0]); };
  m.hamiltonian_gradient = [](const State& x) {
    const double s = kTwoPi * x[0];
    return Covector{{kTwoPi * x[1] * x[1] * std::cos(s), 2.0 * x[1] * std::sin(s)}};
  };
  m.liouville = [](const State& x) { return Covector{{x[1], 0.0}}; };
  m.two_form = [](const State&) { return TwoForm::canonical(1); };
  m.flags.exact_symplectic = true;
  return m;
}

void cotangent_common(ModelSpec& m, int d) {
  m.spec = CoordinateSpec::cotangent_torus(d);
  m.liouville = [d](const State& x) {
    Covector l = Covector::Zero(2 * d);
    l.head(d) = tail(x, d);
    return l;
  };
  m.two_form = [d](const State&) { return TwoForm::canonical(d); };
  m.flags.exact_symplectic = true;
  m.flags.cotangent_splittable = true;
}

ModelSpec mane(const ModelParams& params) {
  const int d = torus_dimension(params);
  const double alpha = nonnegative_alpha(params, 0.5);
  const TrigField y = TrigField::from_flat(
      d, params.vector("Y0", std::vector<double>(static_cast<std::size_t>(d), 0.5)),
      params.vector("Y", {}));

  ModelSpec m;
  m.name = "mane";
  m.alpha = alpha;
  cotangent_common(m, d);

  // i_X omega = alpha lambda + dH with dH = (DY^T p, p + Y).
  auto make_field = [y, d](double rate) {
    return [y, d, rate](const State& x) {
      const Vec q = head(x, d);
      const Vec p = tail(x, d);
      Tangent out(2 * d);
      out.head(d) = p + y.value(q);
      out.tail(d) = -y.jacobian(q).transpose() * p - rate * p;
      return out;
    };
  };
  auto make_jacobian = [y, d](double rate) {
    return [y, d, rate](const State& x) {
      const Vec q = head(x, d);
      const Vec p = tail(x, d);
      const Mat dy = y.jacobian(q);
      Mat j = Mat::Zero(2 * d, 2 * d);
      j.topLeftCorner(d, d) = dy;
      j.topRightCorner(d, d) = Mat::Identity(d, d);
      j.bottomLeftCorner(d, d) = -y.weighted_hessian(q, p);
      j.bottomRightCorner(d, d) = -dy.transpose() - rate * Mat::Identity(d, d);
      return j;
    };
  };
  m.field = make_field(alpha);
  m.field_jacobian = make_jacobian(alpha);
  m.hamiltonian = [y, d](const State& x) {
    const Vec q = head(x, d);
    const Vec p = tail(x, d);
    const Vec yq = y.value(q);
    return 0.5 * (p + yq).squaredNorm() - 0.5 * yq.squaredNorm();
  };
  m.hamiltonian_gradient = [y, d](const State& x) {
    const Vec q = head(x, d);
    const Vec p = tail(x, d);
    Covector g(2 * d);
    g.head(d) = y.jacobian(q).transpose() * p;
    g.tail(d) = p + y.value(q);
    return g;
  };
  SplittingData split;
  split.d = d;
  split.separable = false;
  split.hamiltonian_field = make_field(0.0);
  split.hamiltonian_field_jacobian = make_jacobian(0.0);
  m.splitting = split;
  return m;
}

TrigPoly default_potential(int d) {
  if (d == 1) return TrigPoly::from_flat(1, 0.0, {1.0, 1.0, 0.0});
  // Coupled saddle at q = 0 with a two-dimensional unstable space.
  return TrigPoly::from_flat(2, 0.0,
                             {1.0, 0.0, 0.5, 0.0,   //
                              0.0, 1.0, 0.5, 0.0,   //
                              1.0, -1.0, 0.25, 0.0});
}

ModelSpec damped_mechanical(const ModelParams& params) {
  const int d = torus_dimension(params);
  const double alpha = nonnegative_alpha(params, 0.5);
  const TrigPoly v = params.has("V") ? TrigPoly::from_flat(d, params.scalar("V0", 0.0),
                                                           params.vector("V", {}))
                                     : default_potential(d);
  if (params.has("V0") && !params.has("V")) {
    throw Error(ErrorCode::InvalidArgument, "V0 given without V terms");
  }

  ModelSpec m;
  m.name = "damped-mechanical";
  m.alpha = alpha;
  cotangent_common(m, d);
  m.field = [v, d, alpha](const State& x) {
    Tangent out(2 * d);
    const Vec p = tail(x, d);
    out.head(d) = p;
    out.tail(d) = -v.gradient(head(x, d)) - alpha * p;
    return out;
  };
  m.field_jacobian = [v, d, alpha](const State& x) {
    Mat j = Mat::Zero(2 * d, 2 * d);
    j.topRightCorner(d, d) = Mat::Identity(d, d);
    j.bottomLeftCorner(d, d) = -v.hessian(head(x, d));
    j.bottomRightCorner(d, d) = -alpha * Mat::Identity(d, d);
    return j;
  };
  m.hamiltonian = [v, d](const State& x) {
    return 0.5 * tail(x, d).squaredNorm() + v.value(head(x, d));
  };
  m.hamiltonian_gradient = [v, d](const State& x) {
    Covector g(2 * d);
    g.head(d) = v.gradient(head(x, d));
    g.tail(d) = tail(x, d);
    return g;
  };
  SplittingData split;
  split.d = d;
  split.separable = true;
  split.potential_gradient = [v](const Vec& q) { return v.gradient(q); };
  split.potential_hessian = [v](const Vec& q) { return v.hessian(q); };
  split.hamiltonian_field = [v, d](const State& x) {
    Tangent out(2 * d);
    out.head(d) = tail(x, d);
    out.tail(d) = -v.gradient(head(x, d));
    return out;
  };
  split.hamiltonian_field_jacobian = [v, d](const State& x) {
    Mat j = Mat::Zero(2 * d, 2 * d);
    j.topRightCorner(d, d) = Mat::Identity(d, d);
    j.bottomLeftCorner(d, d) = -v.hessian(head(x, d));
    return j;
  };
  m.splitting = split;
  return m;
}

// Golden-mean data of the 6-dimensional non-exact example.
const double kGoldenP = (std::sqrt(5.0) - 1.0) / 2.0;
const double kContraction = (3.0 - std::sqrt(5.0)) / 2.0;
const double kConformalRScale = 9.0 - 4.0 * std::sqrt(5.0);
const double kNonexactRatio = (7.0 - 3.0 * std::sqrt(5.0)) / 2.0;

Mat nonexact_two_form() {
  const double p = kGoldenP;
  Mat e = Mat::Identity(6, 6);
  // Omega_1 = (dth2 - p dth1) ^ (dth4 - p dth3)
  const Covector u = e.col(1) - p * e.col(0);
  const Covector w = e.col(3) - p * e.col(2);
  Mat omega = TwoForm::wedge(u, w).matrix;
  // Omega_2 = sum dth_i ^ dr_i restricted to r2 = p r1, r4 = p r3
  omega += TwoForm::wedge(e.col(0) + p * e.col(1), e.col(4)).matrix;
  omega += TwoForm::wedge(e.col(2) + p * e.col(3), e.col(5)).matrix;
  return omega;
}

ModelSpec nonexact_linear(const ModelParams& params) {
  const double s = params.scalar("r_scale", kConformalRScale);
  if (!(s > 0.0 && s < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "r_scale must lie in (0,1)");
  }
  ModelSpec m;
  m.name = "nonexact-linear";
  m.spec = CoordinateSpec({Axis::Angle, Axis::Angle, Axis::Angle, Axis::Angle, Axis::Line,
                           Axis::Line});
  m.kind = ModelKind::Map;
  if (std::abs(s - kConformalRScale) <= 1e-15) {
    m.ratio_a = kNonexactRatio;
  } else {
    m.warnings.push_back("r_scale differs from 9 - 4 sqrt 5: the map is not conformal for Omega");
  }
  Mat jac = Mat::Zero(6, 6);
  jac.block(0, 0, 2, 2) << 2.0, 1.0, 1.0, 1.0;
  jac.block(2, 2, 2, 2) << 2.0, 1.0, 1.0, 1.0;
  jac(4, 4) = s;
  jac(5, 5) = s;
  Mat inv = Mat::Zero(6, 6);
  inv.block(0, 0, 2, 2) << 1.0, -1.0, -1.0, 2.0;
  inv.block(2, 2, 2, 2) << 1.0, -1.0, -1.0, 2.0;
  inv(4, 4) = 1.0 / s;
  inv(5, 5) = 1.0 / s;
  const CoordinateSpec spec = m.spec;
  m.map = [jac, spec](const State& x) { return spec.normalize(jac * x); };
  m.map_jacobian = [jac](const State&) { return jac; };
  m.inverse = [inv, spec](const State& x) { return spec.normalize(inv * x); };
  const Mat omega = nonexact_two_form();
  m.two_form = [omega](const State&) { return TwoForm{omega}; };
  return m;
}

ModelSpec t2_pair_common(std::string name) {
  ModelSpec m;
  m.name = std::move(name);
  m.spec = CoordinateSpec({Axis::Angle, Axis::Angle});
  m.lee = [](const State&) { return Covector{{-kTwoPi, 0.0}}; };
  m.two_form = [](const State&) { return TwoForm::canonical(1); };
  m.flags.conformal_pair = true;
  return m;
}

ModelSpec t2_pair_theta1(const ModelParams&) {
  ModelSpec m = t2_pair_common("t2-pair-theta1");
  const double amp = 2.0 * std::sqrt(2.0) * kPi;
  m.field = [amp](const State& x) {
    return Tangent{{0.0, -amp * std::sin(kTwoPi * (0.125 + x[0]))}};
  };
  m.field_jacobian = [amp](const State& x) {
    return Mat{{0.0, 0.0}, {-amp * kTwoPi * std::cos(kTwoPi * (0.125 + x[0])), 0.0}};
  };
  m.hamiltonian = [](const State& x) { return std::sin(kTwoPi * x[0]); };
  m.hamiltonian_gradient = [](const State& x) {
    return Covector{{kTwoPi * std::cos(kTwoPi * x[0]), 0.0}};
  };
  return m;
}

ModelSpec t2_pair_theta2(const ModelParams&) {
  ModelSpec m = t2_pair_common("t2-pair-theta2");
  m.field = [](const State& x) {
    const double s = kTwoPi * x[1];
    return Tangent{{kTwoPi * std::cos(s), -kTwoPi * std::sin(s)}};
  };
  m.field_jacobian = [](const State& x) {
    const double s = kTwoPi * x[1];
    return Mat{{0.0, -kTwoPi * kTwoPi * std::sin(s)}, {0.0, -kTwoPi * kTwoPi * std::cos(s)}};
  };
  m.hamiltonian = [](const State& x) { return std::sin(kTwoPi * x[1]); };
  m.hamiltonian_gradient = [](const State& x) {
    return Covector{{0.0, kTwoPi * std::cos(kTwoPi * x[1])}};
  };
  return m;
}

// Twisted symplectization of the flat unit tangent bundle: coordinates
// (x1, x2, v, theta), Omega = -d alpha_c + eta ^ alpha_c, eta = beta - dtheta.
Mat twisted_two_form(const FlatContactData& contact, const State& x, double b1, double b2) {
  const State y = x.head(3);
  Mat omega = Mat::Zero(4, 4);
  omega.topLeftCorner(3, 3) = -contact.contact_differential(y);
  Covector alpha4 = Covector::Zero(4);
  alpha4.head(3) = contact.contact_form(y);
  const Covector eta{{b1, b2, 0.0, -1.0}};
  omega += TwoForm::wedge(eta, alpha4).matrix;
  return omega;
}

void twisted_common(ModelSpec& m, const FlatContactData& contact, double b1, double b2) {
  m.spec = CoordinateSpec({Axis::Angle, Axis::Angle, Axis::Angle, Axis::Angle});
  m.lee = [b1, b2](const State&) { return Covector{{b1, b2, 0.0, -1.0}}; };
  m.two_form = [contact, b1, b2](const State& x) {
    return TwoForm{twisted_two_form(contact, x, b1, b2)};
  };
  m.flags.conformal_pair = true;
}

ModelSpec lee_twisted(const ModelParams& params) {
  const double a1 = params.scalar("a1", std::sqrt(2.0));
  const double a2 = params.scalar("a2", std::sqrt(3.0));
  if (params.scalar("certify_no_periodic", 0.0) != 0.0 && rationally_dependent(a1, a2)) {
    throw Error(ErrorCode::InvalidArgument,
                "(1, a1, a2) are rationally dependent; no-periodic-orbit certificate unavailable");
  }
  ModelSpec m;
  m.name = "lee-twisted-t1t2";
  twisted_common(m, FlatContactData{}, a1, a2);
  m.field = [a1, a2](const State& x) {
    const double c = std::cos(kTwoPi * x[2]);
    const double s = std::sin(kTwoPi * x[2]);
    return Tangent{{c, s, 0.0, a1 * c + a2 * s}};
  };
  m.field_jacobian = [a1, a2](const State& x) {
    const double c = std::cos(kTwoPi * x[2]);
    const double s = std::sin(kTwoPi * x[2]);
    Mat j = Mat::Zero(4, 4);
    j(0, 2) = -kTwoPi * s;
    j(1, 2) = kTwoPi * c;
    j(3, 2) = kTwoPi * (-a1 * s + a2 * c);
    return j;
  };
  m.closed_form_flow = [a1, a2](const State& x, double t) {
    const double c = std::cos(kTwoPi * x[2]);
    const double s = std::sin(kTwoPi * x[2]);
    return State{{wrap_unit(x[0] + t * c), wrap_unit(x[1] + t * s), wrap_unit(x[2]),
                  wrap_unit(x[3] + t * (a1 * c + a2 * s))}};
  };
  m.hamiltonian = [](const State&) { return 1.0; };
  m.hamiltonian_gradient = [](const State&) { return Covector::Zero(4); };
  return m;
}

ModelSpec anosov_cover(const ModelParams&) {
  const double lambda_minus = kContraction;
  // Columns: eigenvectors of [[2,1],[1,1]] for lambda_- and lambda_+.
  Mat basis(2, 2);
  basis.col(0) = Vec{{1.0, -1.0 / kGoldenP}}.normalized();
  basis.col(1) = Vec{{1.0, kGoldenP}}.normalized();
  const Mat frame = basis.inverse();  // rows: dq1 (E-), dq2 (E+)

  ModelSpec m;
  m.name = "anosov-cover";
  m.spec = CoordinateSpec({Axis::Angle, Axis::Angle, Axis::Line, Axis::Line});
  const double rate = 2.0 * std::log(lambda_minus);
  m.field = [rate](const State& x) { return Tangent{{0.0, 0.0, 1.0, rate * x[3]}}; };
  m.field_jacobian = [rate](const State&) {
    Mat j = Mat::Zero(4, 4);
    j(3, 3) = rate;
    return j;
  };
  m.closed_form_flow = [lambda_minus](const State& x, double t) {
    return State{{wrap_unit(x[0]), wrap_unit(x[1]), x[2] + t,
                  std::pow(lambda_minus, 2.0 * t) * x[3]}};
  };
  Covector dq1 = Covector::Zero(4);
  Covector dq2 = Covector::Zero(4);
  dq1.head(2) = frame.row(0).transpose();
  dq2.head(2) = frame.row(1).transpose();
  const Covector dz{{0.0, 0.0, 1.0, 0.0}};
  const Covector ds{{0.0, 0.0, 0.0, 1.0}};
  const Mat omega = TwoForm::wedge(dq1, dz).matrix + TwoForm::wedge(dq2, ds).matrix;
  m.two_form = [omega](const State&) { return TwoForm{omega}; };
  return m;
}

}  // namespace

ModelParams& ModelParams::set(const std::string& key, double v) {
  values_[key] = {v};
  return *this;
}

ModelParams& ModelParams::set(const std::string& key, std::vector<double> v) {
  values_[key] = std::move(v);
  return *this;
}

double ModelParams::scalar(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second.size() != 1) {
    throw Error(ErrorCode::InvalidArgument, "parameter '" + key + "' must be a scalar");
  }
  return it->second.front();
}

double ModelParams::scalar(const std::string& key) const {
  if (!has(key)) throw Error(ErrorCode::InvalidArgument, "missing parameter '" + key + "'");
  return scalar(key, 0.0);
}

std::vector<double> ModelParams::vector(const std::string& key,
                                        std::vector<double> fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

const std::vector<std::string>& registered_models() {
  static const std::vector<std::string> names = {
      "radial-contraction", "shear-contraction", "circle-linear",    "circle-quadratic",
      "mane",               "damped-mechanical", "nonexact-linear",  "t2-pair-theta1",
      "t2-pair-theta2",     "lee-twisted-t1t2",  "anosov-cover"};
  return names;
}

std::vector<std::string> model_parameter_keys(std::string_view name) {
  if (name == "radial-contraction" || name == "shear-contraction") return {"a"};
  if (name == "circle-linear" || name == "circle-quadratic") return {"alpha"};
  if (name == "mane") return {"d", "alpha", "Y0", "Y"};
  if (name == "damped-mechanical") return {"d", "alpha", "V0", "V"};
  if (name == "nonexact-linear") return {"r_scale"};
  if (name == "t2-pair-theta1" || name == "t2-pair-theta2" || name == "anosov-cover") return {};
  if (name == "lee-twisted-t1t2") return {"a1", "a2", "certify_no_periodic"};
  throw Error(ErrorCode::UnknownModel, std::string(name));
}

ModelSpec instantiate_model(std::string_view name, const ModelParams& params) {
  reject_unknown_keys(name, params);
  ModelSpec m;
  if (name == "radial-contraction") m = radial_contraction(params);
  else if (name == "shear-contraction") m = shear_contraction(params);
  else if (name == "circle-linear") m = circle_linear(params);
  else if (name == "circle-quadratic") m = circle_quadratic(params);
  else if (name == "mane") m = mane(params);
  else if (name == "damped-mechanical") m = damped_mechanical(params);
  else if (name == "nonexact-linear") m = nonexact_linear(params);
  else if (name == "t2-pair-theta1") m = t2_pair_theta1(params);
  else if (name == "t2-pair-theta2") m = t2_pair_theta2(params);
  else if (name == "lee-twisted-t1t2") m = lee_twisted(params);
  else if (name == "anosov-cover") m = anosov_cover(params);
  else throw Error(ErrorCode::UnknownModel, std::string(name));
  m.params = params;
  return m;
}

Tangent eval_vector_field(const ModelSpec& m, const State& x) {
  if (!m.is_flow() || !m.field) {
    throw Error(ErrorCode::NotApplicable, "'" + m.name + "' is a map, not a flow");
  }
  m.spec.check_state(x);
  return m.field(x);
}

Observables eval_observables(const ModelSpec& m, const State& x) {
  m.spec.check_state(x);
  Observables obs;
  if (m.hamiltonian) obs.hamiltonian = m.hamiltonian(x);
  if (m.liouville) obs.liouville = m.liouville(x);
  if (m.lee) obs.lee = m.lee(x);
  obs.two_form = m.two_form(x);
  return obs;
}

Mat finite_difference_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x) {
  const double step = std::max(1e-6, 1e-6 * x.norm());
  const Eigen::Index n = x.size();
  Mat j(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Vec xp = x;
    Vec xm = x;
    xp[i] += step;
    xm[i] -= step;
    const Vec col = (f(xp) - f(xm)) / (2.0 * step);
    if (i == 0) j.resize(col.size(), n);
    j.col(i) = col;
  }
  return j;
}

Mat vector_field_jacobian(const ModelSpec& m, const State& x) {
  if (!m.is_flow()) throw Error(ErrorCode::NotApplicable, "'" + m.name + "' is a map");
  if (m.field_jacobian) return m.field_jacobian(x);
  return finite_difference_jacobian(m.field, x);
}

Covector FlatContactData::contact_form(const State& y) const {
  return Covector{{std::cos(kTwoPi * y[2]), std::sin(kTwoPi * y[2]), 0.0}};
}

Mat FlatContactData::contact_differential(const State& y) const {
  const double c = std::cos(kTwoPi * y[2]);
  const double s = std::sin(kTwoPi * y[2]);
  // d alpha_c = -2 pi s dv^dx1 + 2 pi c dv^dx2
  Mat m = Mat::Zero(3, 3);
  m(2, 0) = -kTwoPi * s;
  m(0, 2) = kTwoPi * s;
  m(2, 1) = kTwoPi * c;
  m(1, 2) = -kTwoPi * c;
  return m;
}

Tangent FlatContactData::reeb(const State& y) const {
  return Tangent{{std::cos(kTwoPi * y[2]), std::sin(kTwoPi * y[2]), 0.0}};
}

Tangent contact_vector_field(const FlatContactData& contact, const State& y, double h,
                             const Covector& dh) {
  if (!contact.flat) throw Error(ErrorCode::Unsupported, "only flat contact data is supported");
  const Covector alpha_c = contact.contact_form(y);
  const Mat dalpha = contact.contact_differential(y);
  const double dh_reeb = dh.dot(contact.reeb(y));
  // Stack alpha(X) = H over i_X d alpha = (dH.R) alpha - dH; the system is
  // consistent with full column rank.
  Mat a(4, 3);
  a.row(0) = alpha_c.transpose();
  a.bottomRows(3) = dalpha.transpose();
  Vec rhs(4);
  rhs[0] = h;
  rhs.tail(3) = dh_reeb * alpha_c - dh;
  return a.colPivHouseholderQr().solve(rhs);
}

ModelSpec contact_lift(const FlatContactData& contact, ScalarFunction h, GradientFunction dh,
                       double beta1, double beta2) {
  if (!contact.flat) throw Error(ErrorCode::Unsupported, "only flat contact data is supported");
  ModelSpec m;
  m.name = "contact-lift";
  twisted_common(m, contact, beta1, beta2);
  m.field = [contact, h, dh, beta1, beta2](const State& x) {
    const State y = x.head(3);
    const Covector g = dh(y);
    const Tangent xc = contact_vector_field(contact, y, h(y), g);
    Tangent out(4);
    out.head(3) = xc;
    out[3] = beta1 * xc[0] + beta2 * xc[1] - g.dot(contact.reeb(y));
    return out;
  };
  m.hamiltonian = [h](const State& x) { return h(State(x.head(3))); };
  m.hamiltonian_gradient = [dh](const State& x) {
    Covector g = Covector::Zero(4);
    g.head(3) = dh(State(x.head(3)));
    return g;
  };
  m.params.set("beta1", beta1).set("beta2", beta2);
  return m;
}

bool rationally_dependent(double a1, double a2, int bound, double tol) {
  for (int n1 = -bound; n1 <= bound; ++n1) {
    for (int n2 = -bound; n2 <= bound; ++n2) {
      if (n1 == 0 && n2 == 0) continue;
      const double v = n1 * a1 + n2 * a2;
      if (std::abs(v - std::round(v)) < tol) return true;
    }
  }
  return false;
}

}  // namespace confdyn
