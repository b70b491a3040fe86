#include "confdyn/geometry.hpp"

#include "confdyn/error.hpp"

#include <cmath>
#include <string>

namespace confdyn {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "dimension mismatch";
    case ErrorCode::DegenerateForm: return "degenerate form";
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::UnknownModel: return "unknown model";
    case ErrorCode::NotApplicable: return "not applicable";
    case ErrorCode::PoisonedState: return "poisoned state";
    case ErrorCode::BlowUp: return "blow-up";
    case ErrorCode::NonConvergence: return "non-convergence";
    case ErrorCode::InverseUnavailable: return "inverse unavailable";
    case ErrorCode::OpenLoop: return "open loop";
    case ErrorCode::TangentialCrossing: return "tangential crossing";
    case ErrorCode::NoCrossing: return "no crossing";
    case ErrorCode::NonHyperbolic: return "non-hyperbolic";
    case ErrorCode::Unsupported: return "unsupported";
    case ErrorCode::Config: return "config";
  }
  return "error";
}

namespace {

void require_same(long a, long b, const char* what) {
  if (a != b) {
    throw Error(ErrorCode::DimensionMismatch,
                std::string(what) + ": " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

}  // namespace

double wrap_unit(double v) {
  double w = v - std::floor(v);
  // v slightly below an integer can round up to exactly 1.
  return w >= 1.0 ? 0.0 : w;
}

CoordinateSpec::CoordinateSpec(std::vector<Axis> axes) : axes_(std::move(axes)) {
  if (axes_.size() < 2 || axes_.size() % 2 != 0) {
    throw Error(ErrorCode::InvalidArgument,
                "coordinate dimension must be even and >= 2, got " + std::to_string(axes_.size()));
  }
}

CoordinateSpec CoordinateSpec::cotangent_torus(int d) {
  std::vector<Axis> axes(static_cast<std::size_t>(2 * d), Axis::Line);
  for (int i = 0; i < d; ++i) axes[static_cast<std::size_t>(i)] = Axis::Angle;
  return CoordinateSpec(std::move(axes));
}

void CoordinateSpec::check_state(const Vec& x) const {
  require_same(x.size(), dim(), "state length");
}

State CoordinateSpec::normalize(const State& x) const {
  check_state(x);
  State out = x;
  for (int i = 0; i < dim(); ++i) {
    if (is_angle(i)) out[i] = wrap_unit(out[i]);
  }
  return out;
}

Tangent CoordinateSpec::wrapped_difference(const State& x, const State& y) const {
  check_state(x);
  check_state(y);
  Tangent d = y - x;
  for (int i = 0; i < dim(); ++i) {
    if (is_angle(i)) d[i] -= std::floor(d[i] + 0.5);
  }
  return d;
}

double CoordinateSpec::line_norm(const Vec& x) const {
  double s = 0.0;
  for (int i = 0; i < dim(); ++i) {
    if (!is_angle(i)) s += x[i] * x[i];
  }
  return std::sqrt(s);
}

double TwoForm::operator()(const Tangent& u, const Tangent& v) const {
  require_same(u.size(), matrix.rows(), "two-form argument");
  require_same(v.size(), matrix.cols(), "two-form argument");
  // Summing over i < j keeps omega(u, v) = -omega(v, u) bit for bit.
  double s = 0.0;
  for (Eigen::Index i = 0; i < matrix.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < matrix.cols(); ++j) {
      const double c = 0.5 * (matrix(i, j) - matrix(j, i));
      s += c * (u[i] * v[j] - u[j] * v[i]);
    }
  }
  return s;
}

Covector TwoForm::interior(const Tangent& x) const {
  require_same(x.size(), matrix.rows(), "interior product");
  return matrix.transpose() * x;
}

void TwoForm::validate() const {
  require_same(matrix.rows(), matrix.cols(), "two-form matrix");
  const double scale = std::max(1.0, matrix.cwiseAbs().maxCoeff());
  if ((matrix + matrix.transpose()).cwiseAbs().maxCoeff() > 1e-14 * scale) {
    throw Error(ErrorCode::DegenerateForm, "two-form matrix is not antisymmetric");
  }
  if (!(std::abs(matrix.determinant()) > 0.0)) {
    throw Error(ErrorCode::DegenerateForm, "two-form is degenerate");
  }
}

TwoForm TwoForm::canonical(int d) {
  Mat m = Mat::Zero(2 * d, 2 * d);
  for (int i = 0; i < d; ++i) {
    m(i, d + i) = 1.0;
    m(d + i, i) = -1.0;
  }
  return TwoForm{m};
}

TwoForm TwoForm::wedge(const Covector& a, const Covector& b) {
  require_same(a.size(), b.size(), "wedge");
  return TwoForm{a * b.transpose() - b * a.transpose()};
}

double eval_two_form(const TwoForm& omega, const Tangent& u, const Tangent& v) {
  return omega(u, v);
}

RatioEstimate conformality_ratio_estimate(const Mat& jacobian, const TwoForm& at_x,
                                          const TwoForm& at_fx) {
  require_same(jacobian.rows(), at_fx.matrix.rows(), "jacobian rows");
  require_same(jacobian.cols(), at_x.matrix.rows(), "jacobian cols");
  const double norm2 = at_x.matrix.squaredNorm();
  if (!(norm2 > 0.0)) {
    throw Error(ErrorCode::DegenerateForm, "reference two-form is zero");
  }
  const Mat pulled = jacobian.transpose() * at_fx.matrix * jacobian;
  RatioEstimate est;
  est.ratio = (pulled.array() * at_x.matrix.array()).sum() / norm2;
  est.residual = (pulled - est.ratio * at_x.matrix).norm() / std::sqrt(norm2);
  return est;
}

double pullback_residual(const Mat& jacobian, const TwoForm& at_x, const TwoForm& at_fx,
                         double expected) {
  require_same(jacobian.rows(), at_fx.matrix.rows(), "jacobian rows");
  require_same(jacobian.cols(), at_x.matrix.rows(), "jacobian cols");
  if (!(expected > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "expected conformal factor must be positive");
  }
  const Mat pulled = jacobian.transpose() * at_fx.matrix * jacobian;
  return (pulled - expected * at_x.matrix).cwiseAbs().maxCoeff();
}

double loop_integral(const CoordinateSpec& spec, const CovectorField& form,
                     std::span<const State> loop) {
  if (loop.size() < 16) {
    throw Error(ErrorCode::InvalidArgument, "loop needs at least 16 samples");
  }
  for (const auto& x : loop) spec.check_state(x);
  if (torus_distance(spec, loop.front(), loop.back()) > 1e-9) {
    throw Error(ErrorCode::OpenLoop, "first and last loop samples differ");
  }
  double total = 0.0;
  Covector prev = form(loop[0]);
  for (std::size_t k = 0; k + 1 < loop.size(); ++k) {
    const Covector next = form(loop[k + 1]);
    const Tangent step = spec.wrapped_difference(loop[k], loop[k + 1]);
    total += 0.5 * (prev + next).dot(step);
    prev = next;
  }
  return total;
}

double torus_distance(const CoordinateSpec& spec, const State& x, const State& y) {
  return spec.wrapped_difference(x, y).norm();
}

}  // namespace confdyn
