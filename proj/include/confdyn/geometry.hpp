#pragma once

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <vector>

namespace confdyn {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Chart-level aliases. A State keeps its Angle components in [0,1) once it
// leaves the integrator; Tangent and Covector are plain component vectors.
using State = Vec;
using Tangent = Vec;
using Covector = Vec;

enum class Axis { Angle, Line };

/// Product of circles (period 1) and lines. Every phase space used here is a
/// global chart of this kind, so no atlas machinery is needed.
class CoordinateSpec {
 public:
  explicit CoordinateSpec(std::vector<Axis> axes);

  /// T^d x R^d with (q, p) ordering, the cotangent bundle of the flat torus.
  static CoordinateSpec cotangent_torus(int d);

  int dim() const { return static_cast<int>(axes_.size()); }
  Axis axis(int i) const { return axes_.at(static_cast<std::size_t>(i)); }
  bool is_angle(int i) const { return axis(i) == Axis::Angle; }
  const std::vector<Axis>& axes() const { return axes_; }

  /// Wraps Angle components into [0,1).
  State normalize(const State& x) const;

  /// y - x with Angle components reduced to [-1/2, 1/2).
  Tangent wrapped_difference(const State& x, const State& y) const;

  /// Euclidean norm of the Line components only (blow-up monitor).
  double line_norm(const Vec& x) const;

  void check_state(const Vec& x) const;

  bool operator==(const CoordinateSpec&) const = default;

 private:
  std::vector<Axis> axes_;
};

double wrap_unit(double v);

/// Antisymmetric matrix M with omega(u, v) = u^T M v.
struct TwoForm {
  Mat matrix;

  double operator()(const Tangent& u, const Tangent& v) const;

  /// i_X omega = omega(X, .) as a covector, i.e. M^T X.
  Covector interior(const Tangent& x) const;

  int dim() const { return static_cast<int>(matrix.rows()); }

  /// Throws if the matrix is not square, not antisymmetric to 1e-14 (relative)
  /// or singular.
  void validate() const;

  static TwoForm canonical(int d);
  static TwoForm wedge(const Covector& a, const Covector& b);
};

double eval_two_form(const TwoForm& omega, const Tangent& u, const Tangent& v);

struct RatioEstimate {
  double ratio = 0.0;
  double residual = 0.0;
};

/// Least-squares scalar a minimising ||J^T Omega_fx J - a Omega_x||_F; the
/// residual is that minimum relative to ||Omega_x||_F.
RatioEstimate conformality_ratio_estimate(const Mat& jacobian, const TwoForm& at_x,
                                          const TwoForm& at_fx);

/// ||J^T Omega_fx J - expected * Omega_x||_inf (max absolute entry).
double pullback_residual(const Mat& jacobian, const TwoForm& at_x, const TwoForm& at_fx,
                         double expected);

using CovectorField = std::function<Covector(const State&)>;

/// Composite trapezoid estimate of the integral of a 1-form along a closed
/// polygonal loop. The last sample must coincide with the first (up to Angle
/// wrap). Adjacent samples are unwrapped assuming they differ by < 1/2 on each
/// Angle axis.
double loop_integral(const CoordinateSpec& spec, const CovectorField& form,
                     std::span<const State> loop);

/// Euclidean distance with per-axis wrap on Angle axes.
double torus_distance(const CoordinateSpec& spec, const State& x, const State& y);

}  // namespace confdyn
