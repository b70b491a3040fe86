#pragma once

#include "confdyn/geometry.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace confdyn {

enum class ModelKind { Map, Flow };

/// Named real or vector parameters. Scalars are stored as length-1 vectors.
class ModelParams {
 public:
  ModelParams() = default;
  ModelParams(std::initializer_list<std::pair<const std::string, std::vector<double>>> init)
      : values_(init) {}

  ModelParams& set(const std::string& key, double v);
  ModelParams& set(const std::string& key, std::vector<double> v);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  double scalar(const std::string& key, double fallback) const;
  double scalar(const std::string& key) const;
  std::vector<double> vector(const std::string& key, std::vector<double> fallback) const;

  const std::map<std::string, std::vector<double>>& values() const { return values_; }

 private:
  std::map<std::string, std::vector<double>> values_;
};

struct StructureFlags {
  bool exact_symplectic = false;
  bool cotangent_splittable = false;
  bool conformal_pair = false;
};

/// Extra data the conformal splitting integrator needs on T^d x R^d.
struct SplittingData {
  int d = 1;
  /// Kinetic + potential: Stormer-Verlet on grad V. Otherwise implicit midpoint
  /// on the alpha = 0 Hamiltonian field.
  bool separable = false;
  std::function<Vec(const Vec& q)> potential_gradient;
  std::function<Mat(const Vec& q)> potential_hessian;
  std::function<Tangent(const State&)> hamiltonian_field;
  std::function<Mat(const State&)> hamiltonian_field_jacobian;
};

/// One dynamical system with its geometric data. Immutable once built; all
/// evaluators are pure.
///
/// Sign conventions: exact-symplectic conformally Hamiltonian flows satisfy
/// i_X omega = alpha*lambda + dH, hence phi_t^* omega = exp(-alpha t) omega.
/// Conformal-pair flows satisfy i_X Omega = dH - H eta and phi_t^* Omega =
/// exp(r_t) Omega, r_t being the integral of eta(X) along the orbit.
struct ModelSpec {
  std::string name;
  CoordinateSpec spec{std::vector<Axis>{Axis::Angle, Axis::Line}};
  ModelKind kind = ModelKind::Flow;
  double alpha = 0.0;
  std::optional<double> ratio_a;
  ModelParams params;
  StructureFlags flags;
  std::vector<std::string> warnings;

  // flows
  std::function<Tangent(const State&)> field;
  std::function<Mat(const State&)> field_jacobian;
  /// Closed-form phi_t, when the model has one.
  std::function<State(const State&, double)> closed_form_flow;

  // maps
  std::function<State(const State&)> map;
  std::function<Mat(const State&)> map_jacobian;
  std::function<State(const State&)> inverse;

  // observables
  std::function<double(const State&)> hamiltonian;
  std::function<Covector(const State&)> hamiltonian_gradient;
  std::function<Covector(const State&)> liouville;
  std::function<Covector(const State&)> lee;
  std::function<TwoForm(const State&)> two_form;

  std::optional<SplittingData> splitting;

  int dim() const { return spec.dim(); }
  bool is_flow() const { return kind == ModelKind::Flow; }
  bool has_hamiltonian() const { return static_cast<bool>(hamiltonian); }
  bool has_lee() const { return static_cast<bool>(lee); }
};

struct Observables {
  std::optional<double> hamiltonian;
  std::optional<Covector> liouville;
  std::optional<Covector> lee;
  TwoForm two_form;
};

/// Names accepted by instantiate_model, in registry order.
const std::vector<std::string>& registered_models();

/// Parameter keys a registered model accepts; unknown keys are rejected.
std::vector<std::string> model_parameter_keys(std::string_view name);

/// Builds and validates a registered model.
///
///   radial-contraction   map  T x R       f(theta, r) = (theta, a r)
///   shear-contraction    map  R^2         f(x, y) = (x + 1, a y)
///   circle-linear        flow T x R       H = r sin 2 pi theta, lambda = r dtheta
///   circle-quadratic     flow T x R       H = r^2 sin 2 pi theta (not complete)
///   mane                 flow T^d x R^d   H = |p + Y|^2/2 - |Y|^2/2
///   damped-mechanical    flow T^d x R^d   H = |p|^2/2 + V(q)
///   nonexact-linear      map  T^4 x R^2   (A + A) on angles, r scaled
///   t2-pair-theta1/2     flow T^2         conformal pair (dth1^dth2, -2 pi dth1)
///   lee-twisted-t1t2     flow T^2 x T x T twisted Lee flow of the unit tangent bundle
///   anosov-cover         flow T^2 x R x R suspension frame on the cover
///
/// Trigonometric polynomials (V, Y) are given as flattened term lists; see
/// README for the layout.
ModelSpec instantiate_model(std::string_view name, const ModelParams& params = {});

/// Vector field of a flow model. Throws NotApplicable for maps.
Tangent eval_vector_field(const ModelSpec& m, const State& x);

Observables eval_observables(const ModelSpec& m, const State& x);

/// Analytic Jacobian of X if present, else central differences with step
/// max(1e-6, 1e-6 |x|).
Mat vector_field_jacobian(const ModelSpec& m, const State& x);
Mat finite_difference_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x);

/// Flat contact data on the unit tangent bundle of T^2, coordinates (x1, x2, v)
/// with the unit vector (cos 2 pi v, sin 2 pi v).
struct FlatContactData {
  Covector contact_form(const State& y) const;   // alpha_c at y, length 3
  Mat contact_differential(const State& y) const;  // d alpha_c, 3x3 antisymmetric
  Tangent reeb(const State& y) const;
  bool flat = true;
};

using ScalarFunction = std::function<double(const State&)>;
using GradientFunction = std::function<Covector(const State&)>;

/// Contact vector field X of H on (Y, alpha_c): alpha_c(X) = H and
/// i_X d alpha_c = (dH.R) alpha_c - dH. Arguments are 3-dimensional.
Tangent contact_vector_field(const FlatContactData& contact, const State& y, double h,
                             const Covector& dh);

/// Conformally Hamiltonian flow of H(x, v) on the beta-twisted symplectization
/// (coordinates x1, x2, v, theta), assembled as X + (beta(X) - dH.R) d/dtheta.
/// With H = 1 this is the Lee field of lee-twisted-t1t2.
ModelSpec contact_lift(const FlatContactData& contact, ScalarFunction h, GradientFunction dh,
                       double beta1, double beta2);

/// Integer relation search |n0 + n1 a1 + n2 a2| < tol with |n1|,|n2| <= bound.
bool rationally_dependent(double a1, double a2, int bound = 200, double tol = 1e-10);

}  // namespace confdyn
