#pragma once

#include "confdyn/geometry.hpp"
#include "confdyn/models.hpp"

#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <vector>

namespace confdyn {

enum class Method { ReferenceAdaptive, ConformalSplitting, FixedRK4 };

struct IntegratorConfig {
  Method method = Method::ReferenceAdaptive;
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  /// Step size of the fixed-step methods.
  double h = 0.01;
  /// Euclidean norm of the Line components that counts as escape to infinity.
  double blowup_threshold = 1e8;
  long max_steps = 50'000'000;

  void validate() const;

  static IntegratorConfig reference(double rel_tol = 1e-10, double abs_tol = 1e-12);
  static IntegratorConfig splitting(double h);
  static IntegratorConfig rk4(double h);
};

enum class TrajectoryStatus { Completed, BlowUp, MaxStepsExceeded };

const char* to_string(TrajectoryStatus status);
const char* to_string(Method method);

struct Trajectory {
  std::vector<double> times;
  std::vector<State> states;
  /// Tangent flow D phi_t relative to the first sample, when requested.
  std::vector<Mat> frames;
  /// Integral of eta(X) from the first sample, when the model has a Lee form.
  std::vector<double> r_accum;
  TrajectoryStatus status = TrajectoryStatus::Completed;
  double t_escape = std::numeric_limits<double>::quiet_NaN();
  bool backward = false;

  std::size_t size() const { return times.size(); }
  bool has_frames() const { return !frames.empty(); }
  bool has_rotation() const { return !r_accum.empty(); }
};

/// Evenly spaced sample times t0, ..., t1 (inclusive), n >= 2.
std::vector<double> sample_times(double t0, double t1, std::size_t n);

/// Stateful integrator over the augmented system (state, optional frame,
/// optional rotation integral). Internally coordinates are not wrapped, so the
/// field stays smooth across Angle boundaries. Used directly by the
/// diagnostics that need piecewise integration (Lyapunov, sections).
class FlowIntegrator {
 public:
  FlowIntegrator(const ModelSpec& model, const IntegratorConfig& cfg, bool with_frames,
                 bool with_rotation);
  ~FlowIntegrator();
  FlowIntegrator(FlowIntegrator&&) noexcept;
  FlowIntegrator& operator=(FlowIntegrator&&) noexcept;

  /// frame defaults to the identity.
  void reset(double t0, const State& x0, const Mat* frame = nullptr, double rotation = 0.0);

  /// Integrates up to t (either direction). On escape the integrator stops at
  /// the escape time and returns BlowUp.
  TrajectoryStatus advance_to(double t);

  /// Same, but calls `on_step(t_prev, t_new)` after every accepted step; a
  /// true return stops integration at t_new.
  TrajectoryStatus advance_to(double t, const std::function<bool(double, double)>& on_step);

  /// One accepted step, never past t_limit.
  TrajectoryStatus step(double t_limit);

  double time() const;
  /// Unwrapped state.
  State raw_state() const;
  Mat frame() const;
  double rotation() const;
  double escape_time() const;
  long steps() const;

  /// Augmented state at t_prev + tau, recomputed with a single step of the
  /// method from the last accepted step's start (|tau| <= last step).
  Vec state_after_prev(double tau) const;
  /// Cubic Hermite interpolant over the last accepted step (cheap guess).
  Vec dense_output(double tau) const;
  double previous_time() const;
  Vec previous_augmented() const;
  Vec augmented() const;

  int dim() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Trajectory sampled at `times` (times[0] is the start). Backward time
/// (decreasing times) is allowed and flagged.
Trajectory integrate_flow(const ModelSpec& m, const State& x0, std::span<const double> times,
                          const IntegratorConfig& cfg = {});
Trajectory integrate_flow(const ModelSpec& m, const State& x0, double t0, double t1,
                          std::size_t samples, const IntegratorConfig& cfg = {});

/// As integrate_flow with the tangent flow integrated jointly. Models without
/// an analytic Jacobian need the reference method at tolerance <= 1e-8.
Trajectory integrate_variational(const ModelSpec& m, const State& x0,
                                 std::span<const double> times, const IntegratorConfig& cfg = {});
Trajectory integrate_variational(const ModelSpec& m, const State& x0, double t0, double t1,
                                 std::size_t samples, const IntegratorConfig& cfg = {});

struct SplitStep {
  State state;
  Mat jacobian;
};

/// Strang step exp(-alpha h/2) on p, one symplectic step of H (Stormer-Verlet
/// for kinetic + potential, implicit midpoint otherwise), exp(-alpha h/2) on p.
/// The Jacobian satisfies J^T Omega J = exp(-alpha h) Omega to rounding.
SplitStep conformal_splitting_step(const ModelSpec& m, const State& x, double h);

/// n + 1 states of the orbit x0, f(x0), ..., f^n(x0); n < 0 iterates the
/// inverse. Frames are products of Df along the orbit.
Trajectory iterate_map(const ModelSpec& m, const State& x0, long n, bool with_frames = false);

/// The time-t map of a flow as a map model (Jacobian from the variational
/// equations, inverse by integrating backward). Escapes raise BlowUpError.
ModelSpec time_t_map(const ModelSpec& flow, double t, const IntegratorConfig& cfg = {});

/// Hypersurface g(x) = normal.x - offset = 0. A section along a single Angle
/// axis is periodic: every level offset + k counts.
struct SectionSpec {
  Vec normal;
  double offset = 0.0;
  /// +1, -1, or 0 for both directions.
  int direction = 1;

  static SectionSpec on_axis(int dim, int axis, double offset, int direction = 1);
};

struct PoincareResult {
  std::vector<State> crossings;
  /// Jacobian of each return (previous crossing, or x0, to this one),
  /// projected onto the section along the flow.
  std::vector<Mat> return_jacobians;
  /// Unprojected D phi over the same interval.
  std::vector<Mat> flow_jacobians;
  std::vector<double> return_times;
  std::vector<double> rotations;
};

PoincareResult poincare_return(const ModelSpec& m, const SectionSpec& sec, const State& x0,
                               int k, const IntegratorConfig& cfg = {},
                               double max_time = 1e4);

}  // namespace confdyn
