#pragma once

#include "confdyn/flow.hpp"
#include "confdyn/models.hpp"
#include "confdyn/report.hpp"

#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

namespace confdyn {

// ---------------------------------------------------------------- rotation

struct RotationNumber {
  double r_T = 0.0;
  double mean = 0.0;
};

/// Final r_accum and its time average. Needs a trajectory of a model with a
/// Lee form and a nonzero time span.
RotationNumber rotation_number(const Trajectory& tr);

// ---------------------------------------------------------------- transport

struct TransportResiduals {
  /// max_k ||D^T Omega(x_k) D - c_k Omega(x_0)|| / ||Omega(x_0)|| (Frobenius).
  double omega = 0.0;
  /// max_k |H(x_k) - c_k H(x_0)|; only when H transforms by c (conformal
  /// pairs; exact models whose Liouville form satisfies lambda(X) = H).
  double hamiltonian = 0.0;
  bool hamiltonian_checked = false;
};

/// c_t = exp(r_t) for conformal pairs, exp(-alpha t) for exact models.
TransportResiduals transport_residuals(const ModelSpec& m, const Trajectory& tr);

/// Both residuals below `tol` is a PASS.
CheckEntry conformal_transport_check(const ModelSpec& m, const Trajectory& tr, double tol = 1e-6);

// ---------------------------------------------------------------- Lyapunov

struct LyapunovResult {
  /// Descending.
  std::vector<double> exponents;
  /// max_i |chi_i + chi_{n+1-i} - s|.
  double pairing_defect = 0.0;
  double pairing_target = 0.0;
  /// Largest |chi(T) - chi(3T/4)|; converged when below 10% of |chi| + 1e-3.
  double drift = 0.0;
  bool converged = false;
};

/// Benettin QR exponents over [0, T] with `steps` re-orthonormalizations.
/// Each exponent is the regression slope of the accumulated log R_ii over the
/// second half of the run, sampled ten times per QR interval so the
/// oscillating part of log R_ii averages out. Escape raises BlowUpError.
LyapunovResult lyapunov_spectrum(const ModelSpec& m, const State& x0, double T = 200.0,
                                 long steps = 400, const IntegratorConfig& cfg = {});

/// Map version: mean log R_ii per iterate over n iterates.
LyapunovResult lyapunov_spectrum_map(const ModelSpec& m, const State& x0, long n);

// ---------------------------------------------------------------- periodic

struct PeriodicOrbit {
  State anchor;
  double period = 0.0;
  std::vector<State> samples;
  /// Unprojected D phi_T at the anchor.
  Mat monodromy;
  /// Sorted by decreasing modulus.
  std::vector<std::complex<double>> multipliers;
  /// r_T / T; 0 without a Lee form.
  double mean_rotation = 0.0;
  int newton_iterations = 0;
  /// ||P(anchor) - anchor|| in the torus metric.
  double return_residual = 0.0;
  /// Target exp(T s) of the pairing, s = mean rotation or -alpha.
  double pairing_target = 1.0;
  /// Max relative modulus error and max argument error of the pair products.
  double pairing_modulus_defect = 0.0;
  double pairing_argument_defect = 0.0;
  /// |H(anchor)|, set when |mean rotation| > 1e-6 and H exists.
  std::optional<double> h_anchor;
  /// Smallest |lambda - 1|.
  double unit_multiplier_defect = 0.0;
};

/// Newton on the first-return map of `sec` from `guess` (projected onto the
/// section). At most 50 iterations; NonConvergence otherwise.
PeriodicOrbit find_periodic_orbit(const ModelSpec& m, const SectionSpec& sec, const State& guess,
                                  const IntegratorConfig& cfg = {});

// ---------------------------------------------------------------- attractors

/// sup_q H(q, 0) on T^d x R^d: 1024-per-axis grid (d = 1; 128 for d = 2,
/// 24 beyond) refined once around the argmax.
double trapping_level(const ModelSpec& m);

/// Zeros of X in the box [lo, hi], by Newton from a seed grid; duplicates
/// closer than 1e-6 are merged (Newton only converges linearly onto a
/// degenerate zero). Angle components normalized.
std::vector<State> find_equilibria(const ModelSpec& m, const Vec& lo, const Vec& hi,
                                   int seeds_per_axis = 8);

struct AttractorOptions {
  double t_relax = 60.0;
  /// Grid points per axis over the bounding box of U.
  int grid = 48;
  double epsilon = 1e-3;
  /// Time step of the invariance residual.
  double delta = 1.0;
  /// Explicit compact box instead of U = {H <= R + 1}; a sample leaving it
  /// marks the run NotTrapping.
  std::optional<std::pair<Vec, Vec>> box;
  IntegratorConfig cfg = IntegratorConfig::splitting(0.01);
  unsigned jobs = 1;
};

struct AttractorEstimate {
  double trap_level = 0.0;
  std::vector<State> cloud;
  std::vector<State> equilibria;
  double invariance_residual = 0.0;
  /// Residual after t_relax and after 2 t_relax.
  std::vector<double> residual_history;
  int iterations = 0;
  /// Occupied epsilon-cells of the grid images at t_relax and 2 t_relax.
  std::size_t cells_t = 0;
  std::size_t cells_2t = 0;
  bool shrinks = true;
  bool trapping = true;
  std::string detail;
};

/// Grid sample of U flowed for t_relax, merged with the equilibria in U and
/// traces of their unstable directions, de-duplicated on an epsilon grid.
AttractorEstimate attractor_estimate(const ModelSpec& m, const AttractorOptions& opt = {});

struct ManifoldCloud {
  std::vector<State> points;
  /// Tangent frames (dim x k): D phi applied to the unstable basis for k = 1,
  /// an orthonormal basis of that plane for k >= 2.
  std::vector<Mat> frames;
  int unstable_dim = 0;
  std::vector<std::complex<double>> eigenvalues;
};

/// Local unstable manifold of a hyperbolic equilibrium grown for t_grow.
/// k = 1: the two branches, sampled by arclength `spacing`. k >= 2: a disk
/// of radius `radius` (log-spaced radii times directions) pushed forward.
ManifoldCloud unstable_manifold_cloud(const ModelSpec& m, const State& fixed_point, double t_grow,
                                      const IntegratorConfig& cfg = {}, double radius = 1e-4,
                                      double spacing = 1e-3);

enum class IsotropyNormalization {
  /// Raw frame columns (a parametrization's partial derivatives).
  Parametrized,
  /// Columns scaled to unit length.
  UnitColumns,
  /// Columns replaced by an orthonormal basis of their span.
  Orthonormal,
};

/// sup over points and column pairs of |Omega(u_i, u_j)|.
double isotropy_defect(const std::vector<State>& points, const std::vector<Mat>& frames,
                       const std::function<TwoForm(const State&)>& omega,
                       IsotropyNormalization norm = IsotropyNormalization::UnitColumns);

// ---------------------------------------------------------------- escape

struct EscapeStats {
  std::size_t total = 0;
  std::size_t escaped = 0;
  long max_steps = 0;
  Vec lo;
  Vec hi;
  /// Backward steps until the orbit left K, -1 if it stayed.
  std::vector<long> escape_step;
};

using SamplePredicate = std::function<bool(const State&)>;

/// Uniform samples in K = [lo, hi] (rejecting those failing `accept`),
/// generated serially from mt19937_64(seed); each backward orbit is followed
/// for up to N inverse steps. An inverse that blows up counts as escape.
EscapeStats escape_statistics(const ModelSpec& m, const Vec& lo, const Vec& hi, long N,
                              std::size_t samples, std::uint64_t seed,
                              const SamplePredicate& accept = {}, unsigned jobs = 1);

EscapeStats escape_statistics(const ModelSpec& m, const Vec& lo, const Vec& hi, long N,
                              const std::vector<State>& points, unsigned jobs = 1);

// ---------------------------------------------------------------- loops

struct LoopTransport {
  double i0 = 0.0;
  /// Integral of the pulled-back form D phi_t^T lambda(phi_t) over the loop.
  double it = 0.0;
  /// Trapezoid estimate on the image loop itself, for comparison.
  double it_image = 0.0;
  double expected = 0.0;
  double residual = 0.0;
};

LoopTransport loop_transport(const ModelSpec& m, const std::vector<State>& loop, double t,
                             const IntegratorConfig& cfg = {});

/// PASS iff |I_t - exp(-alpha t) I_0| <= 1e-7 (1 + |I_0|).
CheckEntry loop_cohomology_check(const ModelSpec& m, const std::vector<State>& loop, double t,
                                 const IntegratorConfig& cfg = {});

// ---------------------------------------------------------------- recurrence

struct RecurrenceResult {
  double min_dist = 0.0;
  double argmin_t = 0.0;
  /// First sampled t with distance below delta, NaN if none.
  double first_below = 0.0;
};

/// min over t = dt, 2dt, ..., t_max of torus_distance(phi_t(x0), x0).
RecurrenceResult recurrence_scan(const ModelSpec& m, const State& x0, double t_max, double dt,
                                 double delta, const IntegratorConfig& cfg = {});

// ---------------------------------------------------------------- classify

enum class OrbitVerdict { Conservative, Dissipative, Undetermined };
const char* to_string(OrbitVerdict v);

struct ClassifyOptions {
  double slope_threshold = -0.1;
  double h_threshold = 1e-3;
  double r_threshold = 1e-4;
  double return_tol = 1e-3;
  std::size_t samples = 1000;
};

struct OrbitClass {
  OrbitVerdict verdict = OrbitVerdict::Undetermined;
  double r_slope = 0.0;
  double omega_H_max = 0.0;
  double r_max_abs = 0.0;
  double min_return = 0.0;
  bool returned = false;
};

OrbitClass classify_orbit(const ModelSpec& m, const State& x0, double T,
                          const IntegratorConfig& cfg = {}, const ClassifyOptions& opt = {});

// ---------------------------------------------------------------- basins

struct BasinGrid {
  int nx = 0;
  int ny = 0;
  Vec lo;
  Vec hi;
  std::vector<State> targets;
  /// Row-major (y outer); target index, -1 escape, -2 undetermined.
  std::vector<int> labels;
};

/// Labels every cell centre of a 2-dim model by the nearest target within
/// `tol` after flowing for t_relax.
BasinGrid emit_basin_grid(const ModelSpec& m, const Vec& lo, const Vec& hi, int nx, int ny,
                          const std::vector<State>& targets, double t_relax = 60.0,
                          const IntegratorConfig& cfg = {}, double tol = 0.05, unsigned jobs = 1);

/// Header comments documenting axes and labels, then `i,j,x0,x1,label`.
std::string basin_csv(const BasinGrid& g);

// ---------------------------------------------------------------- helpers

/// Least-squares slope of y against t.
double regression_slope(const std::vector<double>& t, const std::vector<double>& y);

/// Brute-force nearest distance (torus metric) from x to a point set.
double nearest_distance(const CoordinateSpec& spec, const State& x, const std::vector<State>& set);

/// Nearest distance from every query to `set` through a hash grid with the
/// given cell size; exact, the grid only prunes.
std::vector<double> nearest_distances(const CoordinateSpec& spec, const std::vector<State>& queries,
                                      const std::vector<State>& set, double cell, unsigned jobs = 1);

/// Keeps the first point in each epsilon-cell (Angle components normalized).
std::vector<State> deduplicate(const CoordinateSpec& spec, const std::vector<State>& points,
                               double epsilon);

}  // namespace confdyn
