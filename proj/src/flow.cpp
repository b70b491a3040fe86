#include "confdyn/flow.hpp"

#include "confdyn/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace confdyn {

namespace {

// Dormand-Prince 5(4)
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                 a76 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

constexpr double kBeta = 0.04;
constexpr double kExpo1 = 0.2 - kBeta * 0.75;
constexpr double kSafety = 0.9;

std::string describe(double t, const Vec& x) {
  std::ostringstream os;
  os.precision(17);
  os << "t=" << t << " x=(";
  for (Eigen::Index i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
  os << ")";
  return os.str();
}

double sgn(double v) { return v < 0 ? -1.0 : 1.0; }

}  // namespace

void IntegratorConfig::validate() const {
  auto bad = [](const std::string& what) { throw Error(ErrorCode::InvalidArgument, what); };
  if (!(rel_tol > 0 && rel_tol <= 1e-2)) bad("rel_tol must lie in (0, 1e-2]");
  if (!(abs_tol > 0 && abs_tol <= 1e-2)) bad("abs_tol must lie in (0, 1e-2]");
  if (!(h > 0) || !std::isfinite(h)) bad("step size must be positive");
  if (method == Method::ConformalSplitting && h > 0.5) bad("splitting step must be <= 0.5");
  if (!(blowup_threshold > 0)) bad("blowup_threshold must be positive");
  if (max_steps <= 0) bad("max_steps must be positive");
}

IntegratorConfig IntegratorConfig::reference(double rel_tol, double abs_tol) {
  IntegratorConfig c;
  c.rel_tol = rel_tol;
  c.abs_tol = abs_tol;
  return c;
}

IntegratorConfig IntegratorConfig::splitting(double h) {
  IntegratorConfig c;
  c.method = Method::ConformalSplitting;
  c.h = h;
  return c;
}

IntegratorConfig IntegratorConfig::rk4(double h) {
  IntegratorConfig c;
  c.method = Method::FixedRK4;
  c.h = h;
  return c;
}

const char* to_string(TrajectoryStatus status) {
  switch (status) {
    case TrajectoryStatus::Completed: return "completed";
    case TrajectoryStatus::BlowUp: return "blow-up";
    case TrajectoryStatus::MaxStepsExceeded: return "max-steps-exceeded";
  }
  return "?";
}

const char* to_string(Method method) {
  switch (method) {
    case Method::ReferenceAdaptive: return "reference";
    case Method::ConformalSplitting: return "splitting";
    case Method::FixedRK4: return "rk4";
  }
  return "?";
}

std::vector<double> sample_times(double t0, double t1, std::size_t n) {
  if (n < 2) throw Error(ErrorCode::InvalidArgument, "need at least two sample times");
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  t.back() = t1;
  return t;
}

// ---------------------------------------------------------------------------

struct FlowIntegrator::Impl {
  ModelSpec model;
  IntegratorConfig cfg;
  bool frames = false;
  bool rotation = false;
  int n = 0;
  int N = 0;

  double t = 0.0, t_prev = 0.0, h_last = 0.0;
  Vec y, y_prev;
  // derivative at y and at y_prev (FSAL for the adaptive method)
  Vec f, f_prev;
  bool f_valid = false;
  double h_next = 0.0;
  double facold = 1e-4;
  long steps = 0;
  double t_escape = std::numeric_limits<double>::quiet_NaN();
  TrajectoryStatus status = TrajectoryStatus::Completed;

  void rhs(const Vec& z, Vec& dz) const {
    const Vec x = z.head(n);
    const Tangent X = model.field(x);
    dz.resize(N);
    dz.head(n) = X;
    if (frames) {
      const Mat J = vector_field_jacobian(model, x);
      Eigen::Map<const Mat> phi(z.data() + n, n, n);
      Eigen::Map<Mat>(dz.data() + n, n, n) = J * phi;
    }
    if (rotation) dz[N - 1] = model.lee(x).dot(X);
  }

  Vec rhs(const Vec& z) const {
    Vec dz;
    rhs(z, dz);
    return dz;
  }

  double error_norm(const Vec& err, const Vec& y0, const Vec& y1) const {
    double s = 0.0;
    for (int i = 0; i < N; ++i) {
      const double sc = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(y0[i]), std::abs(y1[i]));
      const double r = err[i] / sc;
      s += r * r;
    }
    return std::sqrt(s / N);
  }

  // One Dormand-Prince step; returns false if any stage is not finite.
  bool dopri(const Vec& y0, const Vec& k1, double h, Vec& y1, Vec* err, Vec* k7out) const {
    Vec k2, k3, k4, k5, k6, k7;
    rhs(y0 + h * a21 * k1, k2);
    if (!k2.allFinite()) return false;
    rhs(y0 + h * (a31 * k1 + a32 * k2), k3);
    if (!k3.allFinite()) return false;
    rhs(y0 + h * (a41 * k1 + a42 * k2 + a43 * k3), k4);
    if (!k4.allFinite()) return false;
    rhs(y0 + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4), k5);
    if (!k5.allFinite()) return false;
    rhs(y0 + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5), k6);
    if (!k6.allFinite()) return false;
    y1 = y0 + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    if (!y1.allFinite()) return false;
    if (err || k7out) {
      rhs(y1, k7);
      if (err) *err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      if (k7out) *k7out = k7;
    }
    return true;
  }

  Vec rk4(const Vec& y0, double h) const {
    const Vec k1 = rhs(y0);
    const Vec k2 = rhs(y0 + 0.5 * h * k1);
    const Vec k3 = rhs(y0 + 0.5 * h * k2);
    const Vec k4 = rhs(y0 + h * k3);
    return y0 + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }

  Vec split(const Vec& y0, double h) const {
    const SplitStep s = conformal_splitting_step(model, y0.head(n), h);
    Vec y1(N);
    y1.head(n) = s.state;
    if (frames) {
      Eigen::Map<const Mat> phi(y0.data() + n, n, n);
      Eigen::Map<Mat>(y1.data() + n, n, n) = s.jacobian * phi;
    }
    if (rotation) {
      const double r0 = model.lee(y0.head(n)).dot(model.field(y0.head(n)));
      const double r1 = model.lee(s.state).dot(model.field(s.state));
      y1[N - 1] = y0[N - 1] + 0.5 * h * (r0 + r1);
    }
    return y1;
  }

  // Single step of the configured method from the start of the last step.
  Vec single(double tau) const {
    if (tau == 0.0) return y_prev;
    switch (cfg.method) {
      case Method::ReferenceAdaptive: {
        Vec out;
        if (!dopri(y_prev, f_prev, tau, out, nullptr, nullptr)) {
          out = Vec::Constant(N, std::numeric_limits<double>::infinity());
        }
        return out;
      }
      case Method::FixedRK4: return rk4(y_prev, tau);
      case Method::ConformalSplitting: return split(y_prev, tau);
    }
    return y_prev;
  }

  double initial_step(double dir) {
    const Vec& f0 = f;
    auto norm_scaled = [&](const Vec& v) {
      double s = 0.0;
      for (int i = 0; i < N; ++i) {
        const double sc = cfg.abs_tol + cfg.rel_tol * std::abs(y[i]);
        s += (v[i] / sc) * (v[i] / sc);
      }
      return std::sqrt(s / N);
    };
    const double d0 = norm_scaled(y);
    const double d1 = norm_scaled(f0);
    double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    const Vec y1 = y + dir * h0 * f0;
    const Vec f1 = rhs(y1);
    if (!f1.allFinite()) return h0;
    const double d2 = norm_scaled(f1 - f0) / h0;
    const double dm = std::max(d1, d2);
    const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
    return std::min(100.0 * h0, h1);
  }

  void ensure_f() {
    if (f_valid) return;
    rhs(y, f);
    if (!f.allFinite()) {
      throw Error(ErrorCode::PoisonedState, "vector field is not finite at " + describe(t, y.head(n)));
    }
    f_valid = true;
  }

  void accept(double t_new, const Vec& y_new, double h) {
    y_prev = y;
    f_prev = f;
    t_prev = t;
    y = y_new;
    t = t_new;
    h_last = h;
    ++steps;
  }

  void step_adaptive(double t_limit) {
    ensure_f();
    const double rem = t_limit - t;
    const double dir = sgn(rem);
    if (h_next == 0.0) h_next = initial_step(dir);
    bool clamped = h_next >= std::abs(rem);
    double h = clamped ? rem : dir * h_next;
    bool rejected = false;
    bool poisoned = false;
    Vec y1, err, k7;
    for (;;) {
      const double hmin = 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t));
      if (std::abs(h) < hmin && std::abs(h) < std::abs(rem)) {
        if (poisoned) {
          throw Error(ErrorCode::PoisonedState,
                      "vector field is not finite next to " + describe(t, y.head(n)));
        }
        throw Error(ErrorCode::NonConvergence, "step size underflow at " + describe(t, y.head(n)));
      }
      if (!dopri(y, f, h, y1, &err, &k7) || !err.allFinite()) {
        poisoned = true;
        rejected = true;
        clamped = false;
        h *= 0.2;
        continue;
      }
      const double e = error_norm(err, y, y1);
      const double fac11 = std::pow(std::max(e, 1e-300), kExpo1);
      if (e <= 1.0) {
        double fac = fac11 / std::pow(facold, kBeta) / kSafety;
        fac = std::clamp(fac, 0.1, 5.0);
        double hnew = std::abs(h) / fac;
        if (rejected) hnew = std::min(hnew, std::abs(h));
        facold = std::max(e, 1e-4);
        h_next = clamped ? std::max(h_next, hnew) : hnew;
        break;
      }
      const double fac = std::min(5.0, fac11 / kSafety);
      h /= fac;
      rejected = true;
      clamped = false;
    }
    accept(clamped ? t_limit : t + h, y1, h);
    f = k7;
    if (!f.allFinite()) {
      throw Error(ErrorCode::PoisonedState, "vector field is not finite at " + describe(t, y.head(n)));
    }
  }

  void step_fixed(double t_limit) {
    const double rem = t_limit - t;
    const bool clamped = std::abs(rem) <= cfg.h * (1.0 + 1e-9);
    const double h = clamped ? rem : sgn(rem) * cfg.h;
    Vec y1 = cfg.method == Method::FixedRK4 ? rk4(y, h) : split(y, h);
    if (!y1.allFinite()) {
      throw Error(ErrorCode::PoisonedState, "non-finite state after step from " + describe(t, y.head(n)));
    }
    f_valid = false;
    f_prev.resize(0);
    accept(clamped ? t_limit : t + h, y1, h);
  }

  void check_blowup() {
    const double thr = cfg.blowup_threshold;
    if (model.spec.line_norm(y.head(n)) <= thr) return;
    double lo = 0.0, hi = h_last;
    if (cfg.method == Method::ReferenceAdaptive && f_prev.size() == 0) f_prev = rhs(y_prev);
    for (int it = 0; it < 200; ++it) {
      if (std::abs(hi - lo) <= 1e-14 * std::max(1.0, std::abs(t_prev + hi))) break;
      const double mid = 0.5 * (lo + hi);
      const Vec ym = single(mid);
      if (!ym.allFinite() || model.spec.line_norm(ym.head(n)) > thr) {
        hi = mid;
      } else {
        lo = mid;
      }
    }
    t_escape = t_prev + hi;
    const Vec ye = single(hi);
    if (ye.allFinite()) y = ye;
    t = t_escape;
    status = TrajectoryStatus::BlowUp;
    f_valid = false;
  }

  TrajectoryStatus step(double t_limit) {
    if (status == TrajectoryStatus::BlowUp) return status;
    if (t_limit == t) return TrajectoryStatus::Completed;
    if (cfg.method == Method::ReferenceAdaptive) {
      step_adaptive(t_limit);
    } else {
      step_fixed(t_limit);
    }
    check_blowup();
    return status;
  }
};

FlowIntegrator::FlowIntegrator(const ModelSpec& model, const IntegratorConfig& cfg,
                               bool with_frames, bool with_rotation)
    : impl_(std::make_unique<Impl>()) {
  if (!model.is_flow()) {
    throw Error(ErrorCode::NotApplicable, "model '" + model.name + "' is a map, not a flow");
  }
  cfg.validate();
  if (with_frames && !model.field_jacobian &&
      (cfg.method != Method::ReferenceAdaptive || cfg.rel_tol > 1e-8)) {
    throw Error(ErrorCode::InvalidArgument,
                "finite-difference tangent flow needs the reference method at tolerance <= 1e-8");
  }
  if (with_rotation && !model.has_lee()) {
    throw Error(ErrorCode::InvalidArgument, "model '" + model.name + "' has no Lee form");
  }
  if (cfg.method == Method::ConformalSplitting &&
      !(model.flags.cotangent_splittable && model.splitting)) {
    throw Error(ErrorCode::NotApplicable,
                "model '" + model.name + "' does not support the splitting integrator");
  }
  impl_->model = model;
  impl_->cfg = cfg;
  impl_->frames = with_frames;
  impl_->rotation = with_rotation;
  impl_->n = model.dim();
  impl_->N = impl_->n + (with_frames ? impl_->n * impl_->n : 0) + (with_rotation ? 1 : 0);
  reset(0.0, State::Zero(impl_->n));
}

FlowIntegrator::~FlowIntegrator() = default;
FlowIntegrator::FlowIntegrator(FlowIntegrator&&) noexcept = default;
FlowIntegrator& FlowIntegrator::operator=(FlowIntegrator&&) noexcept = default;

void FlowIntegrator::reset(double t0, const State& x0, const Mat* frame, double rotation) {
  Impl& s = *impl_;
  s.model.spec.check_state(x0);
  if (!x0.allFinite()) throw Error(ErrorCode::InvalidArgument, "initial state is not finite");
  s.y.resize(s.N);
  s.y.head(s.n) = x0;
  if (s.frames) {
    Eigen::Map<Mat> phi(s.y.data() + s.n, s.n, s.n);
    if (frame) {
      if (frame->rows() != s.n || frame->cols() != s.n) {
        throw Error(ErrorCode::DimensionMismatch, "initial frame has wrong shape");
      }
      phi = *frame;
    } else {
      phi.setIdentity();
    }
  }
  if (s.rotation) s.y[s.N - 1] = rotation;
  s.t = s.t_prev = t0;
  s.y_prev = s.y;
  s.h_last = 0.0;
  s.f_valid = false;
  s.f_prev.resize(0);
  s.h_next = 0.0;
  s.facold = 1e-4;
  s.steps = 0;
  s.t_escape = std::numeric_limits<double>::quiet_NaN();
  s.status = TrajectoryStatus::Completed;
}

TrajectoryStatus FlowIntegrator::advance_to(double t) {
  return advance_to(t, [](double, double) { return false; });
}

TrajectoryStatus FlowIntegrator::advance_to(double t,
                                            const std::function<bool(double, double)>& on_step) {
  Impl& s = *impl_;
  while (s.t != t) {
    if (s.steps >= s.cfg.max_steps) return TrajectoryStatus::MaxStepsExceeded;
    if (s.step(t) == TrajectoryStatus::BlowUp) return TrajectoryStatus::BlowUp;
    if (on_step(s.t_prev, s.t)) break;
  }
  return s.status;
}

TrajectoryStatus FlowIntegrator::step(double t_limit) {
  Impl& s = *impl_;
  if (s.steps >= s.cfg.max_steps) return TrajectoryStatus::MaxStepsExceeded;
  return s.step(t_limit);
}

double FlowIntegrator::time() const { return impl_->t; }
State FlowIntegrator::raw_state() const { return impl_->y.head(impl_->n); }

Mat FlowIntegrator::frame() const {
  const Impl& s = *impl_;
  if (!s.frames) throw Error(ErrorCode::NotApplicable, "integrator carries no frame");
  return Eigen::Map<const Mat>(s.y.data() + s.n, s.n, s.n);
}

double FlowIntegrator::rotation() const {
  const Impl& s = *impl_;
  return s.rotation ? s.y[s.N - 1] : 0.0;
}

double FlowIntegrator::escape_time() const { return impl_->t_escape; }
long FlowIntegrator::steps() const { return impl_->steps; }

Vec FlowIntegrator::state_after_prev(double tau) const {
  Impl& s = *impl_;
  if (s.cfg.method == Method::ReferenceAdaptive && s.f_prev.size() == 0) s.f_prev = s.rhs(s.y_prev);
  return s.single(tau);
}

Vec FlowIntegrator::dense_output(double tau) const {
  Impl& s = *impl_;
  const double h = s.t - s.t_prev;
  if (h == 0.0) return s.y;
  if (s.f_prev.size() == 0) s.f_prev = s.rhs(s.y_prev);
  if (!s.f_valid) {
    s.rhs(s.y, s.f);
    s.f_valid = s.f.allFinite();
  }
  const double u = tau / h;
  const double h00 = (1 + 2 * u) * (1 - u) * (1 - u);
  const double h10 = u * (1 - u) * (1 - u);
  const double h01 = u * u * (3 - 2 * u);
  const double h11 = u * u * (u - 1);
  return h00 * s.y_prev + h10 * h * s.f_prev + h01 * s.y + h11 * h * s.f;
}

double FlowIntegrator::previous_time() const { return impl_->t_prev; }
Vec FlowIntegrator::previous_augmented() const { return impl_->y_prev; }
Vec FlowIntegrator::augmented() const { return impl_->y; }
int FlowIntegrator::dim() const { return impl_->n; }

// ---------------------------------------------------------------------------

namespace {

Trajectory run(const ModelSpec& m, const State& x0, std::span<const double> times,
               const IntegratorConfig& cfg, bool frames) {
  if (!m.is_flow()) {
    throw Error(ErrorCode::NotApplicable, "model '" + m.name + "' is a map, not a flow");
  }
  if (times.size() < 2 || times.front() == times.back()) {
    throw Error(ErrorCode::InvalidArgument, "zero-length time span");
  }
  const bool backward = times.back() < times.front();
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!std::isfinite(times[i]) || (backward ? times[i] >= times[i - 1] : times[i] <= times[i - 1])) {
      throw Error(ErrorCode::InvalidArgument, "sample times must be strictly monotone");
    }
  }
  const bool rot = m.has_lee();
  FlowIntegrator integ(m, cfg, frames, rot);
  integ.reset(times.front(), x0);

  Trajectory tr;
  tr.backward = backward;
  auto push = [&](double t) {
    tr.times.push_back(t);
    tr.states.push_back(m.spec.normalize(integ.raw_state()));
    if (frames) tr.frames.push_back(integ.frame());
    if (rot) tr.r_accum.push_back(integ.rotation());
  };
  push(times.front());
  for (std::size_t i = 1; i < times.size(); ++i) {
    const TrajectoryStatus st = integ.advance_to(times[i]);
    if (st == TrajectoryStatus::BlowUp) {
      tr.status = st;
      tr.t_escape = integ.escape_time();
      push(integ.time());
      break;
    }
    if (st == TrajectoryStatus::MaxStepsExceeded) {
      tr.status = st;
      push(integ.time());
      break;
    }
    push(times[i]);
  }
  return tr;
}

}  // namespace

Trajectory integrate_flow(const ModelSpec& m, const State& x0, std::span<const double> times,
                          const IntegratorConfig& cfg) {
  return run(m, x0, times, cfg, false);
}

Trajectory integrate_flow(const ModelSpec& m, const State& x0, double t0, double t1,
                          std::size_t samples, const IntegratorConfig& cfg) {
  if (t0 == t1) throw Error(ErrorCode::InvalidArgument, "zero-length time span");
  const auto t = sample_times(t0, t1, samples);
  return run(m, x0, t, cfg, false);
}

Trajectory integrate_variational(const ModelSpec& m, const State& x0,
                                 std::span<const double> times, const IntegratorConfig& cfg) {
  return run(m, x0, times, cfg, true);
}

Trajectory integrate_variational(const ModelSpec& m, const State& x0, double t0, double t1,
                                 std::size_t samples, const IntegratorConfig& cfg) {
  if (t0 == t1) throw Error(ErrorCode::InvalidArgument, "zero-length time span");
  const auto t = sample_times(t0, t1, samples);
  return run(m, x0, t, cfg, true);
}

// ---------------------------------------------------------------------------

SplitStep conformal_splitting_step(const ModelSpec& m, const State& x, double h) {
  if (!(m.flags.cotangent_splittable && m.splitting)) {
    throw Error(ErrorCode::NotApplicable,
                "model '" + m.name + "' does not support the splitting integrator");
  }
  if (!(std::abs(h) <= 0.5)) throw Error(ErrorCode::InvalidArgument, "splitting step must be <= 0.5");
  const SplittingData& sp = *m.splitting;
  const int d = sp.d;
  m.spec.check_state(x);

  const double c = std::exp(-0.5 * m.alpha * h);
  Mat C = Mat::Identity(2 * d, 2 * d);
  C.bottomRightCorner(d, d) *= c;

  State z = x;
  z.tail(d) *= c;

  Mat JH;
  if (sp.separable) {
    Vec q = z.head(d);
    Vec p = z.tail(d);
    const Mat I = Mat::Identity(d, d);
    Mat K1 = Mat::Identity(2 * d, 2 * d);
    K1.bottomLeftCorner(d, d) = -0.5 * h * sp.potential_hessian(q);
    p -= 0.5 * h * sp.potential_gradient(q);
    Mat D = Mat::Identity(2 * d, 2 * d);
    D.topRightCorner(d, d) = h * I;
    q += h * p;
    Mat K2 = Mat::Identity(2 * d, 2 * d);
    K2.bottomLeftCorner(d, d) = -0.5 * h * sp.potential_hessian(q);
    p -= 0.5 * h * sp.potential_gradient(q);
    z.head(d) = q;
    z.tail(d) = p;
    JH = K2 * D * K1;
  } else {
    const State z0 = z;
    State z1 = z0 + h * sp.hamiltonian_field(z0);
    bool converged = false;
    for (int it = 0; it < 50; ++it) {
      const State zn = z0 + h * sp.hamiltonian_field(0.5 * (z0 + z1));
      const double delta = (zn - z1).norm();
      z1 = zn;
      if (!z1.allFinite()) break;
      if (delta <= 1e-14 * (1.0 + z1.norm())) {
        converged = true;
        break;
      }
    }
    if (!converged) {
      throw Error(ErrorCode::NonConvergence, "implicit midpoint iteration did not converge");
    }
    const Mat A = sp.hamiltonian_field_jacobian(0.5 * (z0 + z1));
    const Mat I = Mat::Identity(2 * d, 2 * d);
    JH = (I - 0.5 * h * A).partialPivLu().solve(I + 0.5 * h * A);
    z = z1;
  }
  z.tail(d) *= c;
  if (!z.allFinite()) {
    throw Error(ErrorCode::PoisonedState, "non-finite state after splitting step from " + describe(0, x));
  }
  return {z, C * JH * C};
}

// ---------------------------------------------------------------------------

Trajectory iterate_map(const ModelSpec& m, const State& x0, long n, bool with_frames) {
  if (m.is_flow()) throw Error(ErrorCode::NotApplicable, "model '" + m.name + "' is a flow");
  if (n < 0 && !m.inverse) {
    throw Error(ErrorCode::InverseUnavailable, "model '" + m.name + "' has no inverse");
  }
  m.spec.check_state(x0);
  constexpr double kThreshold = 1e8;
  Trajectory tr;
  tr.backward = n < 0;
  State x = m.spec.normalize(x0);
  Mat phi = Mat::Identity(m.dim(), m.dim());
  tr.times.push_back(0.0);
  tr.states.push_back(x);
  if (with_frames) tr.frames.push_back(phi);
  const long steps = n < 0 ? -n : n;
  for (long k = 1; k <= steps; ++k) {
    State y = n < 0 ? m.inverse(x) : m.map(x);
    if (!y.allFinite()) {
      throw Error(ErrorCode::PoisonedState, "map produced a non-finite state from " + describe(k - 1, x));
    }
    if (with_frames) {
      if (n < 0) {
        phi = m.map_jacobian(y).partialPivLu().solve(phi);
      } else {
        phi = m.map_jacobian(x) * phi;
      }
    }
    x = m.spec.normalize(y);
    tr.times.push_back(n < 0 ? -static_cast<double>(k) : static_cast<double>(k));
    tr.states.push_back(x);
    if (with_frames) tr.frames.push_back(phi);
    if (m.spec.line_norm(x) > kThreshold) {
      tr.status = TrajectoryStatus::BlowUp;
      tr.t_escape = tr.times.back();
      break;
    }
  }
  return tr;
}

ModelSpec time_t_map(const ModelSpec& flow, double t, const IntegratorConfig& cfg) {
  if (!flow.is_flow()) throw Error(ErrorCode::NotApplicable, "time-t map needs a flow model");
  if (t == 0.0 || !std::isfinite(t)) throw Error(ErrorCode::InvalidArgument, "time must be nonzero");
  cfg.validate();

  ModelSpec m = flow;
  std::ostringstream name;
  name << flow.name << "@t=" << t;
  m.name = name.str();
  m.kind = ModelKind::Map;
  m.field = nullptr;
  m.field_jacobian = nullptr;
  m.closed_form_flow = nullptr;
  m.splitting.reset();
  m.flags.cotangent_splittable = false;
  if (flow.flags.exact_symplectic) m.ratio_a = std::exp(-flow.alpha * t);

  auto end_state = [flow, cfg](const State& x, double T) {
    const double ts[2] = {0.0, T};
    const Trajectory tr = integrate_flow(flow, x, ts, cfg);
    if (tr.status == TrajectoryStatus::BlowUp) {
      throw BlowUpError(tr.t_escape, "orbit escapes before the requested time");
    }
    if (tr.status != TrajectoryStatus::Completed) {
      throw Error(ErrorCode::NonConvergence, "step budget exhausted in time-t map");
    }
    return tr.states.back();
  };
  m.map = [end_state, t](const State& x) { return end_state(x, t); };
  m.inverse = [end_state, t](const State& x) { return end_state(x, -t); };
  m.map_jacobian = [flow, cfg, t](const State& x) {
    const double ts[2] = {0.0, t};
    const Trajectory tr = integrate_variational(flow, x, ts, cfg);
    if (tr.status == TrajectoryStatus::BlowUp) {
      throw BlowUpError(tr.t_escape, "orbit escapes before the requested time");
    }
    return tr.frames.back();
  };
  return m;
}

// ---------------------------------------------------------------------------

SectionSpec SectionSpec::on_axis(int dim, int axis, double offset, int direction) {
  if (axis < 0 || axis >= dim) throw Error(ErrorCode::InvalidArgument, "section axis out of range");
  SectionSpec s;
  s.normal = Vec::Zero(dim);
  s.normal[axis] = 1.0;
  s.offset = offset;
  s.direction = direction;
  return s;
}

PoincareResult poincare_return(const ModelSpec& m, const SectionSpec& sec, const State& x0, int k,
                               const IntegratorConfig& cfg, double max_time) {
  if (!m.is_flow()) throw Error(ErrorCode::NotApplicable, "sections need a flow model");
  const int n = m.dim();
  if (sec.normal.size() != n) throw Error(ErrorCode::DimensionMismatch, "section normal length");
  if (!(sec.normal.norm() > 0)) throw Error(ErrorCode::InvalidArgument, "section functional is zero");
  if (sec.direction < -1 || sec.direction > 1) {
    throw Error(ErrorCode::InvalidArgument, "section direction must be -1, 0 or 1");
  }
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "need at least one crossing");
  if (!(max_time > 0)) throw Error(ErrorCode::InvalidArgument, "max_time must be positive");

  // A functional along one Angle axis is periodic: levels offset + j all count.
  int periodic_axis = -1;
  int nonzero = 0;
  for (int i = 0; i < n; ++i) {
    if (sec.normal[i] != 0.0) {
      ++nonzero;
      periodic_axis = i;
    }
  }
  const bool periodic = nonzero == 1 && m.spec.is_angle(periodic_axis);
  const double scale = periodic ? sec.normal[periodic_axis] : 1.0;
  const Vec normal = sec.normal / scale;
  const double offset = sec.offset / scale;
  auto G = [&](const Vec& z) { return normal.dot(z.head(n)) - offset; };

  const bool rot = m.has_lee();
  FlowIntegrator integ(m, cfg, true, rot);
  integ.reset(0.0, x0);
  double t_anchor = 0.0;

  PoincareResult res;
  while (static_cast<int>(res.crossings.size()) < k) {
    if (integ.time() >= max_time) {
      throw Error(ErrorCode::NoCrossing, "no section crossing before t=" + std::to_string(max_time));
    }
    const TrajectoryStatus st = integ.step(max_time);
    if (st == TrajectoryStatus::BlowUp) {
      throw BlowUpError(integ.escape_time(), "orbit escapes before reaching the section");
    }
    if (st == TrajectoryStatus::MaxStepsExceeded) {
      throw Error(ErrorCode::NoCrossing, "step budget exhausted before a section crossing");
    }
    const Vec a = integ.previous_augmented();
    const Vec b = integ.augmented();
    const double ga = G(a), gb = G(b);
    double level = 0.0;
    if (periodic) {
      const double la = std::floor(ga), lb = std::floor(gb);
      if (la == lb) continue;
      level = gb > ga ? la + 1.0 : la;
    } else {
      const bool crossed = (ga < 0 && gb >= 0) || (ga > 0 && gb <= 0);
      if (!crossed) continue;
    }
    const int dir = gb > ga ? 1 : -1;
    if (sec.direction != 0 && dir != sec.direction) continue;

    // Illinois on exact single steps, seeded from the Hermite interpolant.
    const double h = integ.time() - integ.previous_time();
    double lo = 0.0, hi = h;
    double flo = ga - level, fhi = gb - level;
    double tau = h * flo / (flo - fhi);
    for (int it = 0; it < 3; ++it) {
      const double fg = G(integ.dense_output(tau)) - level;
      const double tg = tau - fg * h / (fhi - flo);
      if (!((tg - lo) * (tg - hi) < 0)) break;
      tau = tg;
    }
    int side = 0;
    for (int it = 0; it < 200; ++it) {
      const double ft = G(integ.state_after_prev(tau)) - level;
      if (ft == 0.0) {
        lo = hi = tau;
        break;
      }
      if ((ft < 0) == (flo < 0)) {
        lo = tau;
        flo = ft;
        if (side == -1) fhi *= 0.5;
        side = -1;
      } else {
        hi = tau;
        fhi = ft;
        if (side == 1) flo *= 0.5;
        side = 1;
      }
      if (std::abs(hi - lo) <= 1e-15 * std::max(1.0, std::abs(integ.time()))) break;
      tau = (lo * fhi - hi * flo) / (fhi - flo);
      if (!((tau - lo) * (tau - hi) <= 0)) tau = 0.5 * (lo + hi);
    }
    tau = 0.5 * (lo + hi);
    const Vec zc = integ.state_after_prev(tau);
    const double tc = integ.previous_time() + tau;
    if (tc - t_anchor <= 1e-9) continue;

    const State xc = zc.head(n);
    const Tangent X = m.field(xc);
    const double gdot = normal.dot(X);
    if (std::abs(gdot * scale) <= 1e-8) {
      throw Error(ErrorCode::TangentialCrossing, "flow is tangent to the section at " + describe(tc, xc));
    }
    const Mat phi = Eigen::Map<const Mat>(zc.data() + n, n, n);
    const Mat P = (Mat::Identity(n, n) - X * normal.transpose() / gdot) * phi;
    res.crossings.push_back(m.spec.normalize(xc));
    res.flow_jacobians.push_back(phi);
    res.return_jacobians.push_back(P);
    res.return_times.push_back(tc - t_anchor);
    res.rotations.push_back(rot ? zc[zc.size() - 1] : 0.0);

    integ.reset(tc, xc);
    t_anchor = tc;
  }
  return res;
}

}  // namespace confdyn
