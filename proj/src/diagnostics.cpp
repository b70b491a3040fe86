#include "confdyn/diagnostics.hpp"

#include "confdyn/error.hpp"
#include "confdyn/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

namespace confdyn {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// log-diagonal of the R factor of a frame; columns keep their order.
Vec log_r_diagonal(const Mat& frame) {
  Eigen::HouseholderQR<Mat> qr(frame);
  const Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
  Vec out(frame.cols());
  for (Eigen::Index i = 0; i < frame.cols(); ++i) out[i] = std::log(std::abs(r(i, i)));
  return out;
}

Mat orthonormal_q(const Mat& frame) {
  Eigen::HouseholderQR<Mat> qr(frame);
  Mat q = qr.householderQ() * Mat::Identity(frame.rows(), frame.cols());
  // Match the signs of R's diagonal so Q R = frame with R_ii > 0.
  const Mat r = qr.matrixQR();
  for (Eigen::Index i = 0; i < frame.cols(); ++i) {
    if (r(i, i) < 0) q.col(i) = -q.col(i);
  }
  return q;
}

double pairing_defect_of(const std::vector<double>& chi, double s) {
  if (!std::isfinite(s)) return kNaN;
  const std::size_t n = chi.size();
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(chi[i] + chi[n - 1 - i] - s));
  return worst;
}

}  // namespace

double regression_slope(const std::vector<double>& t, const std::vector<double>& y) {
  if (t.size() != y.size() || t.size() < 2) {
    throw Error(ErrorCode::InvalidArgument, "regression needs at least two matching samples");
  }
  const double n = static_cast<double>(t.size());
  double mt = 0.0, my = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    mt += t[i];
    my += y[i];
  }
  mt /= n;
  my /= n;
  double sty = 0.0, stt = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    sty += (t[i] - mt) * (y[i] - my);
    stt += (t[i] - mt) * (t[i] - mt);
  }
  if (!(stt > 0)) throw Error(ErrorCode::InvalidArgument, "regression times are all equal");
  return sty / stt;
}

double nearest_distance(const CoordinateSpec& spec, const State& x, const std::vector<State>& set) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& y : set) best = std::min(best, torus_distance(spec, x, y));
  return best;
}

std::vector<State> deduplicate(const CoordinateSpec& spec, const std::vector<State>& points,
                               double epsilon) {
  if (!(epsilon > 0)) throw Error(ErrorCode::InvalidArgument, "resolution must be positive");
  std::set<std::vector<long long>> seen;
  std::vector<State> out;
  for (const auto& p : points) {
    const State x = spec.normalize(p);
    std::vector<long long> key(static_cast<std::size_t>(x.size()));
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      key[static_cast<std::size_t>(i)] = static_cast<long long>(std::floor(x[i] / epsilon));
    }
    if (seen.insert(key).second) out.push_back(x);
  }
  return out;
}

// ---------------------------------------------------------------- rotation

RotationNumber rotation_number(const Trajectory& tr) {
  if (!tr.has_rotation()) {
    throw Error(ErrorCode::NotApplicable, "trajectory carries no rotation integral (model has no Lee form)");
  }
  const double span = tr.times.back() - tr.times.front();
  if (tr.size() < 2 || span == 0.0) {
    throw Error(ErrorCode::InvalidArgument, "rotation number of a zero-length trajectory");
  }
  RotationNumber r;
  r.r_T = tr.r_accum.back();
  r.mean = r.r_T / span;
  return r;
}

// ---------------------------------------------------------------- transport

TransportResiduals transport_residuals(const ModelSpec& m, const Trajectory& tr) {
  if (!tr.has_frames()) throw Error(ErrorCode::InvalidArgument, "transport check needs frames");
  const bool pair = m.flags.conformal_pair && m.has_lee();
  const bool exact = m.flags.exact_symplectic && m.is_flow();
  if (!pair && !exact) {
    throw Error(ErrorCode::NotApplicable, "'" + m.name + "' has no conformal factor to check");
  }
  if (pair && !tr.has_rotation()) throw Error(ErrorCode::InvalidArgument, "missing rotation integral");

  const State& x0 = tr.states.front();
  const Mat om0 = m.two_form(x0).matrix;
  const double norm0 = om0.norm();

  TransportResiduals res;
  // For exact models dH(X) = -alpha lambda(X), so H scales by exp(-alpha t)
  // exactly when lambda(X) = H on the orbit.
  bool h_ok = m.has_hamiltonian();
  if (h_ok && exact && !pair) {
    for (const auto& x : tr.states) {
      const double h = m.hamiltonian(x);
      if (!m.liouville || std::abs(m.liouville(x).dot(m.field(x)) - h) > 1e-12 * (1.0 + std::abs(h))) {
        h_ok = false;
        break;
      }
    }
  }
  res.hamiltonian_checked = h_ok;
  const double h0 = h_ok ? m.hamiltonian(x0) : 0.0;
  for (std::size_t k = 0; k < tr.size(); ++k) {
    const double dt = tr.times[k] - tr.times.front();
    const double c = pair ? std::exp(tr.r_accum[k]) : std::exp(-m.alpha * dt);
    const Mat& d = tr.frames[k];
    const Mat lhs = d.transpose() * m.two_form(tr.states[k]).matrix * d;
    res.omega = std::max(res.omega, (lhs - c * om0).norm() / norm0);
    if (h_ok) res.hamiltonian = std::max(res.hamiltonian, std::abs(m.hamiltonian(tr.states[k]) - c * h0));
  }
  return res;
}

CheckEntry conformal_transport_check(const ModelSpec& m, const Trajectory& tr, double tol) {
  const auto r = transport_residuals(m, tr);
  const double worst = std::max(r.omega, r.hamiltonian);
  CheckEntry e = make_check("conformal-transport", &m, worst, tol, "reference-integration");
  e.values["omega_residual"] = r.omega;
  if (r.hamiltonian_checked) e.values["hamiltonian_residual"] = r.hamiltonian;
  e.values["t"] = tr.times.back() - tr.times.front();
  e.detail = r.hamiltonian_checked ? "Omega and H transport" : "Omega transport";
  return e;
}

// ---------------------------------------------------------------- Lyapunov

LyapunovResult lyapunov_spectrum(const ModelSpec& m, const State& x0, double T, long steps,
                                 const IntegratorConfig& cfg) {
  if (!(T > 0) || steps < 4) {
    throw Error(ErrorCode::InvalidArgument, "Lyapunov run needs T > 0 and at least 4 QR intervals");
  }
  const int n = m.dim();
  const bool rot = m.has_lee();
  FlowIntegrator integ(m, cfg, true, rot);
  integ.reset(0.0, x0);

  constexpr int kSub = 10;
  const double interval = T / static_cast<double>(steps);
  Vec acc = Vec::Zero(n);
  std::vector<double> ts;
  std::vector<Vec> logs;
  std::vector<double> rs;
  ts.push_back(0.0);
  logs.push_back(Vec::Zero(n));
  rs.push_back(0.0);
  for (long j = 0; j < steps; ++j) {
    const double t_start = interval * static_cast<double>(j);
    for (int s = 1; s <= kSub; ++s) {
      const double t = s == kSub ? interval * static_cast<double>(j + 1)
                                 : t_start + interval * s / kSub;
      if (integ.advance_to(t) == TrajectoryStatus::BlowUp) {
        throw BlowUpError(integ.escape_time(), "orbit escapes during the Lyapunov run");
      }
      ts.push_back(t);
      logs.push_back(acc + log_r_diagonal(integ.frame()));
      rs.push_back(rot ? integ.rotation() : 0.0);
    }
    const Mat frame = integ.frame();
    acc += log_r_diagonal(frame);
    const Mat q = orthonormal_q(frame);
    integ.reset(integ.time(), integ.raw_state(), &q, rot ? integ.rotation() : 0.0);
  }

  // Regression over [a T, b T].
  auto window = [&](double a, double b, std::vector<double>& chi, double& r_slope) {
    std::vector<double> tw;
    std::vector<std::vector<double>> yw(static_cast<std::size_t>(n));
    std::vector<double> rw;
    for (std::size_t k = 0; k < ts.size(); ++k) {
      if (ts[k] < a * T - 1e-12 || ts[k] > b * T + 1e-12) continue;
      tw.push_back(ts[k]);
      for (int i = 0; i < n; ++i) yw[static_cast<std::size_t>(i)].push_back(logs[k][i]);
      rw.push_back(rs[k]);
    }
    chi.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) chi[static_cast<std::size_t>(i)] = regression_slope(tw, yw[static_cast<std::size_t>(i)]);
    std::sort(chi.begin(), chi.end(), std::greater<>());
    r_slope = rot ? regression_slope(tw, rw) : 0.0;
  };

  LyapunovResult res;
  double r_slope = 0.0, r_early = 0.0;
  std::vector<double> early;
  window(0.5, 1.0, res.exponents, r_slope);
  window(0.375, 0.75, early, r_early);

  res.converged = true;
  for (std::size_t i = 0; i < res.exponents.size(); ++i) {
    const double drift = std::abs(res.exponents[i] - early[i]);
    res.drift = std::max(res.drift, drift);
    if (drift > 0.1 * std::abs(res.exponents[i]) + 1e-3) res.converged = false;
  }
  if (m.flags.conformal_pair && rot) res.pairing_target = r_slope;
  else if (m.flags.exact_symplectic) res.pairing_target = -m.alpha;
  else res.pairing_target = kNaN;
  res.pairing_defect = pairing_defect_of(res.exponents, res.pairing_target);
  return res;
}

LyapunovResult lyapunov_spectrum_map(const ModelSpec& m, const State& x0, long n) {
  if (m.is_flow()) throw Error(ErrorCode::NotApplicable, "map version needs a map model");
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "need at least one iterate");
  const int dim = m.dim();
  Mat q = Mat::Identity(dim, dim);
  Vec acc = Vec::Zero(dim);
  State x = m.spec.normalize(x0);
  for (long k = 0; k < n; ++k) {
    const Mat f = m.map_jacobian(x) * q;
    acc += log_r_diagonal(f);
    q = orthonormal_q(f);
    x = m.map(x);
    if (!x.allFinite() || m.spec.line_norm(x) > 1e8) {
      throw BlowUpError(static_cast<double>(k + 1), "orbit escapes during the Lyapunov run");
    }
  }
  LyapunovResult res;
  for (int i = 0; i < dim; ++i) res.exponents.push_back(acc[i] / static_cast<double>(n));
  std::sort(res.exponents.begin(), res.exponents.end(), std::greater<>());
  res.converged = true;
  res.pairing_target = m.ratio_a ? std::log(*m.ratio_a) : kNaN;
  res.pairing_defect = pairing_defect_of(res.exponents, res.pairing_target);
  return res;
}

// ---------------------------------------------------------------- periodic

PeriodicOrbit find_periodic_orbit(const ModelSpec& m, const SectionSpec& sec, const State& guess,
                                  const IntegratorConfig& cfg) {
  const int n = m.dim();
  if (sec.normal.size() != n) throw Error(ErrorCode::DimensionMismatch, "section normal length");
  const double nn = sec.normal.squaredNorm();
  if (!(nn > 0)) throw Error(ErrorCode::InvalidArgument, "section functional is zero");
  m.spec.check_state(guess);

  // Project onto the section.
  State x = guess + sec.normal * ((sec.offset - sec.normal.dot(guess)) / nn);
  PoincareResult pr;
  Tangent F;
  int it = 0;
  for (;; ++it) {
    pr = poincare_return(m, sec, x, 1, cfg);
    F = m.spec.wrapped_difference(x, pr.crossings[0]);
    if (F.norm() < 1e-10) break;
    if (it >= 50) {
      throw Error(ErrorCode::NonConvergence,
                  "periodic orbit Newton did not converge in 50 iterations (residual " +
                      std::to_string(F.norm()) + ")");
    }
    Mat A(n + 1, n);
    A.topRows(n) = pr.return_jacobians[0] - Mat::Identity(n, n);
    A.row(n) = sec.normal.transpose();
    Vec b(n + 1);
    b.head(n) = -F;
    b[n] = 0.0;
    const Vec delta = A.completeOrthogonalDecomposition().solve(b);
    if (!delta.allFinite()) throw Error(ErrorCode::NonConvergence, "singular Newton system");
    x = x + delta;
  }

  PeriodicOrbit orbit;
  orbit.anchor = m.spec.normalize(x);
  orbit.period = pr.return_times[0];
  orbit.monodromy = pr.flow_jacobians[0];
  orbit.newton_iterations = it;
  orbit.return_residual = F.norm();
  orbit.mean_rotation = m.has_lee() ? pr.rotations[0] / orbit.period : 0.0;

  Eigen::EigenSolver<Mat> es(orbit.monodromy);
  for (Eigen::Index i = 0; i < n; ++i) orbit.multipliers.push_back(es.eigenvalues()[i]);
  std::sort(orbit.multipliers.begin(), orbit.multipliers.end(),
            [](const auto& a, const auto& b) {
              if (std::abs(a) != std::abs(b)) return std::abs(a) > std::abs(b);
              return a.imag() > b.imag();
            });
  orbit.unit_multiplier_defect = std::numeric_limits<double>::infinity();
  for (const auto& mu : orbit.multipliers) {
    orbit.unit_multiplier_defect = std::min(orbit.unit_multiplier_defect, std::abs(mu - 1.0));
  }

  double s = kNaN;
  if (m.flags.conformal_pair && m.has_lee()) s = orbit.mean_rotation;
  else if (m.flags.exact_symplectic) s = -m.alpha;
  orbit.pairing_target = std::exp(orbit.period * s);
  if (std::isfinite(s)) {
    // Partners sit symmetrically in the modulus ordering. For a complex
    // partner the conjugate may be the one that lands on the real target.
    for (int i = 0; i < n; ++i) {
      const auto a = orbit.multipliers[static_cast<std::size_t>(i)];
      const auto b = orbit.multipliers[static_cast<std::size_t>(n - 1 - i)];
      std::complex<double> prod = a * b;
      const std::complex<double> alt = a * std::conj(b);
      if (std::abs(std::arg(alt)) < std::abs(std::arg(prod))) prod = alt;
      orbit.pairing_modulus_defect =
          std::max(orbit.pairing_modulus_defect,
                   std::abs(std::abs(prod) - orbit.pairing_target) / orbit.pairing_target);
      orbit.pairing_argument_defect = std::max(orbit.pairing_argument_defect, std::abs(std::arg(prod)));
    }
  } else {
    orbit.pairing_modulus_defect = orbit.pairing_argument_defect = kNaN;
  }
  if (std::abs(orbit.mean_rotation) > 1e-6 && m.has_hamiltonian()) {
    orbit.h_anchor = std::abs(m.hamiltonian(orbit.anchor));
  }
  const auto tr = integrate_flow(m, orbit.anchor, 0.0, orbit.period, 65, cfg);
  orbit.samples = tr.states;
  return orbit;
}

// ---------------------------------------------------------------- isotropy

double isotropy_defect(const std::vector<State>& points, const std::vector<Mat>& frames,
                       const std::function<TwoForm(const State&)>& omega, IsotropyNormalization norm) {
  if (points.size() != frames.size()) {
    throw Error(ErrorCode::DimensionMismatch, "one frame per point is required");
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < points.size(); ++k) {
    Mat f = frames[k];
    if (f.cols() < 2) throw Error(ErrorCode::InvalidArgument, "isotropy needs frames with k >= 2 columns");
    if (norm == IsotropyNormalization::UnitColumns) {
      for (Eigen::Index j = 0; j < f.cols(); ++j) {
        const double c = f.col(j).norm();
        if (!(c > 0)) throw Error(ErrorCode::DegenerateForm, "zero frame column");
        f.col(j) /= c;
      }
    } else if (norm == IsotropyNormalization::Orthonormal) {
      f = orthonormal_q(f);
    }
    const TwoForm om = omega(points[k]);
    for (Eigen::Index i = 0; i < f.cols(); ++i) {
      for (Eigen::Index j = i + 1; j < f.cols(); ++j) {
        worst = std::max(worst, std::abs(om(f.col(i), f.col(j))));
      }
    }
  }
  return worst;
}

// ---------------------------------------------------------------- escape

EscapeStats escape_statistics(const ModelSpec& m, const Vec& lo, const Vec& hi, long N,
                              const std::vector<State>& points, unsigned jobs) {
  if (m.is_flow()) throw Error(ErrorCode::NotApplicable, "escape statistics need a map");
  if (!m.inverse) throw Error(ErrorCode::InverseUnavailable, "'" + m.name + "' has no inverse");
  const int n = m.dim();
  if (lo.size() != n || hi.size() != n) throw Error(ErrorCode::DimensionMismatch, "box bounds");
  if (!(lo.array() <= hi.array()).all()) throw Error(ErrorCode::InvalidArgument, "box has lo > hi");
  if (N < 0) throw Error(ErrorCode::InvalidArgument, "negative step count");

  auto inside = [&](const State& x) {
    for (int i = 0; i < n; ++i) {
      if (!(x[i] >= lo[i] && x[i] <= hi[i])) return false;
    }
    return true;
  };
  EscapeStats st;
  st.total = points.size();
  st.max_steps = N;
  st.lo = lo;
  st.hi = hi;
  st.escape_step.assign(points.size(), -1);
  parallel_for(points.size(), jobs, [&](std::size_t k) {
    State x = points[k];
    for (long s = 1; s <= N; ++s) {
      try {
        x = m.inverse(x);
      } catch (const BlowUpError&) {
        st.escape_step[k] = s;
        return;
      }
      if (!x.allFinite() || !inside(x)) {
        st.escape_step[k] = s;
        return;
      }
    }
  });
  for (long s : st.escape_step) st.escaped += s >= 0 ? 1 : 0;
  return st;
}

EscapeStats escape_statistics(const ModelSpec& m, const Vec& lo, const Vec& hi, long N,
                              std::size_t samples, std::uint64_t seed, const SamplePredicate& accept,
                              unsigned jobs) {
  const int n = m.dim();
  if (lo.size() != n || hi.size() != n) throw Error(ErrorCode::DimensionMismatch, "box bounds");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<State> points;
  points.reserve(samples);
  std::size_t attempts = 0;
  while (points.size() < samples) {
    if (++attempts > 1000 * (samples + 1)) {
      throw Error(ErrorCode::InvalidArgument, "sample predicate rejects almost everything");
    }
    State x(n);
    for (int i = 0; i < n; ++i) x[i] = lo[i] + (hi[i] - lo[i]) * u(rng);
    if (accept && !accept(x)) continue;
    points.push_back(x);
  }
  return escape_statistics(m, lo, hi, N, points, jobs);
}

// ---------------------------------------------------------------- loops

LoopTransport loop_transport(const ModelSpec& m, const std::vector<State>& loop, double t,
                             const IntegratorConfig& cfg) {
  if (!m.is_flow() || !m.flags.exact_symplectic || !m.liouville) {
    throw Error(ErrorCode::NotApplicable, "loop transport needs an exact conformally Hamiltonian flow");
  }
  LoopTransport res;
  res.i0 = loop_integral(m.spec, m.liouville, loop);  // validates closure and size
  res.expected = std::exp(-m.alpha * t);
  res.expected *= res.i0;

  const std::size_t N = loop.size() - 1;
  std::vector<Covector> pulled(N);
  std::vector<State> image(N + 1);
  const double times[2] = {0.0, t};
  parallel_for(N, 1, [&](std::size_t k) {
    if (t == 0.0) {
      pulled[k] = m.liouville(loop[k]);
      image[k] = loop[k];
      return;
    }
    const auto tr = integrate_variational(m, loop[k], times, cfg);
    if (tr.status != TrajectoryStatus::Completed) {
      throw BlowUpError(tr.t_escape, "loop point escapes during transport");
    }
    pulled[k] = tr.frames.back().transpose() * m.liouville(tr.states.back());
    image[k] = tr.states.back();
  });
  image[N] = image[0];
  double sum = 0.0;
  for (std::size_t k = 0; k < N; ++k) {
    const Tangent step = m.spec.wrapped_difference(loop[k], loop[k + 1]);
    const Covector& next = pulled[(k + 1) % N];
    sum += 0.5 * (pulled[k] + next).dot(step);
  }
  res.it = sum;
  try {
    res.it_image = loop_integral(m.spec, m.liouville, image);
  } catch (const Error&) {
    res.it_image = kNaN;
  }
  res.residual = std::abs(res.it - res.expected);
  return res;
}

CheckEntry loop_cohomology_check(const ModelSpec& m, const std::vector<State>& loop, double t,
                                 const IntegratorConfig& cfg) {
  const auto r = loop_transport(m, loop, t, cfg);
  CheckEntry e = make_check("loop-cohomology", &m, r.residual, 1e-7 * (1.0 + std::abs(r.i0)),
                            "closed-form");
  e.values["I0"] = r.i0;
  e.values["It"] = r.it;
  e.values["It_image"] = r.it_image;
  e.values["expected"] = r.expected;
  e.values["t"] = t;
  return e;
}

// ---------------------------------------------------------------- recurrence

RecurrenceResult recurrence_scan(const ModelSpec& m, const State& x0, double t_max, double dt,
                                 double delta, const IntegratorConfig& cfg) {
  if (!m.is_flow()) throw Error(ErrorCode::NotApplicable, "recurrence scan needs a flow");
  if (!(dt > 0) || !(t_max >= dt)) throw Error(ErrorCode::InvalidArgument, "need 0 < dt <= t_max");
  const double count = std::floor(t_max / dt + 1e-9);
  if (count > 1e7) throw Error(ErrorCode::InvalidArgument, "t_max / dt exceeds 1e7 samples");
  const long n = static_cast<long>(count);
  const State start = m.spec.normalize(x0);

  RecurrenceResult res;
  res.min_dist = std::numeric_limits<double>::infinity();
  res.first_below = kNaN;
  auto visit = [&](double t, const State& x) {
    const double d = torus_distance(m.spec, x, start);
    if (d < res.min_dist) {
      res.min_dist = d;
      res.argmin_t = t;
    }
    if (d < delta && std::isnan(res.first_below)) res.first_below = t;
  };
  if (m.closed_form_flow) {
    for (long k = 1; k <= n; ++k) {
      const double t = dt * static_cast<double>(k);
      visit(t, m.closed_form_flow(start, t));
    }
    return res;
  }
  FlowIntegrator integ(m, cfg, false, false);
  integ.reset(0.0, start);
  for (long k = 1; k <= n; ++k) {
    const double t = dt * static_cast<double>(k);
    if (integ.advance_to(t) != TrajectoryStatus::Completed) {
      throw BlowUpError(integ.escape_time(), "orbit escapes during the recurrence scan");
    }
    visit(t, m.spec.normalize(integ.raw_state()));
  }
  return res;
}

// ---------------------------------------------------------------- classify

const char* to_string(OrbitVerdict v) {
  switch (v) {
    case OrbitVerdict::Conservative: return "Conservative";
    case OrbitVerdict::Dissipative: return "Dissipative";
    case OrbitVerdict::Undetermined: return "Undetermined";
  }
  return "?";
}

OrbitClass classify_orbit(const ModelSpec& m, const State& x0, double T, const IntegratorConfig& cfg,
                          const ClassifyOptions& opt) {
  if (!m.is_flow() || !m.has_lee() || !m.has_hamiltonian()) {
    throw Error(ErrorCode::NotApplicable, "classification needs a flow with a Lee form and H");
  }
  if (!(T > 0) || opt.samples < 10) throw Error(ErrorCode::InvalidArgument, "need T > 0 and >= 10 samples");
  const int n = m.dim();
  const State start = m.spec.normalize(x0);
  FlowIntegrator integ(m, cfg, false, true);
  integ.reset(0.0, start);

  OrbitClass oc;
  oc.min_return = std::numeric_limits<double>::infinity();
  bool left = false;
  auto dist = [&](const Vec& z) { return torus_distance(m.spec, m.spec.normalize(z.head(n)), start); };

  // Distance to x0 minimised inside each accepted step, once the orbit has
  // left a 10 tol ball around it.
  auto on_step = [&](double t_prev, double t_new) {
    const Vec a = integ.previous_augmented();
    const Vec b = integ.augmented();
    oc.r_max_abs = std::max(oc.r_max_abs, std::abs(b[b.size() - 1]));
    const double db = dist(b);
    if (!left) {
      if (db > 10.0 * opt.return_tol) left = true;
      return false;
    }
    const double da = dist(a);
    const double chord = m.spec.wrapped_difference(a.head(n), b.head(n)).norm();
    double best = std::min(da, db);
    if (best <= 2.0 * chord + opt.return_tol) {
      const double h = t_new - t_prev;
      constexpr int kSub = 8;
      int arg = 0;
      std::vector<double> d(kSub + 1);
      for (int j = 0; j <= kSub; ++j) {
        d[static_cast<std::size_t>(j)] = j == 0 ? da : j == kSub ? db : dist(integ.state_after_prev(h * j / kSub));
        if (d[static_cast<std::size_t>(j)] < d[static_cast<std::size_t>(arg)]) arg = j;
      }
      double lo = h * std::max(0, arg - 1) / kSub, hi = h * std::min(kSub, arg + 1) / kSub;
      const double g = (std::sqrt(5.0) - 1.0) / 2.0;
      double c1 = hi - g * (hi - lo), c2 = lo + g * (hi - lo);
      double f1 = dist(integ.state_after_prev(c1)), f2 = dist(integ.state_after_prev(c2));
      for (int it = 0; it < 40 && hi - lo > 1e-14 * std::max(1.0, std::abs(t_new)); ++it) {
        if (f1 < f2) {
          hi = c2;
          c2 = c1;
          f2 = f1;
          c1 = hi - g * (hi - lo);
          f1 = dist(integ.state_after_prev(c1));
        } else {
          lo = c1;
          c1 = c2;
          f1 = f2;
          c2 = lo + g * (hi - lo);
          f2 = dist(integ.state_after_prev(c2));
        }
      }
      best = std::min({best, d[static_cast<std::size_t>(arg)], f1, f2});
    }
    oc.min_return = std::min(oc.min_return, best);
    if (best <= opt.return_tol) oc.returned = true;
    return false;
  };

  const auto times = sample_times(0.0, T, opt.samples);
  std::vector<double> rs(times.size()), hs(times.size());
  rs[0] = 0.0;
  hs[0] = m.hamiltonian(start);
  for (std::size_t k = 1; k < times.size(); ++k) {
    if (integ.advance_to(times[k], on_step) != TrajectoryStatus::Completed) {
      throw BlowUpError(integ.escape_time(), "orbit escapes during classification");
    }
    rs[k] = integ.rotation();
    hs[k] = m.hamiltonian(m.spec.normalize(integ.raw_state()));
  }

  const std::size_t half = times.size() / 2;
  oc.r_slope = regression_slope(std::vector<double>(times.begin() + static_cast<long>(half), times.end()),
                                std::vector<double>(rs.begin() + static_cast<long>(half), rs.end()));
  const std::size_t tail = std::max<std::size_t>(1, times.size() / 10);
  for (std::size_t k = times.size() - tail; k < times.size(); ++k) {
    oc.omega_H_max = std::max(oc.omega_H_max, std::abs(hs[k]));
  }
  for (double r : rs) oc.r_max_abs = std::max(oc.r_max_abs, std::abs(r));
  if (!std::isfinite(oc.min_return)) oc.min_return = kNaN;

  if (oc.r_slope <= opt.slope_threshold && oc.omega_H_max <= opt.h_threshold) {
    oc.verdict = OrbitVerdict::Dissipative;
  } else if (oc.r_max_abs <= opt.r_threshold && oc.returned) {
    oc.verdict = OrbitVerdict::Conservative;
  }
  return oc;
}

}  // namespace confdyn
