#include "confdyn/diagnostics.hpp"

#include "confdyn/error.hpp"
#include "confdyn/parallel.hpp"
#include "point_index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <sstream>

namespace confdyn {

namespace {

void require_cotangent(const ModelSpec& m, const char* what) {
  if (!m.is_flow() || !m.flags.cotangent_splittable || !m.has_hamiltonian()) {
    throw Error(ErrorCode::NotApplicable,
                std::string(what) + " needs a mechanical or convex model on T^d x R^d with H ('" +
                    m.name + "' is not one)");
  }
}

// Splitting needs splitting data; other models fall back to the reference
// integrator.
IntegratorConfig usable_config(const ModelSpec& m, const IntegratorConfig& cfg) {
  if (cfg.method == Method::ConformalSplitting && !m.splitting) return IntegratorConfig::reference(1e-9, 1e-11);
  return cfg;
}

// Flow x for time t; nullopt on escape. `check` is called at unit time
// checkpoints and at the end; a false return aborts with nullopt.
std::optional<State> flow_point(const ModelSpec& m, const State& x, double t, const IntegratorConfig& cfg,
                                const std::function<bool(const State&)>& check = {}) {
  FlowIntegrator integ(m, cfg, false, false);
  integ.reset(0.0, x);
  double now = 0.0;
  while (now < t) {
    now = std::min(t, now + 1.0);
    if (integ.advance_to(now) != TrajectoryStatus::Completed) return std::nullopt;
    if (check && !check(m.spec.normalize(integ.raw_state()))) return std::nullopt;
  }
  return m.spec.normalize(integ.raw_state());
}

// Real orthonormal basis of the eigenspace with Re(mu) > 0.
Mat unstable_basis(const Mat& jac, std::vector<std::complex<double>>* eigen_out) {
  Eigen::EigenSolver<Mat> es(jac);
  const auto vals = es.eigenvalues();
  const auto vecs = es.eigenvectors();
  std::vector<Vec> cols;
  for (Eigen::Index i = 0; i < vals.size(); ++i) {
    if (eigen_out) eigen_out->push_back(vals[i]);
    if (vals[i].real() <= 0) continue;
    if (vals[i].imag() == 0.0) {
      cols.push_back(vecs.col(i).real());
    } else if (vals[i].imag() > 0) {
      cols.push_back(vecs.col(i).real());
      cols.push_back(vecs.col(i).imag());
    }
  }
  if (cols.empty()) return Mat(jac.rows(), 0);
  Mat e(jac.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) e.col(static_cast<Eigen::Index>(j)) = cols[j];
  Eigen::HouseholderQR<Mat> qr(e);
  return qr.householderQ() * Mat::Identity(e.rows(), e.cols());
}

// Follows x for time t and records points at least `spacing` apart
// (sub-step positions from exact single steps). Stops at the first point
// outside the region.
std::vector<State> trace_orbit(const ModelSpec& m, const State& x, double t, const IntegratorConfig& cfg,
                               double spacing, const std::function<bool(const State&)>& inside) {
  const int n = m.dim();
  FlowIntegrator integ(m, cfg, false, false);
  integ.reset(0.0, x);
  std::vector<State> out{m.spec.normalize(x)};
  State last = x;
  while (integ.time() < t) {
    if (integ.step(t) != TrajectoryStatus::Completed) break;
    const Vec a = integ.previous_augmented();
    const Vec b = integ.augmented();
    const double chord = (b.head(n) - a.head(n)).norm();
    const int sub = std::max(1, static_cast<int>(std::ceil(chord / spacing)));
    const double h = integ.time() - integ.previous_time();
    for (int j = 1; j <= sub; ++j) {
      const Vec z = j == sub ? b : integ.state_after_prev(h * j / sub);
      if ((z.head(n) - last).norm() >= 0.5 * spacing) {
        last = z.head(n);
        const State y = m.spec.normalize(last);
        if (!inside(y)) return out;
        out.push_back(y);
      }
    }
  }
  return out;
}

}  // namespace

double trapping_level(const ModelSpec& m) {
  require_cotangent(m, "trapping level");
  const int d = m.dim() / 2;
  const int n = d == 1 ? 1024 : d == 2 ? 128 : 24;
  long total = 1;
  for (int i = 0; i < d; ++i) total *= n;

  auto h_at = [&](const Vec& q) {
    State x = State::Zero(2 * d);
    x.head(d) = q;
    return m.hamiltonian(x);
  };
  auto grid_point = [&](long idx, int per_axis, const Vec& origin, double width) {
    Vec q(d);
    for (int i = 0; i < d; ++i) {
      q[i] = origin[i] + width * static_cast<double>(idx % per_axis) / per_axis;
      idx /= per_axis;
    }
    return q;
  };

  double best = -std::numeric_limits<double>::infinity();
  Vec arg = Vec::Zero(d);
  for (long k = 0; k < total; ++k) {
    const Vec q = grid_point(k, n, Vec::Zero(d), 1.0);
    const double h = h_at(q);
    if (h > best) {
      best = h;
      arg = q;
    }
  }
  // One refinement: 64 per axis across the two neighbouring cells.
  const int r = 64;
  long rtotal = 1;
  for (int i = 0; i < d; ++i) rtotal *= r + 1;
  const Vec origin = arg.array() - 1.0 / n;
  for (long k = 0; k < rtotal; ++k) {
    long idx = k;
    Vec q(d);
    for (int i = 0; i < d; ++i) {
      q[i] = origin[i] + (2.0 / n) * static_cast<double>(idx % (r + 1)) / r;
      idx /= r + 1;
    }
    best = std::max(best, h_at(q));
  }
  return best;
}

std::vector<State> find_equilibria(const ModelSpec& m, const Vec& lo, const Vec& hi, int seeds_per_axis) {
  if (!m.is_flow()) throw Error(ErrorCode::NotApplicable, "equilibria of a map are not searched here");
  const int n = m.dim();
  if (lo.size() != n || hi.size() != n) throw Error(ErrorCode::DimensionMismatch, "box bounds");
  if (seeds_per_axis < 1) throw Error(ErrorCode::InvalidArgument, "need at least one seed per axis");
  long total = 1;
  for (int i = 0; i < n; ++i) total *= seeds_per_axis;

  auto inside = [&](const State& x) {
    for (int i = 0; i < n; ++i) {
      if (m.spec.is_angle(i)) continue;
      if (x[i] < lo[i] - 1e-9 || x[i] > hi[i] + 1e-9) return false;
    }
    return true;
  };

  std::vector<State> found;
  for (long k = 0; k < total; ++k) {
    long idx = k;
    State x(n);
    for (int i = 0; i < n; ++i) {
      const double u = (static_cast<double>(idx % seeds_per_axis) + 0.5) / seeds_per_axis;
      x[i] = lo[i] + (hi[i] - lo[i]) * u;
      idx /= seeds_per_axis;
    }
    bool ok = false;
    for (int it = 0; it < 200; ++it) {
      const Tangent f = m.field(x);
      const double fn = f.norm();
      if (!std::isfinite(fn)) break;
      if (fn < 1e-13) {
        ok = true;
        break;
      }
      const Vec delta = vector_field_jacobian(m, x).completeOrthogonalDecomposition().solve(-f);
      double step = 1.0;
      State next = x + delta;
      for (int back = 0; back < 20 && !(m.field(next).norm() < fn); ++back) {
        step *= 0.5;
        next = x + step * delta;
      }
      if (!(m.field(next).norm() < fn)) {
        ok = fn < 1e-11;
        break;
      }
      x = next;
      if (m.spec.line_norm(x) > 1e6) break;
    }
    if (!ok) continue;
    x = m.spec.normalize(x);
    if (!inside(x)) continue;
    bool dup = false;
    for (const auto& y : found) dup = dup || torus_distance(m.spec, x, y) < 1e-6;
    if (!dup) found.push_back(x);
  }
  return found;
}

AttractorEstimate attractor_estimate(const ModelSpec& m, const AttractorOptions& opt) {
  if (!m.is_flow()) throw Error(ErrorCode::NotApplicable, "attractor estimate needs a flow");
  if (opt.grid < 2 || !(opt.t_relax > 0) || !(opt.epsilon > 0) || !(opt.delta > 0)) {
    throw Error(ErrorCode::InvalidArgument, "attractor options out of range");
  }
  const int n = m.dim();
  const IntegratorConfig cfg = usable_config(m, opt.cfg);
  AttractorEstimate est;
  std::ostringstream detail;

  Vec lo(n), hi(n);
  std::function<bool(const State&)> in_region;
  if (opt.box) {
    lo = opt.box->first;
    hi = opt.box->second;
    if (lo.size() != n || hi.size() != n) throw Error(ErrorCode::DimensionMismatch, "box bounds");
    est.trap_level = std::numeric_limits<double>::quiet_NaN();
    in_region = [&, lo, hi](const State& x) {
      for (int i = 0; i < n; ++i) {
        if (m.spec.is_angle(i)) continue;
        if (x[i] < lo[i] || x[i] > hi[i]) return false;
      }
      return true;
    };
  } else {
    est.trap_level = trapping_level(m);
    const double level = est.trap_level + 1.0;
    const int d = n / 2;
    // Fibre box: double P until H > R + 1 on the faces |p_i| = P.
    double P = 1.0;
    for (int round = 0; round < 40; ++round, P *= 2.0) {
      bool ok = true;
      const int qn = d == 1 ? 64 : 12, fn = 9;
      long qtotal = 1, ftotal = 1;
      for (int i = 0; i < d; ++i) qtotal *= qn;
      for (int i = 0; i < d - 1; ++i) ftotal *= fn;
      for (long qi = 0; qi < qtotal && ok; ++qi) {
        State x(n);
        long idx = qi;
        for (int i = 0; i < d; ++i) {
          x[i] = static_cast<double>(idx % qn) / qn;
          idx /= qn;
        }
        for (int face = 0; face < d && ok; ++face) {
          for (double sign : {-1.0, 1.0}) {
            for (long fi = 0; fi < ftotal && ok; ++fi) {
              long f = fi;
              for (int i = 0; i < d; ++i) {
                if (i == face) {
                  x[d + i] = sign * P;
                } else {
                  x[d + i] = -P + 2.0 * P * static_cast<double>(f % fn) / (fn - 1);
                  f /= fn;
                }
              }
              if (!(m.hamiltonian(x) > level)) ok = false;
            }
          }
        }
      }
      if (ok) break;
    }
    for (int i = 0; i < d; ++i) {
      lo[i] = 0.0;
      hi[i] = 1.0;
      lo[d + i] = -P;
      hi[d + i] = P;
    }
    in_region = [&m, level](const State& x) { return m.hamiltonian(x) <= level; };
    detail << "U = {H <= " << level << "}, fibre box |p| <= " << P << "; ";
  }

  // Grid: i/grid on Angle axes, endpoints included on Line axes.
  std::vector<State> samples;
  long total = 1;
  for (int i = 0; i < n; ++i) total *= opt.grid;
  for (long k = 0; k < total; ++k) {
    long idx = k;
    State x(n);
    for (int i = 0; i < n; ++i) {
      const double j = static_cast<double>(idx % opt.grid);
      idx /= opt.grid;
      x[i] = m.spec.is_angle(i) ? lo[i] + (hi[i] - lo[i]) * j / opt.grid
                                : lo[i] + (hi[i] - lo[i]) * j / (opt.grid - 1);
    }
    x = m.spec.normalize(x);
    if (in_region(x)) samples.push_back(x);
  }
  if (samples.empty()) throw Error(ErrorCode::InvalidArgument, "no grid sample lies in the region");

  std::vector<std::optional<State>> image1(samples.size()), image2(samples.size());
  const std::function<bool(const State&)> box_check =
      opt.box ? in_region : std::function<bool(const State&)>{};
  parallel_for(samples.size(), opt.jobs, [&](std::size_t k) {
    image1[k] = flow_point(m, samples[k], opt.t_relax, cfg, box_check);
    if (image1[k]) image2[k] = flow_point(m, *image1[k], opt.t_relax, cfg, box_check);
  });
  std::size_t lost = 0;
  std::vector<State> pts1, pts2;
  for (std::size_t k = 0; k < samples.size(); ++k) {
    if (image1[k]) pts1.push_back(*image1[k]);
    if (image2[k]) pts2.push_back(*image2[k]);
    if (!image1[k] || !image2[k]) ++lost;
  }
  if (lost > 0) {
    est.trapping = false;
    detail << lost << " of " << samples.size() << (opt.box ? " samples left K or escaped; NotTrapping" : " samples escaped; the trapping argument fails") << "; ";
  }
  if (!opt.box) {
    std::size_t outside = 0;
    for (const auto& x : pts1) outside += in_region(x) ? 0 : 1;
    if (outside > 0) {
      est.trapping = false;
      detail << outside << " images left U; ";
    }
  }

  // Equilibria in the region and traces of their unstable directions.
  est.equilibria = find_equilibria(m, lo, hi, n <= 2 ? 8 : 5);
  est.equilibria.erase(std::remove_if(est.equilibria.begin(), est.equilibria.end(),
                                      [&](const State& x) { return !in_region(x); }),
                       est.equilibria.end());
  std::vector<State> traces;
  for (const auto& eq : est.equilibria) {
    const Mat e = unstable_basis(vector_field_jacobian(m, eq), nullptr);
    std::vector<Vec> dirs;
    for (Eigen::Index j = 0; j < e.cols(); ++j) {
      dirs.push_back(e.col(j));
      for (Eigen::Index k = j + 1; k < e.cols(); ++k) {
        dirs.push_back((e.col(j) + e.col(k)).normalized());
        dirs.push_back((e.col(j) - e.col(k)).normalized());
      }
    }
    for (const auto& v : dirs) {
      for (double sign : {-1.0, 1.0}) {
        auto tr = trace_orbit(m, eq + sign * opt.epsilon * v, opt.t_relax, cfg, opt.epsilon, in_region);
        traces.insert(traces.end(), tr.begin(), tr.end());
      }
    }
  }

  auto assemble = [&](const std::vector<State>& images) {
    std::vector<State> all = est.equilibria;
    all.insert(all.end(), traces.begin(), traces.end());
    all.insert(all.end(), images.begin(), images.end());
    return deduplicate(m.spec, all, opt.epsilon);
  };
  auto residual = [&](const std::vector<State>& cloud) {
    // cells a few times epsilon: the cloud is curve-like, so buckets stay small
    const detail::PointIndex index(m.spec, cloud, 10.0 * opt.epsilon);
    std::vector<double> r(cloud.size(), 0.0);
    parallel_for(cloud.size(), opt.jobs, [&](std::size_t k) {
      const auto y = flow_point(m, cloud[k], opt.delta, cfg);
      r[k] = y ? index.nearest(*y) : std::numeric_limits<double>::infinity();
    });
    double worst = 0.0;
    for (double v : r) worst = std::max(worst, v);
    return worst;
  };

  est.cloud = assemble(pts1);
  const auto cloud2 = assemble(pts2);
  est.residual_history = {residual(est.cloud), residual(cloud2)};
  est.invariance_residual = est.residual_history.front();
  est.iterations = 2;
  est.cells_t = deduplicate(m.spec, pts1, opt.epsilon).size();
  est.cells_2t = deduplicate(m.spec, pts2, opt.epsilon).size();
  est.shrinks = est.cells_2t <= est.cells_t;
  if (!est.shrinks) detail << "occupied cells grew under doubling; ";
  detail << est.equilibria.size() << " equilibria, " << samples.size() << " grid samples";
  est.detail = detail.str();
  return est;
}

std::vector<double> nearest_distances(const CoordinateSpec& spec, const std::vector<State>& queries,
                                      const std::vector<State>& set, double cell, unsigned jobs) {
  if (!(cell > 0)) throw Error(ErrorCode::InvalidArgument, "cell size must be positive");
  const detail::PointIndex index(spec, set, cell);
  std::vector<double> out(queries.size());
  parallel_for(queries.size(), jobs, [&](std::size_t k) { out[k] = index.nearest(queries[k]); });
  return out;
}

ManifoldCloud unstable_manifold_cloud(const ModelSpec& m, const State& fixed_point, double t_grow,
                                      const IntegratorConfig& cfg, double radius, double spacing) {
  if (!m.is_flow()) throw Error(ErrorCode::NotApplicable, "unstable manifolds are built for flows");
  if (!(t_grow >= 0) || !(radius > 0) || !(spacing > 0)) {
    throw Error(ErrorCode::InvalidArgument, "need t_grow >= 0, radius > 0, spacing > 0");
  }
  const int n = m.dim();
  const State x0 = m.spec.normalize(fixed_point);
  if (m.field(x0).norm() > 1e-8) {
    throw Error(ErrorCode::InvalidArgument, "point is not an equilibrium (|X| = " +
                                                std::to_string(m.field(x0).norm()) + ")");
  }
  ManifoldCloud out;
  const Mat jac = vector_field_jacobian(m, x0);
  const Mat e = unstable_basis(jac, &out.eigenvalues);
  for (const auto& mu : out.eigenvalues) {
    if (std::abs(mu.real()) <= 1e-8) {
      throw Error(ErrorCode::NonHyperbolic, "eigenvalue with zero real part at the equilibrium");
    }
  }
  out.unstable_dim = static_cast<int>(e.cols());
  if (out.unstable_dim == 0) {
    throw Error(ErrorCode::InvalidArgument, "equilibrium has no unstable direction");
  }

  out.points.push_back(x0);
  out.frames.push_back(e);
  if (out.unstable_dim == 1) {
    // Each branch is the orbit of x0 +- radius e up to O(radius^2).
    for (double sign : {-1.0, 1.0}) {
      const State seed = x0 + sign * radius * e.col(0);
      FlowIntegrator integ(m, cfg, true, false);
      integ.reset(0.0, seed);
      out.points.push_back(m.spec.normalize(seed));
      out.frames.push_back(e);
      State last = seed;
      while (integ.time() < t_grow) {
        const auto st = integ.step(t_grow);
        if (st == TrajectoryStatus::BlowUp) throw BlowUpError(integ.escape_time(), "unstable branch escapes");
        if (st != TrajectoryStatus::Completed) break;
        const Vec a = integ.previous_augmented();
        const Vec b = integ.augmented();
        const int sub = std::max(1, static_cast<int>(std::ceil((b.head(n) - a.head(n)).norm() / spacing)));
        const double h = integ.time() - integ.previous_time();
        for (int j = 1; j <= sub; ++j) {
          const Vec z = j == sub ? b : integ.state_after_prev(h * j / sub);
          if ((z.head(n) - last).norm() < 0.5 * spacing) continue;
          last = z.head(n);
          const Mat phi = Eigen::Map<const Mat>(z.data() + n, n, n);
          out.points.push_back(m.spec.normalize(last));
          out.frames.push_back(phi * e);
        }
      }
    }
    return out;
  }

  // k >= 2: log-spaced radii times directions in the unstable space.
  const int k = out.unstable_dim;
  std::vector<Vec> dirs;
  if (k == 2) {
    for (int j = 0; j < 32; ++j) {
      const double a = 2.0 * M_PI * j / 32.0;
      dirs.push_back(Vec{{std::cos(a), std::sin(a)}});
    }
  } else {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    for (int j = 0; j < 64; ++j) {
      Vec v(k);
      for (int i = 0; i < k; ++i) v[i] = g(rng);
      dirs.push_back(v.normalized());
    }
  }
  std::vector<State> seeds;
  for (int level = 0; level < 4; ++level) {
    const double r = radius * std::pow(0.1, level);
    for (const auto& v : dirs) seeds.push_back(x0 + r * (e * v));
  }
  // The plane D phi E is carried as an orthonormal basis, re-orthonormalized
  // every 0.25: |D phi| reaches 1e15 here and the raw product would drown
  // Omega on the plane in rounding.
  std::vector<State> pts(seeds.size());
  std::vector<Mat> frames(seeds.size());
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    FlowIntegrator integ(m, cfg, true, false);
    integ.reset(0.0, seeds[s]);
    Mat basis = e;
    double now = 0.0;
    while (now < t_grow) {
      now = std::min(t_grow, now + 0.25);
      if (integ.advance_to(now) == TrajectoryStatus::BlowUp) {
        throw BlowUpError(integ.escape_time(), "unstable disk escapes");
      }
      Eigen::HouseholderQR<Mat> qr(integ.frame() * basis);
      basis = qr.householderQ() * Mat::Identity(n, k);
      integ.reset(now, integ.raw_state());
    }
    pts[s] = m.spec.normalize(integ.raw_state());
    frames[s] = basis;
  }
  out.points.insert(out.points.end(), pts.begin(), pts.end());
  out.frames.insert(out.frames.end(), frames.begin(), frames.end());
  return out;
}

BasinGrid emit_basin_grid(const ModelSpec& m, const Vec& lo, const Vec& hi, int nx, int ny,
                          const std::vector<State>& targets, double t_relax, const IntegratorConfig& cfg,
                          double tol, unsigned jobs) {
  if (!m.is_flow() || m.dim() != 2) throw Error(ErrorCode::NotApplicable, "basin grids need a 2-dim flow");
  if (targets.empty()) throw Error(ErrorCode::InvalidArgument, "no attractor targets supplied");
  if (nx <= 0 || ny <= 0) throw Error(ErrorCode::InvalidArgument, "basin grid is empty");
  if (lo.size() != 2 || hi.size() != 2) throw Error(ErrorCode::DimensionMismatch, "grid bounds");
  for (const auto& t : targets) m.spec.check_state(t);
  const IntegratorConfig use = usable_config(m, cfg);

  BasinGrid g;
  g.nx = nx;
  g.ny = ny;
  g.lo = lo;
  g.hi = hi;
  g.targets = targets;
  g.labels.assign(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny), -2);
  parallel_for(g.labels.size(), jobs, [&](std::size_t idx) {
    const int i = static_cast<int>(idx % static_cast<std::size_t>(nx));
    const int j = static_cast<int>(idx / static_cast<std::size_t>(nx));
    const State x{{lo[0] + (hi[0] - lo[0]) * (i + 0.5) / nx, lo[1] + (hi[1] - lo[1]) * (j + 0.5) / ny}};
    const auto y = flow_point(m, m.spec.normalize(x), t_relax, use);
    if (!y) {
      g.labels[idx] = -1;
      return;
    }
    double best = tol;
    for (std::size_t t = 0; t < targets.size(); ++t) {
      const double d = torus_distance(m.spec, *y, m.spec.normalize(targets[t]));
      if (d <= best) {
        best = d;
        g.labels[idx] = static_cast<int>(t);
      }
    }
  });
  return g;
}

std::string basin_csv(const BasinGrid& g) {
  std::ostringstream os;
  os << "# basin grid " << g.nx << " x " << g.ny << ", x0 in [" << format_double(g.lo[0]) << ", "
     << format_double(g.hi[0]) << "], x1 in [" << format_double(g.lo[1]) << ", " << format_double(g.hi[1])
     << "], cell centres, row-major with x1 outer\n";
  os << "# labels: target index";
  for (std::size_t t = 0; t < g.targets.size(); ++t) {
    os << (t ? "; " : " ") << t << " = (" << format_double(g.targets[t][0]) << ", "
       << format_double(g.targets[t][1]) << ")";
  }
  os << "; -1 = escape; -2 = undetermined\n";
  os << "i,j,x0,x1,label\n";
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const double x0 = g.lo[0] + (g.hi[0] - g.lo[0]) * (i + 0.5) / g.nx;
      const double x1 = g.lo[1] + (g.hi[1] - g.lo[1]) * (j + 0.5) / g.ny;
      os << i << "," << j << "," << format_double(x0) << "," << format_double(x1) << ","
         << g.labels[static_cast<std::size_t>(j) * static_cast<std::size_t>(g.nx) + static_cast<std::size_t>(i)]
         << "\n";
    }
  }
  return os.str();
}

}  // namespace confdyn
