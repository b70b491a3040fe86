#include "confdyn/config.hpp"

#include "confdyn/diagnostics.hpp"
#include "confdyn/error.hpp"
#include "confdyn/parallel.hpp"
#include "confdyn/report.hpp"
#include "confdyn/verify.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

namespace confdyn {

namespace {

const std::set<std::string>& schema() {
  static const std::set<std::string> keys = {
      "operation", "model",
      "integrator.method", "integrator.rel_tol", "integrator.abs_tol", "integrator.h",
      "integrator.blowup_threshold", "integrator.max_steps",
      "run.seed", "run.jobs", "run.t", "run.t0", "run.x0", "run.samples", "run.steps", "run.starts",
      "diagnose.check", "diagnose.tolerance", "diagnose.dt", "diagnose.delta", "diagnose.box_lo",
      "diagnose.box_hi", "diagnose.loop_level",
      "attractor.t_relax", "attractor.grid", "attractor.epsilon", "attractor.delta", "attractor.box_lo",
      "attractor.box_hi", "attractor.tolerance",
      "periodic.axis", "periodic.offset", "periodic.direction",
      "classify.slope_threshold", "classify.h_threshold", "classify.r_threshold", "classify.return_tol",
      "basin.lo", "basin.hi", "basin.nx", "basin.ny", "basin.targets", "basin.t_relax", "basin.tol",
      "verify.scope",
      "output.dir", "output.name"};
  return keys;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Drops a trailing comment that is not inside quotes.
std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') return s.substr(1, s.size() - 2);
  return s;
}

bool parse_double(const std::string& s, double& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  std::size_t used = 0;
  try {
    out = std::stod(t, &used);
  } catch (const std::exception&) {
    return false;
  }
  return used == t.size();
}

bool parse_vector(std::string s, std::vector<double>& out) {
  s = trim(s);
  if (!s.empty() && (s.front() == '(' || s.front() == '[')) {
    if (s.size() < 2 || (s.back() != ')' && s.back() != ']')) return false;
    s = s.substr(1, s.size() - 2);
  }
  out.clear();
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double v = 0.0;
    if (!parse_double(item, v)) return false;
    out.push_back(v);
  }
  return !out.empty();
}

State random_state(const CoordinateSpec& spec, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  State x(spec.dim());
  for (int i = 0; i < spec.dim(); ++i) {
    const double v = u(rng);
    x[i] = spec.is_angle(i) ? v : 2.0 * v - 1.0;
  }
  return x;
}

Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

}  // namespace

// ------------------------------------------------------------------ parsing

void RunConfig::fail(const std::string& key, const std::string& why) const {
  const auto it = values_.find(key);
  const std::string where = it == values_.end() ? origin_ : origin_ + ":" + std::to_string(it->second.line);
  throw Error(ErrorCode::Config, where + ": key '" + key + "': " + why);
}

RunConfig RunConfig::parse(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  cfg.origin_ = origin;
  std::istringstream in(text);
  std::string raw, section;
  int line = 0;
  auto error = [&](const std::string& why) {
    throw Error(ErrorCode::Config, origin + ":" + std::to_string(line) + ": " + why);
  };
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(strip_comment(raw));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') error("unterminated section header");
      section = trim(s.substr(1, s.size() - 2));
      if (section.empty()) error("empty section name");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) error("expected 'key = value'");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (key.empty()) error("missing key");
    if (value.empty()) error("key '" + key + "' has no value");
    const std::string full = section.empty() ? key : section + "." + key;
    if (cfg.values_.count(full)) error("duplicate key '" + full + "'");
    const bool model_param = full.rfind("model.", 0) == 0;
    if (!model_param && !schema().count(full)) error("unknown key '" + full + "'");
    cfg.values_[full] = {unquote(value), line};
  }

  // model parameters depend on the model name
  if (cfg.has("model")) {
    const std::string name = cfg.str("model");
    std::vector<std::string> keys;
    try {
      keys = model_parameter_keys(name);
    } catch (const Error&) {
      cfg.fail("model", "unknown model '" + name + "'");
    }
    for (const auto& [k, v] : cfg.values_) {
      if (k.rfind("model.", 0) != 0) continue;
      const std::string p = k.substr(6);
      if (std::find(keys.begin(), keys.end(), p) == keys.end()) {
        cfg.fail(k, "model '" + name + "' has no parameter '" + p + "'");
      }
      std::vector<double> tmp;
      if (!parse_vector(v.text, tmp)) cfg.fail(k, "expected a number or a vector");
    }
  } else {
    for (const auto& [k, v] : cfg.values_) {
      if (k.rfind("model.", 0) == 0) cfg.fail(k, "model parameters given without 'model'");
    }
  }
  if (cfg.has("operation")) {
    const auto& ops = config_operations();
    if (std::find(ops.begin(), ops.end(), cfg.str("operation")) == ops.end()) {
      cfg.fail("operation", "unknown operation '" + cfg.str("operation") + "'");
    }
  }
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::Config, "cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse(ss.str(), path);
}

const RunConfig::Value& RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw Error(ErrorCode::Config, origin_ + ": missing required key '" + key + "'");
  return it->second;
}

void RunConfig::set(const std::string& key, const std::string& text) { values_[key] = {text, 0}; }

std::string RunConfig::str(const std::string& key) const { return get(key).text; }

std::string RunConfig::str(const std::string& key, const std::string& fallback) const {
  return has(key) ? str(key) : fallback;
}

double RunConfig::num(const std::string& key) const {
  double v = 0.0;
  if (!parse_double(get(key).text, v)) fail(key, "expected a number, got '" + get(key).text + "'");
  return v;
}

double RunConfig::num(const std::string& key, double fallback) const { return has(key) ? num(key) : fallback; }

long RunConfig::integer(const std::string& key, long fallback) const {
  if (!has(key)) return fallback;
  const double v = num(key);
  if (v != std::floor(v) || std::abs(v) > 9e15) fail(key, "expected an integer");
  return static_cast<long>(v);
}

std::vector<double> RunConfig::vec(const std::string& key) const {
  std::vector<double> v;
  if (!parse_vector(get(key).text, v)) fail(key, "expected a vector like (a, b), got '" + get(key).text + "'");
  return v;
}

std::vector<double> RunConfig::vec(const std::string& key, std::vector<double> fallback) const {
  return has(key) ? vec(key) : fallback;
}

std::vector<std::vector<double>> RunConfig::points(const std::string& key) const {
  const std::string& s = get(key).text;
  std::vector<std::vector<double>> out;
  std::size_t pos = 0;
  while (true) {
    const auto open = s.find('(', pos);
    if (open == std::string::npos) break;
    const auto close = s.find(')', open);
    if (close == std::string::npos) fail(key, "unbalanced parentheses");
    std::vector<double> p;
    if (!parse_vector(s.substr(open, close - open + 1), p)) fail(key, "bad point '" + s.substr(open, close - open + 1) + "'");
    out.push_back(std::move(p));
    pos = close + 1;
  }
  if (out.empty()) fail(key, "expected a list of points like (a, b), (c, d)");
  return out;
}

std::string RunConfig::operation() const { return str("operation"); }

std::string RunConfig::model_name() const { return str("model"); }

ModelParams RunConfig::model_params() const {
  ModelParams p;
  for (const auto& [k, v] : values_) {
    if (k.rfind("model.", 0) == 0) p.set(k.substr(6), vec(k));
  }
  return p;
}

ModelSpec RunConfig::model() const { return instantiate_model(model_name(), model_params()); }

IntegratorConfig RunConfig::integrator() const {
  const std::string method = str("integrator.method", "reference");
  IntegratorConfig c;
  if (method == "reference") {
    c = IntegratorConfig::reference(num("integrator.rel_tol", 1e-10), num("integrator.abs_tol", 1e-12));
  } else if (method == "splitting") {
    c = IntegratorConfig::splitting(num("integrator.h", 0.01));
  } else if (method == "rk4") {
    c = IntegratorConfig::rk4(num("integrator.h", 0.01));
  } else {
    fail("integrator.method", "expected reference, splitting or rk4");
  }
  c.blowup_threshold = num("integrator.blowup_threshold", c.blowup_threshold);
  c.max_steps = integer("integrator.max_steps", c.max_steps);
  c.validate();
  return c;
}

const std::vector<std::string>& config_operations() {
  static const std::vector<std::string> ops = {"simulate", "diagnose", "attractor", "periodic",
                                               "classify", "verify",   "list-models", "basin"};
  return ops;
}

// --------------------------------------------------------------- operations

namespace {

struct Context {
  const RunConfig& cfg;
  std::uint64_t seed;
  unsigned jobs;
  bool timestamp;
  std::filesystem::path dir;
  std::ostream& log;

  std::string path(const std::string& fallback_name, const std::string& suffix) const {
    return (dir / (cfg.str("output.name", fallback_name) + suffix)).string();
  }
  std::string stamp() const { return timestamp ? timestamp_line() : std::string(); }

  void write_report(const DiagnosticsReport& r, const std::string& fallback_name) const {
    const std::string p = path(fallback_name, ".json");
    write_atomic(p, r.to_json(timestamp) + "\n");
    log << r.table() << "report: " << p << "\n";
  }
};

int exit_for(const DiagnosticsReport& r) { return r.all_passed() ? 0 : 2; }

State start_state(const Context& c, const ModelSpec& m) {
  const auto v = c.cfg.vec("run.x0");
  if (static_cast<int>(v.size()) != m.dim()) {
    throw Error(ErrorCode::DimensionMismatch, "run.x0 has " + std::to_string(v.size()) + " components, model '" +
                                                  m.name + "' needs " + std::to_string(m.dim()));
  }
  return to_vec(v);
}

int op_simulate(const Context& c) {
  const auto m = c.cfg.model();
  const State x0 = start_state(c, m);
  Trajectory tr;
  if (m.is_flow()) {
    const double t0 = c.cfg.num("run.t0", 0.0);
    const double t1 = c.cfg.num("run.t");
    tr = integrate_flow(m, x0, t0, t1, static_cast<std::size_t>(c.cfg.integer("run.samples", 101)), c.cfg.integrator());
  } else {
    tr = iterate_map(m, x0, c.cfg.integer("run.steps", 100));
  }
  const std::string p = c.path("trajectory", ".csv");
  write_atomic(p, c.stamp() + trajectory_csv(tr));
  c.log << "simulate " << m.name << ": " << tr.size() << " samples, status " << to_string(tr.status);
  if (tr.status == TrajectoryStatus::BlowUp) c.log << " at t = " << format_double(tr.t_escape);
  c.log << "\ntrajectory: " << p << "\n";
  return 0;
}

CheckEntry diagnose_conformality(const Context& c, const ModelSpec& m) {
  std::mt19937_64 rng(c.seed);
  const long n = c.cfg.integer("run.samples", 100);
  double lo = 1e300, hi = -1e300, ls = 0.0, sum = 0.0;
  for (long k = 0; k < n; ++k) {
    const State x = random_state(m.spec, rng);
    const auto est = conformality_ratio_estimate(m.map_jacobian(x), m.two_form(x), m.two_form(m.map(x)));
    lo = std::min(lo, est.ratio);
    hi = std::max(hi, est.ratio);
    ls = std::max(ls, est.residual);
    sum += est.ratio;
  }
  double residual = std::max(hi - lo, ls);
  if (m.ratio_a) residual = std::max({residual, std::abs(lo - *m.ratio_a), std::abs(hi - *m.ratio_a)});
  auto e = make_check("conformality", &m, residual, c.cfg.num("diagnose.tolerance", 1e-12), "closed-form");
  e.values = {{"ratio", sum / static_cast<double>(n)}, {"spread", hi - lo}, {"samples", double(n)}};
  if (m.ratio_a) e.values["expected_ratio"] = *m.ratio_a;
  return e;
}

CheckEntry diagnose_transport(const Context& c, const ModelSpec& m) {
  std::mt19937_64 rng(c.seed);
  const long n = c.cfg.integer("run.starts", 20);
  const double t = c.cfg.num("run.t", 1.0);
  double worst = 0.0;
  for (long k = 0; k < n; ++k) {
    const State x0 = c.cfg.has("run.x0") && k == 0 ? start_state(c, m) : random_state(m.spec, rng);
    const auto tr = integrate_variational(m, x0, 0.0, t, 11, c.cfg.integrator());
    const auto r = transport_residuals(m, tr);
    worst = std::max({worst, r.omega, r.hamiltonian_checked ? r.hamiltonian : 0.0});
  }
  auto e = make_check("transport", &m, worst, c.cfg.num("diagnose.tolerance", 1e-6), "closed-form");
  e.values = {{"starts", double(n)}, {"t", t}};
  return e;
}

CheckEntry diagnose_check(const Context& c, const std::string& check, const ModelSpec& m) {
  if (check == "conformality") {
    return m.is_flow() ? diagnose_transport(c, m) : diagnose_conformality(c, m);
  }
  if (check == "transport") return diagnose_transport(c, m);
  if (check == "lyapunov") {
    const LyapunovResult r = m.is_flow()
        ? lyapunov_spectrum(m, start_state(c, m), c.cfg.num("run.t", 200.0), c.cfg.integer("run.steps", 400),
                            c.cfg.integrator())
        : lyapunov_spectrum_map(m, start_state(c, m), c.cfg.integer("run.steps", 1000));
    auto e = make_check("lyapunov-pairing", &m, r.pairing_defect, c.cfg.num("diagnose.tolerance", 1e-3),
                        "closed-form");
    for (std::size_t i = 0; i < r.exponents.size(); ++i) e.values["chi" + std::to_string(i + 1)] = r.exponents[i];
    e.values["pairing_target"] = r.pairing_target;
    e.values["drift"] = r.drift;
    if (!r.converged) e.detail = "not converged";
    return e;
  }
  if (check == "loop") {
    if (m.dim() != 2) throw Error(ErrorCode::NotApplicable, "loop check needs a model on T x R");
    const double level = c.cfg.num("diagnose.loop_level", 1.0);
    std::vector<State> loop;
    for (int k = 0; k <= 256; ++k) loop.push_back(State{{wrap_unit(k / 256.0), level}});
    auto e = loop_cohomology_check(m, loop, c.cfg.num("run.t", 1.0), c.cfg.integrator());
    return e;
  }
  if (check == "recurrence") {
    const double delta = c.cfg.num("diagnose.delta", 1e-2);
    const auto r = recurrence_scan(m, start_state(c, m), c.cfg.num("run.t", 200.0), c.cfg.num("diagnose.dt", 0.01),
                                   delta, c.cfg.integrator());
    auto e = make_check("recurrence", &m, std::max(0.0, delta - r.min_dist), 0.0, "closed-form");
    e.values = {{"min_return_dist", r.min_dist}, {"argmin_t", r.argmin_t}, {"first_below", r.first_below}};
    return e;
  }
  if (check == "escape") {
    const ModelSpec f = m.is_flow() ? time_t_map(m, c.cfg.num("run.t", 1.0), c.cfg.integrator()) : m;
    const auto st = escape_statistics(f, to_vec(c.cfg.vec("diagnose.box_lo")), to_vec(c.cfg.vec("diagnose.box_hi")),
                                      c.cfg.integer("run.steps", 200),
                                      static_cast<std::size_t>(c.cfg.integer("run.samples", 1000)), c.seed, {}, c.jobs);
    const double frac = static_cast<double>(st.escaped) / static_cast<double>(std::max<std::size_t>(st.total, 1));
    auto e = make_check("escape", &m, 1.0 - frac, c.cfg.num("diagnose.tolerance", 0.01), "sampling");
    e.values = {{"escaped", double(st.escaped)}, {"total", double(st.total)}, {"max_steps", double(st.max_steps)}};
    return e;
  }
  throw Error(ErrorCode::Config, "diagnose.check must be one of conformality, transport, lyapunov, loop, "
                                 "recurrence, escape (got '" + check + "')");
}

int op_diagnose(const Context& c) {
  const auto m = c.cfg.model();
  const std::string check = c.cfg.str("diagnose.check");
  DiagnosticsReport r;
  r.entries.push_back(diagnose_check(c, check, m));
  for (const auto& [k, v] : r.entries.back().values) c.log << k << " = " << format_double(v) << "\n";
  c.write_report(r, "report");
  return exit_for(r);
}

std::optional<std::pair<Vec, Vec>> box_from(const RunConfig& cfg, const std::string& prefix) {
  if (!cfg.has(prefix + "box_lo") && !cfg.has(prefix + "box_hi")) return std::nullopt;
  return std::make_pair(to_vec(cfg.vec(prefix + "box_lo")), to_vec(cfg.vec(prefix + "box_hi")));
}

int op_attractor(const Context& c) {
  const auto m = c.cfg.model();
  AttractorOptions opt;
  opt.t_relax = c.cfg.num("attractor.t_relax", opt.t_relax);
  opt.grid = static_cast<int>(c.cfg.integer("attractor.grid", opt.grid));
  opt.epsilon = c.cfg.num("attractor.epsilon", opt.epsilon);
  opt.delta = c.cfg.num("attractor.delta", opt.delta);
  opt.box = box_from(c.cfg, "attractor.");
  if (c.cfg.has("integrator.method")) opt.cfg = c.cfg.integrator();
  opt.jobs = c.jobs;
  const auto est = attractor_estimate(m, opt);

  const std::string cloud_path = c.path("attractor", "_cloud.csv");
  write_atomic(cloud_path, c.stamp() + points_csv(est.cloud));
  auto e = make_check("attractor-invariance", &m, est.invariance_residual, c.cfg.num("attractor.tolerance", 1e-2),
                      "sampling");
  if (!est.trapping) e.verdict = Verdict::Fail;
  e.detail = est.detail;
  e.values = {{"trap_level", est.trap_level},
              {"cloud", double(est.cloud.size())},
              {"equilibria", double(est.equilibria.size())},
              {"cells_t", double(est.cells_t)},
              {"cells_2t", double(est.cells_2t)},
              {"trapping", est.trapping ? 1.0 : 0.0}};
  DiagnosticsReport r;
  r.entries.push_back(e);
  c.log << "cloud: " << cloud_path << " (" << est.cloud.size() << " points)\n" << est.detail << "\n";
  c.write_report(r, "attractor");
  return exit_for(r);
}

int op_periodic(const Context& c) {
  const auto m = c.cfg.model();
  const auto sec = SectionSpec::on_axis(m.dim(), static_cast<int>(c.cfg.integer("periodic.axis", 0)),
                                        c.cfg.num("periodic.offset", 0.0),
                                        static_cast<int>(c.cfg.integer("periodic.direction", 1)));
  const auto orb = find_periodic_orbit(m, sec, start_state(c, m), c.cfg.integrator());
  auto e = make_check("floquet-pairing", &m, std::max(orb.pairing_modulus_defect, orb.pairing_argument_defect),
                      c.cfg.num("diagnose.tolerance", 1e-6), "closed-form");
  e.values = {{"period", orb.period},
              {"mean_rotation", orb.mean_rotation},
              {"pairing_target", orb.pairing_target},
              {"return_residual", orb.return_residual},
              {"newton_iterations", double(orb.newton_iterations)}};
  for (std::size_t i = 0; i < orb.multipliers.size(); ++i) {
    e.values["mu" + std::to_string(i + 1) + "_re"] = orb.multipliers[i].real();
    e.values["mu" + std::to_string(i + 1) + "_im"] = orb.multipliers[i].imag();
  }
  if (orb.h_anchor) e.values["h_anchor"] = *orb.h_anchor;
  DiagnosticsReport r;
  r.entries.push_back(e);
  const std::string orbit_path = c.path("periodic", "_orbit.csv");
  write_atomic(orbit_path, c.stamp() + points_csv(orb.samples));
  c.log << "period " << format_double(orb.period) << ", orbit: " << orbit_path << "\n";
  c.write_report(r, "periodic");
  return exit_for(r);
}

int op_classify(const Context& c) {
  const auto m = c.cfg.model();
  std::vector<State> starts;
  if (c.cfg.has("run.x0")) {
    starts.push_back(start_state(c, m));
  } else {
    std::mt19937_64 rng(c.seed);
    const long n = c.cfg.integer("run.starts", 100);
    for (long k = 0; k < n; ++k) starts.push_back(random_state(m.spec, rng));
  }
  ClassifyOptions opt;
  opt.slope_threshold = c.cfg.num("classify.slope_threshold", opt.slope_threshold);
  opt.h_threshold = c.cfg.num("classify.h_threshold", opt.h_threshold);
  opt.r_threshold = c.cfg.num("classify.r_threshold", opt.r_threshold);
  opt.return_tol = c.cfg.num("classify.return_tol", opt.return_tol);
  const double T = c.cfg.num("run.t", 10.0);
  const auto integ = c.cfg.integrator();
  std::vector<OrbitClass> out(starts.size());
  parallel_for(starts.size(), c.jobs, [&](std::size_t k) { out[k] = classify_orbit(m, starts[k], T, integ, opt); });

  std::ostringstream csv;
  csv << c.stamp() << "index";
  for (int i = 0; i < m.dim(); ++i) csv << ",x" << i;
  csv << ",verdict,r_slope,omega_H_max,r_max_abs,min_return\n";
  std::map<std::string, std::size_t> counts;
  for (std::size_t k = 0; k < starts.size(); ++k) {
    csv << k;
    for (int i = 0; i < m.dim(); ++i) csv << "," << format_double(starts[k][i]);
    csv << "," << to_string(out[k].verdict) << "," << format_double(out[k].r_slope) << ","
        << format_double(out[k].omega_H_max) << "," << format_double(out[k].r_max_abs) << ","
        << format_double(out[k].min_return) << "\n";
    ++counts[to_string(out[k].verdict)];
  }
  const std::string p = c.path("classify", ".csv");
  write_atomic(p, csv.str());
  for (const auto& [v, n] : counts) c.log << v << ": " << n << " of " << starts.size() << "\n";
  c.log << "classes: " << p << "\n";
  return 0;
}

int op_verify(const Context& c) {
  VerifyContext ctx;
  ctx.seed = c.seed;
  ctx.jobs = c.jobs;
  const auto r = verify_suite(c.cfg.str("verify.scope", "all"), ctx);
  c.write_report(r, "verify");
  return exit_for(r);
}

int op_list_models(const Context& c) {
  for (const auto& name : registered_models()) {
    c.log << name;
    const auto keys = model_parameter_keys(name);
    for (std::size_t i = 0; i < keys.size(); ++i) c.log << (i ? ", " : "  [") << keys[i];
    c.log << (keys.empty() ? "\n" : "]\n");
  }
  return 0;
}

int op_basin(const Context& c) {
  const auto m = c.cfg.model();
  std::vector<State> targets;
  for (const auto& p : c.cfg.points("basin.targets")) targets.push_back(to_vec(p));
  const auto g = emit_basin_grid(m, to_vec(c.cfg.vec("basin.lo")), to_vec(c.cfg.vec("basin.hi")),
                                 static_cast<int>(c.cfg.integer("basin.nx", 200)),
                                 static_cast<int>(c.cfg.integer("basin.ny", 200)), targets,
                                 c.cfg.num("basin.t_relax", 60.0),
                                 c.cfg.has("integrator.method") ? c.cfg.integrator() : IntegratorConfig::splitting(0.01),
                                 c.cfg.num("basin.tol", 0.05), c.jobs);
  std::map<int, std::size_t> counts;
  for (int l : g.labels) ++counts[l];
  const std::string p = c.path("basin", ".csv");
  write_atomic(p, c.stamp() + basin_csv(g));
  for (const auto& [l, n] : counts) c.log << "label " << l << ": " << n << " cells\n";
  c.log << "basin grid: " << p << "\n";
  return 0;
}

}  // namespace

int run_config(const RunConfig& cfg, const RunOptions& opt, std::ostream& log, std::ostream& err) {
  try {
    const std::string op = cfg.operation();
    const long seed = cfg.integer("run.seed", 7);
    if (seed < 0) throw Error(ErrorCode::Config, "run.seed must be non-negative");
    const long jobs = cfg.integer("run.jobs", 1);
    if (jobs < 0) throw Error(ErrorCode::Config, "run.jobs must be non-negative");
    Context c{cfg,
              opt.seed.value_or(static_cast<std::uint64_t>(seed)),
              opt.jobs.value_or(static_cast<unsigned>(jobs)),
              opt.timestamp,
              opt.out_dir.value_or(cfg.str("output.dir", ".")),
              log};
    if (op != "list-models") std::filesystem::create_directories(c.dir);
    if (op == "simulate") return op_simulate(c);
    if (op == "diagnose") return op_diagnose(c);
    if (op == "attractor") return op_attractor(c);
    if (op == "periodic") return op_periodic(c);
    if (op == "classify") return op_classify(c);
    if (op == "verify") return op_verify(c);
    if (op == "list-models") return op_list_models(c);
    if (op == "basin") return op_basin(c);
    throw Error(ErrorCode::Config, "unknown operation '" + op + "'");
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

int run_config_file(const std::string& path, const RunOptions& opt, std::ostream& log, std::ostream& err) {
  try {
    return run_config(RunConfig::load(path), opt, log, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace confdyn
