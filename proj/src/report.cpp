#include "confdyn/report.hpp"

#include "confdyn/error.hpp"

#include "json.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace confdyn {

namespace {

using nlohmann::json;

json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

json entry_json(const CheckEntry& e, bool timing) {
  json params = json::object();
  for (const auto& [k, v] : e.params) {
    if (v.size() == 1) {
      params[k] = number(v[0]);
    } else {
      json arr = json::array();
      for (double x : v) arr.push_back(number(x));
      params[k] = arr;
    }
  }
  json values = json::object();
  for (const auto& [k, v] : e.values) values[k] = number(v);
  json j{{"check", e.check},
          {"model", e.model},
          {"params", params},
          {"residual", number(e.residual)},
          {"tolerance", number(e.tolerance)},
          {"verdict", to_string(e.verdict)},
          {"provenance_tag", e.provenance},
          {"detail", e.detail},
          {"values", values}};
  // wall-clock time varies run to run; it travels with the timestamp
  if (timing) j["seconds"] = number(e.seconds);
  return j;
}

}  // namespace

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "PASS";
    case Verdict::Fail: return "FAIL";
    case Verdict::NegativeControl: return "PASS-as-negative-control";
  }
  return "?";
}

CheckEntry make_check(std::string check, const ModelSpec* model, double residual, double tolerance,
                      std::string provenance) {
  CheckEntry e;
  e.check = std::move(check);
  if (model) {
    e.model = model->name;
    e.params = model->params.values();
  }
  e.residual = residual;
  e.tolerance = tolerance;
  e.verdict = residual <= tolerance ? Verdict::Pass : Verdict::Fail;
  e.provenance = std::move(provenance);
  return e;
}

bool DiagnosticsReport::all_passed() const {
  for (const auto& e : entries) {
    if (!e.passed()) return false;
  }
  return true;
}

std::size_t DiagnosticsReport::passed_count() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.passed() ? 1 : 0;
  return n;
}

std::string json_for(const CheckEntry& e) { return entry_json(e, true).dump(2); }

std::string DiagnosticsReport::to_json(bool timestamp) const {
  json j;
  j["schema"] = 1;
  if (timestamp) j["generated_at"] = utc_now();
  json checks = json::array();
  for (const auto& e : entries) checks.push_back(entry_json(e, timestamp));
  j["checks"] = checks;
  j["passed"] = passed_count();
  j["total"] = entries.size();
  j["all_passed"] = all_passed();
  return j.dump(2) + "\n";
}

std::string DiagnosticsReport::table() const {
  std::ostringstream os;
  os << std::left << std::setw(44) << "check" << std::setw(22) << "model" << std::setw(13)
     << "residual" << std::setw(11) << "tolerance"
     << "verdict\n";
  for (const auto& e : entries) {
    std::ostringstream r, t;
    r << std::setprecision(3) << std::scientific << e.residual;
    t << std::setprecision(1) << std::scientific << e.tolerance;
    const std::string model = e.model.size() > 21 ? e.model.substr(0, 20) + "~" : e.model;
    os << std::left << std::setw(44) << e.check << std::setw(22) << model << std::setw(13) << r.str()
       << std::setw(11) << t.str() << to_string(e.verdict) << "\n";
  }
  os << passed_count() << "/" << entries.size() << " checks passed\n";
  return os.str();
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trajectory_csv(const Trajectory& tr) {
  std::ostringstream os;
  const std::size_t n = tr.states.empty() ? 0 : static_cast<std::size_t>(tr.states.front().size());
  os << "t";
  for (std::size_t i = 0; i < n; ++i) os << ",x" << i;
  if (tr.has_rotation()) os << ",r_accum";
  os << "\n";
  for (std::size_t k = 0; k < tr.size(); ++k) {
    os << format_double(tr.times[k]);
    for (std::size_t i = 0; i < n; ++i) os << "," << format_double(tr.states[k][static_cast<Eigen::Index>(i)]);
    if (tr.has_rotation()) os << "," << format_double(tr.r_accum[k]);
    os << "\n";
  }
  return os.str();
}

std::string trajectory_json(const Trajectory& tr, const std::string& model, bool timestamp) {
  json j;
  j["schema"] = 1;
  if (timestamp) j["generated_at"] = utc_now();
  j["model"] = model;
  j["status"] = to_string(tr.status);
  j["t_escape"] = number(tr.t_escape);
  j["backward"] = tr.backward;
  j["times"] = tr.times;
  json states = json::array();
  for (const auto& x : tr.states) states.push_back(std::vector<double>(x.data(), x.data() + x.size()));
  j["states"] = states;
  if (tr.has_frames()) {
    json frames = json::array();
    for (const auto& f : tr.frames) {
      json rows = json::array();
      for (Eigen::Index r = 0; r < f.rows(); ++r) {
        std::vector<double> row(static_cast<std::size_t>(f.cols()));
        for (Eigen::Index c = 0; c < f.cols(); ++c) row[static_cast<std::size_t>(c)] = f(r, c);
        rows.push_back(row);
      }
      frames.push_back(rows);
    }
    j["frames"] = frames;
  }
  if (tr.has_rotation()) j["r_accum"] = tr.r_accum;
  return j.dump(1) + "\n";
}

std::string points_csv(const std::vector<State>& points) {
  std::ostringstream os;
  const Eigen::Index n = points.empty() ? 0 : points.front().size();
  for (Eigen::Index i = 0; i < n; ++i) os << (i ? "," : "") << "x" << i;
  os << "\n";
  for (const auto& x : points) {
    for (Eigen::Index i = 0; i < n; ++i) os << (i ? "," : "") << format_double(x[i]);
    os << "\n";
  }
  return os.str();
}

void write_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Config, "cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw Error(ErrorCode::Config, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error(ErrorCode::Config, "cannot move output into place: " + target.string());
  }
}

std::string timestamp_line() { return "# generated " + utc_now() + "\n"; }

}  // namespace confdyn
