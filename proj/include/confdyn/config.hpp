#pragma once

#include "confdyn/flow.hpp"
#include "confdyn/models.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace confdyn {

/// Flat key-value run description:
///
///   # comment
///   operation = simulate
///   model = circle-linear
///   [model]
///   alpha = 1
///   [run]
///   t = 5
///   x0 = (0.25, 1)
///
/// A `[section]` line prefixes the following keys with `section.`. Values are
/// numbers, bare or quoted words, vectors `(a, b)` and point lists
/// `(a, b), (c, d)`. Unknown keys are rejected with their line number.
class RunConfig {
 public:
  struct Value {
    std::string text;
    int line = 0;
  };

  static RunConfig parse(const std::string& text, const std::string& origin = "<config>");
  static RunConfig load(const std::string& path);

  const std::string& origin() const { return origin_; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  std::string str(const std::string& key, const std::string& fallback) const;
  std::string str(const std::string& key) const;
  double num(const std::string& key, double fallback) const;
  double num(const std::string& key) const;
  long integer(const std::string& key, long fallback) const;
  std::vector<double> vec(const std::string& key) const;
  std::vector<double> vec(const std::string& key, std::vector<double> fallback) const;
  std::vector<std::vector<double>> points(const std::string& key) const;

  void set(const std::string& key, const std::string& text);

  std::string operation() const;
  std::string model_name() const;
  /// Model parameters from the `model.` keys.
  ModelParams model_params() const;
  ModelSpec model() const;
  IntegratorConfig integrator() const;

  const std::map<std::string, Value>& values() const { return values_; }

 private:
  [[noreturn]] void fail(const std::string& key, const std::string& why) const;
  const Value& get(const std::string& key) const;

  std::string origin_;
  std::map<std::string, Value> values_;
};

/// Operations accepted in `operation`.
const std::vector<std::string>& config_operations();

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<unsigned> jobs;
  bool timestamp = true;
};

/// Executes the configured operation, writing files under the output
/// directory and a summary to `log`. Returns 0 on success, 2 when a
/// diagnostic check fails, 1 on any error (the message goes to `err`).
int run_config(const RunConfig& cfg, const RunOptions& opt, std::ostream& log, std::ostream& err);

/// Same, reading the file first; parse errors also return 1.
int run_config_file(const std::string& path, const RunOptions& opt, std::ostream& log, std::ostream& err);

}  // namespace confdyn
