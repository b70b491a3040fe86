#pragma once

#include "confdyn/geometry.hpp"

#include <vector>

namespace confdyn::detail {

/// f(q) = c0 + sum_j a_j cos(2 pi k_j.q) + b_j sin(2 pi k_j.q) on T^d.
class TrigPoly {
 public:
  struct Term {
    std::vector<double> k;
    double a = 0.0;
    double b = 0.0;
  };

  TrigPoly() = default;
  TrigPoly(int d, double c0, std::vector<Term> terms);

  /// Parses the flattened layout (k_1..k_d, a, b) repeated.
  static TrigPoly from_flat(int d, double c0, const std::vector<double>& flat);

  double value(const Vec& q) const;
  Vec gradient(const Vec& q) const;
  Mat hessian(const Vec& q) const;

  int dim() const { return d_; }
  bool empty() const { return terms_.empty(); }
  const std::vector<Term>& terms() const { return terms_; }

 private:
  int d_ = 1;
  double c0_ = 0.0;
  std::vector<Term> terms_;
};

/// Vector field Y: T^d -> R^d with one TrigPoly per component.
class TrigField {
 public:
  TrigField() = default;
  explicit TrigField(std::vector<TrigPoly> components) : components_(std::move(components)) {}

  /// Flattened layout (component, k_1..k_d, a, b) repeated, plus constants.
  static TrigField from_flat(int d, const std::vector<double>& constants,
                             const std::vector<double>& flat);

  Vec value(const Vec& q) const;
  /// J(i, j) = dY_i / dq_j
  Mat jacobian(const Vec& q) const;
  /// sum_i w_i Hess(Y_i)
  Mat weighted_hessian(const Vec& q, const Vec& w) const;

  int dim() const { return static_cast<int>(components_.size()); }

 private:
  std::vector<TrigPoly> components_;
};

}  // namespace confdyn::detail
