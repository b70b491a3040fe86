#include "trig_poly.hpp"

#include "confdyn/error.hpp"

#include <cmath>
#include <numbers>

namespace confdyn::detail {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double phase(const std::vector<double>& k, const Vec& q) {
  double s = 0.0;
  for (std::size_t i = 0; i < k.size(); ++i) s += k[i] * q[static_cast<Eigen::Index>(i)];
  return kTwoPi * s;
}
}  // namespace

TrigPoly::TrigPoly(int d, double c0, std::vector<Term> terms)
    : d_(d), c0_(c0), terms_(std::move(terms)) {
  for (const auto& t : terms_) {
    if (static_cast<int>(t.k.size()) != d_) {
      throw Error(ErrorCode::InvalidArgument, "trigonometric term has wrong wave-vector length");
    }
  }
}

TrigPoly TrigPoly::from_flat(int d, double c0, const std::vector<double>& flat) {
  const std::size_t stride = static_cast<std::size_t>(d) + 2;
  if (flat.size() % stride != 0) {
    throw Error(ErrorCode::InvalidArgument,
                "trigonometric term list length must be a multiple of " + std::to_string(stride));
  }
  std::vector<Term> terms;
  for (std::size_t off = 0; off < flat.size(); off += stride) {
    Term t;
    t.k.assign(flat.begin() + static_cast<long>(off), flat.begin() + static_cast<long>(off) + d);
    t.a = flat[off + static_cast<std::size_t>(d)];
    t.b = flat[off + static_cast<std::size_t>(d) + 1];
    terms.push_back(std::move(t));
  }
  return TrigPoly(d, c0, std::move(terms));
}

double TrigPoly::value(const Vec& q) const {
  double v = c0_;
  for (const auto& t : terms_) {
    const double ph = phase(t.k, q);
    v += t.a * std::cos(ph) + t.b * std::sin(ph);
  }
  return v;
}

Vec TrigPoly::gradient(const Vec& q) const {
  Vec g = Vec::Zero(d_);
  for (const auto& t : terms_) {
    const double ph = phase(t.k, q);
    const double dph = kTwoPi * (-t.a * std::sin(ph) + t.b * std::cos(ph));
    for (int i = 0; i < d_; ++i) g[i] += dph * t.k[static_cast<std::size_t>(i)];
  }
  return g;
}

Mat TrigPoly::hessian(const Vec& q) const {
  Mat h = Mat::Zero(d_, d_);
  for (const auto& t : terms_) {
    const double ph = phase(t.k, q);
    const double d2 = -kTwoPi * kTwoPi * (t.a * std::cos(ph) + t.b * std::sin(ph));
    for (int i = 0; i < d_; ++i) {
      for (int j = 0; j < d_; ++j) {
        h(i, j) += d2 * t.k[static_cast<std::size_t>(i)] * t.k[static_cast<std::size_t>(j)];
      }
    }
  }
  return h;
}

TrigField TrigField::from_flat(int d, const std::vector<double>& constants,
                               const std::vector<double>& flat) {
  if (static_cast<int>(constants.size()) != d) {
    throw Error(ErrorCode::InvalidArgument, "vector-field constant part must have length d");
  }
  const std::size_t stride = static_cast<std::size_t>(d) + 3;
  if (flat.size() % stride != 0) {
    throw Error(ErrorCode::InvalidArgument,
                "vector-field term list length must be a multiple of " + std::to_string(stride));
  }
  std::vector<std::vector<TrigPoly::Term>> per(static_cast<std::size_t>(d));
  for (std::size_t off = 0; off < flat.size(); off += stride) {
    const double comp = flat[off];
    if (comp < 0 || comp >= d || comp != std::floor(comp)) {
      throw Error(ErrorCode::InvalidArgument, "vector-field term has bad component index");
    }
    TrigPoly::Term t;
    t.k.assign(flat.begin() + static_cast<long>(off) + 1,
               flat.begin() + static_cast<long>(off) + 1 + d);
    t.a = flat[off + 1 + static_cast<std::size_t>(d)];
    t.b = flat[off + 2 + static_cast<std::size_t>(d)];
    per[static_cast<std::size_t>(comp)].push_back(std::move(t));
  }
  std::vector<TrigPoly> comps;
  for (int i = 0; i < d; ++i) {
    comps.emplace_back(d, constants[static_cast<std::size_t>(i)],
                       std::move(per[static_cast<std::size_t>(i)]));
  }
  return TrigField(std::move(comps));
}

Vec TrigField::value(const Vec& q) const {
  Vec y(dim());
  for (int i = 0; i < dim(); ++i) y[i] = components_[static_cast<std::size_t>(i)].value(q);
  return y;
}

Mat TrigField::jacobian(const Vec& q) const {
  Mat j(dim(), dim());
  for (int i = 0; i < dim(); ++i) {
    j.row(i) = components_[static_cast<std::size_t>(i)].gradient(q).transpose();
  }
  return j;
}

Mat TrigField::weighted_hessian(const Vec& q, const Vec& w) const {
  Mat h = Mat::Zero(dim(), dim());
  for (int i = 0; i < dim(); ++i) h += w[i] * components_[static_cast<std::size_t>(i)].hessian(q);
  return h;
}

}  // namespace confdyn::detail
