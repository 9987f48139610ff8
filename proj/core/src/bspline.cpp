#include "screg/bspline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace screg {

const char* knot_rule_code(KnotRule r) {
  switch (r) {
    case KnotRule::M1: return "m1";
    case KnotRule::M2: return "m2";
    case KnotRule::Explicit: return "explicit";
  }
  return "?";
}

const char* placement_code(KnotPlacement p) {
  return p == KnotPlacement::ES ? "es" : "esq";
}

int knot_count(std::size_t n, KnotRule rule, int explicit_k) {
  if (rule == KnotRule::Explicit) {
    if (explicit_k < 1) throw std::invalid_argument("explicit knot count must be >= 1");
    return explicit_k;
  }
  if (n < 2) throw std::invalid_argument("knot_count requires n >= 2");
  const double root = rule == KnotRule::M1 ? std::cbrt(static_cast<double>(n))
                                           : std::pow(static_cast<double>(n), 0.2);
  return static_cast<int>(std::floor(root + 1e-9)) + 1;
}

int SplineBasis::dimension() const {
  const int m = static_cast<int>(interior.size());
  return std::max(m + degree, 1);
}

std::vector<double> SplineBasis::knots() const {
  std::vector<double> t;
  t.reserve(interior.size() + 2 * (degree + 1));
  for (int i = 0; i <= degree; ++i) t.push_back(a);
  t.insert(t.end(), interior.begin(), interior.end());
  for (int i = 0; i <= degree; ++i) t.push_back(b);
  return t;
}

bool SplineBasis::eval_into(double x, double* out) const {
  const int d = degree;
  const int m = static_cast<int>(interior.size());
  const int nfull = m + d + 1;
  const int dim = dimension();
  const bool clamped = x < a || x > b;
  x = std::clamp(x, a, b);

  const std::vector<double> t = knots();
  // span k with t[k] <= x < t[k+1]; x = b falls in the last non-empty span so
  // the basis is right-continuous at b.
  int k = d;
  if (x >= b) {
    k = nfull - 1;
  } else {
    k = static_cast<int>(std::upper_bound(t.begin(), t.end(), x) - t.begin()) - 1;
    k = std::clamp(k, d, nfull - 1);
  }

  // Cox-de Boor triangle: values of the d+1 basis members active on the span.
  std::vector<double> N(d + 1, 0.0), left(d + 1), right(d + 1);
  N[0] = 1.0;
  for (int j = 1; j <= d; ++j) {
    left[j] = x - t[k + 1 - j];
    right[j] = t[k + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double den = right[r + 1] + left[j - r];
      const double temp = den != 0.0 ? N[r] / den : 0.0;  // 0/0 term evaluates to 0
      N[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    N[j] = saved;
  }

  std::vector<double> full(nfull, 0.0);
  for (int r = 0; r <= d; ++r) full[k - d + r] = N[r];

  if (dim == nfull) {
    std::copy(full.begin(), full.end(), out);
  } else {
    out[0] = full[0] + full[1];
    for (int j = 1; j < dim; ++j) out[j] = full[j + 1];
  }
  return clamped;
}

std::vector<double> SplineBasis::eval(double x) const {
  std::vector<double> out(dimension());
  eval_into(x, out.data());
  return out;
}

std::pair<double, double> SplineBasis::support(int j) const {
  const std::vector<double> t = knots();
  const int nfull = static_cast<int>(interior.size()) + degree + 1;
  if (j < 0 || j >= dimension()) throw std::out_of_range("basis index");
  if (dimension() == nfull) return {t[j], t[j + degree + 1]};
  // member 0 is the union of the two leftmost full-basis supports
  if (j == 0) return {t[0], std::max(t[degree + 1], t[degree + 2])};
  return {t[j + 1], t[j + degree + 2]};
}

void SplineBasis::center_on(std::span<const double> z) {
  const int dim = dimension();
  centering_offsets.assign(dim, 0.0);
  if (z.empty()) return;
  std::vector<double> buf(dim);
  for (double zi : z) {
    eval_into(zi, buf.data());
    for (int j = 0; j < dim; ++j) centering_offsets[j] += buf[j];
  }
  for (int j = 0; j < dim; ++j) centering_offsets[j] /= static_cast<double>(z.size());
}

SplineBasis place_knots(std::span<const double> z, int m, KnotPlacement placement, int degree) {
  if (degree < 0) throw std::invalid_argument("degree must be >= 0");
  if (m < 1) throw std::invalid_argument("interior knot count must be >= 1");
  if (z.size() < 2) throw std::invalid_argument("need at least two z values");
  const auto [mn, mx] = std::minmax_element(z.begin(), z.end());
  const double a = *mn, b = *mx;
  if (!(a < b)) throw std::invalid_argument("z is constant; no spline domain");

  SplineBasis basis;
  basis.degree = degree;
  basis.a = a;
  basis.b = b;

  std::vector<double> knots;
  knots.reserve(m);
  if (placement == KnotPlacement::ES) {
    for (int j = 1; j <= m; ++j) knots.push_back(a + j * (b - a) / (m + 1));
  } else {
    std::vector<double> s(z.begin(), z.end());
    std::sort(s.begin(), s.end());
    const std::size_t n = s.size();
    for (int j = 1; j <= m; ++j) {
      const double level = static_cast<double>(j) / (m + 1);
      const double h = (static_cast<double>(n) - 1.0) * level;
      const std::size_t lo = static_cast<std::size_t>(std::floor(h));
      const double frac = h - static_cast<double>(lo);
      const double q = lo + 1 < n ? s[lo] + frac * (s[lo + 1] - s[lo]) : s[lo];
      knots.push_back(q);
    }
  }

  // collapse duplicates and drop knots falling on the boundary
  std::sort(knots.begin(), knots.end());
  std::vector<double> kept;
  for (double k : knots) {
    if (!(k > a && k < b)) continue;
    if (!kept.empty() && k == kept.back()) continue;
    kept.push_back(k);
  }
  basis.collapsed_duplicates = kept.size() != static_cast<std::size_t>(m);
  basis.interior = std::move(kept);
  return basis;
}

SplineBasis build_basis(const Dataset& data, KnotRule rule, int explicit_k,
                        KnotPlacement placement, int degree) {
  std::vector<double> z;
  z.reserve(data.n());
  for (const auto& r : data.rows) z.push_back(r.z);
  const int m = knot_count(data.n(), rule, explicit_k);
  SplineBasis basis = place_knots(z, m, placement, degree);
  if (data.has_intercept) basis.center_on(z);
  return basis;
}

Eigen::MatrixXd pseudo_design(const Dataset& data, const SplineBasis& basis, int* clamped) {
  const std::size_t n = data.n();
  const std::size_t p = data.p();
  const int dim = basis.dimension();
  const bool centered = !basis.centering_offsets.empty();
  Eigen::MatrixXd X(n, p + dim);
  std::vector<double> buf(dim);
  int clamp_count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = data.rows[i];
    for (std::size_t j = 0; j < p; ++j) X(i, j) = row.x[j];
    clamp_count += basis.eval_into(row.z, buf.data()) ? 1 : 0;
    for (int j = 0; j < dim; ++j)
      X(i, p + j) = centered ? buf[j] - basis.centering_offsets[j] : buf[j];
  }
  if (clamped) *clamped = clamp_count;
  return X;
}

double psi_eval(std::span<const double> alpha, const SplineBasis& basis, double x) {
  const int dim = basis.dimension();
  if (static_cast<int>(alpha.size()) != dim)
    throw std::invalid_argument("alpha length does not match basis dimension");
  std::vector<double> buf(dim);
  basis.eval_into(x, buf.data());
  double v = 0.0;
  for (int j = 0; j < dim; ++j) v += alpha[j] * buf[j];
  if (!basis.centering_offsets.empty()) {
    for (int j = 0; j < dim; ++j) v -= alpha[j] * basis.centering_offsets[j];
  }
  return v;
}

}  // namespace screg
