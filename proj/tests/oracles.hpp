#pragma once

// Test-only oracles: independent numeric routes for every closed form under
// test.  Nothing here may call the closed-form implementations it checks.

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <vector>

#include "screg/smn.hpp"

namespace oracle {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline double phi(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }
inline double Phi(double x) {
  if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
  return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

// Density of the scale factor U (continuous families).
inline double mixing_density(const screg::SmnModel& m, double u) {
  using screg::Family;
  switch (m.family) {
    case Family::StudentT: {
      const double a = 0.5 * m.nu;
      return std::exp(a * std::log(a) - std::lgamma(a)) * std::pow(u, a - 1.0) *
             std::exp(-a * u);
    }
    case Family::Slash:
      return (u > 0.0 && u < 1.0) ? m.nu * std::pow(u, m.nu - 1.0) : 0.0;
    default:
      return 0.0;
  }
}

template <typename G>
double mix_expect(const screg::SmnModel& m, G&& g, double tol = 1e-11) {
  using boost::math::quadrature::gauss_kronrod;
  using screg::Family;
  switch (m.family) {
    case Family::Normal:
      return g(1.0);
    case Family::ContaminatedNormal:
      return m.nu * g(m.gamma) + (1.0 - m.nu) * g(1.0);
    case Family::StudentT:
      // u = s^2 removes the u^{nu/2-1} endpoint singularity for small nu
      return gauss_kronrod<double, 31>::integrate(
          [&](double s) {
            const double u = s * s;
            return g(u) * mixing_density(m, u) * 2.0 * s;
          },
          0.0, kInf, 15, tol);
    case Family::Slash:
      return gauss_kronrod<double, 31>::integrate(
          [&](double s) {
            const double u = s * s;
            return g(u) * mixing_density(m, u) * 2.0 * s;
          },
          0.0, 1.0, 15, tol);
  }
  return 0.0;
}

inline double e_phi_num(const screg::SmnModel& m, double r, double h) {
  if (std::isinf(h)) return 0.0;
  return mix_expect(m, [&](double u) { return std::pow(u, r) * phi(h * std::sqrt(u)); });
}

inline double e_Phi_num(const screg::SmnModel& m, double r, double h) {
  return mix_expect(m, [&](double u) { return std::pow(u, r) * Phi(h * std::sqrt(u)); });
}

inline double pdf_num(const screg::SmnModel& m, double v, double mu, double sigma2) {
  const double sigma = std::sqrt(sigma2);
  return mix_expect(m, [&](double u) {
    const double s = sigma / std::sqrt(u);
    return phi((v - mu) / s) / s;
  });
}

inline double cdf_num(const screg::SmnModel& m, double v, double mu, double sigma2) {
  if (std::isinf(v)) return v > 0 ? 1.0 : 0.0;
  const double sigma = std::sqrt(sigma2);
  const double t = (v - mu) / sigma;
  return mix_expect(m, [&](double u) { return Phi(t * std::sqrt(u)); });
}

struct TruncatedOracle {
  double u_hat, uy_hat, uy2_hat, mass;
};

// Fully numeric truncated moments: the inner integral over y is quadrature as
// well, so the route shares nothing with the Appendix-style assembly.
inline TruncatedOracle truncated_moments_num(const screg::SmnModel& m, double mu,
                                             double sigma, double c1, double c2) {
  using boost::math::quadrature::gauss_kronrod;
  auto inner = [&](double u, int k) {
    const double s = sigma / std::sqrt(u);
    auto f = [&](double y) {
      double yk = 1.0;
      for (int i = 0; i < k; ++i) yk *= y;
      return yk * phi((y - mu) / s) / s;
    };
    return gauss_kronrod<double, 31>::integrate(f, c1, c2, 14, 1e-10);
  };
  TruncatedOracle out{};
  out.mass = mix_expect(m, [&](double u) { return inner(u, 0); });
  out.u_hat = mix_expect(m, [&](double u) { return u * inner(u, 0); }) / out.mass;
  out.uy_hat = mix_expect(m, [&](double u) { return u * inner(u, 1); }) / out.mass;
  out.uy2_hat = mix_expect(m, [&](double u) { return u * inner(u, 2); }) / out.mass;
  return out;
}

inline double truncated_mean_num(const screg::SmnModel& m, double mu, double sigma,
                                 double c1, double c2) {
  using boost::math::quadrature::gauss_kronrod;
  auto f0 = [&](double y) { return pdf_num(m, y, mu, sigma * sigma); };
  auto f1 = [&](double y) { return y * pdf_num(m, y, mu, sigma * sigma); };
  const double mass = gauss_kronrod<double, 31>::integrate(f0, c1, c2, 12, 1e-9);
  const double num = gauss_kronrod<double, 31>::integrate(f1, c1, c2, 12, 1e-9);
  return num / mass;
}

// Textbook Cox-de Boor recursion, one basis member at a time.
inline double cox_de_boor(const std::vector<double>& t, int i, int d, double x) {
  if (d == 0) {
    const bool last = static_cast<std::size_t>(i + 1) == t.size() - 1 ||
                      t[i + 1] == t.back();
    if (last && x == t[i + 1] && t[i] < t[i + 1]) return 1.0;  // right-continuity at b
    return (x >= t[i] && x < t[i + 1]) ? 1.0 : 0.0;
  }
  double left = 0.0, right = 0.0;
  if (t[i + d] != t[i]) left = (x - t[i]) / (t[i + d] - t[i]) * cox_de_boor(t, i, d - 1, x);
  if (t[i + d + 1] != t[i + 1])
    right = (t[i + d + 1] - x) / (t[i + d + 1] - t[i + 1]) * cox_de_boor(t, i + 1, d - 1, x);
  return left + right;
}

inline double rel_err(double got, double want) {
  const double denom = std::max({std::fabs(got), std::fabs(want), 1e-300});
  return std::fabs(got - want) / denom;
}

// relative 1e-6 with a tiny absolute floor for values that cross zero
inline bool close_rel(double got, double want, double rel = 1e-6, double abs_floor = 1e-9) {
  return std::fabs(got - want) <= abs_floor || rel_err(got, want) <= rel;
}

}  // namespace oracle
