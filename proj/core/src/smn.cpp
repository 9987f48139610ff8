#include "screg/smn.hpp"

#include <algorithm>
#include <atomic>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>

#include "screg/special.hpp"

namespace screg {

namespace sp = special;
using boost::math::quadrature::gauss_kronrod;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMinMass = 1e-300;

std::atomic<std::uint64_t> g_fallbacks{0};

double sq(double x) { return x * x; }

// Density of the mixing law at u (continuous families only).
double mixing_pdf(const SmnModel& m, double u) {
  switch (m.family) {
    case Family::StudentT: {
      const double a = 0.5 * m.nu;
      return std::exp(a * std::log(a) - sp::lgamma(a) + (a - 1.0) * std::log(u) - a * u);
    }
    case Family::Slash:
      return (u > 0.0 && u < 1.0) ? m.nu * std::pow(u, m.nu - 1.0) : 0.0;
    default:
      return 0.0;
  }
}

// Integrates g(u) against the mixing law by adaptive Gauss-Kronrod
// (discrete mixture handled exactly).
template <typename G>
double mix_integrate(const SmnModel& m, G&& g, double rel_tol = 1e-9) {
  switch (m.family) {
    case Family::Normal:
      return g(1.0);
    case Family::ContaminatedNormal:
      return m.nu * g(m.gamma) + (1.0 - m.nu) * g(1.0);
    case Family::StudentT: {
      auto f = [&](double u) { return g(u) * mixing_pdf(m, u); };
      return gauss_kronrod<double, 15>::integrate(f, 0.0, kInf, 12, rel_tol);
    }
    case Family::Slash: {
      auto f = [&](double u) { return g(u) * mixing_pdf(m, u); };
      return gauss_kronrod<double, 15>::integrate(f, 0.0, 1.0, 12, rel_tol);
    }
  }
  return 0.0;
}

double slash_cdf_std(double t, double nu) {
  // F_SL(t; nu) = Phi(t) - t / (2 nu) E_phi(0.5, t), with the slash E_phi.
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double a = nu + 0.5;
  const double ephi = nu * sp::kInvSqrt2Pi * sp::scaled_lower_gamma(a, 0.5 * t * t);
  const double v = sp::norm_cdf(t) - 0.5 * t / nu * ephi;
  return std::clamp(v, 0.0, 1.0);
}

}  // namespace

const char* family_code(Family f) {
  switch (f) {
    case Family::Normal: return "n";
    case Family::StudentT: return "t";
    case Family::Slash: return "sl";
    case Family::ContaminatedNormal: return "cn";
  }
  return "?";
}

Family family_from_code(const std::string& s) {
  std::string c;
  for (char ch : s) c.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  if (c == "n" || c == "normal") return Family::Normal;
  if (c == "t" || c == "student-t" || c == "student_t") return Family::StudentT;
  if (c == "sl" || c == "slash") return Family::Slash;
  if (c == "cn" || c == "contaminated-normal" || c == "contaminated_normal")
    return Family::ContaminatedNormal;
  throw std::invalid_argument("unknown family code: " + s);
}

void SmnModel::validate() const {
  switch (family) {
    case Family::Normal:
      return;
    case Family::StudentT:
    case Family::Slash:
      if (!(nu > 0.0) || !std::isfinite(nu))
        throw std::invalid_argument("nu must be positive");
      return;
    case Family::ContaminatedNormal:
      if (!(nu > 0.0 && nu < 1.0)) throw std::invalid_argument("CN requires nu in (0,1)");
      if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("CN requires gamma in (0,1)");
      return;
  }
}

int SmnModel::mixing_param_count() const {
  switch (family) {
    case Family::Normal: return 0;
    case Family::StudentT:
    case Family::Slash: return 1;
    case Family::ContaminatedNormal: return 2;
  }
  return 0;
}

ZeroMassError::ZeroMassError(double a, double b)
    : std::runtime_error("interval carries no probability mass at current parameters"),
      t1(a), t2(b) {}

double log_pdf(const SmnModel& m, double v, double mu, double sigma2) {
  m.validate();
  if (!(sigma2 > 0.0)) throw std::invalid_argument("sigma2 must be positive");
  const double sigma = std::sqrt(sigma2);
  const double t = (v - mu) / sigma;
  const double ls = std::log(sigma);
  switch (m.family) {
    case Family::Normal:
      return -0.5 * t * t - sp::kLogSqrt2Pi - ls;
    case Family::StudentT:
      return sp::student_t_log_pdf(t, m.nu) - ls;
    case Family::Slash:
      return std::log(e_phi(m, 0.5, t)) - ls;
    case Family::ContaminatedNormal: {
      const double la = std::log(m.nu) + 0.5 * std::log(m.gamma) - 0.5 * m.gamma * t * t;
      const double lb = std::log1p(-m.nu) - 0.5 * t * t;
      const double hi = std::max(la, lb);
      return hi + std::log(std::exp(la - hi) + std::exp(lb - hi)) - sp::kLogSqrt2Pi - ls;
    }
  }
  return -kInf;
}

double pdf(const SmnModel& m, double v, double mu, double sigma2) {
  return std::exp(log_pdf(m, v, mu, sigma2));
}

double cdf_std(const SmnModel& m, double t) {
  switch (m.family) {
    case Family::Normal:
      return sp::norm_cdf(t);
    case Family::StudentT:
      return sp::student_t_cdf(t, m.nu);
    case Family::Slash:
      return slash_cdf_std(t, m.nu);
    case Family::ContaminatedNormal:
      return m.nu * sp::norm_cdf(t * std::sqrt(m.gamma)) + (1.0 - m.nu) * sp::norm_cdf(t);
  }
  return 0.0;
}

double cdf(const SmnModel& m, double v, double mu, double sigma2) {
  m.validate();
  if (!(sigma2 > 0.0)) throw std::invalid_argument("sigma2 must be positive");
  if (std::isinf(v)) return v > 0 ? 1.0 : 0.0;
  return cdf_std(m, (v - mu) / std::sqrt(sigma2));
}

double cdf_std_diff(const SmnModel& m, double t1, double t2) {
  // All four members are symmetric about 0; reflect so the dominant
  // contribution is evaluated in the lower tail, away from cancellation at 1.
  double lo = t1, hi = t2;
  bool reflect = false;
  if (std::isfinite(lo) && std::isfinite(hi)) {
    if (lo + hi > 0.0) reflect = true;
  } else if (lo == -kInf && hi == kInf) {
    return 1.0;
  } else if (lo == -kInf) {
    reflect = false;
  } else {
    reflect = true;
  }
  double d = reflect ? cdf_std(m, -lo) - cdf_std(m, -hi) : cdf_std(m, hi) - cdf_std(m, lo);
  return std::max(d, 0.0);
}

double mixing_moment(const SmnModel& m, double r) {
  m.validate();
  if (r == 0.0) return 1.0;
  switch (m.family) {
    case Family::Normal:
      return 1.0;
    case Family::StudentT: {
      if (m.nu + 2.0 * r <= 0.0)
        throw OutsideClosedForm("E(U^r) for T requires nu + 2r > 0");
      return std::exp(sp::lgamma(0.5 * (m.nu + 2.0 * r)) - sp::lgamma(0.5 * m.nu) +
                      r * std::log(2.0 / m.nu));
    }
    case Family::Slash:
      if (m.nu + r <= 0.0) throw OutsideClosedForm("E(U^r) for SL requires nu + r > 0");
      return m.nu / (m.nu + r);
    case Family::ContaminatedNormal:
      return m.nu * std::pow(m.gamma, r) + (1.0 - m.nu);
  }
  return 1.0;
}

double e_phi(const SmnModel& m, double r, double h) {
  m.validate();
  if (std::isinf(h)) return 0.0;
  switch (m.family) {
    case Family::Normal:
      return sp::norm_pdf(h);
    case Family::StudentT: {
      if (m.nu + 2.0 * r <= 0.0)
        throw OutsideClosedForm("e_phi for T requires nu + 2r > 0");
      const double half_nu = 0.5 * m.nu;
      const double a = 0.5 * (m.nu + 2.0 * r);
      return sp::kInvSqrt2Pi * std::exp(sp::lgamma(a) - sp::lgamma(half_nu) +
                                        half_nu * std::log(half_nu) +
                                        a * std::log(2.0 / (h * h + m.nu)));
    }
    case Family::Slash: {
      const double a = m.nu + r;
      if (a <= 0.0) throw OutsideClosedForm("e_phi for SL requires nu + r > 0");
      return m.nu * sp::kInvSqrt2Pi * sp::scaled_lower_gamma(a, 0.5 * h * h);
    }
    case Family::ContaminatedNormal:
      return std::pow(m.gamma, r) * m.nu * sp::norm_pdf(h * std::sqrt(m.gamma)) +
             (1.0 - m.nu) * sp::norm_pdf(h);
  }
  return 0.0;
}

double e_Phi(const SmnModel& m, double r, double h) {
  m.validate();
  if (h == -kInf) return 0.0;
  if (h == kInf) return mixing_moment(m, r);
  switch (m.family) {
    case Family::Normal:
      return sp::norm_cdf(h);
    case Family::StudentT: {
      if (m.nu + 2.0 * r <= 0.0)
        throw OutsideClosedForm("e_Phi for T requires nu + 2r > 0");
      const double dof = m.nu + 2.0 * r;
      const double scale = std::exp(sp::lgamma(0.5 * dof) - sp::lgamma(0.5 * m.nu) +
                                    r * std::log(2.0 / m.nu));
      return scale * sp::student_t_cdf(h * std::sqrt(dof / m.nu), dof);
    }
    case Family::Slash: {
      if (m.nu + r <= 0.0) throw OutsideClosedForm("e_Phi for SL requires nu + r > 0");
      return m.nu / (m.nu + r) * slash_cdf_std(h, m.nu + r);
    }
    case Family::ContaminatedNormal:
      return m.nu * std::pow(m.gamma, r) * sp::norm_cdf(h * std::sqrt(m.gamma)) +
             (1.0 - m.nu) * sp::norm_cdf(h);
  }
  return 0.0;
}

double u_hat_uncensored(const SmnModel& m, double y, double mu, double sigma) {
  m.validate();
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  const double delta = sq((y - mu) / sigma);
  switch (m.family) {
    case Family::Normal:
      return 1.0;
    case Family::StudentT:
      return (m.nu + 1.0) / (m.nu + delta);
    case Family::Slash:
      // 2/delta * gamma(nu+1.5, delta/2) / gamma(nu+0.5, delta/2); in scaled
      // form the power factors cancel exactly.
      return sp::scaled_lower_gamma(m.nu + 1.5, 0.5 * delta) /
             sp::scaled_lower_gamma(m.nu + 0.5, 0.5 * delta);
    case Family::ContaminatedNormal: {
      // Divided through by exp{0.5 (1-gamma) delta} so large residuals cannot
      // overflow; the ratio tends to gamma for extreme outliers.
      const double e = std::exp(-0.5 * (1.0 - m.gamma) * delta);
      const double num = (1.0 - m.nu) * e + m.nu * std::pow(m.gamma, 1.5);
      const double den = (1.0 - m.nu) * e + m.nu * std::sqrt(m.gamma);
      return num / den;
    }
  }
  return 1.0;
}

namespace {

// Quadrature route for the truncated moments: integrates the exact
// conditional-normal truncated moments against the mixing law.
TruncatedMoments truncated_moments_quadrature(const SmnModel& m, double mu, double sigma,
                                              double t1, double t2, double mass) {
  auto piece = [&](double u, int k) {
    const double a = std::isinf(t1) ? -kInf : t1 * std::sqrt(u);
    const double b = std::isinf(t2) ? kInf : t2 * std::sqrt(u);
    const double pa = sp::norm_pdf(a), pb = sp::norm_pdf(b);
    const double P = sp::norm_cdf(b) - sp::norm_cdf(a);
    const double s = sigma / std::sqrt(u);
    if (k == 0) return u * P;
    const double m1 = mu * P + s * (pa - pb);
    if (k == 1) return u * m1;
    const double apa = std::isinf(a) ? 0.0 : a * pa;
    const double bpb = std::isinf(b) ? 0.0 : b * pb;
    const double m2 = mu * mu * P + 2.0 * mu * s * (pa - pb) + s * s * (P + apa - bpb);
    return u * m2;
  };
  TruncatedMoments out;
  out.prob_mass = mass;
  out.u_hat = mix_integrate(m, [&](double u) { return piece(u, 0); }) / mass;
  out.uy_hat = mix_integrate(m, [&](double u) { return piece(u, 1); }) / mass;
  out.uy2_hat = mix_integrate(m, [&](double u) { return piece(u, 2); }) / mass;
  return out;
}

}  // namespace

TruncatedMoments truncated_u_moments(const SmnModel& m, double mu, double sigma,
                                     double c1, double c2) {
  m.validate();
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  if (!(c1 < c2)) throw std::invalid_argument("requires c1 < c2");
  const double t1 = std::isinf(c1) ? -kInf : (c1 - mu) / sigma;
  const double t2 = std::isinf(c2) ? kInf : (c2 - mu) / sigma;
  const double mass = cdf_std_diff(m, t1, t2);
  if (!(mass > kMinMass)) throw ZeroMassError(t1, t2);

  TruncatedMoments out;
  out.prob_mass = mass;
  try {
    const double ePhi1 = e_Phi(m, 1.0, t1);
    const double ePhi2 = e_Phi(m, 1.0, t2);
    const double ephi1 = std::isinf(t1) ? 0.0 : e_phi(m, 0.5, t1);
    const double ephi2 = std::isinf(t2) ? 0.0 : e_phi(m, 0.5, t2);
    const double tphi1 = std::isinf(t1) ? 0.0 : t1 * ephi1;
    const double tphi2 = std::isinf(t2) ? 0.0 : t2 * ephi2;
    out.u_hat = (ePhi2 - ePhi1) / mass;
    const double eut = (ephi1 - ephi2) / mass;              // E(UT | .)
    const double eut2 = 1.0 + (tphi1 - tphi2) / mass;       // E(UT^2 | .)
    out.uy_hat = mu * out.u_hat + sigma * eut;
    out.uy2_hat = mu * mu * out.u_hat + 2.0 * mu * sigma * eut + sigma * sigma * eut2;
    if (out.u_hat > 0.0 && out.uy2_hat >= 0.0 && std::isfinite(out.uy_hat)) return out;
  } catch (const OutsideClosedForm&) {
    // fall through to quadrature
  }
  g_fallbacks.fetch_add(1, std::memory_order_relaxed);
  return truncated_moments_quadrature(m, mu, sigma, t1, t2, mass);
}

double truncated_mean(const SmnModel& m, double mu, double sigma, double c1, double c2) {
  m.validate();
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  if (!(c1 < c2)) throw std::invalid_argument("requires c1 < c2");
  const double t1 = std::isinf(c1) ? -kInf : (c1 - mu) / sigma;
  const double t2 = std::isinf(c2) ? kInf : (c2 - mu) / sigma;
  const double mass = cdf_std_diff(m, t1, t2);
  if (!(mass > kMinMass)) throw ZeroMassError(t1, t2);

  double value;
  try {
    const double ephi1 = std::isinf(t1) ? 0.0 : e_phi(m, -0.5, t1);
    const double ephi2 = std::isinf(t2) ? 0.0 : e_phi(m, -0.5, t2);
    value = mu + sigma * (ephi1 - ephi2) / mass;
  } catch (const OutsideClosedForm&) {
    g_fallbacks.fetch_add(1, std::memory_order_relaxed);
    // E(T 1{t1<=T<=t2}) = E( U^{-1/2} (phi(t1 sqrt U) - phi(t2 sqrt U)) ).
    auto g = [&](double u) {
      const double a = std::isinf(t1) ? 0.0 : sp::norm_pdf(t1 * std::sqrt(u));
      const double b = std::isinf(t2) ? 0.0 : sp::norm_pdf(t2 * std::sqrt(u));
      return (a - b) / std::sqrt(u);
    };
    value = mu + sigma * mix_integrate(m, g) / mass;
  }
  return std::clamp(value, c1, c2);
}

double sample_scale_factor(const SmnModel& m, std::mt19937_64& rng) {
  switch (m.family) {
    case Family::Normal:
      return 1.0;
    case Family::StudentT: {
      std::gamma_distribution<double> g(0.5 * m.nu, 2.0 / m.nu);
      return g(rng);
    }
    case Family::Slash: {
      std::uniform_real_distribution<double> u01(0.0, 1.0);
      double v = u01(rng);
      while (v <= 0.0) v = u01(rng);
      return std::pow(v, 1.0 / m.nu);  // Beta(nu, 1) via inverse cdf
    }
    case Family::ContaminatedNormal: {
      std::bernoulli_distribution bad(m.nu);
      return bad(rng) ? m.gamma : 1.0;
    }
  }
  return 1.0;
}

std::vector<double> sample(const SmnModel& m, double mu, double sigma2, std::size_t n,
                           std::mt19937_64& rng) {
  m.validate();
  if (!(sigma2 > 0.0)) throw std::invalid_argument("sigma2 must be positive");
  const double sigma = std::sqrt(sigma2);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = sample_scale_factor(m, rng);
    out[i] = mu + sigma * z(rng) / std::sqrt(u);
  }
  return out;
}

std::uint64_t quadrature_fallback_count() { return g_fallbacks.load(std::memory_order_relaxed); }

}  // namespace screg
