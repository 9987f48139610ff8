#include "screg/ecme.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "screg/brent.hpp"
#include "screg/select.hpp"
#include "screg/special.hpp"

namespace screg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSigma2Floor = 1e-12;
constexpr double kNuTol = 1e-4;       // CML search tolerance on the parameter
constexpr double kDecreaseTol = 1e-8; // relative decrease treated as failure

// Residual summaries that stay fixed while the CML step profiles nu.
struct Standardized {
  std::vector<double> t_exact;
  std::vector<std::pair<double, double>> t_cens;  // standardized (t1, t2)
  double log_sigma = 0.0;
};

Standardized standardize(const Eigen::VectorXd& beta_tilde, double sigma2,
                         const Dataset& data, const Eigen::MatrixXd& design) {
  Standardized s;
  const double sigma = std::sqrt(sigma2);
  s.log_sigma = std::log(sigma);
  const Eigen::VectorXd mu = design * beta_tilde;
  s.t_exact.reserve(data.n());
  for (std::size_t i = 0; i < data.n(); ++i) {
    const auto& r = data.rows[i];
    if (!r.censored) {
      s.t_exact.push_back((r.y() - mu(i)) / sigma);
    } else {
      const double t1 = std::isinf(r.c1) ? -kInf : (r.c1 - mu(i)) / sigma;
      const double t2 = std::isinf(r.c2) ? kInf : (r.c2 - mu(i)) / sigma;
      s.t_cens.emplace_back(t1, t2);
    }
  }
  return s;
}

double std_log_pdf(const SmnModel& m, double t) {
  switch (m.family) {
    case Family::Normal:
      return -0.5 * t * t - special::kLogSqrt2Pi;
    case Family::StudentT:
      return special::student_t_log_pdf(t, m.nu);
    case Family::Slash:
      return std::log(e_phi(m, 0.5, t));
    case Family::ContaminatedNormal: {
      const double la = std::log(m.nu) + 0.5 * std::log(m.gamma) - 0.5 * m.gamma * t * t;
      const double lb = std::log1p(-m.nu) - 0.5 * t * t;
      const double hi = std::max(la, lb);
      return hi + std::log(std::exp(la - hi) + std::exp(lb - hi)) - special::kLogSqrt2Pi;
    }
  }
  return -kInf;
}

double loglik_standardized(const SmnModel& model, const Standardized& s,
                           bool* zero_mass = nullptr) {
  double ll = 0.0;
  for (double t : s.t_exact) ll += std_log_pdf(model, t) - s.log_sigma;
  for (const auto& [t1, t2] : s.t_cens) {
    const double mass = cdf_std_diff(model, t1, t2);
    if (!(mass > 0.0)) {
      if (zero_mass) *zero_mass = true;
      return -kInf;
    }
    ll += std::log(mass);
  }
  return ll;
}

}  // namespace

NuBounds default_nu_bounds(Family f) {
  switch (f) {
    case Family::Normal: return {0.0, 0.0};
    case Family::StudentT: return {1.1, 100.0};
    case Family::Slash: return {0.6, 100.0};
    case Family::ContaminatedNormal: return {0.01, 0.99};
  }
  return {0.0, 0.0};
}

void EcmeConfig::validate() const {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (k_max < 1) throw std::invalid_argument("k_max must be >= 1");
  if (degree < 0) throw std::invalid_argument("degree must be >= 0");
  if (knot_rule == KnotRule::Explicit && explicit_knots < 1)
    throw std::invalid_argument("explicit knot count must be >= 1");
  const NuBounds nb = resolved_nu_bounds();
  if (family == Family::StudentT || family == Family::Slash) {
    if (!(nb.lo > 0.0 && nb.lo < nb.hi))
      throw std::invalid_argument("nu bounds invalid for family");
  }
  if (family == Family::ContaminatedNormal) {
    if (!(nb.lo > 0.0 && nb.hi < 1.0 && nb.lo < nb.hi))
      throw std::invalid_argument("CN nu bounds must lie inside (0,1)");
    if (!(gamma_bounds.lo > 0.0 && gamma_bounds.hi < 1.0 && gamma_bounds.lo < gamma_bounds.hi))
      throw std::invalid_argument("CN gamma bounds must lie inside (0,1)");
  }
}

NuBounds EcmeConfig::resolved_nu_bounds() const {
  if (nu_bounds.lo == 0.0 && nu_bounds.hi == 0.0) return default_nu_bounds(family);
  return nu_bounds;
}

Eigen::VectorXd FitResult::beta_tilde() const {
  Eigen::VectorXd out(beta.size() + alpha.size());
  out << beta, alpha;
  return out;
}

double loglik(const Eigen::VectorXd& beta_tilde, double sigma2, const SmnModel& model,
              const Dataset& data, const Eigen::MatrixXd& design, bool* zero_mass) {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("sigma2 must be positive");
  if (design.rows() != static_cast<Eigen::Index>(data.n()) ||
      design.cols() != beta_tilde.size())
    throw std::invalid_argument("design dimensions do not match data/parameters");
  model.validate();
  return loglik_standardized(model, standardize(beta_tilde, sigma2, data, design), zero_mass);
}

EStepExpectations e_step(const Eigen::VectorXd& beta_tilde, double sigma2,
                         const SmnModel& model, const Dataset& data,
                         const Eigen::MatrixXd& design) {
  model.validate();
  const std::size_t n = data.n();
  const double sigma = std::sqrt(sigma2);
  const Eigen::VectorXd mu = design * beta_tilde;
  const bool cn = model.family == Family::ContaminatedNormal;

  EStepExpectations e;
  e.u.resize(n);
  e.uy.resize(n);
  e.uy2.resize(n);
  if (cn) e.b.resize(n);

  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = data.rows[i];
    if (!r.censored) {
      const double y = r.y();
      const double u = u_hat_uncensored(model, y, mu(i), sigma);
      e.u(i) = u;
      e.uy(i) = y * u;
      e.uy2(i) = y * y * u;
      if (cn) {
        const double delta = (y - mu(i)) / sigma * ((y - mu(i)) / sigma);
        const double num = model.nu * std::sqrt(model.gamma);
        const double den = num + (1.0 - model.nu) * std::exp(-0.5 * (1.0 - model.gamma) * delta);
        e.b(i) = std::clamp(num / den, 0.0, 1.0);
      }
      continue;
    }
    // censored row: widen a mass-starved interval instead of aborting the fit
    double c1 = r.c1, c2 = r.c2;
    TruncatedMoments tm;
    double pad = 1e-6 * sigma;
    for (;;) {
      try {
        tm = truncated_u_moments(model, mu(i), sigma, c1, c2);
        break;
      } catch (const ZeroMassError&) {
        ++e.zero_mass_widenings;
        if (!std::isinf(c1)) c1 -= pad;
        if (!std::isinf(c2)) c2 += pad;
        pad *= 4.0;
        if (pad > 1e12 * sigma) throw;
      }
    }
    e.u(i) = tm.u_hat;
    e.uy(i) = tm.uy_hat;
    e.uy2(i) = tm.uy2_hat;
    if (cn) {
      const double t1 = std::isinf(c1) ? -kInf : (c1 - mu(i)) / sigma;
      const double t2 = std::isinf(c2) ? kInf : (c2 - mu(i)) / sigma;
      const double sg = std::sqrt(model.gamma);
      const SmnModel normal = SmnModel::normal();
      const double num =
          model.nu * cdf_std_diff(normal, std::isinf(t1) ? -kInf : t1 * sg,
                                  std::isinf(t2) ? kInf : t2 * sg);
      const double den = cdf_std_diff(model, t1, t2);
      e.b(i) = den > 0.0 ? std::clamp(num / den, 0.0, 1.0) : model.nu;
    }
  }
  return e;
}

CmResult cm_step(const EStepExpectations& e, const Eigen::MatrixXd& design) {
  const Eigen::Index n = design.rows();
  const Eigen::Index q = design.cols();
  if (e.u.size() != n) throw std::invalid_argument("expectations do not match design");

  // beta solves (sum u x x^T) beta = sum (uy) x: a weighted least-squares
  // problem with responses uy/u and weights u.  A rank-revealing orthogonal
  // decomposition gives the minimum-norm solution when the centered spline
  // block makes the design deficient.
  const Eigen::ArrayXd su = e.u.array().sqrt();
  Eigen::MatrixXd A = su.matrix().asDiagonal() * design;
  Eigen::VectorXd c = e.uy.array() / su;

  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A);
  cod.setThreshold(1e-10);
  CmResult out;
  out.beta_tilde = cod.solve(c);
  out.rank_deficient = cod.rank() < q;

  const Eigen::VectorXd mu = design * out.beta_tilde;
  double s2 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    s2 += e.uy2(i) - 2.0 * e.uy(i) * mu(i) + e.u(i) * mu(i) * mu(i);
  s2 /= static_cast<double>(n);
  if (!(s2 > kSigma2Floor)) {
    s2 = kSigma2Floor;
    out.sigma2_floored = true;
  }
  out.sigma2 = s2;
  return out;
}

SmnModel cml_step(const Eigen::VectorXd& beta_tilde, double sigma2, const SmnModel& current,
                  const Dataset& data, const Eigen::MatrixXd& design,
                  const EStepExpectations& e, const EcmeConfig& cfg, bool* at_bound) {
  if (at_bound) *at_bound = false;
  if (current.family == Family::Normal) return current;

  const Standardized s = standardize(beta_tilde, sigma2, data, design);
  const NuBounds nb = cfg.resolved_nu_bounds();

  if (current.family == Family::StudentT || current.family == Family::Slash) {
    auto neg_ll = [&](double nu) {
      SmnModel m = current;
      m.nu = nu;
      return -loglik_standardized(m, s);
    };
    const ScalarMinResult r = minimize_scalar(neg_ll, nb.lo, nb.hi, kNuTol);
    SmnModel next = current;
    // keep the incumbent when the search landed marginally below it
    if (-r.fx >= -neg_ll(current.nu)) next.nu = r.x;
    if (at_bound) *at_bound = next.nu - nb.lo < 2 * kNuTol || nb.hi - next.nu < 2 * kNuTol;
    return next;
  }

  // CN: nu is the mean responsibility, gamma by bounded search.
  SmnModel next = current;
  if (e.b.size() > 0) next.nu = std::clamp(e.b.mean(), nb.lo, nb.hi);
  auto neg_ll_gamma = [&](double g) {
    SmnModel m = next;
    m.gamma = g;
    return -loglik_standardized(m, s);
  };
  const ScalarMinResult r =
      minimize_scalar(neg_ll_gamma, cfg.gamma_bounds.lo, cfg.gamma_bounds.hi, kNuTol);
  if (-r.fx >= -neg_ll_gamma(current.gamma)) next.gamma = r.x;
  if (at_bound)
    *at_bound = next.nu - nb.lo < 2 * kNuTol || nb.hi - next.nu < 2 * kNuTol ||
                next.gamma - cfg.gamma_bounds.lo < 2 * kNuTol ||
                cfg.gamma_bounds.hi - next.gamma < 2 * kNuTol;
  return next;
}

SmnModel family_start_model(Family family, const EcmeConfig& cfg) {
  switch (family) {
    case Family::Normal:
      return SmnModel::normal();
    case Family::StudentT:
      return SmnModel::student_t(
          std::clamp(20.0, cfg.resolved_nu_bounds().lo, cfg.resolved_nu_bounds().hi));
    case Family::Slash:
      return SmnModel::slash(
          std::clamp(20.0, cfg.resolved_nu_bounds().lo, cfg.resolved_nu_bounds().hi));
    case Family::ContaminatedNormal:
      return SmnModel::contaminated_normal(0.1, 0.9);
  }
  return SmnModel::normal();
}

Theta initialize(const Dataset& data, const Eigen::MatrixXd& design, Family family,
                 const EcmeConfig& cfg) {
  const Eigen::Index n = design.rows();
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = data.rows[i];
    if (!r.censored) {
      y(i) = r.y();
    } else if (std::isinf(r.c1)) {
      y(i) = r.c2;  // left-censored: finite endpoint
    } else if (std::isinf(r.c2)) {
      y(i) = r.c1;  // right-censored: finite endpoint
    } else {
      y(i) = 0.5 * (r.c1 + r.c2);
    }
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(design);
  cod.setThreshold(1e-10);
  Theta t;
  t.beta_tilde = cod.solve(y);
  const Eigen::VectorXd resid = y - design * t.beta_tilde;
  t.sigma2 = std::max(resid.squaredNorm() / static_cast<double>(n), kSigma2Floor);
  t.model = family_start_model(family, cfg);
  return t;
}

namespace {

FitResult run_ecme(const Dataset& data, const EcmeConfig& cfg, Theta theta,
                   SplineBasis basis, const Eigen::MatrixXd& design, int clamped_z) {
  FitResult out;
  out.basis = std::move(basis);
  out.diagnostics.clamped_z = clamped_z;
  const std::uint64_t fallbacks_before = quadrature_fallback_count();

  bool zero_mass = false;
  double ll_prev = loglik(theta.beta_tilde, theta.sigma2, theta.model, data, design, &zero_mass);
  out.diagnostics.zero_mass_at_eval |= zero_mass;
  out.loglik_trace.push_back(ll_prev);

  Theta best = theta;
  double best_ll = ll_prev;
  bool converged = false;
  int iterations = 0;
  bool nu_at_bound = false;

  for (int k = 0; k < cfg.k_max; ++k) {
    EStepExpectations e = e_step(theta.beta_tilde, theta.sigma2, theta.model, data, design);
    out.diagnostics.zero_mass_widenings += e.zero_mass_widenings;

    CmResult cm = cm_step(e, design);
    out.diagnostics.rank_deficient |= cm.rank_deficient;
    out.diagnostics.sigma2_floored |= cm.sigma2_floored;
    theta.beta_tilde = cm.beta_tilde;
    theta.sigma2 = cm.sigma2;

    theta.model = cml_step(theta.beta_tilde, theta.sigma2, theta.model, data, design, e, cfg,
                           &nu_at_bound);

    zero_mass = false;
    double ll = loglik(theta.beta_tilde, theta.sigma2, theta.model, data, design, &zero_mass);
    out.diagnostics.zero_mass_at_eval |= zero_mass;
    out.loglik_trace.push_back(ll);
    iterations = k + 1;

    if (ll > best_ll) {
      best_ll = ll;
      best = theta;
    }
    if (std::isfinite(ll) && std::isfinite(ll_prev)) {
      const double rel = (ll - ll_prev) / std::max(std::abs(ll_prev), 1e-100);
      if (rel <= cfg.epsilon) {
        if (rel < -kDecreaseTol) {
          out.diagnostics.loglik_decreased = true;
          converged = false;
        } else {
          converged = true;
        }
        break;
      }
    }
    ll_prev = ll;
  }

  theta = best;
  out.diagnostics.nu_at_bound = nu_at_bound;
  out.diagnostics.quadrature_fallbacks = quadrature_fallback_count() - fallbacks_before;

  const Eigen::Index p = static_cast<Eigen::Index>(data.p());
  out.beta = theta.beta_tilde.head(p);
  out.alpha = theta.beta_tilde.tail(theta.beta_tilde.size() - p);
  out.sigma2 = theta.sigma2;
  out.model = theta.model;
  out.loglik = best_ll;
  out.iterations = iterations;
  out.converged = converged;

  const Criteria ic = information_criteria(
      best_ll, static_cast<int>(out.basis.interior.size()), out.basis.degree,
      static_cast<int>(data.p()), theta.model.mixing_param_count(), data.n());
  out.aic = ic.aic;
  out.bic = ic.bic;
  return out;
}

}  // namespace

FitResult fit(const Dataset& data, const EcmeConfig& cfg) {
  cfg.validate();
  SplineBasis basis = build_basis(data, cfg.knot_rule, cfg.explicit_knots, cfg.placement,
                                  cfg.degree);
  if (data.n() < data.p() + basis.dimension() + 1)
    throw std::invalid_argument("dataset too small for the proposed basis: need at least p + (m+d) + 1 rows");
  int clamped = 0;
  const Eigen::MatrixXd design = pseudo_design(data, basis, &clamped);
  Theta start = initialize(data, design, cfg.family, cfg);
  return run_ecme(data, cfg, std::move(start), std::move(basis), design, clamped);
}

FitResult fit_from(const Dataset& data, const EcmeConfig& cfg, const Theta& start) {
  cfg.validate();
  start.model.validate();
  if (start.model.family != cfg.family)
    throw std::invalid_argument("starting point family does not match config");
  SplineBasis basis = build_basis(data, cfg.knot_rule, cfg.explicit_knots, cfg.placement,
                                  cfg.degree);
  if (data.n() < data.p() + basis.dimension() + 1)
    throw std::invalid_argument("dataset too small for the proposed basis: need at least p + (m+d) + 1 rows");
  int clamped = 0;
  const Eigen::MatrixXd design = pseudo_design(data, basis, &clamped);
  if (start.beta_tilde.size() != design.cols())
    throw std::invalid_argument("starting point dimension does not match design");
  return run_ecme(data, cfg, start, std::move(basis), design, clamped);
}

std::vector<double> impute(const FitResult& fit, const Dataset& data) {
  const Eigen::MatrixXd design = pseudo_design(data, fit.basis);
  if (design.cols() != fit.beta.size() + fit.alpha.size())
    throw std::invalid_argument("fit and dataset dimensions do not match");
  const Eigen::VectorXd mu = design * fit.beta_tilde();
  const double sigma = std::sqrt(fit.sigma2);
  std::vector<double> out(data.n());
  for (std::size_t i = 0; i < data.n(); ++i) {
    const auto& r = data.rows[i];
    out[i] = r.censored ? truncated_mean(fit.model, mu(i), sigma, r.c1, r.c2) : r.y();
  }
  return out;
}

}  // namespace screg
