#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "screg/bspline.hpp"
#include "screg/censored.hpp"
#include "screg/smn.hpp"

namespace screg {

struct NuBounds {
  double lo = 0.0;
  double hi = 0.0;
};

// T below 1.1 makes the truncated moments fragile (the mean ceases to exist
// at 1); SL needs nu > 0.5 for the r = -0.5 imputation form.
NuBounds default_nu_bounds(Family f);

struct EcmeConfig {
  Family family = Family::Normal;
  KnotRule knot_rule = KnotRule::M2;
  int explicit_knots = 0;
  KnotPlacement placement = KnotPlacement::ESQ;
  int degree = 3;
  double epsilon = 1e-5;
  int k_max = 2000;
  NuBounds nu_bounds;  // {0,0} selects the family defaults
  NuBounds gamma_bounds{0.01, 0.99};
  std::uint64_t seed = 0;

  void validate() const;
  NuBounds resolved_nu_bounds() const;
};

struct FitDiagnostics {
  bool rank_deficient = false;
  bool sigma2_floored = false;
  bool nu_at_bound = false;
  bool loglik_decreased = false;
  bool zero_mass_at_eval = false;
  int zero_mass_widenings = 0;
  int clamped_z = 0;
  std::uint64_t quadrature_fallbacks = 0;
};

struct FitResult {
  Eigen::VectorXd beta;   // linear coefficients (p)
  Eigen::VectorXd alpha;  // spline coefficients (basis dimension)
  double sigma2 = 1.0;
  SmnModel model;
  double loglik = 0.0;
  std::vector<double> loglik_trace;
  int iterations = 0;
  bool converged = false;
  SplineBasis basis;
  double aic = 0.0;
  double bic = 0.0;
  FitDiagnostics diagnostics;

  Eigen::VectorXd beta_tilde() const;
};

// Per-observation conditional expectations of the latent scale factor.
struct EStepExpectations {
  Eigen::VectorXd u;    // E(U_i | .)
  Eigen::VectorXd uy;   // E(U_i Y_i | .)
  Eigen::VectorXd uy2;  // E(U_i Y_i^2 | .)
  Eigen::VectorXd b;    // CN only: P(bad point | .), empty otherwise
  int zero_mass_widenings = 0;
};

struct Theta {
  Eigen::VectorXd beta_tilde;
  double sigma2 = 1.0;
  SmnModel model;
};

// Observed-data log-likelihood; a censored row with vanished probability mass
// yields -inf and sets *zero_mass when provided.
double loglik(const Eigen::VectorXd& beta_tilde, double sigma2, const SmnModel& model,
              const Dataset& data, const Eigen::MatrixXd& design,
              bool* zero_mass = nullptr);

EStepExpectations e_step(const Eigen::VectorXd& beta_tilde, double sigma2,
                         const SmnModel& model, const Dataset& data,
                         const Eigen::MatrixXd& design);

struct CmResult {
  Eigen::VectorXd beta_tilde;
  double sigma2 = 1.0;
  bool rank_deficient = false;
  bool sigma2_floored = false;
};

CmResult cm_step(const EStepExpectations& e, const Eigen::MatrixXd& design);

// Updates the mixing parameters by bounded search on the observed
// log-likelihood (CN: nu from the E-step responsibilities, then gamma).
SmnModel cml_step(const Eigen::VectorXd& beta_tilde, double sigma2, const SmnModel& current,
                  const Dataset& data, const Eigen::MatrixXd& design,
                  const EStepExpectations& e, const EcmeConfig& cfg, bool* at_bound = nullptr);

// Near-normal starting values for the mixing parameters (nu = 20 for T and
// SL; CN starts at (0.1, 0.9)).
SmnModel family_start_model(Family family, const EcmeConfig& cfg);

// Classical least squares on the pseudo-design with censored rows replaced by
// midpoint / finite-endpoint surrogates; family starting values attached.
Theta initialize(const Dataset& data, const Eigen::MatrixXd& design, Family family,
                 const EcmeConfig& cfg);

FitResult fit(const Dataset& data, const EcmeConfig& cfg);
// Same, but starting from a caller-supplied parameter point (used by the
// model-selection grid to reuse the normal fit of each knot cell).
FitResult fit_from(const Dataset& data, const EcmeConfig& cfg, const Theta& start);

// Censored rows: E(Y | c1 <= Y <= c2) at the fitted parameters; exact rows
// pass through.
std::vector<double> impute(const FitResult& fit, const Dataset& data);

}  // namespace screg
