#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "screg/censored.hpp"
#include "screg/ecme.hpp"

namespace screg {

// Deterministic per-replication seed stream (splitmix64 over master/cell/rep).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t cell, std::uint64_t rep);

struct PsiSpec {
  enum class Kind { Zero, Exp3M1, SinPi, Jump, CosCurve };
  Kind kind = Kind::Zero;
  double xi = 0.0;  // Jump only

  double operator()(double z) const;
  static PsiSpec parse(const std::string& text);
  std::string label() const;
};

struct CovariateLaw {
  enum class Kind { Const, Normal, Bernoulli, Uniform };
  Kind kind = Kind::Const;
  double a = 1.0;  // Const value / Normal mean / Uniform lower / Bernoulli prob
  double b = 0.0;  // Normal sd / Uniform upper

  double draw(std::mt19937_64& rng) const;
  static CovariateLaw parse(const std::string& text);
  std::string label() const;
};

struct ZLaw {
  enum class Kind { Uniform, Normal, CorrNormal };
  Kind kind = Kind::Uniform;
  double a = 0.0, b = 1.0;  // Uniform bounds / Normal mean, sd
  double rho = 0.0;         // CorrNormal: correlation with covariate column `col`
  int col = 0;              // index into the non-intercept covariate columns

  static ZLaw parse(const std::string& text);
  std::string label() const;
};

// Error term sampled through the scale-mixture representation; the
// Laplace/Birnbaum-Saunders/GIG mixings are generators only, never fitted.
struct ErrorLaw {
  enum class Kind { Smn, LaplaceMix, BsMix, GigMix };
  Kind kind = Kind::Smn;
  SmnModel smn;
  double bs_shape = 2.0, bs_scale = 1.0;
  double gig_kappa = -0.5, gig_chi = 1.0, gig_psi = 3.0;

  double draw_scale_factor(std::mt19937_64& rng) const;
  static ErrorLaw parse(const std::string& text);
  std::string label() const;
};

double sample_gig(double kappa, double chi, double psi, std::mt19937_64& rng);
double sample_birnbaum_saunders(double shape, double scale, std::mt19937_64& rng);

struct CensoringSpec {
  enum class Kind { None, Interval, LeftProp, RightProp, LeftAt, RightAt };
  Kind kind = Kind::None;
  double p = 0.0;
  double c = 1.0;
  double threshold = 0.0;

  static CensoringSpec parse(const std::string& text);
  std::string label() const;
};

struct NoiseSpec {
  CovariateLaw y{CovariateLaw::Kind::Uniform, -5.0, 5.0};
  CovariateLaw x1{CovariateLaw::Kind::Uniform, -3.0, 2.0};
  CovariateLaw z{CovariateLaw::Kind::Uniform, -2.0, 8.0};
};

struct ScenarioSpec {
  std::string name = "study";
  std::size_t n = 100;
  bool intercept = false;
  std::vector<double> beta;  // leading entry is the intercept coefficient when declared
  std::vector<CovariateLaw> covariates;  // non-intercept columns
  ZLaw z;
  PsiSpec psi;
  ErrorLaw error;
  double sigma2 = 1.0;
  CensoringSpec censoring;
  int noise_count = 0;
  NoiseSpec noise;
  std::vector<double> deltas;  // max-observation perturbations; empty = none
  int replications = 1;
  std::uint64_t seed = 1;

  std::size_t p() const { return covariates.size() + (intercept ? 1 : 0); }
  void validate() const;
};

// What the generator knew: kept aside for the study metrics.
struct TruthRecord {
  std::vector<double> beta;
  double sigma2 = 1.0;
  std::vector<double> psi_values;
  std::vector<double> y;  // uncensored responses (noise rows included as-is)
};

Dataset gen_regression(const ScenarioSpec& spec, std::mt19937_64& rng,
                       TruthRecord* truth = nullptr);

// Non-informative interval construction: NC = floor(n p) + 1 rows drawn
// without replacement get (max(Y-U1, Y+U2-c), min(Y+U2, Y-U1+c)), U ~ U(0,c).
Dataset censor_interval(const Dataset& data, double p, double c, std::mt19937_64& rng);

Dataset censor_left_at(const Dataset& data, double threshold);
Dataset censor_right_at(const Dataset& data, double threshold);
// Threshold at the empirical quantile: left censors the lowest ceil(p n)
// responses, right the highest.
Dataset censor_left(const Dataset& data, double p);
Dataset censor_right(const Dataset& data, double p);

Dataset apply_censoring(const Dataset& data, const CensoringSpec& spec, std::mt19937_64& rng);

// Appends `count` exact rows with y, x1 and z from the noise laws and the
// remaining covariates from their scenario laws.
Dataset inject_noise(const Dataset& data, int count, const ScenarioSpec& spec,
                     std::mt19937_64& rng, TruthRecord* truth = nullptr);

// Replaces the largest exact response by (max - delta).
Dataset perturb_max(const Dataset& data, double delta);

// ---------------------------------------------------------------------------
// study driver

struct StudySpec {
  ScenarioSpec scenario;
  std::vector<Family> families{Family::Normal};
  KnotRule knot_rule = KnotRule::M2;
  int explicit_knots = 0;
  KnotPlacement placement = KnotPlacement::ESQ;
  int degree = 3;
  double epsilon = 1e-5;
  int k_max = 2000;

  EcmeConfig fit_config(Family f) const;
};

// One fitted replication of one family cell.
struct ReplicationOutcome {
  bool failed = false;
  std::string error;
  bool converged = false;
  double aic = 0.0, bic = 0.0;
  std::vector<double> beta_hat;
  double sigma2_hat = 0.0;
  double nu_hat = 0.0, gamma_hat = 0.0;
  double iabias_sum = 0.0;  // (1/n) sum_i |psi_hat(z_i) - psi(z_i)|
  double mise_sum = 0.0;    // (1/n) sum_i (psi_hat(z_i) - psi(z_i))^2
  double mae_abs_sum = 0.0; // sum over censored rows of |imputed - true|
  int mae_count = 0;
  std::vector<double> mmre_sums;  // per delta: sum of |relative changes|
  std::vector<int> mmre_terms;    // per delta: ratio terms actually included
};

struct CellReport {
  std::string scenario;
  Family family = Family::Normal;
  int replications = 0;
  int failures = 0;
  double mean_aic = 0.0, mean_bic = 0.0;
  std::vector<double> bias;  // per beta entry, sigma2 last
  std::vector<double> mse;
  double iabias = 0.0, mise = 0.0;
  double mae = 0.0;
  int mae_rows = 0;
  std::vector<double> deltas;
  std::vector<double> mmre;  // aligned with deltas
  int mmre_skipped = 0;
  double convergence_rate = 0.0;
};

struct StudyReport {
  std::string name;
  std::uint64_t seed = 0;
  int replications = 0;
  std::vector<CellReport> cells;
};

// Aggregates one family's replication outcomes (compensated summation; the
// result is independent of how replications were scheduled).
CellReport metrics(const std::vector<ReplicationOutcome>& outcomes, const ScenarioSpec& spec,
                   Family family);

StudyReport run_study(const StudySpec& spec, int parallelism = 1);

}  // namespace screg
