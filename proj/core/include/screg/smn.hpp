#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace screg {

// Scale-mixture-of-normal family: V = mu + U^{-1/2} Z with Z ~ N(0, sigma2)
// and U a positive mixing factor whose law selects the member.
enum class Family { Normal, StudentT, Slash, ContaminatedNormal };

const char* family_code(Family f);          // "n", "t", "sl", "cn"
Family family_from_code(const std::string&);

struct SmnModel {
  Family family = Family::Normal;
  double nu = 0.0;     // T, SL: tail parameter; CN: outlier proportion
  double gamma = 0.0;  // CN only: contamination factor

  static SmnModel normal() { return {Family::Normal, 0.0, 0.0}; }
  static SmnModel student_t(double nu) { return {Family::StudentT, nu, 0.0}; }
  static SmnModel slash(double nu) { return {Family::Slash, nu, 0.0}; }
  static SmnModel contaminated_normal(double nu, double gamma) {
    return {Family::ContaminatedNormal, nu, gamma};
  }

  void validate() const;         // throws std::invalid_argument
  int mixing_param_count() const;  // s: N=0, T=SL=1, CN=2
};

// Interval carries no probability mass at the current parameters.
class ZeroMassError : public std::runtime_error {
 public:
  ZeroMassError(double t1, double t2);
  double t1, t2;
};

// Requested (r, parameter) combination has no closed form; callers fall back
// to quadrature.
class OutsideClosedForm : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

double pdf(const SmnModel&, double v, double mu, double sigma2);
double log_pdf(const SmnModel&, double v, double mu, double sigma2);
double cdf(const SmnModel&, double v, double mu, double sigma2);

// Standard-scale (mu=0, sigma2=1) cdf and a cancellation-safe F(t2) - F(t1).
double cdf_std(const SmnModel&, double t);
double cdf_std_diff(const SmnModel&, double t1, double t2);

// E(U^r phi(h sqrt(U))) and E(U^r Phi(h sqrt(U))); h may be +-infinity.
double e_phi(const SmnModel&, double r, double h);
double e_Phi(const SmnModel&, double r, double h);
double mixing_moment(const SmnModel&, double r);  // E(U^r)

// E(U | Y = y) at N(mu, sigma^2 / U) scale.
double u_hat_uncensored(const SmnModel&, double y, double mu, double sigma);

struct TruncatedMoments {
  double u_hat = 1.0;    // E(U | c1 <= Y <= c2)
  double uy_hat = 0.0;   // E(UY | .)
  double uy2_hat = 0.0;  // E(UY^2 | .)
  double prob_mass = 1.0;
};

TruncatedMoments truncated_u_moments(const SmnModel&, double mu, double sigma,
                                     double c1, double c2);

// E(Y | c1 <= Y <= c2) for imputation of censored readings.
double truncated_mean(const SmnModel&, double mu, double sigma, double c1, double c2);

// Draw of the latent scale factor U.
double sample_scale_factor(const SmnModel&, std::mt19937_64& rng);
std::vector<double> sample(const SmnModel&, double mu, double sigma2, std::size_t n,
                           std::mt19937_64& rng);

// Number of times a closed form was abandoned for adaptive quadrature since
// process start (recorded in fit diagnostics).
std::uint64_t quadrature_fallback_count();

}  // namespace screg
