#pragma once

// Scalar special functions used by the SMN distribution engine.  Backed by
// boost::math rational approximations; each is unit-tested against
// high-precision reference values (tests/test_special.cpp).

namespace screg::special {

inline constexpr double kInvSqrt2Pi = 0.3989422804014326779399461;
inline constexpr double kLogSqrt2Pi = 0.9189385332046727417803297;

double norm_pdf(double x);
double norm_cdf(double x);

// Regularized incomplete gamma: P(a,x) = gamma(a,x)/Gamma(a), Q = 1 - P.
double gamma_p(double a, double x);
double gamma_q(double a, double x);

// Regularized incomplete beta I_x(a,b).
double beta_inc(double a, double b, double x);

// gamma(a,x) / x^a with gamma the lower incomplete gamma; finite and smooth
// on x >= 0 (limit 1/a at x = 0), evaluated by series for small x.
double scaled_lower_gamma(double a, double x);

double student_t_pdf(double x, double nu);
double student_t_log_pdf(double x, double nu);
double student_t_cdf(double x, double nu);

double lgamma(double x);

}  // namespace screg::special
