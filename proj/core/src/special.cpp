#include "screg/special.hpp"

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace screg::special {

double norm_pdf(double x) {
  if (std::isinf(x)) return 0.0;
  return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

double norm_cdf(double x) {
  if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
  return 0.5 * std::erfc(-x * 0.7071067811865475244);
}

double gamma_p(double a, double x) { return boost::math::gamma_p(a, x); }

double gamma_q(double a, double x) { return boost::math::gamma_q(a, x); }

double beta_inc(double a, double b, double x) { return boost::math::ibeta(a, b, x); }

double scaled_lower_gamma(double a, double x) {
  if (a <= 0.0) throw std::domain_error("scaled_lower_gamma: a must be positive");
  if (x < 0.0) throw std::domain_error("scaled_lower_gamma: x must be non-negative");
  if (x < a + 1.0) {
    // gamma(a,x)/x^a = e^{-x} sum_k x^k / (a (a+1) ... (a+k))
    double term = 1.0 / a;
    double sum = term;
    for (int k = 1; k < 500; ++k) {
      term *= x / (a + k);
      sum += term;
      if (term < sum * 1e-17) break;
    }
    return std::exp(-x) * sum;
  }
  // Away from the origin P(a,x) has no cancellation; undo the regularization.
  return std::exp(std::lgamma(a) + std::log(boost::math::gamma_p(a, x)) - a * std::log(x));
}

double student_t_log_pdf(double x, double nu) {
  return std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) - 0.5 * std::log(nu) -
         0.5 * std::log(M_PI) - 0.5 * (nu + 1.0) * std::log1p(x * x / nu);
}

double student_t_pdf(double x, double nu) { return std::exp(student_t_log_pdf(x, nu)); }

double student_t_cdf(double x, double nu) {
  if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
  if (x == 0.0) return 0.5;
  const double w = nu / (nu + x * x);
  const double half_tail = 0.5 * boost::math::ibeta(0.5 * nu, 0.5, w);
  return x > 0 ? 1.0 - half_tail : half_tail;
}

double lgamma(double x) { return std::lgamma(x); }

}  // namespace screg::special
