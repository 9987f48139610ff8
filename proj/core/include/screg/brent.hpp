#pragma once

#include <cmath>

namespace screg {

struct ScalarMinResult {
  double x = 0.0;
  double fx = 0.0;
  int evals = 0;
};

// Brent's derivative-free minimization on [lo, hi]: parabolic steps where the
// model is trustworthy, golden-section otherwise.  `tol` is an absolute
// tolerance on x.
template <typename F>
ScalarMinResult minimize_scalar(F&& f, double lo, double hi, double tol, int max_iter = 200) {
  constexpr double kGold = 0.3819660112501051;
  double a = lo, b = hi;
  double x = a + kGold * (b - a);
  double w = x, v = x;
  double fx = f(x);
  double fw = fx, fv = fx;
  int evals = 1;
  double d = 0.0, e = 0.0;

  for (int iter = 0; iter < max_iter; ++iter) {
    const double xm = 0.5 * (a + b);
    const double tol1 = tol;
    const double tol2 = 2.0 * tol1;
    if (std::fabs(x - xm) <= tol2 - 0.5 * (b - a)) break;

    bool take_golden = true;
    if (std::fabs(e) > tol1) {
      // parabola through (x, w, v)
      const double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::fabs(q);
      const double e_prev = e;
      e = d;
      if (std::fabs(p) < std::fabs(0.5 * q * e_prev) && p > q * (a - x) && p < q * (b - x)) {
        d = p / q;
        const double u_try = x + d;
        if (u_try - a < tol2 || b - u_try < tol2) d = xm > x ? tol1 : -tol1;
        take_golden = false;
      }
    }
    if (take_golden) {
      e = (x >= xm) ? a - x : b - x;
      d = kGold * e;
    }

    const double u = std::fabs(d) >= tol1 ? x + d : x + (d > 0.0 ? tol1 : -tol1);
    const double fu = f(u);
    ++evals;
    if (fu <= fx) {
      if (u >= x) a = x; else b = x;
      v = w; fv = fw;
      w = x; fw = fx;
      x = u; fx = fu;
    } else {
      if (u < x) a = u; else b = u;
      if (fu <= fw || w == x) {
        v = w; fv = fw;
        w = u; fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u; fv = fu;
      }
    }
  }
  return {x, fx, evals};
}

}  // namespace screg
