#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "screg/censored.hpp"

namespace screg {

enum class KnotRule { M1, M2, Explicit };
enum class KnotPlacement { ES, ESQ };

const char* knot_rule_code(KnotRule);
const char* placement_code(KnotPlacement);

// Interior knot count: m1 = floor(n^{1/3}) + 1, m2 = floor(n^{1/5}) + 1.
int knot_count(std::size_t n, KnotRule rule, int explicit_k = 0);

// Piecewise-polynomial basis of degree d on boundary (a, b) with m interior
// knots.  The clamped Cox-de Boor basis on these knots has m+d+1 members; the
// two leftmost are tied into one so the basis has exactly m+d members while
// keeping non-negativity and the partition of unity on [a, b].
struct SplineBasis {
  int degree = 3;
  double a = 0.0;
  double b = 1.0;
  std::vector<double> interior;          // strictly increasing, inside (a, b)
  std::vector<double> centering_offsets; // empty when centering inactive
  bool collapsed_duplicates = false;     // ESQ ties shrank the knot set

  int dimension() const;
  // Basis values at x; x outside [a, b] is clamped (returns true when clamped).
  bool eval_into(double x, double* out) const;
  std::vector<double> eval(double x) const;
  // Closed support [lo, hi] of basis member j (for locality checks).
  std::pair<double, double> support(int j) const;
  // Extended knot vector (boundary multiplicity degree + 1).
  std::vector<double> knots() const;
  // Activates centering: offsets are the sample means of each basis column
  // over the supplied z values.
  void center_on(std::span<const double> z);
};

SplineBasis place_knots(std::span<const double> z, int m, KnotPlacement placement, int degree);

// Basis for a dataset's z column under the given knot configuration; centered
// when the dataset declares an intercept.
SplineBasis build_basis(const Dataset& data, KnotRule rule, int explicit_k,
                        KnotPlacement placement, int degree);

// Row i = (x_i^T, B(z_i)^T) with the basis block centered when active.
// clamped, when given, receives the count of z values outside [a, b].
Eigen::MatrixXd pseudo_design(const Dataset& data, const SplineBasis& basis,
                              int* clamped = nullptr);

// alpha . B(x), minus the centering offsets' contribution when active.
double psi_eval(std::span<const double> alpha, const SplineBasis& basis, double x);

}  // namespace screg
