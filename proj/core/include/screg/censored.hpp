#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace screg {

// One response record: either an exact reading, or an interval (c1, c2) in
// which the response is only known to lie.  Left/right censoring are the
// half-infinite special cases c1 = -inf / c2 = +inf.
struct CensoredObservation {
  bool censored = false;
  double c1 = 0.0;  // exact value when !censored, else lower endpoint
  double c2 = 0.0;  // upper endpoint (unused when !censored)
  std::vector<double> x;
  double z = 0.0;

  static CensoredObservation exact(double y, std::vector<double> x, double z) {
    CensoredObservation o;
    o.censored = false;
    o.c1 = y;
    o.c2 = y;
    o.x = std::move(x);
    o.z = z;
    return o;
  }
  static CensoredObservation interval(double lo, double hi, std::vector<double> x, double z) {
    CensoredObservation o;
    o.censored = true;
    o.c1 = lo;
    o.c2 = hi;
    o.x = std::move(x);
    o.z = z;
    return o;
  }

  double y() const { return c1; }             // exact rows only
  int rho() const { return censored ? 1 : 0; }
};

struct RowViolation {
  std::size_t row;
  std::string code;    // NonFiniteValue, InvertedInterval, DoublyInfiniteInterval, RaggedCovariates
  std::string detail;
};

class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<RowViolation> v);
  const std::vector<RowViolation>& violations() const { return violations_; }

 private:
  std::vector<RowViolation> violations_;
};

struct Dataset {
  std::vector<CensoredObservation> rows;
  std::vector<std::string> x_names;
  std::string z_name = "z";
  std::string y_name = "y";
  // When true, x column 0 is a declared intercept (all ones); the B-spline
  // block of the pseudo-design is then mean-centered for identifiability.
  bool has_intercept = false;

  std::size_t n() const { return rows.size(); }
  std::size_t p() const { return rows.empty() ? x_names.size() : rows.front().x.size(); }
  std::size_t censored_count() const;
  double censoring_proportion() const;
};

// Row-level checks; empty result means every row is admissible.
std::vector<RowViolation> validate_rows(const std::vector<CensoredObservation>& rows);

// Builds a Dataset, throwing ValidationError when any row is invalid.
Dataset validate_dataset(std::vector<CensoredObservation> rows,
                         std::vector<std::string> x_names,
                         bool has_intercept = false);

}  // namespace screg
