#pragma once

#include <string>
#include <vector>

#include "screg/ecme.hpp"

namespace screg {

enum class Criterion { AIC, BIC };

const char* criterion_code(Criterion);

// AIC = 2(m+d+p+s+1) - 2 l_max, BIC = (m+d+p+s+1) log n - 2 l_max, where s is
// the number of mixing-law parameters (N 0, T/SL 1, CN 2) and the +1 is
// sigma^2.
struct Criteria {
  double aic = 0.0;
  double bic = 0.0;
};
Criteria information_criteria(double loglik_max, int m, int d, int p, int s, std::size_t n);

struct KnotChoice {
  KnotRule rule = KnotRule::M2;
  int explicit_k = 0;
  std::string label() const;
};

struct SelectionGrid {
  std::vector<Family> families{Family::Normal};
  std::vector<KnotChoice> knots{{KnotRule::M2, 0}};
  std::vector<KnotPlacement> placements{KnotPlacement::ESQ};
  Criterion criterion = Criterion::BIC;
};

struct SelectionEntry {
  EcmeConfig config;
  bool failed = false;
  std::string error;
  FitResult fit;         // valid when !failed
  double criterion_value = 0.0;
  int param_count = 0;
};

// Fits every grid cell and ranks the successes by the chosen criterion
// (ascending); ties break on fewer parameters, then family order N<T<SL<CN.
// Within a knot cell the normal fit seeds the heavy-tailed starts.  Throws
// only when every cell failed.
std::vector<SelectionEntry> select(const Dataset& data, const SelectionGrid& grid,
                                   const EcmeConfig& base);

}  // namespace screg
