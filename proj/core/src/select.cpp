#include "screg/select.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace screg {

const char* criterion_code(Criterion c) { return c == Criterion::AIC ? "aic" : "bic"; }

Criteria information_criteria(double loglik_max, int m, int d, int p, int s, std::size_t n) {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  const double k = m + d + p + s + 1;
  return {2.0 * k - 2.0 * loglik_max,
          k * std::log(static_cast<double>(n)) - 2.0 * loglik_max};
}

std::string KnotChoice::label() const {
  if (rule == KnotRule::Explicit) return std::to_string(explicit_k);
  return knot_rule_code(rule);
}

namespace {

int family_order(Family f) {
  switch (f) {
    case Family::Normal: return 0;
    case Family::StudentT: return 1;
    case Family::Slash: return 2;
    case Family::ContaminatedNormal: return 3;
  }
  return 4;
}

}  // namespace

std::vector<SelectionEntry> select(const Dataset& data, const SelectionGrid& grid,
                                   const EcmeConfig& base) {
  if (grid.families.empty() || grid.knots.empty() || grid.placements.empty())
    throw std::invalid_argument("selection grid must be non-empty in every dimension");

  std::vector<SelectionEntry> entries;
  for (const KnotChoice& kc : grid.knots) {
    for (KnotPlacement placement : grid.placements) {
      // the normal fit of this knot cell seeds the heavy-tailed families
      Theta normal_theta;
      bool have_normal = false;
      for (Family fam : grid.families) {
        SelectionEntry entry;
        entry.config = base;
        entry.config.family = fam;
        entry.config.knot_rule = kc.rule;
        entry.config.explicit_knots = kc.explicit_k;
        entry.config.placement = placement;
        entry.config.nu_bounds = {0.0, 0.0};
        try {
          if (fam == Family::Normal) {
            entry.fit = fit(data, entry.config);
            normal_theta.beta_tilde = entry.fit.beta_tilde();
            normal_theta.sigma2 = entry.fit.sigma2;
            have_normal = true;
          } else if (have_normal) {
            Theta start = normal_theta;
            start.model = family_start_model(fam, entry.config);
            entry.fit = fit_from(data, entry.config, start);
          } else {
            entry.fit = fit(data, entry.config);
          }
          entry.criterion_value =
              grid.criterion == Criterion::AIC ? entry.fit.aic : entry.fit.bic;
          entry.param_count = static_cast<int>(entry.fit.basis.interior.size()) +
                              entry.fit.basis.degree + static_cast<int>(data.p()) +
                              entry.fit.model.mixing_param_count() + 1;
        } catch (const std::exception& ex) {
          entry.failed = true;
          entry.error = ex.what();
        }
        entries.push_back(std::move(entry));
      }
    }
  }

  const bool all_failed =
      std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.failed; });
  if (all_failed) throw std::runtime_error("model selection failed in every grid cell");

  std::stable_sort(entries.begin(), entries.end(), [](const SelectionEntry& a,
                                                      const SelectionEntry& b) {
    if (a.failed != b.failed) return !a.failed;
    if (a.failed) return false;
    if (a.criterion_value != b.criterion_value) return a.criterion_value < b.criterion_value;
    if (a.param_count != b.param_count) return a.param_count < b.param_count;
    return family_order(a.config.family) < family_order(b.config.family);
  });
  return entries;
}

}  // namespace screg
