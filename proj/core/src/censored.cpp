#include "screg/censored.hpp"

#include <sstream>

namespace screg {

namespace {
std::string summarize(const std::vector<RowViolation>& v) {
  std::ostringstream os;
  os << "dataset validation failed (" << v.size() << " violation" << (v.size() == 1 ? "" : "s") << ")";
  std::size_t shown = 0;
  for (const auto& item : v) {
    if (shown++ == 8) {
      os << "; ...";
      break;
    }
    os << "; row " << item.row << ": " << item.code;
    if (!item.detail.empty()) os << " (" << item.detail << ")";
  }
  return os.str();
}
}  // namespace

ValidationError::ValidationError(std::vector<RowViolation> v)
    : std::runtime_error(summarize(v)), violations_(std::move(v)) {}

std::size_t Dataset::censored_count() const {
  std::size_t c = 0;
  for (const auto& r : rows) c += r.censored ? 1 : 0;
  return c;
}

double Dataset::censoring_proportion() const {
  return rows.empty() ? 0.0 : static_cast<double>(censored_count()) / static_cast<double>(rows.size());
}

std::vector<RowViolation> validate_rows(const std::vector<CensoredObservation>& rows) {
  std::vector<RowViolation> out;
  const std::size_t p = rows.empty() ? 0 : rows.front().x.size();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.x.size() != p) {
      out.push_back({i, "RaggedCovariates",
                     "expected " + std::to_string(p) + " covariates, got " + std::to_string(r.x.size())});
    }
    for (double v : r.x) {
      if (!std::isfinite(v)) {
        out.push_back({i, "NonFiniteValue", "covariate"});
        break;
      }
    }
    if (!std::isfinite(r.z)) out.push_back({i, "NonFiniteValue", "z"});
    if (!r.censored) {
      if (!std::isfinite(r.c1)) out.push_back({i, "NonFiniteValue", "exact response"});
    } else {
      if (std::isnan(r.c1) || std::isnan(r.c2)) {
        out.push_back({i, "NonFiniteValue", "interval endpoint"});
      } else if (std::isinf(r.c1) && std::isinf(r.c2)) {
        out.push_back({i, "DoublyInfiniteInterval", ""});
      } else if (!(r.c1 < r.c2)) {
        out.push_back({i, "InvertedInterval",
                       "c1=" + std::to_string(r.c1) + " c2=" + std::to_string(r.c2)});
      }
    }
  }
  return out;
}

Dataset validate_dataset(std::vector<CensoredObservation> rows,
                         std::vector<std::string> x_names,
                         bool has_intercept) {
  auto violations = validate_rows(rows);
  if (!violations.empty()) throw ValidationError(std::move(violations));
  Dataset d;
  d.rows = std::move(rows);
  if (x_names.empty() && !d.rows.empty()) {
    for (std::size_t j = 0; j < d.rows.front().x.size(); ++j) x_names.push_back("x" + std::to_string(j + 1));
  }
  if (!d.rows.empty() && x_names.size() != d.rows.front().x.size()) {
    throw std::invalid_argument("x_names length does not match covariate dimension");
  }
  d.x_names = std::move(x_names);
  d.has_intercept = has_intercept;
  return d;
}

}  // namespace screg
