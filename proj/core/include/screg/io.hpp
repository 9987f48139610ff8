#pragma once

#include <map>
#include <string>
#include <vector>

#include "screg/censored.hpp"
#include "screg/ecme.hpp"
#include "screg/simgen.hpp"

namespace screg::io {

// How a CSV maps onto the response/covariate structure.
struct ColumnMap {
  enum class ResponseMode { Exact, IntervalColumns, ExactPlusFlag };
  ResponseMode mode = ResponseMode::Exact;
  std::string y;        // Exact and ExactPlusFlag
  std::string lo, hi;   // IntervalColumns; empty cell = infinite endpoint
  std::string flag;     // ExactPlusFlag: nonzero marks a censored row
  // ExactPlusFlag: side of the interval the recorded value bounds;
  // "upper" gives (-inf, y] (left-censored), "lower" gives [y, +inf).
  std::string bound_side = "upper";
  std::vector<std::string> covariates;
  bool intercept = false;  // prepend a ones column
  std::string z;

  void validate() const;
};

Dataset read_csv(const std::string& path, const ColumnMap& map);

// Dataset round-trip; +-infinity endpoints use the tokens "-inf"/"inf".
void write_dataset_csv(const Dataset& data, const std::string& path);
Dataset read_dataset_csv(const std::string& path);

// Fit serialization.  JSON carries the full schema ("screg-fit/1"); CSV is a
// flat field/index/value table.  Both append a 201-point psi curve.
void write_fit(const FitResult& fit, const Dataset& data, const std::string& path,
               const std::string& format, bool timestamp = true);
FitResult read_fit_json(const std::string& path);

void write_study_report(const StudyReport& report, const std::string& path,
                        const std::string& format, bool timestamp = true);
StudyReport read_study_report_json(const std::string& path);

std::string render_study_table(const StudyReport& report);

// Flat sectioned key = value configuration text; unknown keys are errors.
class ConfigFile {
 public:
  static ConfigFile parse_file(const std::string& path);
  static ConfigFile parse_text(const std::string& text, const std::string& origin = "<string>");

  bool has(const std::string& key) const;
  // Typed getters mark the key consumed.
  std::string get(const std::string& key, const std::string& fallback);
  std::string require(const std::string& key);
  double get_number(const std::string& key, double fallback);
  long get_int(const std::string& key, long fallback);
  bool get_bool(const std::string& key, bool fallback);
  // Throws when any key was never consumed (catches typos).
  void finish() const;

 private:
  std::map<std::string, std::string> values_;
  mutable std::map<std::string, bool> consumed_;
  std::string origin_;
};

struct FitFileConfig {
  std::string data_path;
  ColumnMap columns;
  EcmeConfig ecme;
};

// Sections [data], [model], [knots], [optimizer].
FitFileConfig parse_fit_config(ConfigFile& cfg);

// Sections [study], [fit].
StudySpec parse_study_file(const std::string& path);
StudySpec parse_study_text(const std::string& text);

// Shortest decimal representation that parses back to the same double.
std::string format_double(double v);

}  // namespace screg::io
