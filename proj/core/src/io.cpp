#include "screg/io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "screg/bspline.hpp"
#include "screg/select.hpp"

namespace screg::io {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
using nlohmann::json;

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  if (out.size() == 1 && out[0].empty()) out.clear();
  return out;
}

double parse_endpoint(const std::string& tok, int line, bool lower_side) {
  const std::string t = lower(trim(tok));
  if (t.empty()) return lower_side ? -kInf : kInf;
  if (t == "inf" || t == "+inf") return kInf;
  if (t == "-inf") return -kInf;
  std::size_t pos = 0;
  double v;
  try {
    v = std::stod(t, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error("line " + std::to_string(line) + ": malformed number '" + tok + "'");
  }
  if (pos != t.size())
    throw std::runtime_error("line " + std::to_string(line) + ": malformed number '" + tok + "'");
  return v;
}

double parse_number(const std::string& tok, int line) {
  const std::string t = trim(tok);
  std::size_t pos = 0;
  double v;
  try {
    v = std::stod(t, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error("line " + std::to_string(line) + ": malformed number '" + tok + "'");
  }
  if (pos != t.size())
    throw std::runtime_error("line " + std::to_string(line) + ": malformed number '" + tok + "'");
  return v;
}

// RFC-4180-style reader: quoted fields may contain separators, quotes and
// line breaks.  Returns one record per row including the header.
std::vector<std::vector<std::string>> read_csv_records(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  std::vector<std::vector<std::string>> records;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"': quoted = true; any = true; break;
      case ',': row.push_back(field); field.clear(); any = true; break;
      case '\r': break;
      case '\n':
        if (any || !field.empty() || !row.empty()) {
          row.push_back(field);
          records.push_back(std::move(row));
          row = {};
          field.clear();
          any = false;
        }
        break;
      default: field.push_back(c); any = true; break;
    }
  }
  if (any || !field.empty() || !row.empty()) {
    row.push_back(field);
    records.push_back(std::move(row));
  }
  if (quoted) throw std::runtime_error("unterminated quoted field in " + path);
  if (records.empty()) throw std::runtime_error("empty CSV file: " + path);
  return records;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string endpoint_token(double v) {
  if (v == kInf) return "inf";
  if (v == -kInf) return "-inf";
  return format_double(v);
}

std::string timestamp_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (v == kInf) return "inf";
  if (v == -kInf) return "-inf";
  char buf[40];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) return buf;
  }
  return buf;
}

void ColumnMap::validate() const {
  std::vector<std::string> used;
  auto add = [&](const std::string& name, const char* what) {
    if (name.empty()) throw std::invalid_argument(std::string("column map: missing ") + what);
    if (std::find(used.begin(), used.end(), name) != used.end())
      throw std::invalid_argument("column map: column '" + name + "' used twice");
    used.push_back(name);
  };
  switch (mode) {
    case ResponseMode::Exact: add(y, "response column"); break;
    case ResponseMode::IntervalColumns:
      add(lo, "lower endpoint column");
      add(hi, "upper endpoint column");
      break;
    case ResponseMode::ExactPlusFlag:
      add(y, "response column");
      add(flag, "censor flag column");
      if (bound_side != "upper" && bound_side != "lower")
        throw std::invalid_argument("column map: bound_side must be 'upper' or 'lower'");
      break;
  }
  for (const auto& c : covariates) add(c, "covariate column");
  add(z, "z column");
}

Dataset read_csv(const std::string& path, const ColumnMap& map) {
  map.validate();
  const auto records = read_csv_records(path);
  const auto& header = records.front();
  auto col = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw std::runtime_error("column '" + name + "' not found in " + path);
    return static_cast<std::size_t>(it - header.begin());
  };

  std::vector<std::size_t> xcols;
  for (const auto& c : map.covariates) xcols.push_back(col(c));
  const std::size_t zc = col(map.z);

  std::vector<CensoredObservation> rows;
  rows.reserve(records.size() - 1);
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    const int line = static_cast<int>(r + 1);
    if (rec.size() != header.size())
      throw std::runtime_error("line " + std::to_string(line) + ": expected " +
                               std::to_string(header.size()) + " fields, got " +
                               std::to_string(rec.size()));
    std::vector<double> x;
    if (map.intercept) x.push_back(1.0);
    for (std::size_t j : xcols) x.push_back(parse_number(rec[j], line));
    const double z = parse_number(rec[zc], line);

    switch (map.mode) {
      case ColumnMap::ResponseMode::Exact:
        rows.push_back(CensoredObservation::exact(parse_number(rec[col(map.y)], line),
                                                  std::move(x), z));
        break;
      case ColumnMap::ResponseMode::IntervalColumns: {
        const double lo = parse_endpoint(rec[col(map.lo)], line, true);
        const double hi = parse_endpoint(rec[col(map.hi)], line, false);
        if (std::isfinite(lo) && lo == hi) {
          rows.push_back(CensoredObservation::exact(lo, std::move(x), z));
        } else {
          rows.push_back(CensoredObservation::interval(lo, hi, std::move(x), z));
        }
        break;
      }
      case ColumnMap::ResponseMode::ExactPlusFlag: {
        const double y = parse_number(rec[col(map.y)], line);
        const double fl = parse_number(rec[col(map.flag)], line);
        if (fl != 0.0) {
          if (map.bound_side == "upper")
            rows.push_back(CensoredObservation::interval(-kInf, y, std::move(x), z));
          else
            rows.push_back(CensoredObservation::interval(y, kInf, std::move(x), z));
        } else {
          rows.push_back(CensoredObservation::exact(y, std::move(x), z));
        }
        break;
      }
    }
  }

  std::vector<std::string> names;
  if (map.intercept) names.push_back("intercept");
  for (const auto& c : map.covariates) names.push_back(c);
  Dataset d = validate_dataset(std::move(rows), std::move(names), map.intercept);
  d.z_name = map.z;
  d.y_name = map.y.empty() ? "y" : map.y;
  return d;
}

void write_dataset_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << "censored,lo,hi";
  for (const auto& n : data.x_names) out << ',' << csv_escape(n);
  out << ',' << csv_escape(data.z_name) << '\n';
  for (const auto& r : data.rows) {
    out << (r.censored ? 1 : 0) << ',' << endpoint_token(r.c1) << ','
        << endpoint_token(r.censored ? r.c2 : r.c1);
    for (double v : r.x) out << ',' << format_double(v);
    out << ',' << format_double(r.z) << '\n';
  }
}

Dataset read_dataset_csv(const std::string& path) {
  const auto records = read_csv_records(path);
  const auto& header = records.front();
  if (header.size() < 4 || header[0] != "censored" || header[1] != "lo" || header[2] != "hi")
    throw std::runtime_error("not a dataset CSV (expected censored,lo,hi,...): " + path);
  const std::size_t p = header.size() - 4;
  std::vector<std::string> x_names(header.begin() + 3, header.end() - 1);
  std::vector<CensoredObservation> rows;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    const int line = static_cast<int>(r + 1);
    if (rec.size() != header.size())
      throw std::runtime_error("line " + std::to_string(line) + ": wrong field count");
    const bool cens = parse_number(rec[0], line) != 0.0;
    const double lo = parse_endpoint(rec[1], line, true);
    const double hi = parse_endpoint(rec[2], line, false);
    std::vector<double> x;
    for (std::size_t j = 0; j < p; ++j) x.push_back(parse_number(rec[3 + j], line));
    const double z = parse_number(rec[3 + p], line);
    rows.push_back(cens ? CensoredObservation::interval(lo, hi, std::move(x), z)
                        : CensoredObservation::exact(lo, std::move(x), z));
  }
  const bool intercept = !x_names.empty() && x_names.front() == "intercept";
  Dataset d = validate_dataset(std::move(rows), std::move(x_names), intercept);
  d.z_name = header.back();
  return d;
}

namespace {

json basis_to_json(const SplineBasis& b) {
  return json{{"degree", b.degree},
              {"a", b.a},
              {"b", b.b},
              {"interior", b.interior},
              {"centering", b.centering_offsets},
              {"collapsed_duplicates", b.collapsed_duplicates}};
}

SplineBasis basis_from_json(const json& j) {
  SplineBasis b;
  b.degree = j.at("degree").get<int>();
  b.a = j.at("a").get<double>();
  b.b = j.at("b").get<double>();
  b.interior = j.at("interior").get<std::vector<double>>();
  b.centering_offsets = j.at("centering").get<std::vector<double>>();
  b.collapsed_duplicates = j.value("collapsed_duplicates", false);
  return b;
}

std::pair<std::vector<double>, std::vector<double>> psi_curve(const FitResult& fit) {
  std::vector<double> zs(201), ps(201);
  std::vector<double> alpha(fit.alpha.data(), fit.alpha.data() + fit.alpha.size());
  for (int k = 0; k <= 200; ++k) {
    const double z = fit.basis.a + (fit.basis.b - fit.basis.a) * k / 200.0;
    zs[k] = z;
    ps[k] = psi_eval(alpha, fit.basis, z);
  }
  return {zs, ps};
}

}  // namespace

void write_fit(const FitResult& fit, const Dataset& data, const std::string& path,
               const std::string& format, bool timestamp) {
  const auto [zs, ps] = psi_curve(fit);
  if (format == "json") {
    json j;
    j["schema"] = "screg-fit/1";
    if (timestamp) j["generated_at"] = timestamp_now();
    j["family"] = family_code(fit.model.family);
    if (fit.model.family != Family::Normal) j["nu"] = fit.model.nu;
    if (fit.model.family == Family::ContaminatedNormal) j["gamma"] = fit.model.gamma;
    j["beta"] = json::object();
    j["beta"]["names"] = data.x_names;
    j["beta"]["values"] = std::vector<double>(fit.beta.data(), fit.beta.data() + fit.beta.size());
    j["alpha"] = std::vector<double>(fit.alpha.data(), fit.alpha.data() + fit.alpha.size());
    j["sigma2"] = fit.sigma2;
    j["loglik"] = fit.loglik;
    j["aic"] = fit.aic;
    j["bic"] = fit.bic;
    j["iterations"] = fit.iterations;
    j["converged"] = fit.converged;
    j["basis"] = basis_to_json(fit.basis);
    j["loglik_trace"] = fit.loglik_trace;
    j["diagnostics"] = json{{"rank_deficient", fit.diagnostics.rank_deficient},
                            {"sigma2_floored", fit.diagnostics.sigma2_floored},
                            {"nu_at_bound", fit.diagnostics.nu_at_bound},
                            {"loglik_decreased", fit.diagnostics.loglik_decreased},
                            {"zero_mass_at_eval", fit.diagnostics.zero_mass_at_eval},
                            {"zero_mass_widenings", fit.diagnostics.zero_mass_widenings},
                            {"clamped_z", fit.diagnostics.clamped_z},
                            {"quadrature_fallbacks", fit.diagnostics.quadrature_fallbacks}};
    j["psi_curve"] = json{{"z", zs}, {"psi", ps}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << j.dump(2) << '\n';
    return;
  }
  if (format != "csv") throw std::invalid_argument("unknown fit format: " + format);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << "field,index,value\n";
  out << "family,," << family_code(fit.model.family) << '\n';
  if (fit.model.family != Family::Normal) out << "nu,," << format_double(fit.model.nu) << '\n';
  if (fit.model.family == Family::ContaminatedNormal)
    out << "gamma,," << format_double(fit.model.gamma) << '\n';
  for (Eigen::Index j = 0; j < fit.beta.size(); ++j)
    out << "beta," << csv_escape(data.x_names[j]) << ',' << format_double(fit.beta(j)) << '\n';
  for (Eigen::Index j = 0; j < fit.alpha.size(); ++j)
    out << "alpha," << j << ',' << format_double(fit.alpha(j)) << '\n';
  out << "sigma2,," << format_double(fit.sigma2) << '\n';
  out << "loglik,," << format_double(fit.loglik) << '\n';
  out << "aic,," << format_double(fit.aic) << '\n';
  out << "bic,," << format_double(fit.bic) << '\n';
  out << "iterations,," << fit.iterations << '\n';
  out << "converged,," << (fit.converged ? 1 : 0) << '\n';
  out << "degree,," << fit.basis.degree << '\n';
  out << "boundary_a,," << format_double(fit.basis.a) << '\n';
  out << "boundary_b,," << format_double(fit.basis.b) << '\n';
  for (std::size_t j = 0; j < fit.basis.interior.size(); ++j)
    out << "knot," << j << ',' << format_double(fit.basis.interior[j]) << '\n';
  for (std::size_t j = 0; j < fit.basis.centering_offsets.size(); ++j)
    out << "centering," << j << ',' << format_double(fit.basis.centering_offsets[j]) << '\n';
  for (int k = 0; k <= 200; ++k)
    out << "psi," << format_double(zs[k]) << ',' << format_double(ps[k]) << '\n';
}

FitResult read_fit_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  json j = json::parse(in);
  if (j.value("schema", "") != "screg-fit/1")
    throw std::runtime_error("unrecognized fit schema in " + path);
  FitResult fit;
  const std::string fam = j.at("family").get<std::string>();
  const Family family = family_from_code(fam);
  switch (family) {
    case Family::Normal: fit.model = SmnModel::normal(); break;
    case Family::StudentT: fit.model = SmnModel::student_t(j.at("nu").get<double>()); break;
    case Family::Slash: fit.model = SmnModel::slash(j.at("nu").get<double>()); break;
    case Family::ContaminatedNormal:
      fit.model = SmnModel::contaminated_normal(j.at("nu").get<double>(),
                                                j.at("gamma").get<double>());
      break;
  }
  const auto beta = j.at("beta").at("values").get<std::vector<double>>();
  const auto alpha = j.at("alpha").get<std::vector<double>>();
  fit.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), beta.size());
  fit.alpha = Eigen::Map<const Eigen::VectorXd>(alpha.data(), alpha.size());
  fit.sigma2 = j.at("sigma2").get<double>();
  fit.loglik = j.at("loglik").get<double>();
  fit.aic = j.at("aic").get<double>();
  fit.bic = j.at("bic").get<double>();
  fit.iterations = j.at("iterations").get<int>();
  fit.converged = j.at("converged").get<bool>();
  fit.basis = basis_from_json(j.at("basis"));
  if (j.contains("loglik_trace")) fit.loglik_trace = j["loglik_trace"].get<std::vector<double>>();
  return fit;
}

void write_study_report(const StudyReport& report, const std::string& path,
                        const std::string& format, bool timestamp) {
  if (format == "json") {
    json cells = json::array();
    for (const auto& c : report.cells) {
      json jc{{"scenario", c.scenario},
              {"family", family_code(c.family)},
              {"replications", c.replications},
              {"failures", c.failures},
              {"mean_aic", c.mean_aic},
              {"mean_bic", c.mean_bic},
              {"bias", c.bias},
              {"mse", c.mse},
              {"iabias", c.iabias},
              {"mise", c.mise},
              {"mae", c.mae},
              {"mae_rows", c.mae_rows},
              {"deltas", c.deltas},
              {"mmre", c.mmre},
              {"mmre_skipped", c.mmre_skipped},
              {"convergence_rate", c.convergence_rate}};
      cells.push_back(std::move(jc));
    }
    json j{{"schema", "screg-study/1"},
           {"name", report.name},
           {"seed", report.seed},
           {"replications", report.replications},
           {"cells", cells}};
    if (timestamp) j["generated_at"] = timestamp_now();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << j.dump(2) << '\n';
    return;
  }
  if (format != "csv") throw std::invalid_argument("unknown report format: " + format);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  std::size_t nb = 0, nd = 0;
  for (const auto& c : report.cells) {
    nb = std::max(nb, c.bias.size());
    nd = std::max(nd, c.deltas.size());
  }
  out << "scenario,family,replications,failures,mean_aic,mean_bic";
  for (std::size_t j = 0; j + 1 < nb; ++j) out << ",bias_b" << j + 1 << ",mse_b" << j + 1;
  if (nb > 0) out << ",bias_sigma2,mse_sigma2";
  out << ",iabias,mise,mae,mae_rows";
  for (std::size_t d = 0; d < nd; ++d) out << ",delta_" << d + 1 << ",mmre_" << d + 1;
  out << ",convergence_rate\n";
  for (const auto& c : report.cells) {
    out << csv_escape(c.scenario) << ',' << family_code(c.family) << ',' << c.replications
        << ',' << c.failures << ',' << format_double(c.mean_aic) << ','
        << format_double(c.mean_bic);
    for (std::size_t j = 0; j < nb; ++j) {
      if (j < c.bias.size())
        out << ',' << format_double(c.bias[j]) << ',' << format_double(c.mse[j]);
      else
        out << ",,";
    }
    out << ',' << format_double(c.iabias) << ',' << format_double(c.mise) << ','
        << format_double(c.mae) << ',' << c.mae_rows;
    for (std::size_t d = 0; d < nd; ++d) {
      if (d < c.deltas.size())
        out << ',' << format_double(c.deltas[d]) << ',' << format_double(c.mmre[d]);
      else
        out << ",,";
    }
    out << ',' << format_double(c.convergence_rate) << '\n';
  }
}

StudyReport read_study_report_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  json j = json::parse(in);
  if (j.value("schema", "") != "screg-study/1")
    throw std::runtime_error("unrecognized study schema in " + path);
  StudyReport report;
  report.name = j.at("name").get<std::string>();
  report.seed = j.at("seed").get<std::uint64_t>();
  report.replications = j.at("replications").get<int>();
  for (const auto& jc : j.at("cells")) {
    CellReport c;
    c.scenario = jc.at("scenario").get<std::string>();
    c.family = family_from_code(jc.at("family").get<std::string>());
    c.replications = jc.at("replications").get<int>();
    c.failures = jc.at("failures").get<int>();
    c.mean_aic = jc.at("mean_aic").get<double>();
    c.mean_bic = jc.at("mean_bic").get<double>();
    c.bias = jc.at("bias").get<std::vector<double>>();
    c.mse = jc.at("mse").get<std::vector<double>>();
    c.iabias = jc.at("iabias").get<double>();
    c.mise = jc.at("mise").get<double>();
    c.mae = jc.at("mae").get<double>();
    c.mae_rows = jc.at("mae_rows").get<int>();
    c.deltas = jc.at("deltas").get<std::vector<double>>();
    c.mmre = jc.at("mmre").get<std::vector<double>>();
    c.mmre_skipped = jc.at("mmre_skipped").get<int>();
    c.convergence_rate = jc.at("convergence_rate").get<double>();
    report.cells.push_back(std::move(c));
  }
  return report;
}

std::string render_study_table(const StudyReport& report) {
  std::ostringstream os;
  os << "study " << report.name << "  (seed " << report.seed << ", R = " << report.replications
     << ")\n";
  os << "family  fail  mean_AIC      mean_BIC      IABIAS     MISE       MAE";
  os << '\n';
  char line[256];
  for (const auto& c : report.cells) {
    std::snprintf(line, sizeof(line), "%-6s  %4d  %-12.4f  %-12.4f  %-9.5f  %-9.5f  %-9.5f",
                  family_code(c.family), c.failures, c.mean_aic, c.mean_bic, c.iabias, c.mise,
                  c.mae);
    os << line << '\n';
    if (!c.deltas.empty()) {
      os << "        mmre:";
      for (std::size_t d = 0; d < c.deltas.size(); ++d)
        os << " delta=" << c.deltas[d] << " -> " << c.mmre[d];
      os << '\n';
    }
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// configuration files

ConfigFile ConfigFile::parse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_text(text, path);
}

ConfigFile ConfigFile::parse_text(const std::string& text, const std::string& origin) {
  ConfigFile cfg;
  cfg.origin_ = origin;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": malformed section");
      section = lower(trim(line.substr(1, line.size() - 2)));
      if (section.empty())
        throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": expected key = value");
    if (section.empty())
      throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": key outside a section");
    const std::string key = section + "." + lower(trim(line.substr(0, eq)));
    const std::string value = trim(line.substr(eq + 1));
    if (cfg.values_.count(key))
      throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": duplicate key " + key);
    cfg.values_[key] = value;
    cfg.consumed_[key] = false;
  }
  return cfg;
}

bool ConfigFile::has(const std::string& key) const { return values_.count(key) > 0; }

std::string ConfigFile::get(const std::string& key, const std::string& fallback) {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  consumed_[key] = true;
  return it->second;
}

std::string ConfigFile::require(const std::string& key) {
  const auto it = values_.find(key);
  if (it == values_.end())
    throw std::runtime_error(origin_ + ": missing required key '" + key + "'");
  consumed_[key] = true;
  return it->second;
}

double ConfigFile::get_number(const std::string& key, double fallback) {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  consumed_[key] = true;
  return parse_number(it->second, 0);
}

long ConfigFile::get_int(const std::string& key, long fallback) {
  const double v = get_number(key, static_cast<double>(fallback));
  const long n = static_cast<long>(v);
  if (static_cast<double>(n) != v)
    throw std::runtime_error(origin_ + ": key '" + key + "' must be an integer");
  return n;
}

bool ConfigFile::get_bool(const std::string& key, bool fallback) {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  consumed_[key] = true;
  const std::string v = lower(it->second);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::runtime_error(origin_ + ": key '" + key + "' must be boolean");
}

void ConfigFile::finish() const {
  std::string unknown;
  for (const auto& [key, used] : consumed_) {
    if (!used) unknown += (unknown.empty() ? "" : ", ") + key;
  }
  if (!unknown.empty())
    throw std::runtime_error(origin_ + ": unknown key(s): " + unknown);
}

namespace {

KnotRule parse_knot_rule(const std::string& text, int* explicit_k) {
  const std::string t = lower(trim(text));
  *explicit_k = 0;
  if (t == "m1") return KnotRule::M1;
  if (t == "m2") return KnotRule::M2;
  std::size_t pos = 0;
  int k;
  try {
    k = std::stoi(t, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("knot rule must be m1, m2 or an integer: " + text);
  }
  if (pos != t.size()) throw std::invalid_argument("knot rule must be m1, m2 or an integer: " + text);
  *explicit_k = k;
  return KnotRule::Explicit;
}

KnotPlacement parse_placement(const std::string& text) {
  const std::string t = lower(trim(text));
  if (t == "es") return KnotPlacement::ES;
  if (t == "esq") return KnotPlacement::ESQ;
  throw std::invalid_argument("placement must be es or esq: " + text);
}

}  // namespace

FitFileConfig parse_fit_config(ConfigFile& cfg) {
  FitFileConfig out;
  out.data_path = cfg.get("data.path", "");

  const bool has_lo = cfg.has("data.response_lo");
  const bool has_flag = cfg.has("data.censor_flag");
  if (has_lo) {
    out.columns.mode = ColumnMap::ResponseMode::IntervalColumns;
    out.columns.lo = cfg.require("data.response_lo");
    out.columns.hi = cfg.require("data.response_hi");
  } else if (has_flag) {
    out.columns.mode = ColumnMap::ResponseMode::ExactPlusFlag;
    out.columns.y = cfg.require("data.response");
    out.columns.flag = cfg.require("data.censor_flag");
    out.columns.bound_side = lower(cfg.get("data.censor_side", "upper"));
    if (out.columns.bound_side == "left") out.columns.bound_side = "upper";
    if (out.columns.bound_side == "right") out.columns.bound_side = "lower";
  } else {
    out.columns.mode = ColumnMap::ResponseMode::Exact;
    out.columns.y = cfg.get("data.response", "");
  }
  out.columns.covariates = split(cfg.get("data.covariates", ""), ',');
  out.columns.intercept = cfg.get_bool("data.intercept", false);
  out.columns.z = cfg.get("data.z", "");

  out.ecme.family = family_from_code(cfg.get("model.family", "n"));
  if (cfg.has("model.nu_lo") || cfg.has("model.nu_hi")) {
    out.ecme.nu_bounds.lo = cfg.get_number("model.nu_lo", 0.0);
    out.ecme.nu_bounds.hi = cfg.get_number("model.nu_hi", 0.0);
  }
  out.ecme.gamma_bounds.lo = cfg.get_number("model.gamma_lo", 0.01);
  out.ecme.gamma_bounds.hi = cfg.get_number("model.gamma_hi", 0.99);
  out.ecme.knot_rule = parse_knot_rule(cfg.get("knots.rule", "m2"), &out.ecme.explicit_knots);
  out.ecme.placement = parse_placement(cfg.get("knots.placement", "esq"));
  out.ecme.degree = static_cast<int>(cfg.get_int("knots.degree", 3));
  out.ecme.epsilon = cfg.get_number("optimizer.epsilon", 1e-5);
  out.ecme.k_max = static_cast<int>(cfg.get_int("optimizer.kmax", 2000));
  out.ecme.seed = static_cast<std::uint64_t>(cfg.get_int("optimizer.seed", 0));
  return out;
}

StudySpec parse_study_text_impl(ConfigFile cfg) {
  StudySpec spec;
  ScenarioSpec& sc = spec.scenario;
  sc.name = cfg.get("study.name", "study");
  sc.n = static_cast<std::size_t>(cfg.get_int("study.n", 100));
  sc.intercept = cfg.get_bool("study.intercept", false);
  for (const auto& tok : split(cfg.require("study.beta"), ','))
    sc.beta.push_back(parse_number(tok, 0));
  for (const auto& tok : split(cfg.get("study.covariates", ""), ';'))
    sc.covariates.push_back(CovariateLaw::parse(tok));
  sc.z = ZLaw::parse(cfg.require("study.z"));
  sc.psi = PsiSpec::parse(cfg.get("study.psi", "zero"));
  sc.error = ErrorLaw::parse(cfg.get("study.error", "n"));
  sc.sigma2 = cfg.get_number("study.sigma2", 1.0);
  sc.censoring = CensoringSpec::parse(cfg.get("study.censoring", "none"));
  sc.noise_count = static_cast<int>(cfg.get_int("study.noise", 0));
  for (const auto& tok : split(cfg.get("study.delta", ""), ','))
    sc.deltas.push_back(parse_number(tok, 0));
  sc.replications = static_cast<int>(cfg.get_int("study.reps", 1));
  sc.seed = static_cast<std::uint64_t>(cfg.get_int("study.seed", 1));

  spec.families.clear();
  for (const auto& tok : split(cfg.get("fit.families", "n"), ','))
    spec.families.push_back(family_from_code(tok));
  spec.knot_rule = parse_knot_rule(cfg.get("fit.knots", "m2"), &spec.explicit_knots);
  spec.placement = parse_placement(cfg.get("fit.placement", "esq"));
  spec.degree = static_cast<int>(cfg.get_int("fit.degree", 3));
  spec.epsilon = cfg.get_number("fit.epsilon", 1e-5);
  spec.k_max = static_cast<int>(cfg.get_int("fit.kmax", 2000));
  cfg.finish();
  sc.validate();
  return spec;
}

StudySpec parse_study_file(const std::string& path) {
  return parse_study_text_impl(ConfigFile::parse_file(path));
}

StudySpec parse_study_text(const std::string& text) {
  return parse_study_text_impl(ConfigFile::parse_text(text));
}

}  // namespace screg::io
