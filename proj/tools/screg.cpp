// Command-line front end: fit / select / impute / simulate / report.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include "screg/bspline.hpp"
#include "screg/censored.hpp"
#include "screg/ecme.hpp"
#include "screg/io.hpp"
#include "screg/select.hpp"
#include "screg/simgen.hpp"
#include "screg/smn.hpp"

namespace {

using namespace screg;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitNotConverged = 2;

io::ConfigFile load_config(const std::string& flag_path) {
  std::string path = flag_path;
  if (path.empty()) {
    if (const char* env = std::getenv("SCREG_CONFIG")) path = env;
  }
  if (path.empty()) return io::ConfigFile::parse_text("", "<empty>");
  return io::ConfigFile::parse_file(path);
}

struct CommonFitFlags {
  std::string data;
  std::string config;
  std::string family;
  std::string knots;
  std::string placement;
  int degree = -1;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

io::FitFileConfig resolve_fit_config(const CommonFitFlags& flags) {
  io::ConfigFile cfg = load_config(flags.config);
  io::FitFileConfig file = io::parse_fit_config(cfg);
  cfg.finish();
  if (!flags.data.empty()) file.data_path = flags.data;
  if (file.data_path.empty())
    throw std::runtime_error("no data file given (use --data or data.path in the config)");
  if (!flags.family.empty()) file.ecme.family = family_from_code(flags.family);
  if (!flags.knots.empty()) {
    const std::string k = flags.knots;
    if (k == "m1") {
      file.ecme.knot_rule = KnotRule::M1;
    } else if (k == "m2") {
      file.ecme.knot_rule = KnotRule::M2;
    } else {
      file.ecme.knot_rule = KnotRule::Explicit;
      file.ecme.explicit_knots = std::stoi(k);
    }
  }
  if (!flags.placement.empty())
    file.ecme.placement = flags.placement == "es" ? KnotPlacement::ES : KnotPlacement::ESQ;
  if (flags.degree >= 0) file.ecme.degree = flags.degree;
  if (flags.seed_set) file.ecme.seed = flags.seed;
  return file;
}

Dataset load_dataset(const io::FitFileConfig& file) {
  if (file.columns.z.empty()) {
    // dataset CSV written by this tool
    return io::read_dataset_csv(file.data_path);
  }
  return io::read_csv(file.data_path, file.columns);
}

void print_fit_summary(const FitResult& fit, const Dataset& data) {
  std::cout << "family      " << family_code(fit.model.family) << '\n';
  if (fit.model.family != Family::Normal) std::cout << "nu          " << fit.model.nu << '\n';
  if (fit.model.family == Family::ContaminatedNormal)
    std::cout << "gamma       " << fit.model.gamma << '\n';
  std::cout << "n           " << data.n() << "  (censored " << data.censored_count() << ")\n";
  std::cout << "knots       " << fit.basis.interior.size() << " interior, degree "
            << fit.basis.degree << '\n';
  std::cout << "loglik      " << io::format_double(fit.loglik) << '\n';
  std::cout << "AIC         " << io::format_double(fit.aic) << '\n';
  std::cout << "BIC         " << io::format_double(fit.bic) << '\n';
  std::cout << "sigma2      " << io::format_double(fit.sigma2) << '\n';
  std::cout << "iterations  " << fit.iterations << (fit.converged ? "" : "  (k_max reached)")
            << '\n';
  std::cout << "beta       ";
  for (Eigen::Index j = 0; j < fit.beta.size(); ++j)
    std::cout << ' ' << data.x_names[j] << '=' << io::format_double(fit.beta(j));
  std::cout << '\n';
}

int cmd_fit(const CommonFitFlags& flags, const std::string& out, const std::string& format,
            bool no_timestamp) {
  const io::FitFileConfig file = resolve_fit_config(flags);
  const Dataset data = load_dataset(file);
  const FitResult result = fit(data, file.ecme);
  if (!out.empty()) io::write_fit(result, data, out, format, !no_timestamp);
  print_fit_summary(result, data);
  return result.converged ? kExitOk : kExitNotConverged;
}

int cmd_select(const CommonFitFlags& flags, const std::string& families,
               const std::string& knots, const std::string& placements,
               const std::string& criterion, const std::string& out) {
  io::FitFileConfig file = resolve_fit_config(flags);
  const Dataset data = load_dataset(file);

  SelectionGrid grid;
  grid.families.clear();
  std::stringstream fs(families);
  std::string tok;
  while (std::getline(fs, tok, ',')) grid.families.push_back(family_from_code(tok));
  grid.knots.clear();
  std::stringstream ks(knots);
  while (std::getline(ks, tok, ',')) {
    KnotChoice kc;
    if (tok == "m1") {
      kc.rule = KnotRule::M1;
    } else if (tok == "m2") {
      kc.rule = KnotRule::M2;
    } else {
      kc.rule = KnotRule::Explicit;
      kc.explicit_k = std::stoi(tok);
    }
    grid.knots.push_back(kc);
  }
  grid.placements.clear();
  std::stringstream ps(placements);
  while (std::getline(ps, tok, ',')) {
    grid.placements.push_back(tok == "es" ? KnotPlacement::ES : KnotPlacement::ESQ);
  }
  grid.criterion = criterion == "aic" ? Criterion::AIC : Criterion::BIC;

  const auto ranked = select(data, grid, file.ecme);

  std::ostringstream table;
  table << "rank,family,knots,placement,m,loglik,aic,bic,criterion,converged,error\n";
  int rank = 1;
  for (const auto& e : ranked) {
    if (e.failed) {
      table << ",," << "" << ",,,,,,,," << '"' << e.error << '"' << '\n';
      continue;
    }
    table << rank++ << ',' << family_code(e.config.family) << ','
          << (e.config.knot_rule == KnotRule::Explicit
                  ? std::to_string(e.config.explicit_knots)
                  : knot_rule_code(e.config.knot_rule))
          << ',' << placement_code(e.config.placement) << ',' << e.fit.basis.interior.size()
          << ',' << io::format_double(e.fit.loglik) << ',' << io::format_double(e.fit.aic)
          << ',' << io::format_double(e.fit.bic) << ',' << io::format_double(e.criterion_value)
          << ',' << (e.fit.converged ? 1 : 0) << ",\n";
  }
  if (out.empty()) {
    std::cout << table.str();
  } else {
    std::ofstream f(out, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write file: " + out);
    f << table.str();
    const auto& best = ranked.front();
    if (!best.failed)
      std::cout << "best: " << family_code(best.config.family) << " "
                << criterion << "=" << io::format_double(best.criterion_value) << '\n';
  }
  return kExitOk;
}

int cmd_impute(const std::string& data_path, const std::string& fit_path,
               const std::string& config_path, const std::string& out) {
  CommonFitFlags flags;
  flags.data = data_path;
  flags.config = config_path;
  io::FitFileConfig file;
  try {
    file = resolve_fit_config(flags);
  } catch (const std::exception&) {
    file.data_path = data_path;  // bare dataset CSV without a config
  }
  const Dataset data = load_dataset(file);
  const FitResult fitres = io::read_fit_json(fit_path);
  const std::vector<double> values = impute(fitres, data);

  std::ostringstream table;
  table << "row,censored,imputed\n";
  for (std::size_t i = 0; i < values.size(); ++i)
    table << i << ',' << (data.rows[i].censored ? 1 : 0) << ','
          << io::format_double(values[i]) << '\n';
  if (out.empty()) {
    std::cout << table.str();
  } else {
    std::ofstream f(out, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write file: " + out);
    f << table.str();
  }
  return kExitOk;
}

int cmd_simulate(const std::string& study_path, int reps, std::uint64_t seed, bool seed_set,
                 int parallel, const std::string& out, const std::string& format,
                 bool no_timestamp) {
  StudySpec spec = io::parse_study_file(study_path);
  if (reps > 0) spec.scenario.replications = reps;
  if (seed_set) spec.scenario.seed = seed;
  const StudyReport report = run_study(spec, parallel);
  if (!out.empty()) io::write_study_report(report, out, format, !no_timestamp);
  std::cout << io::render_study_table(report);
  return kExitOk;
}

int cmd_report(const std::string& in, const std::string& out) {
  const StudyReport report = io::read_study_report_json(in);
  if (!out.empty()) {
    io::write_study_report(report, out, "csv", false);
  }
  std::cout << io::render_study_table(report);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semiparametric censored regression with scale-mixture-of-normal errors"};
  app.require_subcommand(1);

  CommonFitFlags flags;
  std::string out, format = "json", families = "n,t,sl,cn", knots = "m2", placements = "esq";
  std::string criterion = "bic", fit_path, study_path, report_in;
  bool no_timestamp = false;
  int reps = 0, parallel = 1;
  std::uint64_t seed = 0;

  auto add_fit_flags = [&](CLI::App* sub) {
    sub->add_option("--data", flags.data, "dataset CSV");
    sub->add_option("--config", flags.config, "config file (default: $SCREG_CONFIG)");
    sub->add_option("--family", flags.family, "n | t | sl | cn")
        ->check(CLI::IsMember({"n", "t", "sl", "cn"}));
    sub->add_option("--knots", flags.knots, "m1 | m2 | explicit count")
        ->check([](const std::string& s) -> std::string {
          if (s == "m1" || s == "m2") return {};
          try {
            if (std::stoi(s) >= 1) return {};
          } catch (...) {
          }
          return "must be m1, m2 or a positive integer";
        });
    sub->add_option("--placement", flags.placement, "es | esq")
        ->check(CLI::IsMember({"es", "esq"}));
    sub->add_option("--degree", flags.degree, "spline degree (default 3)")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--seed", flags.seed, "rng seed")->each([&](const std::string&) {
      flags.seed_set = true;
    });
  };

  CLI::App* fit_cmd = app.add_subcommand("fit", "fit one model by the ECME algorithm");
  add_fit_flags(fit_cmd);
  fit_cmd->add_option("--out", out, "output file for the fit");
  fit_cmd->add_option("--format", format, "json | csv")->check(CLI::IsMember({"json", "csv"}));
  fit_cmd->add_flag("--no-timestamp", no_timestamp, "omit the timestamp metadata field");

  CLI::App* select_cmd = app.add_subcommand("select", "grid search over families and knots");
  add_fit_flags(select_cmd);
  select_cmd->add_option("--families", families, "comma list of n,t,sl,cn");
  select_cmd->add_option("--grid-knots", knots, "comma list of m1,m2 or counts");
  select_cmd->add_option("--grid-placements", placements, "comma list of es,esq");
  select_cmd->add_option("--criterion", criterion, "aic | bic")
      ->check(CLI::IsMember({"aic", "bic"}));
  select_cmd->add_option("--out", out, "ranked table CSV");

  CLI::App* impute_cmd = app.add_subcommand("impute", "impute censored responses from a fit");
  impute_cmd->add_option("--data", flags.data, "dataset CSV")->required();
  impute_cmd->add_option("--config", flags.config, "config describing the data columns");
  impute_cmd->add_option("--fit", fit_path, "fit JSON produced by `fit`")->required();
  impute_cmd->add_option("--out", out, "imputed values CSV");

  CLI::App* sim_cmd = app.add_subcommand("simulate", "run a Monte-Carlo study");
  sim_cmd->add_option("--study", study_path, "study spec file")->required();
  sim_cmd->add_option("--reps", reps, "override replication count");
  sim_cmd->add_option("--seed", seed, "override master seed")->each([&](const std::string&) {
    flags.seed_set = true;
  });
  sim_cmd->add_option("--parallel", parallel, "worker threads")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--out", out, "report output file");
  sim_cmd->add_option("--format", format, "json | csv")->check(CLI::IsMember({"json", "csv"}));
  sim_cmd->add_flag("--no-timestamp", no_timestamp, "omit the timestamp metadata field");

  CLI::App* report_cmd = app.add_subcommand("report", "render or convert a study report");
  report_cmd->add_option("--in", report_in, "study report JSON")->required();
  report_cmd->add_option("--out", out, "CSV destination");

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit_cmd->parsed()) return cmd_fit(flags, out, format, no_timestamp);
    if (select_cmd->parsed())
      return cmd_select(flags, families, knots, placements, criterion, out);
    if (impute_cmd->parsed()) return cmd_impute(flags.data, fit_path, flags.config, out);
    if (sim_cmd->parsed())
      return cmd_simulate(study_path, reps, seed, flags.seed_set, parallel, out, format,
                          no_timestamp);
    if (report_cmd->parsed()) return cmd_report(report_in, out);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
