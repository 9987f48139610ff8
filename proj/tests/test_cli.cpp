#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "screg/io.hpp"
#include "screg/simgen.hpp"

using namespace screg;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

struct CliFixture {
  fs::path dir;
  CliFixture() {
    dir = fs::temp_directory_path() / ("screg_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(dir);
  }
  ~CliFixture() { std::error_code ec; fs::remove_all(dir, ec); }
  std::string file(const std::string& name) const { return (dir / name).string(); }

  CliResult run(const std::string& args) const {
    const std::string out = file("stdout.txt"), err = file("stderr.txt");
    const std::string cmd =
        std::string(SCREG_CLI_PATH) + " " + args + " > " + out + " 2> " + err;
    const int raw = std::system(cmd.c_str());
    CliResult r;
    r.code = WEXITSTATUS(raw);
    std::ifstream fo(out), fe(err);
    r.out.assign(std::istreambuf_iterator<char>(fo), std::istreambuf_iterator<char>());
    r.err.assign(std::istreambuf_iterator<char>(fe), std::istreambuf_iterator<char>());
    return r;
  }
};

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

Dataset demo_data(std::uint64_t seed, const std::string& censoring) {
  ScenarioSpec sc;
  sc.n = 120;
  sc.beta = {1.0, 2.0, -2.0};
  sc.covariates = {CovariateLaw::parse("normal(0,1)"), CovariateLaw::parse("bernoulli(0.5)"),
                   CovariateLaw::parse("uniform(-4,1)")};
  sc.z = ZLaw::parse("uniform(-1,2)");
  sc.psi = PsiSpec::parse("exp3m1");
  sc.error = ErrorLaw::parse("t(3)");
  sc.sigma2 = 2.0;
  sc.censoring = CensoringSpec::parse(censoring);
  std::mt19937_64 rng(seed);
  Dataset d = gen_regression(sc, rng);
  return apply_censoring(d, sc.censoring, rng);
}

}  // namespace

TEST_CASE("cli fit: success, file output, exit codes") {
  CliFixture cli;
  io::write_dataset_csv(demo_data(1, "interval(0.1,1)"), cli.file("data.csv"));

  const auto ok = cli.run("fit --data " + cli.file("data.csv") + " --family t --knots m2 " +
                          "--placement esq --out " + cli.file("fit.json") + " --no-timestamp");
  CHECK(ok.code == 0);
  CHECK(fs::exists(cli.file("fit.json")));
  CHECK(ok.out.find("loglik") != std::string::npos);
  CHECK(ok.out.find("BIC") != std::string::npos);

  const auto missing = cli.run("fit --data " + cli.file("nope.csv"));
  CHECK(missing.code == 1);
  CHECK(missing.err.find("nope.csv") != std::string::npos);

  const auto badknots = cli.run("fit --data " + cli.file("data.csv") + " --knots 0");
  CHECK(badknots.code != 0);

  const auto unknown = cli.run("fit --data " + cli.file("data.csv") + " --wat 3");
  CHECK(unknown.code != 0);
}

TEST_CASE("cli fit: config file + env var default") {
  CliFixture cli;
  io::write_dataset_csv(demo_data(2, "none"), cli.file("data.csv"));
  {
    std::ofstream f(cli.file("fit.cfg"));
    f << "[data]\npath = " << cli.file("data.csv") << "\n[model]\nfamily = n\n";
  }
  const auto viacfg = cli.run("fit --config " + cli.file("fit.cfg"));
  CHECK(viacfg.code == 0);

  const auto viaenv = cli.run("fit");  // no config, no data
  CHECK(viaenv.code == 1);

  setenv("SCREG_CONFIG", cli.file("fit.cfg").c_str(), 1);
  const auto with_env = cli.run("fit");
  unsetenv("SCREG_CONFIG");
  CHECK(with_env.code == 0);
}

TEST_CASE("cli help enumerates subcommands and flags") {
  CliFixture cli;
  const auto help = cli.run("--help");
  CHECK(help.code == 0);
  for (const char* word : {"fit", "select", "impute", "simulate", "report"})
    CHECK(help.out.find(word) != std::string::npos);
  const auto fit_help = cli.run("fit --help");
  for (const char* flag : {"--data", "--config", "--family", "--knots", "--placement",
                           "--degree", "--seed", "--out"})
    CHECK(fit_help.out.find(flag) != std::string::npos);
}

TEST_CASE("cli select: grid table") {
  CliFixture cli;
  io::write_dataset_csv(demo_data(3, "interval(0.1,1)"), cli.file("data.csv"));
  const auto r = cli.run("select --data " + cli.file("data.csv") +
                         " --families n,t,sl,cn --grid-knots m1,m2 --criterion bic --out " +
                         cli.file("rank.csv"));
  CHECK(r.code == 0);
  std::ifstream f(cli.file("rank.csv"));
  std::string line;
  int rows = 0;
  std::getline(f, line);  // header
  CHECK(line.find("criterion") != std::string::npos);
  while (std::getline(f, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 8);

  const auto single = cli.run("select --data " + cli.file("data.csv") +
                              " --families n --grid-knots m2");
  CHECK(single.code == 0);
  int data_rows = 0;
  std::istringstream ss(single.out);
  std::getline(ss, line);
  while (std::getline(ss, line))
    if (!line.empty()) ++data_rows;
  CHECK(data_rows == 1);
}

TEST_CASE("cli impute: identity without censoring, bounds with censoring") {
  CliFixture cli;
  const Dataset plain = demo_data(4, "none");
  io::write_dataset_csv(plain, cli.file("plain.csv"));
  CHECK(cli.run("fit --data " + cli.file("plain.csv") + " --family n --out " +
                cli.file("fit.json"))
            .code == 0);
  const auto r = cli.run("impute --data " + cli.file("plain.csv") + " --fit " +
                         cli.file("fit.json") + " --out " + cli.file("imp.csv"));
  CHECK(r.code == 0);
  std::ifstream f(cli.file("imp.csv"));
  std::string line;
  std::getline(f, line);
  std::size_t i = 0;
  while (std::getline(f, line)) {
    const auto c1 = line.find(','), c2 = line.rfind(',');
    CHECK(std::stod(line.substr(c2 + 1)) == plain.rows[i].y());
    CHECK(line.substr(c1 + 1, c2 - c1 - 1) == "0");
    ++i;
  }
  CHECK(i == plain.n());

  // left-censored at 0: imputed values for censored rows stay at or below 0
  Dataset lc = censor_left_at(demo_data(5, "none"), 0.0);
  io::write_dataset_csv(lc, cli.file("left.csv"));
  CHECK(cli.run("fit --data " + cli.file("left.csv") + " --family n --out " +
                cli.file("fit_left.json"))
            .code == 0);
  const auto rl = cli.run("impute --data " + cli.file("left.csv") + " --fit " +
                          cli.file("fit_left.json") + " --out " + cli.file("imp_left.csv"));
  CHECK(rl.code == 0);
  std::ifstream fl(cli.file("imp_left.csv"));
  std::getline(fl, line);
  i = 0;
  while (std::getline(fl, line)) {
    const auto c1 = line.find(','), c2 = line.rfind(',');
    const bool censored = line.substr(c1 + 1, c2 - c1 - 1) == "1";
    if (censored) CHECK(std::stod(line.substr(c2 + 1)) <= 0.0);
    ++i;
  }

  // dimension mismatch between fit and data
  Dataset small = demo_data(6, "none");
  for (auto& row : small.rows) row.x.pop_back();
  small.x_names.pop_back();
  io::write_dataset_csv(small, cli.file("small.csv"));
  const auto bad = cli.run("impute --data " + cli.file("small.csv") + " --fit " +
                           cli.file("fit.json"));
  CHECK(bad.code == 1);
}

TEST_CASE("cli simulate: determinism across runs and thread counts") {
  CliFixture cli;
  {
    std::ofstream f(cli.file("study.cfg"));
    f << "[study]\n"
         "name = cli-demo\n"
         "n = 60\n"
         "beta = 1, 2, -2\n"
         "covariates = normal(0,1); bernoulli(0.5); uniform(-4,1)\n"
         "z = uniform(-1,2)\n"
         "psi = exp3m1\n"
         "error = t(3)\n"
         "sigma2 = 2\n"
         "censoring = interval(0.1,1)\n"
         "reps = 3\n"
         "seed = 777\n"
         "[fit]\n"
         "families = n, t\n"
         "knots = m2\n"
         "placement = esq\n";
  }
  const std::string base = "simulate --study " + cli.file("study.cfg") + " --no-timestamp";
  CHECK(cli.run(base + " --parallel 1 --out " + cli.file("r1.json")).code == 0);
  CHECK(cli.run(base + " --parallel 1 --out " + cli.file("r2.json")).code == 0);
  CHECK(cli.run(base + " --parallel 8 --out " + cli.file("r8.json")).code == 0);
  CHECK(slurp(cli.file("r1.json")) == slurp(cli.file("r2.json")));

  const StudyReport a = io::read_study_report_json(cli.file("r1.json"));
  const StudyReport b = io::read_study_report_json(cli.file("r8.json"));
  REQUIRE(a.cells.size() == b.cells.size());
  for (std::size_t c = 0; c < a.cells.size(); ++c) {
    CHECK(a.cells[c].mean_bic == doctest::Approx(b.cells[c].mean_bic).epsilon(1e-12));
    CHECK(a.cells[c].mise == doctest::Approx(b.cells[c].mise).epsilon(1e-12));
  }

  // single-rep study produces a one-cell-per-family report
  CHECK(cli.run(base + " --reps 1 --out " + cli.file("single.json")).code == 0);
  const StudyReport s = io::read_study_report_json(cli.file("single.json"));
  CHECK(s.replications == 1);

  const auto rep = cli.run("report --in " + cli.file("r1.json") + " --out " +
                           cli.file("report.csv"));
  CHECK(rep.code == 0);
  CHECK(fs::exists(cli.file("report.csv")));
  CHECK(rep.out.find("cli-demo") != std::string::npos);
}
