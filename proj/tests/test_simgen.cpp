#include <doctest.h>

#include <cmath>
#include <random>

#include "screg/io.hpp"
#include "screg/simgen.hpp"

using namespace screg;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

ScenarioSpec recovery_scenario(std::size_t n) {
  ScenarioSpec sc;
  sc.name = "recovery";
  sc.n = n;
  sc.beta = {1.0, 2.0, -2.0};
  sc.covariates = {CovariateLaw::parse("normal(0,1)"), CovariateLaw::parse("bernoulli(0.5)"),
                   CovariateLaw::parse("uniform(-4,1)")};
  sc.z = ZLaw::parse("uniform(-1,2)");
  sc.psi = PsiSpec::parse("exp3m1");
  sc.error = ErrorLaw::parse("t(3)");
  sc.sigma2 = 2.0;
  return sc;
}
}  // namespace

TEST_CASE("law parsers round-trip their labels") {
  CHECK(CovariateLaw::parse("normal(0,1)").label() == "normal(0,1)");
  CHECK(CovariateLaw::parse(" uniform( -4 , 1 ) ").label() == "uniform(-4,1)");
  CHECK(PsiSpec::parse("jump(3)").label() == "jump(3)");
  CHECK(ErrorLaw::parse("cn(0.4,0.3)").label() == "cn(0.4,0.3)");
  CHECK(ErrorLaw::parse("gig_mix(-0.5,1,3)").label() == "gig_mix(-0.5,1,3)");
  CHECK(CensoringSpec::parse("interval(0.075,1)").label() == "interval(0.075,1)");
  CHECK_THROWS(CovariateLaw::parse("cauchy(0,1)"));
  CHECK_THROWS(ErrorLaw::parse("t()"));
}

TEST_CASE("psi function shapes") {
  const auto jump = PsiSpec::parse("jump(3)");
  CHECK(jump(0.05) == doctest::Approx(3 * std::sin(0.1) + 30.0));
  CHECK(jump(0.5) == doctest::Approx(3 * std::sin(1.0) + 3.0));
  CHECK(jump(-0.5) == doctest::Approx(3 * std::sin(-1.0)));
  const auto cosb = PsiSpec::parse("coscurve");
  CHECK(cosb(0.0) == doctest::Approx(1.0));
  CHECK(PsiSpec::parse("exp3m1")(0.0) == doctest::Approx(0.0));
}

TEST_CASE("gen_regression: degenerate spec gives a constant response") {
  ScenarioSpec sc;
  sc.n = 20;
  sc.beta = {1.0};
  sc.covariates = {CovariateLaw::parse("const(1)")};
  sc.z = ZLaw::parse("uniform(0,1)");
  sc.psi = PsiSpec::parse("zero");
  sc.error = ErrorLaw::parse("n");
  sc.sigma2 = 1e-18;  // validate() wants > 0; negligible noise
  std::mt19937_64 rng(1);
  TruthRecord truth;
  const Dataset d = gen_regression(sc, rng, &truth);
  for (const auto& r : d.rows) CHECK(r.y() == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(truth.y.size() == 20);
}

TEST_CASE("gen_regression: heavy-tail residual kurtosis and mixture generators run") {
  ScenarioSpec sc = recovery_scenario(100000);
  std::mt19937_64 rng(2);
  TruthRecord truth;
  const Dataset d = gen_regression(sc, rng, &truth);
  // residuals = y - beta'x - psi(z)
  double m2 = 0.0, m4 = 0.0;
  for (std::size_t i = 0; i < d.n(); ++i) {
    double mean = truth.psi_values[i];
    for (std::size_t j = 0; j < 3; ++j) mean += sc.beta[j] * d.rows[i].x[j];
    const double e = d.rows[i].y() - mean;
    m2 += e * e;
    m4 += e * e * e * e;
  }
  m2 /= d.n();
  m4 /= d.n();
  CHECK(m4 / (m2 * m2) > 3.5);  // heavier than normal

  // GIG-mixture: runs, residual variance finite and near sigma^2 E(1/U)
  sc.error = ErrorLaw::parse("gig_mix(-0.5,1,3)");
  sc.n = 20000;
  const Dataset g = gen_regression(sc, rng, &truth);
  double v = 0.0;
  for (std::size_t i = 0; i < g.n(); ++i) {
    double mean = truth.psi_values[i];
    for (std::size_t j = 0; j < 3; ++j) mean += sc.beta[j] * g.rows[i].x[j];
    const double e = g.rows[i].y() - mean;
    v += e * e;
  }
  v /= g.n();
  CHECK(std::isfinite(v));
  CHECK(v > 0.0);
}

TEST_CASE("GIG and BS mixing laws match their analytic moments") {
  std::mt19937_64 rng(11);
  // GIG(kappa,chi,psi) moment: E(U^r) = (chi/psi)^{r/2} K_{kappa+r}(w)/K_kappa(w)
  const double kappa = -0.5, chi = 1.0, psi = 3.0;
  const double w = std::sqrt(chi * psi);
  const double want_mean = std::sqrt(chi / psi) * std::cyl_bessel_k(kappa + 1.0, w) /
                           std::cyl_bessel_k(std::fabs(kappa), w);
  double s = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) s += sample_gig(kappa, chi, psi, rng);
  CHECK(s / n == doctest::Approx(want_mean).epsilon(0.02));

  // BS(shape a, scale b): mean = b (1 + a^2/2)
  double sb = 0.0;
  for (int i = 0; i < n; ++i) sb += sample_birnbaum_saunders(2.0, 1.0, rng);
  CHECK(sb / n == doctest::Approx(3.0).epsilon(0.05));
}

TEST_CASE("censor_interval: count formula and bracketing") {
  ScenarioSpec sc = recovery_scenario(200);
  std::mt19937_64 rng(3);
  TruthRecord truth;
  const Dataset d = gen_regression(sc, rng, &truth);

  const Dataset c = censor_interval(d, 0.1, 1.0, rng);
  CHECK(c.censored_count() == 21);  // floor(200 * 0.1) + 1
  for (std::size_t i = 0; i < c.n(); ++i) {
    if (!c.rows[i].censored) {
      CHECK(c.rows[i].y() == truth.y[i]);
      continue;
    }
    CHECK(c.rows[i].c1 <= truth.y[i]);
    CHECK(c.rows[i].c2 >= truth.y[i]);
    CHECK(c.rows[i].c2 - c.rows[i].c1 <= 1.0 + 1e-12);
  }

  const Dataset c0 = censor_interval(d, 0.0, 1.0, rng);
  CHECK(c0.censored_count() == 1);  // floor(0) + 1, preserved verbatim
  CHECK_THROWS(censor_interval(d, 0.995, 1.0, rng));  // would censor every row
}

TEST_CASE("left/right threshold censoring") {
  ScenarioSpec sc = recovery_scenario(200);
  std::mt19937_64 rng(5);
  TruthRecord truth;
  const Dataset d = gen_regression(sc, rng, &truth);

  double ymin = kInf, ymax = -kInf;
  for (const auto& r : d.rows) {
    ymin = std::min(ymin, r.y());
    ymax = std::max(ymax, r.y());
  }
  CHECK(censor_left_at(d, ymin - 1.0).censored_count() == 0);

  const Dataset l = censor_left(d, 0.2);
  CHECK(l.censored_count() == 40);  // ceil(0.2 * 200), continuous responses
  for (std::size_t i = 0; i < l.n(); ++i) {
    if (l.rows[i].censored) {
      CHECK(l.rows[i].c1 == -kInf);
      CHECK(truth.y[i] <= l.rows[i].c2);
    }
  }

  const Dataset r = censor_right(d, 0.15);
  CHECK(r.censored_count() == 30);
  for (std::size_t i = 0; i < r.n(); ++i) {
    if (r.rows[i].censored) {
      CHECK(r.rows[i].c2 == kInf);
      CHECK(truth.y[i] >= r.rows[i].c1);
    }
  }

  const Dataset zero_line = censor_left_at(d, 0.0);
  for (std::size_t i = 0; i < zero_line.n(); ++i)
    CHECK(zero_line.rows[i].censored == (truth.y[i] <= 0.0));
}

TEST_CASE("inject_noise appends rows from the stated laws") {
  ScenarioSpec sc = recovery_scenario(50);
  std::mt19937_64 rng(7);
  TruthRecord truth;
  const Dataset d = gen_regression(sc, rng, &truth);
  const Dataset same = inject_noise(d, 0, sc, rng);
  CHECK(same.n() == 50);

  TruthRecord t2 = truth;
  const Dataset noisy = inject_noise(d, 10, sc, rng, &t2);
  CHECK(noisy.n() == 60);
  CHECK(t2.y.size() == 60);
  for (std::size_t i = 50; i < 60; ++i) {
    CHECK(noisy.rows[i].y() >= -5.0);
    CHECK(noisy.rows[i].y() <= 5.0);
    CHECK(noisy.rows[i].x[0] >= -3.0);
    CHECK(noisy.rows[i].x[0] <= 2.0);
    CHECK(noisy.rows[i].z >= -2.0);
    CHECK(noisy.rows[i].z <= 8.0);
    CHECK_FALSE(noisy.rows[i].censored);
  }
}

TEST_CASE("perturb_max targets the running maximum") {
  ScenarioSpec sc = recovery_scenario(30);
  std::mt19937_64 rng(9);
  const Dataset d = gen_regression(sc, rng);
  double ymax = -kInf;
  for (const auto& r : d.rows) ymax = std::max(ymax, r.y());

  const Dataset same = perturb_max(d, 0.0);
  double ymax2 = -kInf;
  for (const auto& r : same.rows) ymax2 = std::max(ymax2, r.y());
  CHECK(ymax2 == ymax);

  const Dataset moved = perturb_max(d, 10.0);
  double got = -kInf;
  for (const auto& r : moved.rows) got = std::max(got, r.y());
  CHECK(got < ymax);
  // applied twice, the second application targets the current maximum,
  // whichever row that is after the first shift
  const Dataset once = perturb_max(d, 1.0);
  std::size_t expect = 0;
  double m2 = -kInf;
  for (std::size_t i = 0; i < once.n(); ++i)
    if (once.rows[i].y() > m2) {
      m2 = once.rows[i].y();
      expect = i;
    }
  const Dataset twice = perturb_max(once, 1.0);
  for (std::size_t i = 0; i < d.n(); ++i) {
    if (i == expect)
      CHECK(twice.rows[i].y() == doctest::Approx(once.rows[i].y() - 1.0));
    else
      CHECK(twice.rows[i].y() == once.rows[i].y());
  }
}

TEST_CASE("metrics: hand-computed aggregates") {
  ScenarioSpec sc;
  sc.name = "hand";
  sc.n = 10;
  sc.beta = {1.0, 2.0};
  sc.covariates = {CovariateLaw::parse("normal(0,1)"), CovariateLaw::parse("normal(0,1)")};
  sc.z = ZLaw::parse("uniform(0,1)");
  sc.sigma2 = 1.0;
  sc.deltas = {2.0};

  ReplicationOutcome a;
  a.beta_hat = {1.1, 1.9};
  a.sigma2_hat = 1.2;
  a.iabias_sum = 0.3;
  a.mise_sum = 0.09;
  a.mae_abs_sum = 2.0;
  a.mae_count = 4;
  a.mmre_sums = {0.4};
  a.mmre_terms = {3};
  a.converged = true;
  ReplicationOutcome b;
  b.beta_hat = {0.9, 2.1};
  b.sigma2_hat = 0.8;
  b.iabias_sum = 0.1;
  b.mise_sum = 0.01;
  b.mae_abs_sum = 1.0;
  b.mae_count = 2;
  b.mmre_sums = {0.2};
  b.mmre_terms = {3};
  b.converged = true;

  const CellReport cell = metrics({a, b}, sc, Family::Normal);
  CHECK(cell.bias[0] == doctest::Approx(0.0).epsilon(1e-12));        // (0.1 - 0.1)/2
  CHECK(cell.bias[1] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(cell.bias[2] == doctest::Approx(0.0).epsilon(1e-12));        // sigma2
  CHECK(cell.mse[0] == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(cell.mse[2] == doctest::Approx(0.04).epsilon(1e-12));
  CHECK(cell.iabias == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(cell.mise == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(cell.mae == doctest::Approx(3.0 / 6.0).epsilon(1e-12));      // pooled over rows
  CHECK(cell.mmre[0] == doctest::Approx(0.6 / 6.0).epsilon(1e-12));  // sum / included terms
  CHECK(cell.replications == 2);
  CHECK(cell.failures == 0);

  // perfect estimates: zero bias and mse
  ReplicationOutcome perfect;
  perfect.beta_hat = {1.0, 2.0};
  perfect.sigma2_hat = 1.0;
  const CellReport ideal = metrics({perfect}, sc, Family::Normal);
  for (double v : ideal.bias) CHECK(v == 0.0);
  for (double v : ideal.mse) CHECK(v == 0.0);
}

TEST_CASE("run_study: determinism and parallel equivalence") {
  StudySpec study;
  study.scenario = recovery_scenario(60);
  study.scenario.censoring = CensoringSpec::parse("interval(0.1,1)");
  study.scenario.replications = 6;
  study.scenario.seed = 12345;
  study.families = {Family::Normal, Family::StudentT};

  const StudyReport r1 = run_study(study, 1);
  const StudyReport r2 = run_study(study, 1);
  const StudyReport r4 = run_study(study, 4);
  REQUIRE(r1.cells.size() == 2);
  for (std::size_t c = 0; c < r1.cells.size(); ++c) {
    CHECK(r1.cells[c].mean_bic == r2.cells[c].mean_bic);
    CHECK(r1.cells[c].mean_bic == doctest::Approx(r4.cells[c].mean_bic).epsilon(1e-12));
    CHECK(r1.cells[c].mise == doctest::Approx(r4.cells[c].mise).epsilon(1e-12));
    for (std::size_t j = 0; j < r1.cells[c].bias.size(); ++j)
      CHECK(r1.cells[c].bias[j] == doctest::Approx(r4.cells[c].bias[j]).epsilon(1e-12));
  }
  CHECK(derive_seed(1, 0, 0) != derive_seed(1, 0, 1));
  CHECK(derive_seed(1, 0, 0) != derive_seed(2, 0, 0));
  CHECK(derive_seed(1, 0, 0) == derive_seed(1, 0, 0));
}
