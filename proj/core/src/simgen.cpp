#include "screg/simgen.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "screg/bspline.hpp"

namespace screg {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Neumaier-compensated accumulator; summation order is fixed by replication
// index, so parallel scheduling cannot change the result.
struct CompensatedSum {
  double s = 0.0, c = 0.0;
  void add(double x) {
    const double t = s + x;
    if (std::fabs(s) >= std::fabs(x))
      c += (s - t) + x;
    else
      c += (x - t) + s;
    s = t;
  }
  double value() const { return s + c; }
};

struct ArgList {
  std::string name;
  std::vector<double> args;
};

ArgList parse_call(const std::string& text) {
  ArgList out;
  std::string s;
  for (char ch : text)
    if (!std::isspace(static_cast<unsigned char>(ch))) s.push_back(ch);
  const auto open = s.find('(');
  if (open == std::string::npos) {
    out.name = s;
    return out;
  }
  if (s.back() != ')') throw std::invalid_argument("malformed law expression: " + text);
  out.name = s.substr(0, open);
  std::string inner = s.substr(open + 1, s.size() - open - 2);
  if (!inner.empty()) {
    std::stringstream ss(inner);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      std::size_t pos = 0;
      const double v = std::stod(tok, &pos);
      if (pos != tok.size()) throw std::invalid_argument("bad number in law expression: " + tok);
      out.args.push_back(v);
    }
  }
  return out;
}

void need_args(const ArgList& a, std::size_t n) {
  if (a.args.size() != n)
    throw std::invalid_argument("law '" + a.name + "' expects " + std::to_string(n) +
                                " argument(s)");
}

template <typename F>
void parallel_for(std::size_t count, int threads, F&& body) {
  threads = std::max(1, threads);
  if (threads == 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  const int workers = std::min<std::size_t>(threads, count);
  pool.reserve(workers);
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) break;
        body(i);
      }
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t cell, std::uint64_t rep) {
  std::uint64_t state = master;
  (void)splitmix64(state);
  state ^= 0xA5A5A5A5A5A5A5A5ULL * (cell + 1);
  (void)splitmix64(state);
  state ^= 0xC3C3C3C3C3C3C3C3ULL * (rep + 1);
  return splitmix64(state);
}

// ---------------------------------------------------------------------------
// scenario pieces

double PsiSpec::operator()(double z) const {
  switch (kind) {
    case Kind::Zero: return 0.0;
    case Kind::Exp3M1: return std::exp(z / 3.0) - 1.0;
    case Kind::SinPi: return std::sin(z * M_PI);
    case Kind::Jump:
      return 3.0 * std::sin(2.0 * z) + (z > 0.0 && z < 0.1 ? 10.0 * xi : 0.0) +
             (z > 0.1 ? xi : 0.0);
    case Kind::CosCurve: return std::cos(4.0 * M_PI * z) * std::exp(-0.5 * z * z);
  }
  return 0.0;
}

PsiSpec PsiSpec::parse(const std::string& text) {
  const ArgList a = parse_call(text);
  PsiSpec p;
  if (a.name == "zero") { p.kind = Kind::Zero; return p; }
  if (a.name == "exp3m1") { p.kind = Kind::Exp3M1; return p; }
  if (a.name == "sinpi") { p.kind = Kind::SinPi; return p; }
  if (a.name == "jump") {
    need_args(a, 1);
    p.kind = Kind::Jump;
    p.xi = a.args[0];
    return p;
  }
  if (a.name == "coscurve") { p.kind = Kind::CosCurve; return p; }
  throw std::invalid_argument("unknown psi tag: " + text);
}

std::string PsiSpec::label() const {
  switch (kind) {
    case Kind::Zero: return "zero";
    case Kind::Exp3M1: return "exp3m1";
    case Kind::SinPi: return "sinpi";
    case Kind::Jump: {
      std::ostringstream os;
      os << "jump(" << xi << ")";
      return os.str();
    }
    case Kind::CosCurve: return "coscurve";
  }
  return "?";
}

double CovariateLaw::draw(std::mt19937_64& rng) const {
  switch (kind) {
    case Kind::Const: return a;
    case Kind::Normal: {
      std::normal_distribution<double> d(a, b);
      return d(rng);
    }
    case Kind::Bernoulli: {
      std::bernoulli_distribution d(a);
      return d(rng) ? 1.0 : 0.0;
    }
    case Kind::Uniform: {
      std::uniform_real_distribution<double> d(a, b);
      return d(rng);
    }
  }
  return 0.0;
}

CovariateLaw CovariateLaw::parse(const std::string& text) {
  const ArgList a = parse_call(text);
  CovariateLaw law;
  if (a.name == "const") {
    need_args(a, 1);
    law.kind = Kind::Const;
    law.a = a.args[0];
  } else if (a.name == "normal") {
    need_args(a, 2);
    law.kind = Kind::Normal;
    law.a = a.args[0];
    law.b = a.args[1];
    if (!(law.b > 0.0)) throw std::invalid_argument("normal law needs sd > 0");
  } else if (a.name == "bernoulli") {
    need_args(a, 1);
    law.kind = Kind::Bernoulli;
    law.a = a.args[0];
    if (!(law.a >= 0.0 && law.a <= 1.0)) throw std::invalid_argument("bernoulli prob in [0,1]");
  } else if (a.name == "uniform") {
    need_args(a, 2);
    law.kind = Kind::Uniform;
    law.a = a.args[0];
    law.b = a.args[1];
    if (!(law.a < law.b)) throw std::invalid_argument("uniform law needs a < b");
  } else {
    throw std::invalid_argument("unknown covariate law: " + text);
  }
  return law;
}

std::string CovariateLaw::label() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::Const: os << "const(" << a << ")"; break;
    case Kind::Normal: os << "normal(" << a << "," << b << ")"; break;
    case Kind::Bernoulli: os << "bernoulli(" << a << ")"; break;
    case Kind::Uniform: os << "uniform(" << a << "," << b << ")"; break;
  }
  return os.str();
}

ZLaw ZLaw::parse(const std::string& text) {
  const ArgList a = parse_call(text);
  ZLaw law;
  if (a.name == "uniform") {
    need_args(a, 2);
    law.kind = Kind::Uniform;
    law.a = a.args[0];
    law.b = a.args[1];
    if (!(law.a < law.b)) throw std::invalid_argument("uniform z law needs a < b");
  } else if (a.name == "normal") {
    need_args(a, 2);
    law.kind = Kind::Normal;
    law.a = a.args[0];
    law.b = a.args[1];
    if (!(law.b > 0.0)) throw std::invalid_argument("normal z law needs sd > 0");
  } else if (a.name == "corr_normal") {
    need_args(a, 2);
    law.kind = Kind::CorrNormal;
    law.rho = a.args[0];
    law.col = static_cast<int>(a.args[1]) - 1;  // 1-based column in the spec file
    if (!(law.rho > -1.0 && law.rho < 1.0))
      throw std::invalid_argument("corr_normal needs rho in (-1,1)");
    if (law.col < 0) throw std::invalid_argument("corr_normal column is 1-based");
  } else {
    throw std::invalid_argument("unknown z law: " + text);
  }
  return law;
}

std::string ZLaw::label() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::Uniform: os << "uniform(" << a << "," << b << ")"; break;
    case Kind::Normal: os << "normal(" << a << "," << b << ")"; break;
    case Kind::CorrNormal: os << "corr_normal(" << rho << "," << col + 1 << ")"; break;
  }
  return os.str();
}

double sample_birnbaum_saunders(double shape, double scale, std::mt19937_64& rng) {
  std::normal_distribution<double> z01(0.0, 1.0);
  const double az = shape * z01(rng);
  const double root = 0.5 * (az + std::sqrt(az * az + 4.0));
  return scale * root * root;
}

double sample_gig(double kappa, double chi, double psi, std::mt19937_64& rng) {
  if (!(chi > 0.0) || !(psi > 0.0))
    throw std::invalid_argument("GIG sampler requires chi > 0 and psi > 0");
  // Ratio-of-uniforms on the unnormalized density u^{kappa-1} e^{-(chi/u + psi u)/2}.
  auto logf = [&](double x) { return (kappa - 1.0) * std::log(x) - 0.5 * (chi / x + psi * x); };
  const double mode = ((kappa - 1.0) + std::sqrt((kappa - 1.0) * (kappa - 1.0) + chi * psi)) / psi;
  const double mode2 = ((kappa + 1.0) + std::sqrt((kappa + 1.0) * (kappa + 1.0) + chi * psi)) / psi;
  const double vmax = std::exp(0.5 * logf(mode));
  const double wmax = mode2 * std::exp(0.5 * logf(mode2));
  std::uniform_real_distribution<double> uv(0.0, vmax), uw(0.0, wmax);
  for (int tries = 0; tries < 100000; ++tries) {
    const double v = uv(rng);
    const double w = uw(rng);
    if (v <= 0.0) continue;
    const double x = w / v;
    if (x > 0.0 && 2.0 * std::log(v) <= logf(x)) return x;
  }
  throw std::runtime_error("GIG rejection sampler failed to accept");
}

double ErrorLaw::draw_scale_factor(std::mt19937_64& rng) const {
  switch (kind) {
    case Kind::Smn:
      return sample_scale_factor(smn, rng);
    case Kind::LaplaceMix: {
      // exponential variance multiplier: eps = sigma sqrt(W) Z with
      // W ~ Exp(mean 2) is Laplace; returned as the precision factor 1/W
      std::exponential_distribution<double> e(0.5);
      double w = e(rng);
      while (w <= 0.0) w = e(rng);
      return 1.0 / w;
    }
    case Kind::BsMix:
      return sample_birnbaum_saunders(bs_shape, bs_scale, rng);
    case Kind::GigMix:
      return sample_gig(gig_kappa, gig_chi, gig_psi, rng);
  }
  return 1.0;
}

ErrorLaw ErrorLaw::parse(const std::string& text) {
  const ArgList a = parse_call(text);
  ErrorLaw law;
  if (a.name == "n" || a.name == "normal") {
    law.smn = SmnModel::normal();
    return law;
  }
  if (a.name == "t") {
    need_args(a, 1);
    law.smn = SmnModel::student_t(a.args[0]);
    law.smn.validate();
    return law;
  }
  if (a.name == "sl" || a.name == "slash") {
    need_args(a, 1);
    law.smn = SmnModel::slash(a.args[0]);
    law.smn.validate();
    return law;
  }
  if (a.name == "cn") {
    need_args(a, 2);
    law.smn = SmnModel::contaminated_normal(a.args[0], a.args[1]);
    law.smn.validate();
    return law;
  }
  if (a.name == "laplace_mix") {
    law.kind = Kind::LaplaceMix;
    return law;
  }
  if (a.name == "bs_mix") {
    need_args(a, 2);
    law.kind = Kind::BsMix;
    law.bs_scale = a.args[0];
    law.bs_shape = a.args[1];
    if (!(law.bs_scale > 0.0 && law.bs_shape > 0.0))
      throw std::invalid_argument("bs_mix needs positive parameters");
    return law;
  }
  if (a.name == "gig_mix") {
    need_args(a, 3);
    law.kind = Kind::GigMix;
    law.gig_kappa = a.args[0];
    law.gig_chi = a.args[1];
    law.gig_psi = a.args[2];
    return law;
  }
  throw std::invalid_argument("unknown error law: " + text);
}

std::string ErrorLaw::label() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::Smn:
      switch (smn.family) {
        case Family::Normal: return "n";
        case Family::StudentT: os << "t(" << smn.nu << ")"; return os.str();
        case Family::Slash: os << "sl(" << smn.nu << ")"; return os.str();
        case Family::ContaminatedNormal:
          os << "cn(" << smn.nu << "," << smn.gamma << ")";
          return os.str();
      }
      return "?";
    case Kind::LaplaceMix: return "laplace_mix";
    case Kind::BsMix: os << "bs_mix(" << bs_scale << "," << bs_shape << ")"; return os.str();
    case Kind::GigMix:
      os << "gig_mix(" << gig_kappa << "," << gig_chi << "," << gig_psi << ")";
      return os.str();
  }
  return "?";
}

CensoringSpec CensoringSpec::parse(const std::string& text) {
  const ArgList a = parse_call(text);
  CensoringSpec c;
  if (a.name == "none") {
    c.kind = Kind::None;
    return c;
  }
  if (a.name == "interval") {
    need_args(a, 2);
    c.kind = Kind::Interval;
    c.p = a.args[0];
    c.c = a.args[1];
    return c;
  }
  if (a.name == "left") {
    need_args(a, 1);
    c.kind = Kind::LeftProp;
    c.p = a.args[0];
    return c;
  }
  if (a.name == "right") {
    need_args(a, 1);
    c.kind = Kind::RightProp;
    c.p = a.args[0];
    return c;
  }
  if (a.name == "left_at") {
    need_args(a, 1);
    c.kind = Kind::LeftAt;
    c.threshold = a.args[0];
    return c;
  }
  if (a.name == "right_at") {
    need_args(a, 1);
    c.kind = Kind::RightAt;
    c.threshold = a.args[0];
    return c;
  }
  throw std::invalid_argument("unknown censoring spec: " + text);
}

std::string CensoringSpec::label() const {
  std::ostringstream os;
  switch (kind) {
    case Kind::None: return "none";
    case Kind::Interval: os << "interval(" << p << "," << c << ")"; return os.str();
    case Kind::LeftProp: os << "left(" << p << ")"; return os.str();
    case Kind::RightProp: os << "right(" << p << ")"; return os.str();
    case Kind::LeftAt: os << "left_at(" << threshold << ")"; return os.str();
    case Kind::RightAt: os << "right_at(" << threshold << ")"; return os.str();
  }
  return "?";
}

void ScenarioSpec::validate() const {
  if (n < 2) throw std::invalid_argument("scenario needs n >= 2");
  if (beta.size() != p()) throw std::invalid_argument("beta length must match covariate count");
  if (!(sigma2 > 0.0)) throw std::invalid_argument("sigma2 must be positive");
  if (replications < 1) throw std::invalid_argument("replications must be >= 1");
  if (censoring.kind == CensoringSpec::Kind::Interval) {
    if (!(censoring.p >= 0.0 && censoring.p < 1.0))
      throw std::invalid_argument("interval censoring needs p in [0,1)");
    if (!(censoring.c > 0.0)) throw std::invalid_argument("interval censoring needs c > 0");
  }
  if (censoring.kind == CensoringSpec::Kind::LeftProp ||
      censoring.kind == CensoringSpec::Kind::RightProp) {
    if (!(censoring.p > 0.0 && censoring.p < 1.0))
      throw std::invalid_argument("quantile censoring needs p in (0,1)");
  }
  if (noise_count < 0) throw std::invalid_argument("noise count must be >= 0");
  if (z.kind == ZLaw::Kind::CorrNormal &&
      static_cast<std::size_t>(z.col) >= covariates.size())
    throw std::invalid_argument("corr_normal column out of range");
}

Dataset gen_regression(const ScenarioSpec& spec, std::mt19937_64& rng, TruthRecord* truth) {
  spec.validate();
  std::normal_distribution<double> z01(0.0, 1.0);

  std::vector<CensoredObservation> rows;
  rows.reserve(spec.n);
  TruthRecord local;
  local.beta = spec.beta;
  local.sigma2 = spec.sigma2;
  const double sigma = std::sqrt(spec.sigma2);

  for (std::size_t i = 0; i < spec.n; ++i) {
    std::vector<double> x;
    x.reserve(spec.p());
    if (spec.intercept) x.push_back(1.0);
    for (const auto& law : spec.covariates) x.push_back(law.draw(rng));

    double z;
    switch (spec.z.kind) {
      case ZLaw::Kind::Uniform: {
        std::uniform_real_distribution<double> d(spec.z.a, spec.z.b);
        z = d(rng);
        break;
      }
      case ZLaw::Kind::Normal: {
        std::normal_distribution<double> d(spec.z.a, spec.z.b);
        z = d(rng);
        break;
      }
      case ZLaw::Kind::CorrNormal: {
        const double base = x[spec.z.col + (spec.intercept ? 1 : 0)];
        z = spec.z.rho * base + std::sqrt(1.0 - spec.z.rho * spec.z.rho) * z01(rng);
        break;
      }
      default:
        z = 0.0;
    }

    const double u = spec.error.draw_scale_factor(rng);
    const double eps = sigma * z01(rng) / std::sqrt(u);
    double mean = spec.psi(z);
    for (std::size_t j = 0; j < x.size(); ++j) mean += spec.beta[j] * x[j];
    const double y = mean + eps;

    local.psi_values.push_back(spec.psi(z));
    local.y.push_back(y);
    rows.push_back(CensoredObservation::exact(y, std::move(x), z));
  }

  std::vector<std::string> names;
  if (spec.intercept) names.push_back("intercept");
  for (std::size_t j = 0; j < spec.covariates.size(); ++j)
    names.push_back("x" + std::to_string(j + 1));
  Dataset data = validate_dataset(std::move(rows), std::move(names), spec.intercept);
  if (truth) *truth = std::move(local);
  return data;
}

Dataset censor_interval(const Dataset& data, double p, double c, std::mt19937_64& rng) {
  if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("p must be in [0,1)");
  if (!(c > 0.0)) throw std::invalid_argument("c must be positive");
  const std::size_t n = data.n();
  const std::size_t nc = static_cast<std::size_t>(std::floor(static_cast<double>(n) * p)) + 1;
  if (nc >= n) throw std::invalid_argument("censored count would reach the sample size");

  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < nc; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  std::vector<std::size_t> chosen(idx.begin(), idx.begin() + nc);
  std::sort(chosen.begin(), chosen.end());

  Dataset out = data;
  std::uniform_real_distribution<double> uc(0.0, c);
  for (std::size_t i : chosen) {
    auto& row = out.rows[i];
    if (row.censored) throw std::invalid_argument("censor_interval requires exact rows");
    const double y = row.y();
    const double u1 = uc(rng);
    const double u2 = uc(rng);
    const double c1 = std::max(y - u1, y + u2 - c);
    const double c2 = std::min(y + u2, y - u1 + c);
    row = CensoredObservation::interval(c1, c2, row.x, row.z);
  }
  return out;
}

Dataset censor_left_at(const Dataset& data, double threshold) {
  if (!std::isfinite(threshold)) throw std::invalid_argument("threshold must be finite");
  Dataset out = data;
  for (auto& row : out.rows) {
    if (!row.censored && row.y() <= threshold)
      row = CensoredObservation::interval(-kInf, threshold, row.x, row.z);
  }
  return out;
}

Dataset censor_right_at(const Dataset& data, double threshold) {
  if (!std::isfinite(threshold)) throw std::invalid_argument("threshold must be finite");
  Dataset out = data;
  for (auto& row : out.rows) {
    if (!row.censored && row.y() >= threshold)
      row = CensoredObservation::interval(threshold, kInf, row.x, row.z);
  }
  return out;
}

namespace {
double order_statistic(const Dataset& data, std::size_t k) {
  std::vector<double> ys;
  ys.reserve(data.n());
  for (const auto& r : data.rows) {
    if (r.censored) throw std::invalid_argument("quantile censoring requires exact rows");
    ys.push_back(r.y());
  }
  if (k < 1 || k > ys.size()) throw std::invalid_argument("quantile index out of range");
  std::nth_element(ys.begin(), ys.begin() + (k - 1), ys.end());
  return ys[k - 1];
}
}  // namespace

Dataset censor_left(const Dataset& data, double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("p must be in (0,1)");
  const std::size_t k =
      static_cast<std::size_t>(std::ceil(p * static_cast<double>(data.n())));
  return censor_left_at(data, order_statistic(data, k));
}

Dataset censor_right(const Dataset& data, double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("p must be in (0,1)");
  const std::size_t nc =
      static_cast<std::size_t>(std::ceil(p * static_cast<double>(data.n())));
  return censor_right_at(data, order_statistic(data, data.n() - nc + 1));
}

Dataset apply_censoring(const Dataset& data, const CensoringSpec& spec, std::mt19937_64& rng) {
  switch (spec.kind) {
    case CensoringSpec::Kind::None: return data;
    case CensoringSpec::Kind::Interval: return censor_interval(data, spec.p, spec.c, rng);
    case CensoringSpec::Kind::LeftProp: return censor_left(data, spec.p);
    case CensoringSpec::Kind::RightProp: return censor_right(data, spec.p);
    case CensoringSpec::Kind::LeftAt: return censor_left_at(data, spec.threshold);
    case CensoringSpec::Kind::RightAt: return censor_right_at(data, spec.threshold);
  }
  return data;
}

Dataset inject_noise(const Dataset& data, int count, const ScenarioSpec& spec,
                     std::mt19937_64& rng, TruthRecord* truth) {
  if (count < 0) throw std::invalid_argument("noise count must be >= 0");
  Dataset out = data;
  for (int k = 0; k < count; ++k) {
    std::vector<double> x;
    x.reserve(spec.p());
    if (spec.intercept) x.push_back(1.0);
    for (std::size_t j = 0; j < spec.covariates.size(); ++j) {
      // first non-intercept covariate takes the noise law, the rest keep theirs
      x.push_back(j == 0 ? spec.noise.x1.draw(rng) : spec.covariates[j].draw(rng));
    }
    const double z = spec.noise.z.draw(rng);
    const double y = spec.noise.y.draw(rng);
    out.rows.push_back(CensoredObservation::exact(y, std::move(x), z));
    if (truth) {
      truth->psi_values.push_back(spec.psi(z));
      truth->y.push_back(y);
    }
  }
  return out;
}

Dataset perturb_max(const Dataset& data, double delta) {
  Dataset out = data;
  std::size_t best = out.n();
  double ymax = -kInf;
  for (std::size_t i = 0; i < out.n(); ++i) {
    const auto& r = out.rows[i];
    if (!r.censored && r.y() > ymax) {
      ymax = r.y();
      best = i;
    }
  }
  if (best == out.n()) throw std::invalid_argument("perturb_max requires an exact row");
  auto& row = out.rows[best];
  row = CensoredObservation::exact(ymax - delta, row.x, row.z);
  return out;
}

// ---------------------------------------------------------------------------
// study driver

EcmeConfig StudySpec::fit_config(Family f) const {
  EcmeConfig cfg;
  cfg.family = f;
  cfg.knot_rule = knot_rule;
  cfg.explicit_knots = explicit_knots;
  cfg.placement = placement;
  cfg.degree = degree;
  cfg.epsilon = epsilon;
  cfg.k_max = k_max;
  return cfg;
}

namespace {

ReplicationOutcome fit_one_cell(const StudySpec& study, Family family, const Dataset& data,
                                const TruthRecord& truth) {
  ReplicationOutcome out;
  const ScenarioSpec& sc = study.scenario;
  const EcmeConfig cfg = study.fit_config(family);

  FitResult base = fit(data, cfg);
  out.converged = base.converged;
  out.aic = base.aic;
  out.bic = base.bic;
  out.beta_hat.assign(base.beta.data(), base.beta.data() + base.beta.size());
  out.sigma2_hat = base.sigma2;
  out.nu_hat = base.model.nu;
  out.gamma_hat = base.model.gamma;

  const std::size_t n = data.n();
  double ia = 0.0, mi = 0.0;
  std::vector<double> alpha(base.alpha.data(), base.alpha.data() + base.alpha.size());
  for (std::size_t i = 0; i < n; ++i) {
    const double ps = psi_eval(alpha, base.basis, data.rows[i].z);
    const double diff = ps - truth.psi_values[i];
    ia += std::fabs(diff);
    mi += diff * diff;
  }
  out.iabias_sum = ia / static_cast<double>(n);
  out.mise_sum = mi / static_cast<double>(n);

  if (data.censored_count() > 0) {
    const std::vector<double> imputed = impute(base, data);
    for (std::size_t i = 0; i < n; ++i) {
      if (!data.rows[i].censored) continue;
      out.mae_abs_sum += std::fabs(imputed[i] - truth.y[i]);
      ++out.mae_count;
    }
  }

  for (double delta : sc.deltas) {
    const Dataset shifted = perturb_max(data, delta);
    const FitResult moved = fit(shifted, cfg);
    double sum = 0.0;
    int terms = 0;
    for (Eigen::Index j = 0; j < base.beta.size(); ++j) {
      if (std::fabs(base.beta(j)) < 1e-8) continue;  // skipped, counted by caller
      sum += std::fabs((moved.beta(j) - base.beta(j)) / base.beta(j));
      ++terms;
    }
    sum += std::fabs((moved.sigma2 - base.sigma2) / base.sigma2);
    ++terms;
    out.mmre_sums.push_back(sum);
    out.mmre_terms.push_back(terms);
  }
  return out;
}

}  // namespace

CellReport metrics(const std::vector<ReplicationOutcome>& outcomes, const ScenarioSpec& spec,
                   Family family) {
  CellReport rep;
  rep.scenario = spec.name;
  rep.family = family;
  rep.replications = static_cast<int>(outcomes.size());
  rep.deltas = spec.deltas;

  const std::size_t np = spec.p();
  CompensatedSum aic, bic, iab, mis, mae;
  std::vector<CompensatedSum> bias(np + 1), mse(np + 1);
  std::vector<CompensatedSum> mmre(spec.deltas.size());
  std::vector<long> mmre_included(spec.deltas.size(), 0);
  long mae_rows = 0;
  int ok = 0, converged = 0;

  for (const auto& o : outcomes) {
    if (o.failed) {
      ++rep.failures;
      continue;
    }
    ++ok;
    converged += o.converged ? 1 : 0;
    aic.add(o.aic);
    bic.add(o.bic);
    iab.add(o.iabias_sum);
    mis.add(o.mise_sum);
    mae.add(o.mae_abs_sum);
    mae_rows += o.mae_count;
    for (std::size_t j = 0; j < np && j < o.beta_hat.size(); ++j) {
      const double err = o.beta_hat[j] - spec.beta[j];
      bias[j].add(err);
      mse[j].add(err * err);
    }
    const double serr = o.sigma2_hat - spec.sigma2;
    bias[np].add(serr);
    mse[np].add(serr * serr);
    for (std::size_t d = 0; d < spec.deltas.size() && d < o.mmre_sums.size(); ++d) {
      mmre[d].add(o.mmre_sums[d]);
      mmre_included[d] += o.mmre_terms[d];
      rep.mmre_skipped += static_cast<int>(np) + 1 - o.mmre_terms[d];
    }
  }

  if (ok > 0) {
    const double r = static_cast<double>(ok);
    rep.mean_aic = aic.value() / r;
    rep.mean_bic = bic.value() / r;
    rep.iabias = iab.value() / r;
    rep.mise = mis.value() / r;
    rep.convergence_rate = converged / r;
    for (std::size_t j = 0; j <= np; ++j) {
      rep.bias.push_back(bias[j].value() / r);
      rep.mse.push_back(mse[j].value() / r);
    }
    rep.mae_rows = static_cast<int>(mae_rows);
    rep.mae = mae_rows > 0 ? mae.value() / static_cast<double>(mae_rows) : 0.0;
    for (std::size_t d = 0; d < spec.deltas.size(); ++d)
      rep.mmre.push_back(mmre_included[d] > 0
                             ? mmre[d].value() / static_cast<double>(mmre_included[d])
                             : 0.0);
  }
  return rep;
}

StudyReport run_study(const StudySpec& study, int parallelism) {
  const ScenarioSpec& sc = study.scenario;
  sc.validate();
  if (study.families.empty()) throw std::invalid_argument("study needs at least one family");

  const std::size_t R = static_cast<std::size_t>(sc.replications);
  const std::size_t F = study.families.size();
  std::vector<std::vector<ReplicationOutcome>> table(F, std::vector<ReplicationOutcome>(R));

  parallel_for(R, parallelism, [&](std::size_t r) {
    std::mt19937_64 rng(derive_seed(sc.seed, 0, r));
    TruthRecord truth;
    Dataset data = gen_regression(sc, rng, &truth);
    data = apply_censoring(data, sc.censoring, rng);
    if (sc.noise_count > 0) data = inject_noise(data, sc.noise_count, sc, rng, &truth);
    for (std::size_t f = 0; f < F; ++f) {
      try {
        table[f][r] = fit_one_cell(study, study.families[f], data, truth);
      } catch (const std::exception& ex) {
        table[f][r].failed = true;
        table[f][r].error = ex.what();
      }
    }
  });

  StudyReport report;
  report.name = sc.name;
  report.seed = sc.seed;
  report.replications = sc.replications;
  for (std::size_t f = 0; f < F; ++f)
    report.cells.push_back(metrics(table[f], sc, study.families[f]));
  return report;
}

}  // namespace screg
