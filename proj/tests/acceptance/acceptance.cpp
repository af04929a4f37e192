// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hmm/analytic.hpp"
#include "hmm/cli.hpp"
#include "hmm/filter.hpp"
#include "hmm/kernels.hpp"
#include "hmm/rates.hpp"
#include "hmm/verify.hpp"
#include "oracle.hpp"

using namespace hmm;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

GridMeasure random_probability(const std::shared_ptr<const GridSpace>& s, std::mt19937_64& rng) {
  std::vector<double> w(s->size());
  double total = 0.0;
  for (auto& v : w) total += v = std::uniform_real_distribution<double>(0.01, 1.0)(rng);
  for (auto& v : w) v /= total;
  return GridMeasure::from_masses(s, w);
}

ParameterPoint random_theta(const ParameterBox& box, std::mt19937_64& rng) {
  std::vector<double> t(box.size());
  for (std::size_t k = 0; k < t.size(); ++k)
    t[k] = std::uniform_real_distribution<double>(box.lower[k], box.upper[k])(rng);
  return ParameterPoint(t);
}

GridMeasure point_mass(const ModelFamily& m, double x) {
  const double at[] = {x};
  return dirac(m.state_space(), at);
}

Outcome oracle_equivalence() {
  const auto f = oracle::fixture_finite();
  const auto cfg = oracle::load_fixture("fix_finite.json");
  std::mt19937_64 rng(1);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    std::vector<std::size_t> ys(12);
    ObservationPath path(1);
    for (auto& y : ys) {
      y = rng() % 2;
      const double v[] = {double(y)};
      path.push_back(v);
    }
    const auto theta = random_theta(cfg.model->parameter_box(), rng);
    const auto lambda = random_probability(cfg.model->state_space(), rng);
    const Complex got = filter_path(*cfg.model, theta, lambda, path).log_normalizer_sum;
    const Complex want = f.path_sum_log(theta.coords(), lambda.masses(), ys);
    worst = std::max(worst, std::abs(got - want));
  }
  return {worst <= 1e-10, "paths=50 n=12 max_abs_err=" + num(worst) + " tol=1e-10"};
}

Outcome matrix_maps() {
  const auto f = oracle::fixture_finite();
  const auto cfg = oracle::load_fixture("fix_finite.json");
  std::mt19937_64 rng(2);
  double worst_g = 0.0, worst_h = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto theta = random_theta(cfg.model->parameter_box(), rng);
    const auto lambda = random_probability(cfg.model->state_space(), rng);
    const std::size_t y = rng() % 2;
    const double ys[] = {double(y)};
    const auto st = update(*cfg.model, theta, lambda, ys);
    const auto g = f.g(theta.coords(), lambda.masses(), y);
    const auto got = st.measure.masses();
    for (std::size_t x = 0; x < g.size(); ++x) worst_g = std::max(worst_g, std::abs(got[x] - g[x]));
    worst_h = std::max(worst_h, std::abs(st.log_normalizer_sum - f.h(theta.coords(), lambda.masses(), y)));
  }
  return {worst_g <= 1e-12 && worst_h <= 1e-12,
          "cases=1000 G_err=" + num(worst_g) + " h_err=" + num(worst_h) + " tol=1e-12"};
}

Outcome exact_cross_check() {
  const auto cfg = oracle::load_fixture("fix_finite.json");
  const auto& m = dynamic_cast<const FiniteModel&>(*cfg.model);
  const auto e = estimate_entropy(m, cfg.theta, cfg.initial, 8, {100000, cfg.seed});
  const double exact = exact_entropy(m, cfg.theta, cfg.initial, 8);
  const double gap = std::abs(e.value.real() - exact);
  return {gap <= 3.0 * e.std_error && e.std_error < 5e-3,
          "mc=" + num(e.value.real()) + " exact=" + num(exact) + " gap=" + num(gap) +
              " stderr=" + num(e.std_error) + " tol=3*stderr, stderr<5e-3"};
}

Outcome iid_reduction() {
  const auto cfg = oracle::load_fixture("fix_iid.json");
  const std::size_t symbols = cfg.model->observation_space().symbols();
  const double log_m = std::log(double(symbols));
  const auto est = estimate_entropy(*cfg.model, cfg.theta, cfg.initial, cfg.horizons, {cfg.num_traj, cfg.seed});
  bool ok = true;
  double worst = 0.0;
  for (const auto& e : est) {
    const double gap = std::abs(e.value.real() - log_m);
    worst = std::max(worst, gap);
    ok = ok && gap <= std::max(3.0 * e.std_error, 1e-12);
  }
  return {ok, "M=" + std::to_string(symbols) + " horizons=" + std::to_string(est.size()) +
                  " max_gap=" + num(worst) + " tol=max(3*stderr,1e-12)"};
}

Outcome filter_forgetting() {
  bool ok = true;
  std::string detail;
  for (const char* name : {"fix_finite.json", "fix_mixture.json"}) {
    const auto cfg = oracle::load_fixture(name);
    ForgettingConfig fc;
    fc.num_paths = 200;
    fc.n_max = 100;
    fc.seed = cfg.seed;
    const auto r = forgetting_experiment(*cfg.model, cfg.theta, fc);
    ok = ok && r.within_benchmark && r.monotone && r.fitted_runs > 0;
    detail += std::string(cfg.model->kind()) + ": rate=" + num(r.mean_rate) + " bound=" +
              num(r.benchmark) + " eps=" + num(r.epsilon_star) + " max_rise=" +
              num(r.max_relative_increase) + "; ";
  }
  return {ok, detail + "tol=1-eps^2+0.05, rise<=0.1"};
}

Outcome complex_forgetting() {
  const auto cfg = oracle::load_fixture("fix_finite.json");
  const double im = 0.01 * cfg.model->continuation_radius();
  std::vector<Complex> c(cfg.theta.coords().begin(), cfg.theta.coords().end());
  for (auto& v : c) v += Complex(0.0, im);
  ForgettingConfig fc;
  fc.num_paths = 200;
  fc.n_max = 100;
  fc.seed = cfg.seed;
  fc.complex_perturbation = im;
  const auto r = forgetting_experiment(*cfg.model, ParameterPoint(c), fc);
  return {r.final_distance < 1e-8, "im=" + num(im) + " max_d100=" + num(r.final_distance) + " tol=1e-8"};
}

Outcome lambda_independence_check() {
  const auto cfg = oracle::load_fixture("fix_finite.json");
  const std::size_t horizons[] = {8, 16, 32, 64, 128};
  const auto r = lambda_independence(*cfg.model, cfg.theta, point_mass(*cfg.model, 0.0),
                                     GridMeasure::uniform(cfg.model->state_space()), horizons,
                                     {20000, cfg.seed});
  const double gap = std::abs(r.first_limit->limit - r.second_limit->limit);
  const double combined = std::hypot(r.first_limit->residual, r.second_limit->residual);
  const bool ok = r.decay_exponent >= 0.8 && r.decay_exponent <= 1.2 && gap <= 2.0 * combined;
  return {ok, "exponent=" + num(r.decay_exponent) + " limit_gap=" + num(gap) + " combined_residual=" +
                  num(combined) + " tol=[0.8,1.2], 2*residual"};
}

Outcome convergence_rate() {
  const auto cfg = oracle::load_fixture("fix_finite.json");
  const std::size_t horizons[] = {8, 16, 32, 64, 128, 256};
  const auto r = rate_convergence_experiment(*cfg.model, cfg.theta, horizons, {100000, cfg.seed});
  std::string gaps;
  for (std::size_t i = 0; i < r.gaps.size(); ++i)
    gaps += (i ? "," : "") + num(r.gaps[i]) + "+-" + num(r.gap_std_errors[i]);
  if (r.inconclusive)
    return {true, "inconclusive: gaps=" + gaps + " (" + r.note + ")"};
  return {r.slope >= -1.3 && r.slope <= -0.7, "slope=" + num(r.slope) + " gaps=" + gaps + " tol=[-1.3,-0.7]"};
}

Outcome analyticity() {
  const auto cfg = oracle::load_fixture("fix_finite.json");
  AnalyticityConfig ac;
  ac.seed = cfg.seed;
  const auto r = analyticity_report(*cfg.model, cfg.theta, ac);
  const bool checks = r.gradient_error <= 1e-5 && r.cauchy_riemann <= 1e-6 && r.taylor_error <= 1e-8;
  std::ostringstream out, err;
  const int code = cli::run({"hmm-entropy", "analyticity", "--config", oracle::fixture_path("fix_broken.json")},
                            out, err);
  return {checks && r.passed && code == cli::exit_failed,
          "grad_err=" + num(r.gradient_error) + " cr=" + num(r.cauchy_riemann) + " taylor=" +
              num(r.taylor_error) + " broken_exit=" + std::to_string(code) +
              " tol=1e-5,1e-6,1e-8,exit 2"};
}

Outcome ergodicity() {
  const double p[] = {0.9, 0.1, 0.1, 0.9};
  const double tr = p[0] + p[3], det = p[0] * p[3] - p[1] * p[2];
  const double disc = std::sqrt(tr * tr - 4.0 * det);
  const double second = std::min(std::abs(0.5 * (tr + disc)), std::abs(0.5 * (tr - disc)));
  const auto m = oracle::untilted(2, 2, {p, p + 4}, {0.7, 0.3, 0.4, 0.6}).model();
  const auto inv = invariant_distribution(build_joint_kernel(*m, ParameterPoint(std::vector<double>{0.0})));

  const auto cfg = oracle::load_fixture("fix_finite.json");
  const double d = cfg.model->continuation_radius();
  const auto k = build_joint_kernel(*cfg.model, ParameterPoint(std::vector<Complex>{{0.2, 0.5 * d}, {-0.3, -0.5 * d}}));
  std::mt19937_64 rng(10);
  std::vector<Complex> w(k.size());
  Complex total = 0.0;
  for (auto& v : w) total += v = {std::uniform_real_distribution<double>(0.1, 1.0)(rng),
                                  std::uniform_real_distribution<double>(-0.2, 0.2)(rng)};
  for (auto& v : w) v /= total;
  GridMeasure z = GridMeasure::from_masses(k.space_ptr(), w);
  double drift = 0.0;
  for (int n = 0; n < 50; ++n) {
    z = k.apply(z);
    drift = std::max(drift, std::abs(total_mass(z) - 1.0));
  }
  return {std::abs(inv.rate - second) <= 0.02 && drift <= 1e-8,
          "rate=" + num(inv.rate) + " eigen=" + num(second) + " mass_drift=" + num(drift) +
              " tol=0.02,1e-8"};
}

Outcome determinism() {
  const auto dir = std::filesystem::temp_directory_path() / "hmm_entropy_acceptance";
  std::filesystem::create_directories(dir);
  std::vector<std::string> contents;
  int failures = 0;
  for (const char* threads : {"1", "1", "8", "8"}) {
    const auto path = (dir / ("selftest_" + std::to_string(contents.size()) + ".csv")).string();
    std::ostringstream out, err;
    if (cli::run({"hmm-entropy", "selftest", "--seed", "12345", "--threads", threads, "--out", path}, out, err) != 0)
      ++failures;
    std::ifstream f(path, std::ios::binary);
    contents.emplace_back(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
  }
  bool same = !contents[0].empty();
  for (const auto& c : contents) same = same && c == contents[0];
  return {same && failures == 0, "runs=4 threads=1,1,8,8 identical=" + std::string(same ? "yes" : "no") +
                                     " bytes=" + std::to_string(contents[0].size())};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
    double budget_seconds;  // 0: no runtime bound
  };
  const std::vector<Criterion> criteria{
      {"oracle_equivalence", oracle_equivalence, 5.0},
      {"matrix_maps", matrix_maps, 1.0},
      {"exact_entropy_cross_check", exact_cross_check, 30.0},
      {"iid_reduction", iid_reduction, 0.0},
      {"filter_forgetting", filter_forgetting, 0.0},
      {"complex_forgetting", complex_forgetting, 0.0},
      {"lambda_independence", lambda_independence_check, 0.0},
      {"convergence_rate", convergence_rate, 300.0},
      {"analyticity", analyticity, 0.0},
      {"geometric_ergodicity", ergodicity, 0.0},
      {"determinism", determinism, 0.0},
  };
  const int threads = omp_get_max_threads();
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    omp_set_num_threads(threads);
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (criteria[i].budget_seconds > 0.0 && secs > criteria[i].budget_seconds) {
      o.pass = false;
      o.detail += " (over the " + num(criteria[i].budget_seconds) + "s budget)";
    }
    if (!o.pass) ++failed;
    std::printf("%s %2zu %-26s %s time=%.2fs\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].name,
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%s %zu/%zu criteria passed\n", failed ? "FAIL" : "PASS", criteria.size() - failed,
              criteria.size());
  return failed ? 1 : 0;
}
