#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "hmm/analytic.hpp"
#include "hmm/errors.hpp"
#include "hmm/rates.hpp"
#include "oracle.hpp"

using namespace hmm;

namespace {

ParameterPoint real_point(std::vector<double> v) { return ParameterPoint(std::move(v)); }

FrozenLogLikelihood frozen(const ExperimentConfig& cfg, std::size_t n, std::size_t count,
                           std::uint64_t seed) {
  const DataSource src{cfg.model.get(), cfg.theta, GridMeasure::uniform(cfg.model->state_space())};
  return FrozenLogLikelihood(*cfg.model, GridMeasure::uniform(cfg.model->state_space()),
                             sample_paths(src, n, count, seed), n);
}

double relative_gap(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    num = std::max(num, std::abs(a[k] - b[k]));
    den = std::max(den, std::abs(b[k]));
  }
  return num / den;
}

}  // namespace

TEST_CASE("complex step of elementary functions") {
  const ScalarFunction sq = [](const ParameterPoint& p) { return p[0] * p[0]; };
  CHECK(complex_step_grad(sq, real_point({3.0}))[0] == doctest::Approx(6.0).epsilon(1e-15));
  const ScalarFunction e = [](const ParameterPoint& p) { return std::exp(p[0] + 2.0 * p[1]); };
  const auto g = complex_step_grad(e, real_point({0.0, 0.0}));
  CHECK(g[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(g[1] == doctest::Approx(2.0).epsilon(1e-15));
  const auto d = central_difference_grad(e, real_point({0.0, 0.0}));
  CHECK(d[1] == doctest::Approx(2.0).epsilon(1e-7));
}

TEST_CASE("Cauchy coefficients of known series") {
  const ScalarFunction e = [](const ParameterPoint& p) { return std::exp(p[0]); };
  TaylorProbe probe{real_point({0.0}), {1.0}, 0.5, 32, {}};
  const auto c = cauchy_coeffs(e, probe, 6);
  REQUIRE(c.size() == 7);
  double factorial = 1.0;
  for (std::size_t k = 0; k <= 6; ++k) {
    if (k > 0) factorial *= double(k);
    CHECK(std::abs(c[k] - 1.0 / factorial) <= 1e-10);
  }
  CHECK(probe.coefficients == c);

  const ScalarFunction quad = [](const ParameterPoint& p) { return 1.0 - 2.0 * p[0] + 0.5 * p[0] * p[0]; };
  TaylorProbe qp{real_point({0.0}), {1.0}, 0.5, 24, {}};
  const auto cq = cauchy_coeffs(quad, qp, 8);
  CHECK(std::abs(cq[1] + 2.0) <= 1e-12);
  for (std::size_t k = 3; k <= 8; ++k) CHECK(std::abs(cq[k]) <= 1e-12);
  CHECK(std::abs(taylor_evaluate(cq, 0.3) - quad(real_point({0.3}))) <= 1e-12);

  TaylorProbe tight{real_point({0.0}), {1.0}, 0.5, 12, {}};
  CHECK_THROWS_AS(cauchy_coeffs(e, tight, 6), BudgetError);
}

TEST_CASE("directional probes normalize the direction") {
  const ScalarFunction f = [](const ParameterPoint& p) { return p[0] + p[1]; };
  TaylorProbe probe{real_point({0.0, 0.0}), {3.0, 4.0}, 0.2, 16, {}};
  const auto c = cauchy_coeffs(f, probe, 3);
  CHECK(std::abs(c[1] - 1.4) <= 1e-12);
}

TEST_CASE("Cauchy-Riemann residual separates analytic and anti-analytic maps") {
  const ParameterPoint eta(std::vector<Complex>{Complex(0.3, 0.2)});
  const ScalarFunction sq = [](const ParameterPoint& p) { return p[0] * p[0]; };
  CHECK(cauchy_riemann_residual(sq, eta) <= 1e-8);
  const ScalarFunction conj = [](const ParameterPoint& p) { return std::conj(p[0]); };
  CHECK(cauchy_riemann_residual(conj, eta) == doctest::Approx(2.0).epsilon(1e-8));
}

TEST_CASE("frozen log-likelihood gradient matches central differences on shared paths") {
  const auto cfg = oracle::load_fixture("fix_finite.json");
  const auto f = frozen(cfg, 16, 10000, 3);
  const auto cs = complex_step_grad(f.function(), cfg.theta);
  const auto fd = central_difference_grad(f.function(), cfg.theta);
  CHECK(relative_gap(cs, fd) <= 1e-5);
}

TEST_CASE("fixed path gradients agree for every family at random parameters") {
  for (const char* name : {"fix_finite.json", "fix_mixture.json", "fix_state_space.json"}) {
    CAPTURE(name);
    const auto cfg = oracle::load_fixture(name);
    const auto f = frozen(cfg, 12, 4, 5);
    std::mt19937_64 rng(101);
    std::uniform_real_distribution<double> u(-0.9, 0.9);
    for (int i = 0; i < 5; ++i) {
      const auto theta = real_point({u(rng), u(rng)});
      CHECK(relative_gap(complex_step_grad(f.function(), theta),
                         central_difference_grad(f.function(), theta)) <= 1e-6);
    }
  }
}

TEST_CASE("path log-likelihood series reconstructs direct evaluation at half radius") {
  const auto cfg = oracle::load_fixture("fix_finite.json");
  const auto f = frozen(cfg, 20, 1, 11);
  const double radius = 0.5 * cfg.model->continuation_radius();
  TaylorProbe probe{cfg.theta, {0.6, 0.8}, radius, 96, {}};
  const auto c = cauchy_coeffs(f.function(), probe, 24);
  double worst = 0.0;
  for (int j = 0; j < 8; ++j) {
    const Complex t = 0.5 * radius * std::polar(1.0, 2.0 * 3.141592653589793 * j / 8.0);
    const Complex direct = f(cfg.theta.moved(t, std::vector<double>{0.6, 0.8}));
    worst = std::max(worst, std::abs(taylor_evaluate(c, t) - direct) / (1.0 + std::abs(direct)));
  }
  CHECK(worst <= 1e-8);
  CHECK(std::abs(c[0] - f(cfg.theta)) <= 1e-10);
}

TEST_CASE("log-normalizer path sum satisfies Cauchy-Riemann near the real parameter") {
  const auto cfg = oracle::load_fixture("fix_finite.json");
  const auto f = frozen(cfg, 32, 8, 13);
  const ParameterPoint eta(std::vector<Complex>{{0.1, 0.1}, {-0.2, 0.05}});
  const double scale = 1.0 + std::abs(f(eta));
  for (std::size_t k = 0; k < 2; ++k) CHECK(cauchy_riemann_residual(f.function(), eta, k) <= 1e-6 * scale);
}

TEST_CASE("analyticity reports pass on the smooth fixtures") {
  for (const char* name : {"fix_finite.json", "fix_mixture.json"}) {
    CAPTURE(name);
    const auto cfg = oracle::load_fixture(name);
    AnalyticityConfig ac;
    ac.horizons = {8, 16};
    ac.num_paths = 16;
    ac.order = 16;
    ac.seed = cfg.seed;
    const auto r = analyticity_report(*cfg.model, cfg.theta, ac);
    CHECK(r.passed);
    CHECK(r.failed_checks.empty());
    CHECK(r.gradient_error <= 1e-5);
    CHECK(r.cauchy_riemann <= 1e-6);
    CHECK(r.taylor_error <= 1e-8);
    CHECK(r.center_error <= 1e-10);
  }
}

TEST_CASE("planted conjugate defect fails the Cauchy-Riemann check first") {
  const auto cfg = oracle::load_fixture("fix_broken.json");
  AnalyticityConfig ac;
  ac.horizons = {8, 16};
  ac.num_paths = 16;
  ac.order = 16;
  const auto r = analyticity_report(*cfg.model, cfg.theta, ac);
  CHECK_FALSE(r.passed);
  REQUIRE_FALSE(r.failed_checks.empty());
  CHECK(r.failed_checks.front() == "cauchy_riemann");
}
