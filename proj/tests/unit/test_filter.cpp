#include <doctest.h>

#include <cmath>
#include <random>

#include "hmm/errors.hpp"
#include "hmm/filter.hpp"
#include "hmm/reference.hpp"
#include "hmm/rates.hpp"
#include "oracle.hpp"

using namespace hmm;

namespace {

std::vector<oracle::C> masses(const GridMeasure& m) { return m.masses(); }

double max_diff(std::span<const Complex> a, std::span<const Complex> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

ObservationPath symbols(std::span<const std::size_t> ys) {
  ObservationPath p(1);
  for (std::size_t y : ys) {
    const double v[] = {double(y)};
    p.push_back(v);
  }
  return p;
}

GridMeasure random_probability(const std::shared_ptr<const GridSpace>& s, std::mt19937_64& rng) {
  std::vector<double> w(s->size());
  double total = 0.0;
  for (auto& v : w) total += v = std::uniform_real_distribution<double>(0.05, 1.0)(rng);
  for (auto& v : w) v /= total;
  return GridMeasure::from_masses(s, w);
}

}  // namespace

TEST_CASE("zero measure maps to zero") {
  const auto m = oracle::fixture_finite().model();
  const ParameterPoint theta(std::vector<double>{0.2, 0.1});
  const double y[] = {1.0};
  const auto r = update_unnormalized(*m, theta, GridMeasure::zero(m->state_space()), y);
  CHECK(tv_norm(r) == 0.0);
}

TEST_CASE("unnormalized update, log normalizer and update match the matrix maps") {
  const auto f = oracle::fixture_finite();
  const auto m = f.model();
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const bool complex = i % 2 == 1;
    const ParameterPoint eta(std::vector<Complex>{
        {u(rng), complex ? 0.4 * u(rng) : 0.0}, {u(rng), complex ? 0.4 * u(rng) : 0.0}});
    const auto lambda = random_probability(m->state_space(), rng);
    const std::size_t y = i % 3 == 0 ? 0 : 1;
    const double ys[] = {double(y)};
    const auto l = masses(lambda);

    CHECK(max_diff(masses(update_unnormalized(*m, eta, lambda, ys)), f.apply_r(eta.coords(), l, y)) <= 1e-14);
    CHECK(std::abs(log_normalizer(*m, eta, lambda, ys) - f.h(eta.coords(), l, y)) <= 1e-14);
    const auto st = update(*m, eta, lambda, ys);
    CHECK(max_diff(masses(st.measure), f.g(eta.coords(), l, y)) <= 1e-14);
    CHECK(std::abs(total_mass(st.measure) - 1.0) <= 1e-12);
    if (!complex) {
      CHECK(st.measure.is_probability(1e-12));
      CHECK(log_normalizer(*m, eta, lambda, ys).imag() == 0.0);
    }
  }
}

TEST_CASE("state independent emission factorizes the normalizer") {
  const auto m = oracle::untilted(3, 2, {0.5, 0.3, 0.2, 0.1, 0.6, 0.3, 0.3, 0.3, 0.4},
                                  {0.35, 0.65, 0.35, 0.65, 0.35, 0.65})
                     .model();
  const ParameterPoint theta(std::vector<double>{0.0});
  std::mt19937_64 rng(43);
  const auto xi = random_probability(m->state_space(), rng).scaled({2.5, -1.0});
  const double y[] = {1.0};
  const auto r = update_unnormalized(*m, theta, xi, y);
  CHECK(std::abs(total_mass(r) - 0.65 * total_mass(xi)) <= 1e-14);
  const auto p = random_probability(m->state_space(), rng);
  CHECK(log_normalizer(*m, theta, p, y).real() == doctest::Approx(std::log(0.65)).epsilon(1e-14));
}

TEST_CASE("state independent transition forgets the initial measure in one step") {
  const auto m = oracle::untilted(3, 2, {0.5, 0.3, 0.2, 0.5, 0.3, 0.2, 0.5, 0.3, 0.2},
                                  {0.9, 0.1, 0.4, 0.6, 0.2, 0.8})
                     .model();
  const ParameterPoint theta(std::vector<double>{0.0});
  std::mt19937_64 rng(47);
  const double y[] = {0.0};
  const auto a = update(*m, theta, random_probability(m->state_space(), rng), y).measure;
  const auto b = update(*m, theta, random_probability(m->state_space(), rng), y).measure;
  CHECK(tv_norm(a - b) <= 1e-15);
}

TEST_CASE("path log-likelihood equals the brute force hidden path sum") {
  const auto f = oracle::fixture_finite();
  const auto m = f.model();
  std::mt19937_64 rng(53);
  for (int i = 0; i < 10; ++i) {
    const ParameterPoint eta(std::vector<Complex>{{0.3, i % 2 ? 0.2 : 0.0}, {-0.5, i % 2 ? -0.1 : 0.0}});
    std::vector<std::size_t> ys(12);
    for (auto& y : ys) y = rng() % 2;
    const auto lambda = random_probability(m->state_space(), rng);
    const auto st = filter_path(*m, eta, lambda, symbols(ys));
    const auto expect = f.path_sum_log(eta.coords(), masses(lambda), ys);
    CHECK(std::abs(st.log_normalizer_sum - expect) <= 1e-10);
    CHECK(st.steps == 12);
    CHECK(st.normalizer_in_right_half_plane);
  }
}

TEST_CASE("empty path leaves the initial measure") {
  const auto m = oracle::fixture_finite().model();
  std::mt19937_64 rng(59);
  const auto lambda = random_probability(m->state_space(), rng);
  const auto st = filter_path(*m, ParameterPoint(std::vector<double>{0.0, 0.0}), lambda, ObservationPath(1));
  CHECK(st.log_normalizer_sum == Complex(0.0, 0.0));
  CHECK(tv_norm(st.measure - lambda) == 0.0);
}

TEST_CASE("i.i.d. model log-likelihood is the sum of emission logs") {
  const auto m = oracle::untilted(2, 3, {0.6, 0.4, 0.2, 0.8}, {0.2, 0.3, 0.5, 0.2, 0.3, 0.5}).model();
  const std::size_t ys[] = {0, 2, 2, 1, 0, 2, 1};
  double expect = 0.0;
  const double g[] = {0.2, 0.3, 0.5};
  for (std::size_t y : ys) expect += std::log(g[y]);
  const auto st = filter_path(*m, ParameterPoint(std::vector<double>{0.0}),
                              GridMeasure::uniform(m->state_space()), symbols(ys));
  CHECK(st.log_normalizer_sum.real() == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("composition identity holds at every split") {
  const auto m = oracle::fixture_finite().model();
  std::mt19937_64 rng(61);
  std::vector<std::size_t> ys(20);
  for (auto& y : ys) y = rng() % 2;
  const auto path = symbols(ys);
  const auto lambda = random_probability(m->state_space(), rng);
  const ParameterPoint theta(std::vector<double>{0.4, -0.2});
  const ParameterPoint eta(std::vector<Complex>{{0.4, 0.05}, {-0.2, -0.03}});
  for (std::size_t k : {std::size_t{0}, ys.size()}) {
    const auto c = compose_check(*m, theta, lambda, path, k);
    CHECK(c.measure_deviation == 0.0);
    CHECK(c.normalizer_mismatch == 0.0);
  }
  for (std::size_t k = 0; k <= ys.size(); ++k) {
    const auto real = compose_check(*m, theta, lambda, path, k);
    CHECK(real.measure_deviation <= 1e-10);
    CHECK(real.normalizer_mismatch <= 1e-10);
    CHECK(real.sequential_deviation <= 1e-10);
    const auto cplx = compose_check(*m, eta, lambda, path, k);
    CHECK(cplx.measure_deviation <= 1e-8);
    CHECK(cplx.normalizer_mismatch <= 1e-8);
  }
}

TEST_CASE("normalized update is invariant under complex scaling of the input") {
  const auto m = oracle::fixture_finite().model();
  std::mt19937_64 rng(67);
  const auto xi = random_probability(m->state_space(), rng);
  const ParameterPoint eta(std::vector<Complex>{{0.1, 0.2}, {0.3, -0.1}});
  const double y[] = {1.0};
  const auto a = update(*m, eta, xi, y).measure;
  const auto b = update(*m, eta, xi.scaled({-0.7, 2.3}), y).measure;
  CHECK(tv_norm(a - b) <= 1e-14);
}

TEST_CASE("real filters stay nonnegative on continuous families") {
  for (const char* name : {"fix_mixture.json", "fix_state_space.json"}) {
    CAPTURE(name);
    const auto cfg = oracle::load_fixture(name);
    const auto bound = cfg.model->bind(cfg.theta);
    RngStream rng(cfg.seed, 0);
    const auto sim = simulate(*bound, cfg.initial, 40, rng);
    PathFilter pf(*bound, cfg.initial);
    double most_negative = 0.0;
    for (std::size_t k = 0; k < sim.observations.size(); ++k) {
      pf.step(sim.observations[k]);
      const auto mu = pf.measure();
      for (Complex d : mu.density()) {
        most_negative = std::min(most_negative, d.real());
        CHECK(d.imag() == 0.0);
      }
      CHECK(std::abs(tv_norm(mu) - 1.0) <= 1e-9);
    }
    CHECK(most_negative == 0.0);
  }
}

TEST_CASE("grid filter agrees with the serial reference implementation") {
  for (const char* name : {"fix_finite.json", "fix_mixture.json", "fix_state_space.json"}) {
    CAPTURE(name);
    const auto cfg = oracle::load_fixture(name);
    const auto& m = *cfg.model;
    RngStream rng(cfg.seed, 1);
    const auto sim = simulate(*m.bind(cfg.theta), cfg.initial, 30, rng);
    std::vector<Complex> im(m.param_dim(), Complex(0.0, 0.5 * m.continuation_radius()));
    std::vector<Complex> coords(cfg.theta.coords().begin(), cfg.theta.coords().end());
    for (std::size_t k = 0; k < coords.size(); ++k) coords[k] += im[k];
    for (const auto& eta : {cfg.theta, ParameterPoint(coords)}) {
      const auto fast = filter_path(m, eta, cfg.initial, sim.observations);
      const auto slow = reference::path_log_likelihood(m, eta, cfg.initial, sim.observations);
      CHECK(std::abs(fast.log_normalizer_sum - slow) <= 1e-9 * (1.0 + std::abs(slow)));
      const auto y = sim.observations[3];
      const auto a = update_unnormalized(m, eta, cfg.initial, y);
      const auto b = reference::update_unnormalized(m, eta, cfg.initial, y);
      CHECK(tv_norm(a - b) <= 1e-12 * tv_norm(b));
    }
  }
}

TEST_CASE("path filter matches the value-based filter") {
  const auto cfg = oracle::load_fixture("fix_mixture.json");
  const auto bound = cfg.model->bind(cfg.theta);
  RngStream rng(3, 3);
  const auto sim = simulate(*bound, cfg.initial, 25, rng);
  PathFilter pf(*bound, cfg.initial);
  for (std::size_t k = 0; k < sim.observations.size(); ++k) pf.step(sim.observations[k]);
  const auto st = filter_path(*bound, cfg.initial, sim.observations);
  CHECK(std::abs(pf.log_normalizer_sum() - st.log_normalizer_sum) <= 1e-12);
  CHECK(tv_norm(pf.measure() - st.measure) <= 1e-12);
}

TEST_CASE("a vanishing normalizer raises an underflow error") {
  const auto m = oracle::untilted(2, 2, {0.5, 0.5, 0.5, 0.5}, {1.0, 0.0, 1.0, 0.0}).model();
  const double y[] = {1.0};
  CHECK_THROWS_AS(update(*m, ParameterPoint(std::vector<double>{0.0}),
                         GridMeasure::uniform(m->state_space()), y),
                  UnderflowError);
}
