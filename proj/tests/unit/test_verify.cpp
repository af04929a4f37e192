#include <doctest.h>

#include <cmath>

#include "hmm/verify.hpp"
#include "oracle.hpp"

using namespace hmm;

namespace {

const ParameterPoint origin1(std::vector<double>{0.0});

/// Wraps a finite model but reports a vanishing envelope.
class ZeroEnvelope final : public ModelFamily {
 public:
  explicit ZeroEnvelope(std::unique_ptr<FiniteModel> inner)
      : ModelFamily(inner->parameter_box(), inner->continuation_radius(), inner->state_space(),
                    inner->observation_space()),
        inner_(std::move(inner)) {}

  std::string_view kind() const override { return "zero_envelope"; }

  std::unique_ptr<BoundModel> bind(const ParameterPoint& eta) const override {
    return std::make_unique<Bound>(*this, eta, inner_->bind(eta), inner_->transition_matrix(eta));
  }
  Complex transition_density(const ParameterPoint& eta, std::span<const double> x_next,
                             std::span<const double> x) const override {
    return inner_->transition_density(eta, x_next, x);
  }
  Complex observation_density(const ParameterPoint& eta, std::span<const double> y,
                              std::span<const double> x) const override {
    return inner_->observation_density(eta, y, x);
  }

 private:
  class Bound final : public BoundModel {
   public:
    Bound(const ModelFamily& family, ParameterPoint eta, std::unique_ptr<BoundModel> inner,
          std::vector<Complex> transition)
        : BoundModel(family, std::move(eta), std::move(transition)), inner_(std::move(inner)) {}
    void emission(std::span<const double> y, std::span<Complex> out) const override {
      inner_->emission(y, out);
    }
    Complex envelope(std::span<const double>) const override { return 0.0; }
    StepSample sample_step(std::span<const double> x, RngStream& rng) const override {
      return inner_->sample_step(x, rng);
    }

   private:
    std::unique_ptr<BoundModel> inner_;
  };

  std::unique_ptr<FiniteModel> inner_;
};

}  // namespace

TEST_CASE("parameter grids and samples cover the box") {
  const ParameterBox box{{-1.0, 0.0}, {1.0, 2.0}};
  const auto g = parameter_grid(box, 3);
  CHECK(g.size() == 9);
  CHECK(g.front()[0].real() == -1.0);
  CHECK(g.back()[1].real() == 2.0);
  const auto c = parameter_grid(box, 1);
  REQUIRE(c.size() == 1);
  CHECK(c[0][1].real() == 1.0);
  for (const auto& p : parameter_samples(box, 50, 3)) CHECK(box.contains(p.real_part()));
  CHECK(parameter_samples(box, 5, 3) == parameter_samples(box, 5, 3));
}

TEST_CASE("mixing constant of uniform and sticky rows") {
  const std::vector<ParameterPoint> at{origin1};
  const auto uniform_rows = oracle::untilted(2, 2, {0.5, 0.5, 0.5, 0.5}, {0.9, 0.1, 0.2, 0.8}).model();
  CHECK(check_mixing(*uniform_rows, at).constant("epsilon") == doctest::Approx(0.5).epsilon(1e-15));
  const auto sticky = oracle::untilted(2, 2, {0.9, 0.1, 0.1, 0.9}, {0.9, 0.1, 0.2, 0.8}).model();
  const auto r = check_mixing(*sticky, at);
  CHECK(r.pass);
  CHECK(r.constant("epsilon") == doctest::Approx(0.1).epsilon(1e-14));
}

TEST_CASE("finite mixing check equals exhaustive min and max over the grid") {
  const auto f = oracle::fixture_finite();
  const auto m = f.model();
  const auto thetas = parameter_grid(m->parameter_box(), 4);
  double lo = 1.0, hi = 0.0;
  for (const auto& t : thetas)
    for (auto v : f.p.at(t.coords())) {
      lo = std::min(lo, v.real());
      hi = std::max(hi, v.real());
    }
  const auto r = check_mixing(*m, thetas);
  CHECK(r.constant("epsilon") == doctest::Approx(std::min(lo, 1.0 / hi)).epsilon(1e-14));
}

TEST_CASE("continuous families have a positive mixing constant") {
  for (const char* name : {"fix_mixture.json", "fix_state_space.json"}) {
    CAPTURE(name);
    const auto cfg = oracle::load_fixture(name);
    const auto r = check_mixing(*cfg.model, parameter_grid(cfg.model->parameter_box(), 2));
    CHECK(r.pass);
    CHECK(r.constant("epsilon") > 0.0);
  }
}

TEST_CASE("density ratio of an i.i.d. model is one") {
  const std::vector<ParameterPoint> at{origin1};
  const auto iid = oracle::untilted(2, 2, {0.5, 0.5, 0.5, 0.5}, {0.7, 0.3, 0.7, 0.3}).model();
  const auto r = check_density_ratio(*iid, at);
  CHECK(r.pass);
  CHECK(r.constant("gamma") == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("density ratio passes on the mixture fixture and catches a zero envelope") {
  const auto cfg = oracle::load_fixture("fix_mixture.json");
  const auto r = check_density_ratio(*cfg.model, parameter_grid(cfg.model->parameter_box(), 2));
  CHECK(r.pass);
  CHECK(r.constant("gamma") > 0.0);
  CHECK(r.constant("max_r_over_phi") <= 1.0);

  const ZeroEnvelope broken(oracle::fixture_finite().model());
  const std::vector<ParameterPoint> at{ParameterPoint(std::vector<double>{0.0, 0.0})};
  const auto b = check_density_ratio(broken, at);
  CHECK_FALSE(b.pass);
  CHECK(b.constant("gamma") == 0.0);
}

TEST_CASE("integrability of finite and continuous envelopes") {
  const auto uniform = oracle::untilted(2, 2, {0.6, 0.4, 0.3, 0.7}, {0.5, 0.5, 0.5, 0.5}).model();
  const auto r = check_integrability(*uniform);
  CHECK(r.pass);
  CHECK(std::isfinite(r.constant("psi_phi_integral")));
  for (const char* name : {"fix_mixture.json", "fix_state_space.json"}) {
    CAPTURE(name);
    const auto cfg = oracle::load_fixture(name);
    const auto c = check_integrability(*cfg.model);
    CHECK(c.pass);
  }
}

TEST_CASE("ergodicity constants of simple chains") {
  const auto sym = oracle::untilted(2, 2, {0.9, 0.1, 0.1, 0.9}, {0.8, 0.2, 0.3, 0.7}).model();
  const auto r = check_true_model_ergodicity(*sym, origin1);
  CHECK(r.pass);
  CHECK(std::abs(r.constant("rho") - 0.8) <= 0.02);
  CHECK(r.constant("K") >= 1.0);

  const auto iid = oracle::untilted(2, 2, {0.4, 0.6, 0.4, 0.6}, {0.8, 0.2, 0.3, 0.7}).model();
  const auto i = check_true_model_ergodicity(*iid, origin1);
  CHECK(i.pass);
  CHECK(i.constant("rho") <= 1e-6);

  const auto periodic = oracle::untilted(2, 2, {0.0, 1.0, 1.0, 0.0}, {0.8, 0.2, 0.3, 0.7}).model();
  CHECK_FALSE(check_true_model_ergodicity(*periodic, origin1).pass);
}

TEST_CASE("forgetting of identical and one-step-forgotten initial measures") {
  const auto sticky = oracle::untilted(2, 2, {0.9, 0.1, 0.2, 0.8}, {0.9, 0.1, 0.2, 0.8}).model();
  ForgettingConfig same;
  same.num_paths = 10;
  same.n_max = 20;
  const auto u = GridMeasure::uniform(sticky->state_space());
  same.pairs.emplace_back(u, u);
  const auto a = forgetting_experiment(*sticky, origin1, same);
  for (double d : a.mean_distance) CHECK(d == 0.0);
  CHECK(a.forgotten_immediately);

  const auto flat = oracle::untilted(2, 2, {0.3, 0.7, 0.3, 0.7}, {0.9, 0.1, 0.2, 0.8}).model();
  ForgettingConfig one;
  one.num_paths = 10;
  one.n_max = 5;
  const auto b = forgetting_experiment(*flat, origin1, one);
  CHECK(b.mean_distance[0] > 0.0);
  CHECK(b.mean_distance[1] <= 1e-15);
  CHECK(b.forgotten_immediately);
}

TEST_CASE("fixture forgetting rate beats the mixing benchmark") {
  const auto cfg = oracle::load_fixture("fix_finite.json");
  ForgettingConfig fc;
  fc.num_paths = 50;
  fc.seed = cfg.seed;
  const auto r = forgetting_experiment(*cfg.model, cfg.theta, fc);
  CHECK(r.epsilon_star == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(r.benchmark == doctest::Approx(1.0 - 0.01 + 0.05).epsilon(1e-12));
  CHECK(r.fitted_runs > 0);
  CHECK(r.mean_rate <= r.benchmark);
  CHECK(r.mean_rate <= 1.0 - r.epsilon_star + 0.05);
  CHECK(r.within_benchmark);
  CHECK(r.monotone);
}

TEST_CASE("complex-typed real pairs reproduce the real forgetting run exactly") {
  const auto cfg = oracle::load_fixture("fix_finite.json");
  const auto s = cfg.model->state_space();
  const double a[] = {0.25, 0.75}, b[] = {0.9, 0.1};
  const std::vector<Complex> ca{0.25, 0.75}, cb{0.9, 0.1};
  ForgettingConfig real_cfg;
  real_cfg.num_paths = 20;
  real_cfg.n_max = 40;
  real_cfg.pairs.emplace_back(GridMeasure::from_masses(s, a), GridMeasure::from_masses(s, b));
  ForgettingConfig complex_cfg = real_cfg;
  complex_cfg.pairs.clear();
  complex_cfg.pairs.emplace_back(GridMeasure::from_masses(s, ca), GridMeasure::from_masses(s, cb));
  const auto re = cfg.theta.real_part();
  const ParameterPoint eta(re, std::vector<double>(re.size(), 0.0));
  const auto x = forgetting_experiment(*cfg.model, cfg.theta, real_cfg);
  const auto y = forgetting_experiment(*cfg.model, eta, complex_cfg);
  CHECK(x.mean_distance == y.mean_distance);
  CHECK(x.mean_rate == y.mean_rate);
}

TEST_CASE("complex perturbed initial measures are forgotten") {
  const auto cfg = oracle::load_fixture("fix_finite.json");
  const double delta = cfg.model->continuation_radius();
  const ParameterPoint eta(std::vector<Complex>{{0.0, 0.01 * delta}, {0.0, 0.01 * delta}});
  ForgettingConfig fc;
  fc.num_paths = 20;
  fc.complex_perturbation = 0.01 * delta;
  const auto r = forgetting_experiment(*cfg.model, eta, fc);
  CHECK(r.final_distance < 1e-8);
}

TEST_CASE("convergence harness on synthetic sequences") {
  const std::size_t n[] = {8, 16, 32, 64, 128, 256};
  std::vector<double> v, flat(6, 0.7), zero(6, 0.0), noisy(6, 0.01);
  for (std::size_t k : n) v.push_back(0.5 + 2.0 / double(k));
  const auto r = convergence_from_values(n, v, zero);
  CHECK(r.slope == doctest::Approx(-1.0).epsilon(0.01));
  CHECK_FALSE(r.inconclusive);
  CHECK(convergence_from_values(n, flat, zero).inconclusive);
  CHECK(convergence_from_values(n, v, noisy).inconclusive);
}

TEST_CASE("i.i.d. model convergence run is inconclusive by construction") {
  const auto iid = oracle::untilted(2, 2, {0.5, 0.5, 0.5, 0.5}, {0.5, 0.5, 0.5, 0.5}).model();
  const std::size_t n[] = {4, 8, 16, 32};
  const auto r = rate_convergence_experiment(*iid, origin1, n, {200, 1});
  CHECK(r.inconclusive);
}
