#include <doctest.h>

#include <cmath>
#include <random>

#include "hmm/errors.hpp"
#include "hmm/kernels.hpp"
#include "hmm/reference.hpp"
#include "oracle.hpp"

using namespace hmm;

namespace {

const ParameterPoint origin1(std::vector<double>{0.0});

GridMeasure random_joint(const JointKernel& k, std::mt19937_64& rng, bool complex) {
  std::vector<Complex> w(k.size());
  Complex total = 0.0;
  for (auto& v : w) {
    v = {std::uniform_real_distribution<double>(0.1, 1.0)(rng),
         complex ? std::uniform_real_distribution<double>(-0.3, 0.3)(rng) : 0.0};
    total += v;
  }
  for (auto& v : w) v /= total;
  return GridMeasure::from_masses(k.space_ptr(), w);
}

std::vector<double> state_marginal(const JointKernel& k, const GridMeasure& m) {
  std::vector<double> out(k.states(), 0.0);
  for (std::size_t z = 0; z < k.size(); ++z) out[k.state_of(z)] += m.mass(z).real();
  return out;
}

}  // namespace

TEST_CASE("finite joint kernel entries are q(y'|x') p(x'|x)") {
  const auto f = oracle::fixture_finite();
  const auto m = f.model();
  for (const auto& eta : {ParameterPoint(std::vector<double>{0.3, -0.6}),
                          ParameterPoint(std::vector<Complex>{{0.3, 0.2}, {-0.6, -0.25}})}) {
    const auto k = build_joint_kernel(*m, eta);
    REQUIRE(k.size() == 4);
    const auto P = f.p.at(eta.coords());
    const auto Q = f.q.at(eta.coords());
    const auto dense = k.dense();
    for (std::size_t z = 0; z < 4; ++z) {
      Complex row = 0.0;
      for (std::size_t zn = 0; zn < 4; ++zn) {
        const std::size_t x = z % 2, xn = zn % 2, yn = zn / 2;
        CHECK(std::abs(dense[z * 4 + zn] - Q[xn * 2 + yn] * P[x * 2 + xn]) <= 1e-14);
        row += dense[z * 4 + zn];
      }
      CHECK(std::abs(row - 1.0) <= 1e-9);
    }
    for (std::size_t z = 0; z < 2; ++z)
      for (std::size_t zn = 0; zn < 4; ++zn) CHECK(k.entry(z, zn) == k.entry(z + 2, zn));
    for (Complex s : k.normalizers()) CHECK(std::abs(s - 1.0) <= 1e-12);
  }
}

TEST_CASE("real kernels are stochastic on every family") {
  for (const char* name : {"fix_finite.json", "fix_mixture.json", "fix_state_space.json"}) {
    CAPTURE(name);
    const auto cfg = oracle::load_fixture(name);
    const auto k = build_joint_kernel(*cfg.model, cfg.theta, {8});
    double worst = 0.0;
    for (std::size_t x = 0; x < k.states(); ++x) {
      Complex s = 0.0;
      for (Complex v : k.row_for_state(x)) {
        CHECK(v.real() >= 0.0);
        s += v;
      }
      worst = std::max(worst, std::abs(s - 1.0));
    }
    CHECK(worst <= 1e-9);
  }
}

TEST_CASE("kernel at zero imaginary part equals the real kernel") {
  const auto cfg = oracle::load_fixture("fix_mixture.json");
  const auto re = cfg.theta.real_part();
  const auto a = build_joint_kernel(*cfg.model, cfg.theta, {8});
  const auto b = build_joint_kernel(*cfg.model, ParameterPoint(re, std::vector<double>(re.size(), 0.0)), {8});
  CHECK(a.dense() == b.dense());
}

TEST_CASE("kernel application agrees with the serial dense reference") {
  const auto cfg = oracle::load_fixture("fix_state_space.json");
  const ParameterPoint eta(std::vector<Complex>{{0.2, 0.05}, {-0.1, 0.04}});
  const auto k = build_joint_kernel(*cfg.model, eta, {6});
  std::mt19937_64 rng(71);
  const auto zeta = random_joint(k, rng, true);
  const auto fast = k.apply(zeta).masses();
  const auto slow = reference::apply_dense(k.dense(), zeta.masses());
  double worst = 0.0;
  for (std::size_t i = 0; i < fast.size(); ++i) worst = std::max(worst, std::abs(fast[i] - slow[i]));
  CHECK(worst <= 1e-14);
}

TEST_CASE("zero iterations return the input") {
  const auto k = build_joint_kernel(*oracle::fixture_finite().model(), ParameterPoint(std::vector<double>{0.0, 0.0}));
  std::mt19937_64 rng(73);
  const auto z = random_joint(k, rng, true);
  CHECK(tv_norm(iterate(k, z, 0) - z) == 0.0);
}

TEST_CASE("state independent transition reaches the invariant measure in one step") {
  const auto m = oracle::untilted(3, 2, {0.2, 0.5, 0.3, 0.2, 0.5, 0.3, 0.2, 0.5, 0.3},
                                  {0.9, 0.1, 0.4, 0.6, 0.3, 0.7})
                     .model();
  const auto k = build_joint_kernel(*m, origin1);
  const auto inv = invariant_distribution(k);
  std::mt19937_64 rng(79);
  for (int i = 0; i < 10; ++i) CHECK(tv_norm(iterate(k, random_joint(k, rng, false), 1) - inv.sigma) <= 1e-14);
}

TEST_CASE("complex iterates keep unit total mass") {
  const auto cfg = oracle::load_fixture("fix_finite.json");
  const ParameterPoint eta(std::vector<Complex>{{0.1, 0.25}, {-0.2, -0.25}});
  const auto k = build_joint_kernel(*cfg.model, eta);
  std::mt19937_64 rng(83);
  GridMeasure z = random_joint(k, rng, true);
  double worst = 0.0;
  for (int n = 0; n < 50; ++n) {
    z = k.apply(z);
    worst = std::max(worst, std::abs(total_mass(z) - 1.0));
  }
  CHECK(worst <= 1e-8);
}

TEST_CASE("symmetric two state chain has rate equal to its second eigenvalue") {
  const double p[] = {0.9, 0.1, 0.1, 0.9};
  const double second_eigenvalue = p[0] + p[3] - 1.0;
  const auto m = oracle::untilted(2, 2, {p, p + 4}, {0.7, 0.3, 0.4, 0.6}).model();
  const auto k = build_joint_kernel(*m, origin1);
  const auto inv = invariant_distribution(k);
  CHECK(inv.converged);
  CHECK(inv.ergodic);
  CHECK(std::abs(inv.rate - second_eigenvalue) <= 0.02);
  const auto marginal = state_marginal(k, inv.sigma);
  CHECK(marginal[0] == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(marginal[1] == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(tv_norm(k.apply(inv.sigma) - inv.sigma) <= 1e-10);

  const auto state_chain = invariant_distribution(build_state_kernel(*m, origin1));
  CHECK(std::abs(state_chain.rate - second_eigenvalue) <= 0.02);
}

TEST_CASE("uniform doubly stochastic kernel mixes immediately") {
  const auto m = oracle::untilted(3, 3, std::vector<double>(9, 1.0 / 3.0), std::vector<double>(9, 1.0 / 3.0)).model();
  const auto k = build_joint_kernel(*m, origin1);
  const auto inv = invariant_distribution(k);
  CHECK(inv.ergodic);
  CHECK(inv.rate <= 1e-6);
  for (std::size_t z = 0; z < k.size(); ++z) CHECK(inv.sigma.mass(z).real() == doctest::Approx(1.0 / 9.0));
}

TEST_CASE("complex invariant measure has unit mass and a contracting rate") {
  const auto m = oracle::fixture_finite().model();
  const ParameterPoint eta(std::vector<Complex>{{0.0, 0.05}, {0.0, -0.05}});
  const auto inv = invariant_distribution(build_joint_kernel(*m, eta));
  CHECK(inv.converged);
  CHECK(std::abs(total_mass(inv.sigma) - 1.0) <= 1e-8);
  CHECK(inv.rate < 1.0);
}

TEST_CASE("real rates stay under the mixing benchmark") {
  for (const char* name : {"fix_finite.json", "fix_mixture.json"}) {
    CAPTURE(name);
    const auto cfg = oracle::load_fixture(name);
    const auto inv = invariant_distribution(build_state_kernel(*cfg.model, cfg.theta));
    CHECK(inv.ergodic);
    double p_min = 1e300, p_max = 0.0;
    const auto bound = cfg.model->bind(cfg.theta);
    for (std::size_t x = 0; x < bound->size(); ++x)
      for (std::size_t to = 0; to < bound->size(); ++to) {
        p_min = std::min(p_min, bound->transition(x, to).real());
        p_max = std::max(p_max, bound->transition(x, to).real());
      }
    const double eps = std::min(p_min, 1.0 / p_max);
    CHECK(inv.rate <= 1.0 - eps * eps + 0.05);
  }
}

TEST_CASE("periodic chain is reported as not ergodic") {
  const auto m = oracle::untilted(2, 2, {0.0, 1.0, 1.0, 0.0}, {0.5, 0.5, 0.5, 0.5}).model();
  const auto inv = invariant_distribution(build_joint_kernel(*m, origin1));
  CHECK_FALSE(inv.ergodic);
  CHECK_FALSE(inv.failure.empty());
}

TEST_CASE("kernels outside the continuation vicinity are refused") {
  const auto m = oracle::fixture_finite().model();
  CHECK_THROWS_AS(build_joint_kernel(*m, ParameterPoint(std::vector<Complex>{{0.0, 0.9}, {0.0, 0.0}})),
                  ContinuationDomainError);
}
