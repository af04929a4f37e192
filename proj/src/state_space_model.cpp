#include <algorithm>
#include <cmath>
#include <string>

#include "hmm/errors.hpp"
#include "hmm/models.hpp"

namespace hmm {

namespace {

constexpr std::size_t max_rejections = 1'000'000;

Complex ipow(Complex base, unsigned p) {
  Complex r(1.0, 0.0);
  for (unsigned i = 0; i < p; ++i) r *= base;
  return r;
}

std::vector<Complex> evaluate_all(const std::vector<Polynomial>& polys,
                                  std::span<const Complex> eta, std::span<const double> x) {
  std::vector<Complex> out(polys.size());
  for (std::size_t k = 0; k < polys.size(); ++k) out[k] = polys[k].evaluate(eta, x);
  return out;
}

// exp(-|(z - mean) / scale|^2 / 2) with diagonal complex scale.
Complex gaussian(std::span<const double> z, std::span<const Complex> mean,
                 std::span<const Complex> scale) {
  Complex s(0.0, 0.0);
  for (std::size_t k = 0; k < z.size(); ++k) {
    const Complex u = (z[k] - mean[k]) / scale[k];
    s += u * u;
  }
  return std::exp(-0.5 * s);
}

Complex grid_normalizer(const GridSpace& g, std::span<const Complex> mean,
                        std::span<const Complex> scale) {
  std::vector<Complex> terms(g.size());
  for (std::size_t p = 0; p < g.size(); ++p)
    terms[p] = gaussian(g.point(p), mean, scale) * g.weight(p);
  return pairwise_sum(terms);
}

}  // namespace

Complex Polynomial::evaluate(std::span<const Complex> eta, std::span<const double> x) const {
  Complex s(0.0, 0.0);
  for (const auto& t : terms) {
    Complex v(t.coefficient, 0.0);
    for (std::size_t k = 0; k < t.theta_powers.size(); ++k)
      if (t.theta_powers[k] != 0) v *= ipow(eta[k], t.theta_powers[k]);
    for (std::size_t l = 0; l < t.state_powers.size(); ++l)
      if (t.state_powers[l] != 0) v *= std::pow(x[l], static_cast<int>(t.state_powers[l]));
    s += v;
  }
  return s;
}

void Polynomial::validate(std::size_t param_dim, std::size_t state_dim, const char* name) const {
  for (const auto& t : terms) {
    if (!std::isfinite(t.coefficient))
      throw ConfigurationError(std::string(name) + " coefficients must be finite");
    if (t.theta_powers.size() != param_dim || t.state_powers.size() != state_dim)
      throw ConfigurationError(std::string(name) + " monomial has the wrong number of powers");
  }
}

class BoundStateSpace final : public BoundModel {
 public:
  BoundStateSpace(const StateSpaceModel& m, const ParameterPoint& eta)
      : BoundModel(m, eta, build_transition(m, eta)), model_(m) {
    const GridSpace& xs = *m.state_space();
    const GridSpace& ys = *m.observation_space().grid;
    const std::size_t dy = ys.dim();
    mean_.resize(xs.size() * dy);
    scale_.resize(xs.size() * dy);
    norm_.resize(xs.size());
    for (std::size_t p = 0; p < xs.size(); ++p) {
      const auto c = evaluate_all(m.spec_.observation_mean, eta.coords(), xs.point(p));
      const auto d = evaluate_all(m.spec_.observation_scale, eta.coords(), xs.point(p));
      std::copy(c.begin(), c.end(), mean_.begin() + p * dy);
      std::copy(d.begin(), d.end(), scale_.begin() + p * dy);
      norm_[p] = grid_normalizer(ys, c, d);
    }
    max_transition_ = max_abs_transition();
  }

  void emission(std::span<const double> y, std::span<Complex> out) const override {
    const std::size_t dy = model_.spec_.observation_box.dim();
    if (!model_.spec_.observation_box.contains(y)) {
      std::fill(out.begin(), out.end(), Complex(0.0, 0.0));
      return;
    }
    for (std::size_t p = 0; p < size(); ++p)
      out[p] = gaussian(y, std::span<const Complex>(mean_).subspan(p * dy, dy),
                        std::span<const Complex>(scale_).subspan(p * dy, dy)) /
               norm_[p];
  }

  Complex envelope(std::span<const double> y) const override {
    std::vector<Complex> q(size());
    emission(y, q);
    double m = 0.0;
    for (Complex v : q) m = std::max(m, std::abs(v));
    return Complex(max_transition_ * m, 0.0);
  }

  StepSample sample_step(std::span<const double> x, RngStream& rng) const override {
    require_real("sampling");
    const auto& spec = model_.spec_;
    const auto eta = parameter().coords();
    Point next = draw(evaluate_all(spec.drift, eta, x), evaluate_all(spec.diffusion, eta, x),
                      spec.state_box, rng);
    Point y = draw(evaluate_all(spec.observation_mean, eta, next),
                   evaluate_all(spec.observation_scale, eta, next), spec.observation_box, rng);
    return {std::move(next), std::move(y)};
  }

 private:
  static Point draw(const std::vector<Complex>& mean, const std::vector<Complex>& scale,
                    const Box& box, RngStream& rng) {
    Point z(mean.size());
    for (std::size_t attempt = 0; attempt < max_rejections; ++attempt) {
      for (std::size_t k = 0; k < z.size(); ++k)
        z[k] = mean[k].real() + scale[k].real() * rng.normal();
      if (box.contains(z)) return z;
    }
    throw ConfigurationError("truncation box too small: rejection sampling exceeded 1e6 attempts");
  }

  static std::vector<Complex> build_transition(const StateSpaceModel& m,
                                               const ParameterPoint& eta) {
    const GridSpace& xs = *m.state_space();
    const std::size_t n = xs.size();
    std::vector<Complex> p(n * n);
    std::vector<Complex> kernel(n), terms(n);
    for (std::size_t from = 0; from < n; ++from) {
      const auto a = evaluate_all(m.spec_.drift, eta.coords(), xs.point(from));
      const auto b = evaluate_all(m.spec_.diffusion, eta.coords(), xs.point(from));
      for (std::size_t to = 0; to < n; ++to) {
        kernel[to] = gaussian(xs.point(to), a, b);
        terms[to] = kernel[to] * xs.weight(to);
      }
      const Complex z = pairwise_sum(terms);
      for (std::size_t to = 0; to < n; ++to) p[from * n + to] = kernel[to] / z;
    }
    return p;
  }

  const StateSpaceModel& model_;
  std::vector<Complex> mean_;
  std::vector<Complex> scale_;
  std::vector<Complex> norm_;
  double max_transition_ = 0.0;
};

StateSpaceModel::StateSpaceModel(Spec spec)
    : ModelFamily(spec.box, spec.delta, GridSpace::uniform(spec.state_box, spec.state_cells),
                  ObservationSpace{false, GridSpace::uniform(spec.observation_box,
                                                             spec.observation_cells)}),
      spec_(std::move(spec)) {
  const std::size_t d = param_dim();
  const std::size_t dx = spec_.state_box.dim(), dy = spec_.observation_box.dim();
  if (spec_.drift.size() != dx || spec_.diffusion.size() != dx)
    throw ConfigurationError("drift and diffusion need one polynomial per state coordinate");
  if (spec_.observation_mean.size() != dy || spec_.observation_scale.size() != dy)
    throw ConfigurationError(
        "observation mean and scale need one polynomial per observation coordinate");
  for (const auto* group : {&spec_.drift, &spec_.diffusion, &spec_.observation_mean,
                            &spec_.observation_scale})
    for (const auto& p : *group) p.validate(d, dx, "state-space map");

  // Diagonal scales must stay invertible, positive on the real box and
  // with positive real part across the vicinity.
  const GridSpace& xs = *state_space();
  for (const auto& eta : vicinity_samples()) {
    for (std::size_t p = 0; p < xs.size(); ++p) {
      for (const auto* group : {&spec_.diffusion, &spec_.observation_scale}) {
        for (Complex s : evaluate_all(*group, eta.coords(), xs.point(p)))
          if (!(s.real() > 0.0))
            throw ConfigurationError(
                "diffusion/observation scale must have positive real part on the state grid");
      }
    }
  }
  validate_continuation();
}

Complex StateSpaceModel::state_kernel(std::span<const Complex> eta,
                                      std::span<const double> x_next,
                                      std::span<const double> x) const {
  return gaussian(x_next, evaluate_all(spec_.drift, eta, x),
                  evaluate_all(spec_.diffusion, eta, x));
}

Complex StateSpaceModel::observation_kernel(std::span<const Complex> eta,
                                            std::span<const double> y,
                                            std::span<const double> x) const {
  return gaussian(y, evaluate_all(spec_.observation_mean, eta, x),
                  evaluate_all(spec_.observation_scale, eta, x));
}

Complex StateSpaceModel::state_normalizer(std::span<const Complex> eta,
                                          std::span<const double> x) const {
  return grid_normalizer(*state_space(), evaluate_all(spec_.drift, eta, x),
                         evaluate_all(spec_.diffusion, eta, x));
}

Complex StateSpaceModel::observation_normalizer(std::span<const Complex> eta,
                                                std::span<const double> x) const {
  return grid_normalizer(*observation_space().grid, evaluate_all(spec_.observation_mean, eta, x),
                         evaluate_all(spec_.observation_scale, eta, x));
}

std::unique_ptr<BoundModel> StateSpaceModel::bind(const ParameterPoint& eta) const {
  require_in_vicinity(eta);
  return std::make_unique<BoundStateSpace>(*this, eta);
}

Complex StateSpaceModel::transition_density(const ParameterPoint& eta,
                                            std::span<const double> x_next,
                                            std::span<const double> x) const {
  require_in_vicinity(eta);
  if (!spec_.state_box.contains(x_next)) return Complex(0.0, 0.0);
  return state_kernel(eta.coords(), x_next, x) / state_normalizer(eta.coords(), x);
}

Complex StateSpaceModel::observation_density(const ParameterPoint& eta,
                                             std::span<const double> y,
                                             std::span<const double> x) const {
  require_in_vicinity(eta);
  if (!spec_.observation_box.contains(y)) return Complex(0.0, 0.0);
  return observation_kernel(eta.coords(), y, x) / observation_normalizer(eta.coords(), x);
}

}  // namespace hmm
