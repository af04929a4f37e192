#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "hmm/errors.hpp"
#include "hmm/models.hpp"

namespace hmm {

namespace {

constexpr std::size_t max_rejections = 1'000'000;

double gaussian_kernel(const GaussianComponent& c, std::span<const double> x) {
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double u = (x[k] - c.mean[k]) / c.scale[k];
    s += u * u;
  }
  return std::exp(-0.5 * s);
}

void validate_components(const std::vector<GaussianComponent>& cs, std::size_t dim,
                         const char* name) {
  if (cs.empty()) throw ConfigurationError(std::string(name) + " needs at least one component");
  for (const auto& c : cs) {
    if (c.mean.size() != dim || c.scale.size() != dim)
      throw ConfigurationError(std::string(name) + " component has the wrong dimension");
    for (double s : c.scale)
      if (!(s > 0.0)) throw ConfigurationError(std::string(name) + " scales must be positive");
  }
}

double phase_bound(double tau) {
  if (!(tau < 0.5 * std::numbers::pi))
    throw ConfigurationError("continuation radius too large for the weight slopes");
  return 1.0 / std::cos(tau);
}

std::vector<double> normalizers(const std::vector<GaussianComponent>& cs, const GridSpace& g) {
  std::vector<double> z(cs.size());
  std::vector<double> terms(g.size());
  for (std::size_t i = 0; i < cs.size(); ++i) {
    for (std::size_t p = 0; p < g.size(); ++p)
      terms[p] = gaussian_kernel(cs[i], g.point(p)) * g.weight(p);
    z[i] = pairwise_sum(terms);
    if (!(z[i] > 0.0)) throw ConfigurationError("mixture component has no mass on its box");
  }
  return z;
}

}  // namespace

void SoftmaxWeights::evaluate(std::span<const Complex> eta, std::span<const double> x,
                              std::span<Complex> out) const {
  const std::size_t k_count = size();
  double peak = -INFINITY;
  for (std::size_t i = 0; i < k_count; ++i) {
    double re = base[i];
    double im = 0.0;
    for (std::size_t k = 0; k < eta.size(); ++k) {
      re += theta_slopes[i][k] * eta[k].real();
      im += theta_slopes[i][k] * eta[k].imag();
    }
    for (std::size_t l = 0; l < x.size(); ++l) re += state_slopes[i][l] * x[l];
    out[i] = Complex(re, im);
    peak = std::max(peak, re);
  }
  Complex total(0.0, 0.0);
  for (std::size_t i = 0; i < k_count; ++i) {
    out[i] = std::exp(out[i] - peak);
    total += out[i];
  }
  for (std::size_t i = 0; i < k_count; ++i) out[i] /= total;
}

double SoftmaxWeights::max_theta_slope_sum() const {
  double m = 0.0;
  for (const auto& row : theta_slopes) {
    double s = 0.0;
    for (double v : row) s += std::abs(v);
    m = std::max(m, s);
  }
  return m;
}

void SoftmaxWeights::validate(std::size_t param_dim, std::size_t state_dim,
                              const char* name) const {
  const std::string n(name);
  if (base.empty()) throw ConfigurationError(n + " needs at least one weight");
  if (theta_slopes.size() != base.size() || state_slopes.size() != base.size())
    throw ConfigurationError(n + " slopes need one row per component");
  for (std::size_t i = 0; i < base.size(); ++i) {
    if (!std::isfinite(base[i])) throw ConfigurationError(n + " base logits must be finite");
    if (theta_slopes[i].size() != param_dim)
      throw ConfigurationError(n + " parameter slopes have the wrong length");
    if (state_slopes[i].size() != state_dim)
      throw ConfigurationError(n + " state slopes have the wrong length");
  }
}

class BoundMixture final : public BoundModel {
 public:
  BoundMixture(const MixtureModel& m, const ParameterPoint& eta)
      : BoundModel(m, eta, build_transition(m, eta)), model_(m) {
    const GridSpace& xs = *m.state_space();
    const std::size_t ny = m.spec_.observation_components.size();
    obs_weights_.resize(xs.size() * ny);
    for (std::size_t p = 0; p < xs.size(); ++p)
      m.spec_.observation_weights.evaluate(
          eta.coords(), xs.point(p), std::span<Complex>(obs_weights_).subspan(p * ny, ny));
  }

  void emission(std::span<const double> y, std::span<Complex> out) const override {
    const std::size_t ny = model_.spec_.observation_components.size();
    std::vector<double> w(ny);
    for (std::size_t j = 0; j < ny; ++j) w[j] = model_.observation_component(j, y);
    for (std::size_t p = 0; p < size(); ++p) {
      Complex s(0.0, 0.0);
      for (std::size_t j = 0; j < ny; ++j) s += obs_weights_[p * ny + j] * w[j];
      out[p] = s;
    }
  }

  Complex envelope(std::span<const double> y) const override {
    double s = 0.0;
    for (std::size_t j = 0; j < model_.spec_.observation_components.size(); ++j)
      s += model_.observation_component(j, y);
    return Complex(model_.envelope_constant() * s, 0.0);
  }

  StepSample sample_step(std::span<const double> x, RngStream& rng) const override {
    require_real("sampling");
    const auto& spec = model_.spec_;
    std::vector<Complex> a(spec.state_components.size());
    spec.state_weights.evaluate(parameter().coords(), x, a);
    std::vector<double> wa(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) wa[i] = a[i].real();
    const std::size_t i = rng.discrete(wa);
    Point next = model_.sample_truncated(spec.state_components[i], spec.state_box, rng);

    std::vector<Complex> b(spec.observation_components.size());
    spec.observation_weights.evaluate(parameter().coords(), next, b);
    std::vector<double> wb(b.size());
    for (std::size_t j = 0; j < b.size(); ++j) wb[j] = b[j].real();
    const std::size_t j = rng.discrete(wb);
    Point y = model_.sample_truncated(spec.observation_components[j], spec.observation_box, rng);
    return {std::move(next), std::move(y)};
  }

 private:
  static std::vector<Complex> build_transition(const MixtureModel& m, const ParameterPoint& eta) {
    const GridSpace& xs = *m.state_space();
    const std::size_t n = xs.size();
    const std::size_t nx = m.spec_.state_components.size();
    std::vector<double> v(n * nx);
    for (std::size_t to = 0; to < n; ++to)
      for (std::size_t i = 0; i < nx; ++i) v[to * nx + i] = m.state_component(i, xs.point(to));
    std::vector<Complex> p(n * n);
    std::vector<Complex> a(nx);
    for (std::size_t from = 0; from < n; ++from) {
      m.spec_.state_weights.evaluate(eta.coords(), xs.point(from), a);
      for (std::size_t to = 0; to < n; ++to) {
        Complex s(0.0, 0.0);
        for (std::size_t i = 0; i < nx; ++i) s += a[i] * v[to * nx + i];
        p[from * n + to] = s;
      }
    }
    return p;
  }

  const MixtureModel& model_;
  std::vector<Complex> obs_weights_;
};

MixtureModel::MixtureModel(Spec spec)
    : ModelFamily(spec.box, spec.delta, GridSpace::uniform(spec.state_box, spec.state_cells),
                  ObservationSpace{false, GridSpace::uniform(spec.observation_box,
                                                             spec.observation_cells)}),
      spec_(std::move(spec)) {
  const std::size_t dx = spec_.state_box.dim(), dy = spec_.observation_box.dim();
  validate_components(spec_.state_components, dx, "state mixture");
  validate_components(spec_.observation_components, dy, "observation mixture");
  spec_.state_weights.validate(param_dim(), dx, "state weights");
  spec_.observation_weights.validate(param_dim(), dx, "observation weights");
  if (spec_.state_weights.size() != spec_.state_components.size() ||
      spec_.observation_weights.size() != spec_.observation_components.size())
    throw ConfigurationError("mixture weights and components differ in count");

  state_norm_ = normalizers(spec_.state_components, *state_space());
  observation_norm_ = normalizers(spec_.observation_components, *observation_space().grid);

  // Extremes of each truncated component over the state box: the kernel
  // peaks at the clamped mean and bottoms out at the farthest corner.
  component_ceiling_ = 0.0;
  component_floor_ = INFINITY;
  for (std::size_t i = 0; i < spec_.state_components.size(); ++i) {
    const auto& c = spec_.state_components[i];
    Point near(dx), far(dx);
    for (std::size_t k = 0; k < dx; ++k) {
      near[k] = std::clamp(c.mean[k], spec_.state_box.lower[k], spec_.state_box.upper[k]);
      far[k] = std::abs(c.mean[k] - spec_.state_box.lower[k]) >
                       std::abs(c.mean[k] - spec_.state_box.upper[k])
                   ? spec_.state_box.lower[k]
                   : spec_.state_box.upper[k];
    }
    component_ceiling_ = std::max(component_ceiling_, gaussian_kernel(c, near) / state_norm_[i]);
    component_floor_ = std::min(component_floor_, gaussian_kernel(c, far) / state_norm_[i]);
  }
  const double ba = phase_bound(continuation_radius() * spec_.state_weights.max_theta_slope_sum());
  const double bb =
      phase_bound(continuation_radius() * spec_.observation_weights.max_theta_slope_sum());
  envelope_constant_ =
      ba * bb * static_cast<double>(spec_.state_components.size()) * component_ceiling_;
  validate_continuation();
}

double MixtureModel::state_component(std::size_t i, std::span<const double> x) const {
  if (!spec_.state_box.contains(x)) return 0.0;
  return gaussian_kernel(spec_.state_components[i], x) / state_norm_[i];
}

double MixtureModel::observation_component(std::size_t j, std::span<const double> y) const {
  if (!spec_.observation_box.contains(y)) return 0.0;
  return gaussian_kernel(spec_.observation_components[j], y) / observation_norm_[j];
}

std::unique_ptr<BoundModel> MixtureModel::bind(const ParameterPoint& eta) const {
  require_in_vicinity(eta);
  return std::make_unique<BoundMixture>(*this, eta);
}

Complex MixtureModel::transition_density(const ParameterPoint& eta,
                                         std::span<const double> x_next,
                                         std::span<const double> x) const {
  require_in_vicinity(eta);
  std::vector<Complex> a(spec_.state_components.size());
  spec_.state_weights.evaluate(eta.coords(), x, a);
  Complex s(0.0, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * state_component(i, x_next);
  return s;
}

Complex MixtureModel::observation_density(const ParameterPoint& eta, std::span<const double> y,
                                          std::span<const double> x) const {
  require_in_vicinity(eta);
  std::vector<Complex> b(spec_.observation_components.size());
  spec_.observation_weights.evaluate(eta.coords(), x, b);
  Complex s(0.0, 0.0);
  for (std::size_t j = 0; j < b.size(); ++j) s += b[j] * observation_component(j, y);
  return s;
}

EnvelopeBounds MixtureModel::envelope_bounds(const GridSpace& ys) const {
  // phi(y) = C sum_j w_j(y) dominates every |phi_eta|; since
  // min_j log w_j <= log sum_j w_j <= log N_y + max_j log w_j, psi below
  // bounds |log phi|.
  const double ny = static_cast<double>(spec_.observation_components.size());
  EnvelopeBounds b;
  for (std::size_t p = 0; p < ys.size(); ++p) {
    double s = 0.0, logs = 0.0;
    for (std::size_t j = 0; j < spec_.observation_components.size(); ++j) {
      const double w = observation_component(j, ys.point(p));
      s += w;
      logs += std::abs(std::log(w));
    }
    b.phi.push_back(envelope_constant_ * s);
    b.psi.push_back(std::abs(std::log(envelope_constant_)) + std::log(ny) + 1.0 + logs);
  }
  return b;
}

Point MixtureModel::sample_truncated(const GaussianComponent& c, const Box& box,
                                     RngStream& rng) const {
  Point x(c.mean.size());
  for (std::size_t attempt = 0; attempt < max_rejections; ++attempt) {
    for (std::size_t k = 0; k < x.size(); ++k) x[k] = c.mean[k] + c.scale[k] * rng.normal();
    if (box.contains(x)) return x;
  }
  throw ConfigurationError("truncation box too small: rejection sampling exceeded 1e6 attempts");
}

}  // namespace hmm
