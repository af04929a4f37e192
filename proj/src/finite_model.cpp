#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "hmm/errors.hpp"
#include "hmm/models.hpp"

namespace hmm {

LogitTable LogitTable::from_probabilities(std::size_t rows, std::size_t cols,
                                          std::span<const double> probabilities,
                                          std::size_t param_dim) {
  if (probabilities.size() != rows * cols)
    throw ConfigurationError("probability table has the wrong number of entries");
  LogitTable t;
  t.rows = rows;
  t.cols = cols;
  t.base.resize(rows * cols);
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    if (!(probabilities[i] >= 0.0)) throw ConfigurationError("probabilities must be nonnegative");
    t.base[i] = probabilities[i] > 0.0 ? std::log(probabilities[i])
                                       : -std::numeric_limits<double>::infinity();
  }
  t.slopes.assign(param_dim, std::vector<double>(rows * cols, 0.0));
  return t;
}

void LogitTable::softmax_row(std::span<const Complex> eta, std::size_t row,
                             std::span<Complex> out) const {
  const std::size_t off = row * cols;
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < cols; ++c) {
    double re = base[off + c];
    double im = 0.0;
    for (std::size_t k = 0; k < slopes.size(); ++k) {
      const double s = slopes[k][off + c];
      if (s == 0.0) continue;
      re += s * eta[k].real();
      im += s * eta[k].imag();
    }
    out[c] = Complex(re, im);
    peak = std::max(peak, re);
  }
  Complex total(0.0, 0.0);
  for (std::size_t c = 0; c < cols; ++c) {
    if (out[c].real() == -std::numeric_limits<double>::infinity()) {
      out[c] = Complex(0.0, 0.0);
      continue;
    }
    out[c] = std::exp(out[c] - peak);
    total += out[c];
  }
  for (std::size_t c = 0; c < cols; ++c) out[c] /= total;
}

double LogitTable::max_imag_logit(std::span<const double> imag) const {
  double m = 0.0;
  for (std::size_t i = 0; i < rows * cols; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < slopes.size(); ++k) s += slopes[k][i] * imag[k];
    m = std::max(m, std::abs(s));
  }
  return m;
}

double LogitTable::max_slope_sum() const {
  double m = 0.0;
  for (std::size_t i = 0; i < rows * cols; ++i) {
    double s = 0.0;
    for (const auto& table : slopes) s += std::abs(table[i]);
    m = std::max(m, s);
  }
  return m;
}

void LogitTable::validate(std::size_t param_dim, const char* name) const {
  const std::string n(name);
  if (rows == 0 || cols == 0) throw ConfigurationError(n + " table is empty");
  if (base.size() != rows * cols) throw ConfigurationError(n + " base logits have the wrong size");
  if (slopes.size() != param_dim)
    throw ConfigurationError(n + " needs one slope table per parameter coordinate");
  for (const auto& s : slopes) {
    if (s.size() != rows * cols) throw ConfigurationError(n + " slope table has the wrong size");
    for (double v : s)
      if (!std::isfinite(v)) throw ConfigurationError(n + " slopes must be finite");
  }
  for (std::size_t r = 0; r < rows; ++r) {
    bool any = false;
    for (std::size_t c = 0; c < cols; ++c) {
      const double b = base[r * cols + c];
      if (std::isnan(b) || b == std::numeric_limits<double>::infinity())
        throw ConfigurationError(n + " base logits must be finite or -inf");
      any = any || std::isfinite(b);
    }
    if (!any) throw ConfigurationError(n + " row " + std::to_string(r) + " has no support");
  }
}

namespace {

std::size_t as_index(std::span<const double> v, std::size_t count, const char* what) {
  if (v.size() != 1) throw DomainError(std::string(what) + " must be a single index");
  const double r = std::round(v[0]);
  if (r != v[0] || r < 0.0 || r >= static_cast<double>(count))
    throw DomainError(std::string(what) + " index out of range");
  return static_cast<std::size_t>(r);
}

double phase_bound(double tau) {
  if (!(tau < 0.5 * std::numbers::pi))
    throw ConfigurationError("continuation radius too large for the logit slopes");
  return 1.0 / std::cos(tau);
}

class BoundFinite final : public BoundModel {
 public:
  BoundFinite(const FiniteModel& m, const ParameterPoint& eta)
      : BoundModel(m, eta, m.transition_matrix(eta)),
        model_(m),
        emission_(m.emission_matrix(eta)),
        transition_bound_(phase_bound(m.transition_logits().max_imag_logit(eta.imag_part()))) {}

  void emission(std::span<const double> y, std::span<Complex> out) const override {
    const std::size_t s = as_index(y, model_.symbols(), "observation symbol");
    for (std::size_t x = 0; x < size(); ++x) out[x] = emission_[x * model_.symbols() + s];
  }

  Complex envelope(std::span<const double> y) const override {
    const std::size_t s = as_index(y, model_.symbols(), "observation symbol");
    double m = 0.0;
    for (std::size_t x = 0; x < size(); ++x)
      m = std::max(m, std::abs(emission_[x * model_.symbols() + s]));
    return Complex(transition_bound_ * m, 0.0);
  }

  StepSample sample_step(std::span<const double> x, RngStream& rng) const override {
    require_real("sampling");
    const std::size_t from = as_index(x, size(), "state");
    std::vector<double> w(size());
    for (std::size_t to = 0; to < size(); ++to) w[to] = transition(from, to).real();
    const std::size_t next = rng.discrete(w);
    std::vector<double> e(model_.symbols());
    for (std::size_t s = 0; s < e.size(); ++s) e[s] = emission_[next * e.size() + s].real();
    const std::size_t sym = rng.discrete(e);
    return {{static_cast<double>(next)}, {static_cast<double>(sym)}};
  }

 private:
  const FiniteModel& model_;
  std::vector<Complex> emission_;
  double transition_bound_;
};

}  // namespace

FiniteModel::FiniteModel(ParameterBox box, double delta, LogitTable transition,
                         LogitTable emission, EmissionDefect defect)
    : ModelFamily(std::move(box), delta, GridSpace::finite(transition.rows),
                  ObservationSpace{true, GridSpace::finite(std::max<std::size_t>(emission.cols, 1))}),
      transition_(std::move(transition)),
      emission_(std::move(emission)),
      defect_(defect) {
  transition_.validate(param_dim(), "transition");
  emission_.validate(param_dim(), "emission");
  if (transition_.rows != transition_.cols)
    throw ConfigurationError("transition table must be square");
  if (emission_.rows != transition_.rows)
    throw ConfigurationError("emission table needs one row per state");
  phase_bound(continuation_radius() * transition_.max_slope_sum());
  phase_bound(continuation_radius() * emission_.max_slope_sum());
  validate_continuation();
}

std::vector<Complex> FiniteModel::transition_matrix(const ParameterPoint& eta) const {
  require_in_vicinity(eta);
  const std::size_t n = states();
  std::vector<Complex> p(n * n);
  for (std::size_t x = 0; x < n; ++x)
    transition_.softmax_row(eta.coords(), x, std::span<Complex>(p).subspan(x * n, n));
  return p;
}

std::vector<Complex> FiniteModel::emission_eta(const ParameterPoint& eta) const {
  std::vector<Complex> c(eta.coords().begin(), eta.coords().end());
  if (defect_ == EmissionDefect::conjugate)
    for (Complex& v : c) v = std::conj(v);
  return c;
}

std::vector<Complex> FiniteModel::emission_matrix(const ParameterPoint& eta) const {
  require_in_vicinity(eta);
  const std::size_t n = states(), m = symbols();
  const auto e = emission_eta(eta);
  std::vector<Complex> q(n * m);
  for (std::size_t x = 0; x < n; ++x)
    emission_.softmax_row(e, x, std::span<Complex>(q).subspan(x * m, m));
  return q;
}

std::unique_ptr<BoundModel> FiniteModel::bind(const ParameterPoint& eta) const {
  require_in_vicinity(eta);
  return std::make_unique<BoundFinite>(*this, eta);
}

Complex FiniteModel::transition_density(const ParameterPoint& eta,
                                        std::span<const double> x_next,
                                        std::span<const double> x) const {
  require_in_vicinity(eta);
  const std::size_t from = as_index(x, states(), "state");
  const std::size_t to = as_index(x_next, states(), "state");
  std::vector<Complex> row(states());
  transition_.softmax_row(eta.coords(), from, row);
  return row[to];
}

Complex FiniteModel::observation_density(const ParameterPoint& eta, std::span<const double> y,
                                         std::span<const double> x) const {
  require_in_vicinity(eta);
  const std::size_t s = as_index(y, symbols(), "observation symbol");
  const std::size_t state = as_index(x, states(), "state");
  std::vector<Complex> row(symbols());
  emission_.softmax_row(emission_eta(eta), state, row);
  return row[s];
}

}  // namespace hmm
