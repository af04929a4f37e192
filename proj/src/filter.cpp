#include "hmm/filter.hpp"

#include <cmath>

#include "hmm/errors.hpp"

namespace hmm {

namespace {

constexpr std::size_t parallel_threshold = 128;
constexpr double underflow_floor = 1e-300;

// out(x') = q(x') * sum_x K[x'][x] xi(x), each row summed serially so the
// result is independent of the thread count.
void propagate(const BoundModel& model, std::span<const Complex> xi,
               std::span<const Complex> q, std::span<Complex> out) {
  const auto n = static_cast<std::ptrdiff_t>(model.size());
#pragma omp parallel for schedule(static) if (n >= static_cast<std::ptrdiff_t>(parallel_threshold))
  for (std::ptrdiff_t to = 0; to < n; ++to) {
    const auto row = model.propagation_row(static_cast<std::size_t>(to));
    Complex s(0.0, 0.0);
    for (std::size_t from = 0; from < row.size(); ++from) s += row[from] * xi[from];
    out[to] = q[to] * s;
  }
}

Complex checked_log(Complex total) {
  const double a = std::abs(total);
  if (!std::isfinite(a)) throw UnderflowError("filter normalizer is not finite");
  if (a < underflow_floor) throw UnderflowError("filter normalizer underflowed below 1e-300");
  return std::log(total);
}

Complex grid_total(const GridSpace& space, std::span<const Complex> density,
                   std::vector<Complex>& scratch) {
  scratch.resize(density.size());
  for (std::size_t i = 0; i < density.size(); ++i) scratch[i] = density[i] * space.weight(i);
  return pairwise_sum(scratch);
}

void require_space(const BoundModel& model, const GridMeasure& xi) {
  if (!(xi.space() == model.state_space()))
    throw SpaceMismatchError("measure does not live on the model's state grid");
}

}  // namespace

GridMeasure update_unnormalized(const BoundModel& model, const GridMeasure& xi,
                                std::span<const double> y) {
  require_space(model, xi);
  std::vector<Complex> q(model.size()), out(model.size());
  model.emission(y, q);
  propagate(model, xi.density(), q, out);
  return GridMeasure(xi.space_ptr(), std::move(out));
}

Complex log_normalizer(const BoundModel& model, const GridMeasure& xi,
                       std::span<const double> y) {
  return checked_log(update_unnormalized(model, xi, y).total_mass());
}

FilterState update(const BoundModel& model, const FilterState& state,
                   std::span<const double> y) {
  PathFilter f(model, state.measure);
  const Complex phi = f.step(y);
  return FilterState{f.measure(), state.log_normalizer_sum + phi, state.steps + 1,
                     state.normalizer_in_right_half_plane && f.normalizer_in_right_half_plane()};
}

FilterState update(const BoundModel& model, const GridMeasure& xi, std::span<const double> y) {
  return update(model, FilterState{xi}, y);
}

FilterState filter_path(const BoundModel& model, const GridMeasure& initial,
                        const ObservationPath& ys) {
  PathFilter f(model, initial);
  for (std::size_t k = 0; k < ys.size(); ++k) f.step(ys[k]);
  return f.state();
}

GridMeasure update_unnormalized(const ModelFamily& model, const ParameterPoint& eta,
                                const GridMeasure& xi, std::span<const double> y) {
  return update_unnormalized(*model.bind(eta), xi, y);
}

Complex log_normalizer(const ModelFamily& model, const ParameterPoint& eta,
                       const GridMeasure& xi, std::span<const double> y) {
  return log_normalizer(*model.bind(eta), xi, y);
}

FilterState update(const ModelFamily& model, const ParameterPoint& eta, const GridMeasure& xi,
                   std::span<const double> y) {
  return update(*model.bind(eta), xi, y);
}

FilterState filter_path(const ModelFamily& model, const ParameterPoint& eta,
                        const GridMeasure& initial, const ObservationPath& ys) {
  return filter_path(*model.bind(eta), initial, ys);
}

PathFilter::PathFilter(const BoundModel& model, const GridMeasure& initial)
    : model_(&model),
      space_(initial.space_ptr()),
      density_(initial.density().begin(), initial.density().end()),
      next_(model.size()),
      emission_(model.size()) {
  require_space(model, initial);
}

void PathFilter::reset(const GridMeasure& initial) {
  require_space(*model_, initial);
  space_ = initial.space_ptr();
  density_.assign(initial.density().begin(), initial.density().end());
  log_sum_ = Complex(0.0, 0.0);
  steps_ = 0;
  right_half_plane_ = true;
}

Complex PathFilter::step(std::span<const double> y) {
  model_->emission(y, emission_);
  propagate(*model_, density_, emission_, next_);
  const Complex total = grid_total(*space_, next_, masses_);
  const Complex phi = checked_log(total);
  if (!(total.real() > 0.0)) right_half_plane_ = false;
  for (std::size_t i = 0; i < next_.size(); ++i) density_[i] = next_[i] / total;
  log_sum_ += phi;
  ++steps_;
  return phi;
}

GridMeasure PathFilter::measure() const { return GridMeasure(space_, density_); }

FilterState PathFilter::state() const {
  return FilterState{measure(), log_sum_, steps_, right_half_plane_};
}

namespace {

// R^{m:k}(xi) without intermediate normalization; positive rescalings keep
// the density representable and are tracked in log_scale.
struct Unnormalized {
  GridMeasure measure;
  double log_scale = 0.0;

  Complex log_total() const { return std::log(measure.total_mass()) + log_scale; }
  GridMeasure normalized() const { return measure.scaled(1.0 / measure.total_mass()); }
};

Unnormalized run_unnormalized(const BoundModel& model, const GridMeasure& start,
                              const ObservationPath& ys, std::size_t begin, std::size_t end) {
  Unnormalized u{start, 0.0};
  for (std::size_t k = begin; k < end; ++k) {
    u.measure = update_unnormalized(model, u.measure, ys[k]);
    const double size = u.measure.tv_norm();
    if (size == 0.0) throw UnderflowError("unnormalized filter collapsed to zero");
    if (size < 1e-100 || size > 1e100) {
      u.measure = u.measure.scaled(1.0 / size);
      u.log_scale += std::log(size);
    }
  }
  return u;
}

}  // namespace

CompositionCheck compose_check(const BoundModel& model, const GridMeasure& initial,
                               const ObservationPath& ys, std::size_t k) {
  const std::size_t n = ys.size();
  if (k > n) throw DomainError("split index exceeds path length");

  // Empty segments are the identity with <R> = 1, so k = 0 and k = n
  // reproduce the unsplit route exactly.
  const Unnormalized whole = run_unnormalized(model, initial, ys, 0, n);
  const GridMeasure unsplit = n == 0 ? initial : whole.normalized();
  const Complex log_whole = n == 0 ? Complex(0.0, 0.0) : whole.log_total();

  GridMeasure mid = initial;
  Complex log_first(0.0, 0.0);
  if (k > 0) {
    const Unnormalized first = k == n ? whole : run_unnormalized(model, initial, ys, 0, k);
    mid = first.normalized();
    log_first = first.log_total();
  }
  GridMeasure split = mid;
  Complex log_second(0.0, 0.0);
  if (k < n) {
    const Unnormalized second = k == 0 ? whole : run_unnormalized(model, mid, ys, k, n);
    split = second.normalized();
    log_second = second.log_total();
  }
  if (k == n) split = unsplit;

  CompositionCheck c;
  c.measure_deviation = (split - unsplit).tv_norm();
  const Complex gap = log_whole - (log_first + log_second);
  c.normalizer_mismatch = std::abs(Complex(gap.real(), wrap_phase(gap.imag())));
  c.sequential_deviation = (unsplit - filter_path(model, initial, ys).measure).tv_norm();
  return c;
}

CompositionCheck compose_check(const ModelFamily& model, const ParameterPoint& eta,
                               const GridMeasure& initial, const ObservationPath& ys,
                               std::size_t k) {
  return compose_check(*model.bind(eta), initial, ys, k);
}

}  // namespace hmm
