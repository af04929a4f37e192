#include "hmm/models.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hmm/errors.hpp"

namespace hmm {

ObservationPath::ObservationPath(std::size_t dim, std::vector<double> values)
    : dim_(dim), values_(std::move(values)) {
  if (dim_ == 0 || values_.size() % dim_ != 0)
    throw ConfigurationError("observation values do not divide into the observation dimension");
}

void ObservationPath::push_back(std::span<const double> y) {
  if (y.size() != dim_) throw SpaceMismatchError("observation has the wrong dimension");
  values_.insert(values_.end(), y.begin(), y.end());
}

ObservationPath ObservationPath::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > size()) throw DomainError("observation slice out of range");
  return ObservationPath(dim_, std::vector<double>(values_.begin() + begin * dim_,
                                                   values_.begin() + end * dim_));
}

BoundModel::BoundModel(const ModelFamily& family, ParameterPoint eta,
                       std::vector<Complex> transition)
    : family_(&family),
      eta_(std::move(eta)),
      size_(family.state_space()->size()),
      transition_(std::move(transition)),
      propagation_(size_ * size_) {
  if (transition_.size() != size_ * size_)
    throw ConfigurationError("transition matrix has the wrong size");
  const GridSpace& space = *family.state_space();
  for (std::size_t from = 0; from < size_; ++from)
    for (std::size_t to = 0; to < size_; ++to)
      propagation_[to * size_ + from] = transition_[from * size_ + to] * space.weight(from);
}

const GridSpace& BoundModel::state_space() const { return *family_->state_space(); }

void BoundModel::require_real(const char* what) const {
  if (!eta_.is_real())
    throw DomainError(std::string(what) + " requires a real parameter");
}

double BoundModel::max_abs_transition() const {
  double m = 0.0;
  for (Complex v : transition_) m = std::max(m, std::abs(v));
  return m;
}

ModelFamily::ModelFamily(ParameterBox box, double delta, std::shared_ptr<const GridSpace> states,
                         ObservationSpace observations)
    : box_(std::move(box)),
      delta_(delta),
      states_(std::move(states)),
      observations_(std::move(observations)) {
  if (box_.lower.size() != box_.upper.size())
    throw ConfigurationError("parameter box bounds differ in dimension");
  for (std::size_t k = 0; k < box_.size(); ++k)
    if (!(box_.lower[k] <= box_.upper[k]))
      throw ConfigurationError("parameter box lower bound exceeds upper bound");
  if (!(delta_ > 0.0 && delta_ < 1.0))
    throw ConfigurationError("continuation radius must lie in (0, 1)");
  if (!states_ || !observations_.grid)
    throw ConfigurationError("model needs state and observation spaces");
}

void ModelFamily::require_in_vicinity(const ParameterPoint& eta) const {
  if (eta.size() != param_dim()) {
    std::ostringstream msg;
    msg << "parameter has dimension " << eta.size() << ", model expects " << param_dim();
    throw DomainError(msg.str());
  }
  const auto re = eta.real_part();
  const double re_gap = box_.distance(re);
  const double im_gap = eta.max_abs_imag();
  if (re_gap > delta_ || im_gap > delta_ || !std::isfinite(re_gap) || !std::isfinite(im_gap)) {
    std::ostringstream msg;
    msg << "parameter outside the continuation vicinity (real offset " << re_gap
        << ", imaginary size " << im_gap << ", radius " << delta_ << ")";
    throw ContinuationDomainError(msg.str());
  }
}

Complex ModelFamily::joint_density(const ParameterPoint& eta, std::span<const double> y,
                                   std::span<const double> x_next,
                                   std::span<const double> x) const {
  return observation_density(eta, y, x_next) * transition_density(eta, x_next, x);
}

Complex ModelFamily::envelope(const ParameterPoint& eta, std::span<const double> y) const {
  return bind(eta)->envelope(y);
}

StepSample ModelFamily::sample_step(const ParameterPoint& theta, std::span<const double> x,
                                    RngStream& rng) const {
  return bind(theta)->sample_step(x, rng);
}

std::vector<ParameterPoint> ModelFamily::vicinity_samples() const {
  const std::size_t d = param_dim();
  std::vector<std::vector<double>> reals{box_.center()};
  std::vector<std::vector<double>> imags{std::vector<double>(d, 0.0)};
  if (d <= 6) {
    for (std::size_t mask = 0; mask < (std::size_t{1} << d); ++mask) {
      std::vector<double> re(d), im(d);
      for (std::size_t k = 0; k < d; ++k) {
        const bool hi = (mask >> k) & 1U;
        re[k] = hi ? box_.upper[k] : box_.lower[k];
        im[k] = hi ? delta_ : -delta_;
      }
      reals.push_back(std::move(re));
      imags.push_back(std::move(im));
    }
  } else {
    for (std::size_t k = 0; k < d; ++k) {
      for (int s : {-1, 1}) {
        auto re = box_.center();
        re[k] = s < 0 ? box_.lower[k] : box_.upper[k];
        std::vector<double> im(d, 0.0);
        im[k] = s * delta_;
        reals.push_back(std::move(re));
        imags.push_back(std::move(im));
      }
    }
  }
  std::vector<ParameterPoint> out;
  for (const auto& re : reals)
    for (const auto& im : imags) out.emplace_back(re, im);
  return out;
}

EnvelopeBounds ModelFamily::envelope_bounds(const GridSpace& ys) const {
  EnvelopeBounds b;
  b.phi.assign(ys.size(), 0.0);
  b.psi.assign(ys.size(), 0.0);
  for (const auto& eta : vicinity_samples()) {
    const auto bound = bind(eta);
    for (std::size_t i = 0; i < ys.size(); ++i) {
      const double a = std::abs(bound->envelope(ys.point(i)));
      b.phi[i] = std::max(b.phi[i], a);
      b.psi[i] = std::max(b.psi[i], std::abs(std::log(a)));
    }
  }
  for (double& p : b.psi) p += 1.0;
  return b;
}

void ModelFamily::validate_continuation() const {
  const GridSpace& ys = *observations_.grid;
  std::vector<Complex> q(states_->size());
  for (const auto& eta : vicinity_samples()) {
    const auto bound = bind(eta);
    const std::size_t n = bound->size();
    for (std::size_t from = 0; from < n; ++from) {
      for (std::size_t to = 0; to < n; ++to) {
        const Complex p = bound->transition(from, to);
        if (p != Complex(0.0) && !(p.real() > 0.0))
          throw ConfigurationError(
              "continuation radius too large: Re p(x'|x) <= 0 inside the vicinity; "
              "reduce continuation_radius");
      }
    }
    for (std::size_t j = 0; j < ys.size(); ++j) {
      bound->emission(ys.point(j), q);
      for (Complex v : q)
        if (v != Complex(0.0) && !(v.real() > 0.0))
          throw ConfigurationError(
              "continuation radius too large: Re q(y|x) <= 0 inside the vicinity; "
              "reduce continuation_radius");
    }
  }
}

}  // namespace hmm
