#include "hmm/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numbers>

#include "hmm/errors.hpp"
#include "hmm/filter.hpp"
#include "hmm/rates.hpp"

namespace hmm {

namespace {

std::vector<double> unit(std::vector<double> u, std::size_t dim) {
  if (u.empty()) u.assign(dim, 1.0);
  if (u.size() != dim) throw ConfigurationError("probe direction has the wrong dimension");
  double norm = 0.0;
  for (double v : u) norm += v * v;
  norm = std::sqrt(norm);
  if (!(norm > 0.0)) throw ConfigurationError("probe direction must be nonzero");
  for (double& v : u) v /= norm;
  return u;
}

// Evaluates f at every point, in parallel, keeping index order.
std::vector<Complex> evaluate_all(const ScalarFunction& f, const std::vector<ParameterPoint>& at) {
  std::vector<Complex> out(at.size());
  std::exception_ptr failure;
  const auto count = static_cast<std::ptrdiff_t>(at.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = f(at[static_cast<std::size_t>(i)]);
    } catch (...) {
#pragma omp critical(hmm_analytic_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace

std::vector<double> complex_step_grad(const ScalarFunction& f, const ParameterPoint& theta,
                                      double h) {
  std::vector<ParameterPoint> at;
  for (std::size_t k = 0; k < theta.size(); ++k) at.push_back(theta.shifted(k, Complex(0.0, h)));
  const auto values = evaluate_all(f, at);
  std::vector<double> grad(theta.size());
  for (std::size_t k = 0; k < grad.size(); ++k) grad[k] = values[k].imag() / h;
  return grad;
}

std::vector<double> central_difference_grad(const ScalarFunction& f, const ParameterPoint& theta,
                                            double h) {
  std::vector<ParameterPoint> at;
  for (std::size_t k = 0; k < theta.size(); ++k) {
    at.push_back(theta.shifted(k, Complex(h, 0.0)));
    at.push_back(theta.shifted(k, Complex(-h, 0.0)));
  }
  const auto values = evaluate_all(f, at);
  std::vector<double> grad(theta.size());
  for (std::size_t k = 0; k < grad.size(); ++k)
    grad[k] = (values[2 * k].real() - values[2 * k + 1].real()) / (2.0 * h);
  return grad;
}

std::vector<Complex> cauchy_coeffs(const ScalarFunction& f, TaylorProbe& probe, std::size_t K) {
  if (!(probe.radius > 0.0)) throw ConfigurationError("probe radius must be positive");
  if (2 * K >= probe.num_nodes)
    throw BudgetError("too few circle nodes for the requested order (aliasing)");
  const auto u = unit(probe.direction, probe.center.size());
  const std::size_t m = probe.num_nodes;
  std::vector<ParameterPoint> at;
  at.reserve(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(m);
    at.push_back(probe.center.moved(std::polar(probe.radius, angle), u));
  }
  const auto values = evaluate_all(f, at);

  std::vector<Complex> c(K + 1);
  std::vector<Complex> terms(m);
  for (std::size_t k = 0; k <= K; ++k) {
    for (std::size_t j = 0; j < m; ++j) {
      // Reduce j*k mod m first so the angle stays exact for large k.
      const double angle = -2.0 * std::numbers::pi * static_cast<double>((j * k) % m) /
                           static_cast<double>(m);
      terms[j] = values[j] * std::polar(1.0, angle);
    }
    c[k] = pairwise_sum(std::span<const Complex>(terms)) / static_cast<double>(m) /
           std::pow(probe.radius, static_cast<double>(k));
  }
  probe.coefficients = c;
  return c;
}

Complex taylor_evaluate(const std::vector<Complex>& coefficients, Complex t) {
  Complex s(0.0, 0.0);
  for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) s = s * t + *it;
  return s;
}

double cauchy_riemann_residual(const ScalarFunction& f, const ParameterPoint& eta,
                               std::size_t coordinate, double h) {
  if (coordinate >= eta.size()) throw ConfigurationError("coordinate out of range");
  const std::vector<ParameterPoint> at{
      eta.shifted(coordinate, Complex(h, 0.0)), eta.shifted(coordinate, Complex(-h, 0.0)),
      eta.shifted(coordinate, Complex(0.0, h)), eta.shifted(coordinate, Complex(0.0, -h))};
  const auto v = evaluate_all(f, at);
  const Complex d_re = (v[0] - v[1]) / (2.0 * h);
  const Complex d_im = (v[2] - v[3]) / (2.0 * h);
  return std::abs(d_re + Complex(0.0, 1.0) * d_im);
}

FrozenLogLikelihood::FrozenLogLikelihood(const ModelFamily& model, GridMeasure lambda,
                                         std::vector<ObservationPath> paths, std::size_t horizon)
    : model_(&model), lambda_(std::move(lambda)), paths_(std::move(paths)), horizon_(horizon) {
  if (horizon_ == 0) throw ConfigurationError("horizon must be positive");
  if (paths_.empty()) throw ConfigurationError("at least one frozen path is required");
  for (const auto& p : paths_)
    if (p.size() < horizon_) throw ConfigurationError("frozen path shorter than the horizon");
}

Complex FrozenLogLikelihood::operator()(const ParameterPoint& eta) const {
  const auto bound = model_->bind(eta);
  std::vector<Complex> per_path(paths_.size());
  PathFilter filter(*bound, lambda_);
  for (std::size_t i = 0; i < paths_.size(); ++i) {
    filter.reset(lambda_);
    for (std::size_t k = 0; k < horizon_; ++k) filter.step(paths_[i][k]);
    per_path[i] = filter.log_normalizer_sum() / static_cast<double>(horizon_);
  }
  return pairwise_sum(std::span<const Complex>(per_path)) / static_cast<double>(paths_.size());
}

AnalyticityReport analyticity_report(const ModelFamily& model, const ParameterPoint& theta,
                                     const AnalyticityConfig& config) {
  if (!theta.is_real()) throw DomainError("analyticity probes are centered at real parameters");
  if (config.horizons.empty()) throw ConfigurationError("at least one horizon is required");
  if (!(config.tolerance_scale > 0.0)) throw ConfigurationError("tolerance scale must be positive");
  const double scale = config.tolerance_scale;
  const std::size_t d = theta.size();
  const double radius = config.radius > 0.0 ? config.radius : model.continuation_radius() / 2.0;
  if (!(radius < model.continuation_radius()))
    throw ContinuationDomainError("probe radius must stay below the continuation radius");
  const auto u = unit(config.direction, d);
  const std::size_t K = config.order;

  const auto lambda = GridMeasure::uniform(model.state_space());
  const std::size_t n_max = *std::max_element(config.horizons.begin(), config.horizons.end());
  const DataSource source{&model, theta, lambda};
  const auto paths = sample_paths(source, n_max, config.num_paths, config.seed);

  AnalyticityReport report;
  report.horizon = n_max;
  const FrozenLogLikelihood l(model, lambda, paths, n_max);
  const ScalarFunction f = l.function();
  auto fail = [&report](const char* check) {
    report.passed = false;
    report.failed_checks.emplace_back(check);
  };

  const Complex f0 = f(theta);
  report.f_center = f0.real();

  // Cauchy-Riemann at 8 points: 4 angles on each of two radii along u.
  for (double r : {radius / 2.0, radius}) {
    for (int p = 0; p < 4; ++p) {
      const ParameterPoint eta = theta.moved(std::polar(r, std::numbers::pi * (0.25 + 0.5 * p)), u);
      const double fa = std::abs(f(eta));
      for (std::size_t k = 0; k < d; ++k)
        report.cauchy_riemann =
            std::max(report.cauchy_riemann,
                     cauchy_riemann_residual(f, eta, k, config.cauchy_riemann_step) / (1.0 + fa));
    }
  }
  if (!(report.cauchy_riemann <= config.cauchy_riemann_tolerance * scale)) fail("cauchy_riemann");

  report.complex_step_gradient = complex_step_grad(f, theta, config.complex_step);
  report.difference_gradient = central_difference_grad(f, theta, config.difference_step);
  double gmax = 0.0, gerr = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    gmax = std::max(gmax, std::abs(report.complex_step_gradient[k]));
    gerr = std::max(gerr, std::abs(report.complex_step_gradient[k] - report.difference_gradient[k]));
  }
  report.gradient_error = gerr / std::max(gmax, 1e-8);
  if (!(report.gradient_error <= config.gradient_tolerance * scale)) fail("complex_step");

  TaylorProbe coarse{theta, u, radius, 4 * K, {}};
  TaylorProbe fine{theta, u, radius, 8 * K, {}};
  const auto c = cauchy_coeffs(f, coarse, K);
  const auto c_fine = cauchy_coeffs(f, fine, K);
  report.coefficients = c;
  for (std::size_t k = 0; k <= K; ++k) {
    const double rk = std::pow(radius, static_cast<double>(k));
    report.node_agreement = std::max(report.node_agreement, std::abs(c[k] - c_fine[k]) * rk);
    report.coefficient_imag = std::max(report.coefficient_imag, std::abs(c[k].imag()) * rk);
  }
  if (!(report.node_agreement <= config.node_tolerance * scale)) fail("node_agreement");
  if (!(report.coefficient_imag <= config.node_tolerance * scale)) fail("real_coefficients");

  report.center_error = std::abs(c[0] - f0);
  if (!(report.center_error <= config.center_tolerance * scale)) fail("center_value");

  std::vector<ParameterPoint> half;
  std::vector<Complex> ts;
  for (int p = 0; p < 4; ++p) {
    const Complex t = std::polar(radius / 2.0, std::numbers::pi * (0.125 + 0.5 * p));
    ts.push_back(t);
    half.push_back(theta.moved(t, u));
  }
  const auto direct = evaluate_all(f, half);
  for (std::size_t p = 0; p < ts.size(); ++p)
    report.taylor_error = std::max(report.taylor_error, std::abs(taylor_evaluate(c, ts[p]) - direct[p]) /
                                                            (1.0 + std::abs(direct[p])));
  if (!(report.taylor_error <= config.taylor_tolerance * scale)) fail("taylor_reconstruction");

  double directional = 0.0;
  for (std::size_t k = 0; k < d; ++k) directional += report.complex_step_gradient[k] * u[k];
  report.c1_gradient_error = std::abs(c[1] - directional) / std::max(std::abs(directional), 1e-8);
  if (!(report.c1_gradient_error <= config.gradient_tolerance * scale)) fail("first_coefficient");

  for (std::size_t n : config.horizons) {
    if (n == n_max) {
      report.c1_by_horizon.push_back(c[1]);
      continue;
    }
    const FrozenLogLikelihood ln(model, lambda, paths, n);
    TaylorProbe probe{theta, u, radius, 4 * K, {}};
    report.c1_by_horizon.push_back(cauchy_coeffs(ln.function(), probe, K)[1]);
  }
  return report;
}

}  // namespace hmm
