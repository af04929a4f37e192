#include "hmm/verify.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <stdexcept>

#include "hmm/errors.hpp"
#include "hmm/filter.hpp"
#include "hmm/kernels.hpp"

namespace hmm {

namespace {

std::shared_ptr<const GridSpace> refined(const ModelFamily& model, std::size_t factor) {
  const GridSpace& ys = *model.observation_space().grid;
  std::vector<std::size_t> cells(ys.cells().begin(), ys.cells().end());
  for (auto& c : cells) c *= factor;
  return GridSpace::uniform(ys.bounds(), cells);
}

struct EnvelopeIntegrals {
  double phi = 0.0;
  double psi_phi = 0.0;
};

EnvelopeIntegrals integrate_envelope(const ModelFamily& model, const GridSpace& ys) {
  const EnvelopeBounds b = model.envelope_bounds(ys);
  std::vector<double> a(ys.size()), c(ys.size());
  for (std::size_t i = 0; i < ys.size(); ++i) {
    a[i] = b.phi[i] * ys.weight(i);
    c[i] = b.psi[i] * b.phi[i] * ys.weight(i);
  }
  return {pairwise_sum(a), pairwise_sum(c)};
}

}  // namespace

double AssumptionReport::constant(std::string_view name) const {
  for (const auto& c : constants)
    if (c.name == name) return c.value;
  throw std::out_of_range("no witnessed constant named " + std::string(name));
}

std::vector<ParameterPoint> parameter_grid(const ParameterBox& box, std::size_t per_axis) {
  if (per_axis == 0) throw ConfigurationError("parameter grid needs at least one point per axis");
  const std::size_t d = box.size();
  std::size_t total = 1;
  for (std::size_t k = 0; k < d; ++k) total *= per_axis;
  std::vector<ParameterPoint> out;
  out.reserve(total);
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::vector<double> theta(d);
    std::size_t rest = idx;
    for (std::size_t k = d; k-- > 0;) {
      const std::size_t i = rest % per_axis;
      rest /= per_axis;
      theta[k] = per_axis == 1 ? 0.5 * (box.lower[k] + box.upper[k])
                               : box.lower[k] + (box.upper[k] - box.lower[k]) *
                                                    static_cast<double>(i) /
                                                    static_cast<double>(per_axis - 1);
    }
    out.emplace_back(std::move(theta));
  }
  return out;
}

std::vector<ParameterPoint> parameter_samples(const ParameterBox& box, std::size_t count,
                                              std::uint64_t seed) {
  std::vector<ParameterPoint> out;
  for (std::size_t i = 0; i < count; ++i) {
    RngStream rng(seed, i, StreamPurpose::parameter_samples);
    std::vector<double> theta(box.size());
    for (std::size_t k = 0; k < theta.size(); ++k)
      theta[k] = box.lower[k] + (box.upper[k] - box.lower[k]) * rng.uniform();
    out.emplace_back(std::move(theta));
  }
  return out;
}

AssumptionReport check_mixing(const ModelFamily& model, std::span<const ParameterPoint> thetas) {
  AssumptionReport report;
  report.assumption = "mixing";
  double p_min = std::numeric_limits<double>::infinity();
  double p_max = 0.0;
  std::size_t worst_theta = 0;
  for (std::size_t t = 0; t < thetas.size(); ++t) {
    if (!thetas[t].is_real()) throw DomainError("mixing is checked at real parameters");
    const auto bound = model.bind(thetas[t]);
    for (std::size_t x = 0; x < bound->size(); ++x)
      for (std::size_t to = 0; to < bound->size(); ++to) {
        const double p = bound->transition(x, to).real();
        if (p < p_min) {
          p_min = p;
          worst_theta = t;
        }
        p_max = std::max(p_max, p);
      }
  }
  const double eps = thetas.empty() ? 0.0 : std::min(p_min, 1.0 / p_max);
  report.pass = eps > 0.0;
  report.constants = {{"epsilon", eps}, {"p_min", p_min}, {"p_max", p_max}};
  report.evidence = {{"parameters", static_cast<double>(thetas.size())},
                     {"grid_points", static_cast<double>(model.state_space()->size())},
                     {"worst_parameter_index", static_cast<double>(worst_theta)}};
  return report;
}

AssumptionReport check_density_ratio(const ModelFamily& model,
                                     std::span<const ParameterPoint> thetas) {
  AssumptionReport report;
  report.assumption = "density_ratio";
  const GridSpace& ys = *model.observation_space().grid;
  const GridSpace& xs = *model.state_space();
  double gamma = std::numeric_limits<double>::infinity();
  double domination = 0.0;
  bool zero_envelope = false;
  std::size_t worst_y = 0, worst_x = 0;
  std::vector<Complex> q(xs.size());
  for (const auto& theta : thetas) {
    if (!theta.is_real()) throw DomainError("the density ratio is checked at real parameters");
    const auto bound = model.bind(theta);
    for (std::size_t yi = 0; yi < ys.size(); ++yi) {
      const auto y = ys.point(yi);
      bound->emission(y, q);
      const double phi = std::abs(bound->envelope(y));
      if (!(phi > 0.0)) {
        zero_envelope = true;
        continue;
      }
      for (std::size_t x = 0; x < xs.size(); ++x) {
        double integral = 0.0;
        for (std::size_t to = 0; to < xs.size(); ++to) {
          const Complex r = q[to] * bound->transition(x, to);
          integral += r.real() * xs.weight(to);
          domination = std::max(domination, std::abs(r) / phi);
        }
        if (integral / phi < gamma) {
          gamma = integral / phi;
          worst_y = yi;
          worst_x = x;
        }
      }
    }
  }
  if (zero_envelope || thetas.empty()) gamma = 0.0;
  const bool dominated = domination <= 1.0 + 1e-9;
  report.pass = gamma > 0.0 && dominated && !zero_envelope;
  report.constants = {{"gamma", gamma}, {"max_r_over_phi", domination}};
  report.evidence = {{"parameters", static_cast<double>(thetas.size())},
                     {"observation_points", static_cast<double>(ys.size())},
                     {"worst_observation_index", static_cast<double>(worst_y)},
                     {"worst_state_index", static_cast<double>(worst_x)}};
  if (zero_envelope) report.note = "envelope vanishes at some observation";
  else if (!dominated) report.note = "envelope does not dominate r";
  return report;
}

AssumptionReport check_integrability(const ModelFamily& model) {
  AssumptionReport report;
  report.assumption = "integrability";
  const ObservationSpace& obs = model.observation_space();
  if (obs.finite) {
    const auto v = integrate_envelope(model, *obs.grid);
    report.pass = std::isfinite(v.phi) && std::isfinite(v.psi_phi);
    report.constants = {{"phi_integral", v.phi}, {"psi_phi_integral", v.psi_phi}, {"tail", 0.0}};
    report.evidence = {{"symbols", static_cast<double>(obs.symbols())}};
    return report;
  }
  const auto coarse = refined(model, 4);
  const auto fine = refined(model, 8);
  const auto a = integrate_envelope(model, *coarse);
  const auto b = integrate_envelope(model, *fine);
  auto rel = [](double x, double y) { return std::abs(x - y) / std::max(std::abs(y), 1e-300); };
  const double change = std::max(rel(a.phi, b.phi), rel(a.psi_phi, b.psi_phi));
  report.pass = std::isfinite(b.phi) && std::isfinite(b.psi_phi) && change <= 1e-4;
  report.constants = {{"phi_integral", b.phi}, {"psi_phi_integral", b.psi_phi}, {"tail", 0.0}};
  report.evidence = {{"points_coarse", static_cast<double>(coarse->size())},
                     {"points_fine", static_cast<double>(fine->size())},
                     {"relative_change", change}};
  if (!report.pass) report.note = "envelope quadrature did not settle under refinement";
  return report;
}

AssumptionReport check_true_model_ergodicity(const ModelFamily& model,
                                             const ParameterPoint& theta) {
  AssumptionReport report;
  report.assumption = "ergodicity";
  const JointKernel kernel = build_state_kernel(model, theta);
  const InvariantReport inv = invariant_distribution(kernel);

  // Iterates at the round-off floor say nothing about K.
  double k_ergodic = inv.sup_tv.empty() ? 0.0 : inv.sup_tv[0];
  if (inv.rate > 0.0)
    for (std::size_t n = 1; n < inv.sup_tv.size(); ++n)
      if (inv.sup_tv[n] > 1e-10)
        k_ergodic = std::max(k_ergodic, inv.sup_tv[n] / std::pow(inv.rate, static_cast<double>(n)));

  const GridSpace& ys = *model.observation_space().grid;
  const EnvelopeBounds env = model.envelope_bounds(ys);
  const auto bound = model.bind(theta);
  std::vector<double> psi_q(bound->size(), 0.0);
  std::vector<Complex> q(bound->size());
  for (std::size_t yi = 0; yi < ys.size(); ++yi) {
    bound->emission(ys.point(yi), q);
    for (std::size_t x = 0; x < q.size(); ++x) psi_q[x] += env.psi[yi] * std::abs(q[x]) * ys.weight(yi);
  }
  const double k_psi = *std::max_element(psi_q.begin(), psi_q.end());

  report.pass = inv.ergodic && std::isfinite(k_ergodic) && std::isfinite(k_psi);
  report.constants = {{"rho", inv.rate},
                      {"K", std::max(k_ergodic, k_psi)},
                      {"K_ergodic", k_ergodic},
                      {"K_psi", k_psi}};
  report.evidence = {{"iterations", static_cast<double>(inv.iterations)},
                     {"last_change", inv.last_change},
                     {"states", static_cast<double>(kernel.states())}};
  report.note = inv.failure;
  return report;
}

ForgettingReport forgetting_experiment(const ModelFamily& model, const ParameterPoint& eta,
                                       const ForgettingConfig& config) {
  if (config.n_max == 0 || config.num_paths == 0)
    throw ConfigurationError("forgetting needs at least one path and one step");
  const auto space = model.state_space();
  const ParameterPoint theta(eta.real_part());

  std::vector<std::pair<GridMeasure, GridMeasure>> pairs = config.pairs;
  if (pairs.empty()) {
    const auto first = space->point(0);
    const auto last = space->point(space->size() - 1);
    pairs.emplace_back(GridMeasure::dirac(space, first), GridMeasure::dirac(space, last));
    pairs.emplace_back(GridMeasure::uniform(space), GridMeasure::dirac(space, first));
  }
  if (config.complex_perturbation > 0.0) {
    if (space->size() < 2) throw ConfigurationError("perturbation needs two states");
    std::vector<Complex> m(space->size());
    m[0] = Complex(0.0, config.complex_perturbation);
    m[1] = Complex(0.0, -config.complex_perturbation);
    const auto pert = GridMeasure::from_masses(space, m);
    for (auto& [a, b] : pairs) {
      a = a + pert;
      b = b - pert;
    }
  }

  ForgettingReport report;
  if (config.epsilon_star > 0.0) {
    report.epsilon_star = config.epsilon_star;
  } else {
    const std::vector<ParameterPoint> at{theta};
    report.epsilon_star = check_mixing(model, at).constant("epsilon");
  }
  report.benchmark = 1.0 - report.epsilon_star * report.epsilon_star + config.slack;

  const DataSource source{&model, theta, GridMeasure::uniform(space)};
  const auto paths = sample_paths(source, config.n_max, config.num_paths, config.seed);
  const auto bound = model.bind(eta);

  const std::size_t runs = paths.size() * pairs.size();
  std::vector<std::vector<double>> distance(runs, std::vector<double>(config.n_max + 1));
  std::exception_ptr failure;
  const auto sruns = static_cast<std::ptrdiff_t>(runs);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t ri = 0; ri < sruns; ++ri) {
    const auto r = static_cast<std::size_t>(ri);
    try {
      const auto& path = paths[r / pairs.size()];
      const auto& [lambda_a, lambda_b] = pairs[r % pairs.size()];
      PathFilter a(*bound, lambda_a);
      PathFilter b(*bound, lambda_b);
      auto& d = distance[r];
      d[0] = (lambda_a - lambda_b).tv_norm();
      for (std::size_t n = 1; n <= config.n_max; ++n) {
        a.step(path[n - 1]);
        b.step(path[n - 1]);
        d[n] = (a.measure() - b.measure()).tv_norm();
      }
    } catch (...) {
#pragma omp critical(hmm_forgetting_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<double> rates;
  for (const auto& d : distance) {
    std::vector<double> ns, logs;
    for (std::size_t n = 1; n <= config.n_max; ++n)
      if (d[n] > config.floor) {
        ns.push_back(static_cast<double>(n));
        logs.push_back(std::log(d[n]));
      }
    report.final_distance = std::max(report.final_distance, d[config.n_max]);
    if (ns.size() < 2) {
      ++report.immediate_runs;
      continue;
    }
    rates.push_back(std::exp(fit_line(ns, logs).slope));
  }
  report.fitted_runs = rates.size();
  report.forgotten_immediately = rates.empty();
  if (!rates.empty()) {
    report.mean_rate = summarize(rates).mean;
    report.worst_rate = *std::max_element(rates.begin(), rates.end());
  }
  report.within_benchmark = rates.empty() || report.mean_rate <= report.benchmark;

  report.mean_distance.assign(config.n_max + 1, 0.0);
  std::vector<double> column(runs);
  for (std::size_t n = 0; n <= config.n_max; ++n) {
    for (std::size_t r = 0; r < runs; ++r) column[r] = distance[r][n];
    report.mean_distance[n] = pairwise_sum(column) / static_cast<double>(runs);
  }
  for (std::size_t n = 0; n < config.n_max; ++n) {
    const double dn = report.mean_distance[n];
    if (dn < 0.1 && dn > config.floor)
      report.max_relative_increase =
          std::max(report.max_relative_increase, report.mean_distance[n + 1] / dn - 1.0);
  }
  report.monotone = report.max_relative_increase <= 0.1;
  return report;
}

namespace {
constexpr double rounding_floor = 1e-12;
}

ConvergenceReport convergence_from_values(std::span<const std::size_t> horizons,
                                          std::span<const double> values,
                                          std::span<const double> gap_std_errors) {
  if (horizons.size() != values.size() || horizons.size() != gap_std_errors.size())
    throw ConfigurationError("horizons, values and errors differ in length");
  if (horizons.size() < 2) throw ConfigurationError("at least two horizons are required");
  for (std::size_t h = 1; h < horizons.size(); ++h)
    if (horizons[h] <= horizons[h - 1])
      throw ConfigurationError("horizons must be strictly increasing");

  ConvergenceReport report;
  report.horizons.assign(horizons.begin(), horizons.end());
  const std::size_t ref = horizons.size() - 1;
  const double n_ref = static_cast<double>(horizons[ref]);
  report.reference_horizon = horizons[ref];

  std::vector<double> log_n, log_gap;
  for (std::size_t h = 0; h < ref; ++h) {
    const double n = static_cast<double>(horizons[h]);
    if (4.0 * n > n_ref) continue;
    const double gap = values[h] - values[ref];
    report.fitted_horizons.push_back(horizons[h]);
    report.gaps.push_back(gap);
    report.gap_std_errors.push_back(gap_std_errors[h]);
    const double floor = rounding_floor * (1.0 + std::abs(values[ref]));
    if (!(std::abs(gap) > std::max(3.0 * gap_std_errors[h], floor))) {
      report.inconclusive = true;
      continue;
    }
    log_n.push_back(std::log(1.0 / (1.0 / n - 1.0 / n_ref)));
    log_gap.push_back(std::log(std::abs(gap)));
  }
  if (log_n.size() < 2) {
    report.inconclusive = true;
    report.slope = std::numeric_limits<double>::quiet_NaN();
  } else {
    report.slope = fit_line(log_n, log_gap).slope;
  }
  if (report.inconclusive)
    report.note = "some gap to the reference is within 3 standard errors or at the rounding floor";
  return report;
}

ConvergenceReport rate_convergence_experiment(const ModelFamily& model,
                                              const ParameterPoint& theta,
                                              std::span<const std::size_t> horizons,
                                              const MonteCarloOptions& options) {
  const auto lambda = GridMeasure::uniform(model.state_space());
  const TrajectorySamples samples = entropy_samples(model, theta, lambda, horizons, options);
  const std::size_t ref = horizons.size() - 1;
  std::vector<double> means, errors;
  std::vector<RateEstimate> estimates;
  for (std::size_t h = 0; h < horizons.size(); ++h) {
    const SampleSummary s = summarize(samples.values[h]);
    std::vector<double> diff(samples.values[h].size());
    for (std::size_t i = 0; i < diff.size(); ++i)
      diff[i] = samples.values[h][i] - samples.values[ref][i];
    means.push_back(s.mean);
    errors.push_back(summarize(diff).std_error);
    estimates.push_back({horizons[h], Complex(s.mean, 0.0), s.std_error, s.count, samples.aborted});
  }
  ConvergenceReport report = convergence_from_values(horizons, means, errors);
  report.estimates = std::move(estimates);
  double previous_total = 0.0;
  std::size_t previous_n = 0;
  for (std::size_t h = 0; h < horizons.size(); ++h) {
    const double total = means[h] * static_cast<double>(horizons[h]);
    report.block_phi_means.push_back((total - previous_total) /
                                     static_cast<double>(horizons[h] - previous_n));
    previous_total = total;
    previous_n = horizons[h];
  }
  return report;
}

}  // namespace hmm
