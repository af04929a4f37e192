#include "hmm/rates.hpp"

#include <cmath>
#include <exception>
#include <limits>
#include <string>

#include "hmm/errors.hpp"
#include "hmm/filter.hpp"

namespace hmm {

namespace {

void check_horizons(std::span<const std::size_t> horizons) {
  if (horizons.empty()) throw ConfigurationError("at least one horizon is required");
  if (horizons.front() == 0) throw ConfigurationError("horizons must be positive");
  for (std::size_t h = 1; h < horizons.size(); ++h)
    if (horizons[h] <= horizons[h - 1])
      throw ConfigurationError("horizons must be strictly increasing");
}

Point draw_initial(const GridMeasure& initial, RngStream& rng) {
  const auto masses = initial.masses();
  std::vector<double> weights(masses.size());
  for (std::size_t i = 0; i < masses.size(); ++i) weights[i] = masses[i].real();
  const std::size_t idx = rng.discrete(weights);
  const auto p = initial.space().point(idx);
  return Point(p.begin(), p.end());
}

// values[j][h][i]: sign * log q^n / n for initial j, horizon h, trajectory i.
struct TrajectoryTable {
  std::vector<std::vector<std::vector<Complex>>> values;
  std::vector<char> ok;
};

TrajectoryTable run_trajectories(const BoundModel& source, const GridMeasure& source_initial,
                                 const BoundModel& scorer, std::span<const GridMeasure> initials,
                                 std::span<const std::size_t> horizons,
                                 const MonteCarloOptions& options, double sign) {
  check_horizons(horizons);
  if (options.num_traj == 0) throw ConfigurationError("num_traj must be positive");
  if (!source_initial.is_probability(1e-9))
    throw ConfigurationError("the data-generating initial measure must be a probability");
  const std::size_t count = options.num_traj;
  const std::size_t n_max = horizons.back();

  TrajectoryTable table;
  table.values.assign(initials.size(), std::vector<std::vector<Complex>>(
                                           horizons.size(), std::vector<Complex>(count)));
  table.ok.assign(count, 1);

  std::exception_ptr failure;
  const auto scount = static_cast<std::ptrdiff_t>(count);
#pragma omp parallel for schedule(dynamic, 16)
  for (std::ptrdiff_t ii = 0; ii < scount; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    try {
      RngStream rng(options.seed, i, options.purpose);
      const SimulatedPath path = simulate(source, source_initial, n_max, rng);
      for (std::size_t j = 0; j < initials.size(); ++j) {
        PathFilter filter(scorer, initials[j]);
        std::size_t h = 0;
        for (std::size_t k = 0; k < n_max; ++k) {
          filter.step(path.observations[k]);
          if (k + 1 == horizons[h]) {
            table.values[j][h][i] =
                sign * filter.log_normalizer_sum() / static_cast<double>(horizons[h]);
            ++h;
          }
        }
      }
    } catch (const UnderflowError&) {
      table.ok[i] = 0;
    } catch (...) {
#pragma omp critical(hmm_rates_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  std::size_t aborted = 0;
  for (char c : table.ok) aborted += c ? 0 : 1;
  if (aborted * 100 > count)
    throw EstimationError("more than 1% of trajectories aborted (" + std::to_string(aborted) +
                          " of " + std::to_string(count) + ")");
  return table;
}

struct ComplexSummary {
  Complex mean;
  double std_error;
};

ComplexSummary summarize_complex(const std::vector<Complex>& values, const std::vector<char>& ok) {
  std::vector<double> re, im;
  re.reserve(values.size());
  im.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!ok[i]) continue;
    re.push_back(values[i].real());
    im.push_back(values[i].imag());
  }
  const SampleSummary sr = summarize(re);
  const SampleSummary si = summarize(im);
  return {Complex(sr.mean, si.mean), std::hypot(sr.std_error, si.std_error)};
}

std::vector<RateEstimate> collect(const TrajectoryTable& table, std::size_t j,
                                  std::span<const std::size_t> horizons) {
  std::size_t completed = 0;
  for (char c : table.ok) completed += c ? 1 : 0;
  std::vector<RateEstimate> out;
  for (std::size_t h = 0; h < horizons.size(); ++h) {
    const ComplexSummary s = summarize_complex(table.values[j][h], table.ok);
    out.push_back({horizons[h], s.mean, s.std_error, completed, table.ok.size() - completed});
  }
  return out;
}

}  // namespace

SimulatedPath simulate(const BoundModel& model, const GridMeasure& initial, std::size_t n,
                       RngStream& rng, bool keep_states) {
  SimulatedPath out;
  out.observations = ObservationPath(model.family().observation_space().dim());
  out.observations.reserve(n);
  Point x = draw_initial(initial, rng);
  if (keep_states) {
    out.states.reserve(n + 1);
    out.states.push_back(x);
  }
  for (std::size_t k = 0; k < n; ++k) {
    StepSample s = model.sample_step(x, rng);
    out.observations.push_back(s.observation);
    x = std::move(s.state);
    if (keep_states) out.states.push_back(x);
  }
  return out;
}

std::vector<ObservationPath> sample_paths(const DataSource& source, std::size_t n,
                                          std::size_t count, std::uint64_t seed,
                                          StreamPurpose purpose) {
  const auto bound = source.model->bind(source.theta);
  std::vector<ObservationPath> paths(count);
  for (std::size_t i = 0; i < count; ++i) {
    RngStream rng(seed, i, purpose);
    paths[i] = simulate(*bound, source.initial, n, rng).observations;
  }
  return paths;
}

std::vector<RateEstimate> estimate_entropy(const ModelFamily& model, const ParameterPoint& theta,
                                           const GridMeasure& lambda,
                                           std::span<const std::size_t> horizons,
                                           const MonteCarloOptions& options) {
  if (!theta.is_real()) throw DomainError("entropy is defined for real parameters only");
  const auto bound = model.bind(theta);
  const std::vector<GridMeasure> initials{lambda};
  const auto table = run_trajectories(*bound, lambda, *bound, initials, horizons, options, -1.0);
  return collect(table, 0, horizons);
}

TrajectorySamples entropy_samples(const ModelFamily& model, const ParameterPoint& theta,
                                  const GridMeasure& lambda,
                                  std::span<const std::size_t> horizons,
                                  const MonteCarloOptions& options) {
  if (!theta.is_real()) throw DomainError("entropy is defined for real parameters only");
  const auto bound = model.bind(theta);
  const std::vector<GridMeasure> initials{lambda};
  const auto table = run_trajectories(*bound, lambda, *bound, initials, horizons, options, -1.0);
  TrajectorySamples out;
  out.horizons.assign(horizons.begin(), horizons.end());
  for (std::size_t h = 0; h < horizons.size(); ++h) {
    std::vector<double> v;
    for (std::size_t i = 0; i < table.ok.size(); ++i)
      if (table.ok[i]) v.push_back(table.values[0][h][i].real());
    out.values.push_back(std::move(v));
  }
  for (char c : table.ok) out.aborted += c ? 0 : 1;
  return out;
}

RateEstimate estimate_entropy(const ModelFamily& model, const ParameterPoint& theta,
                              const GridMeasure& lambda, std::size_t n,
                              const MonteCarloOptions& options) {
  const std::size_t horizons[] = {n};
  return estimate_entropy(model, theta, lambda, horizons, options).front();
}

SharedPathScores score_initials(const DataSource& truth, const ModelFamily& model,
                                const ParameterPoint& eta,
                                std::span<const GridMeasure> initials,
                                std::span<const std::size_t> horizons,
                                const MonteCarloOptions& options) {
  if (initials.empty()) throw ConfigurationError("at least one initial measure is required");
  const auto source = truth.model->bind(truth.theta);
  const auto scorer = model.bind(eta);
  const auto table =
      run_trajectories(*source, truth.initial, *scorer, initials, horizons, options, 1.0);

  SharedPathScores out;
  for (std::size_t j = 0; j < initials.size(); ++j) {
    out.estimates.push_back(collect(table, j, horizons));
    std::vector<Complex> means;
    std::vector<double> errors;
    for (std::size_t h = 0; h < horizons.size(); ++h) {
      std::vector<Complex> diff(table.ok.size());
      for (std::size_t i = 0; i < diff.size(); ++i)
        diff[i] = table.values[j][h][i] - table.values[0][h][i];
      const ComplexSummary s = summarize_complex(diff, table.ok);
      means.push_back(s.mean);
      errors.push_back(s.std_error);
    }
    out.mean_difference.push_back(std::move(means));
    out.difference_std_error.push_back(std::move(errors));
  }
  return out;
}

std::vector<RateEstimate> estimate_loglik(const DataSource& truth, const ModelFamily& model,
                                          const ParameterPoint& eta, const GridMeasure& lambda,
                                          std::span<const std::size_t> horizons,
                                          const MonteCarloOptions& options) {
  const std::vector<GridMeasure> initials{lambda};
  return score_initials(truth, model, eta, initials, horizons, options).estimates.front();
}

double exact_entropy(const FiniteModel& model, const ParameterPoint& theta,
                     const GridMeasure& lambda, std::size_t n) {
  if (!theta.is_real()) throw DomainError("entropy is defined for real parameters only");
  if (n == 0) throw ConfigurationError("horizon must be positive");
  const std::size_t states = model.states();
  const std::size_t symbols = model.symbols();
  double leaves = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    leaves *= static_cast<double>(symbols);
    if (leaves > 1e7) throw BudgetError("exact entropy enumeration exceeds 1e7 sequences");
  }
  const auto pc = model.transition_matrix(theta);
  const auto qc = model.emission_matrix(theta);
  std::vector<double> p(pc.size()), q(qc.size());
  for (std::size_t i = 0; i < pc.size(); ++i) p[i] = pc[i].real();
  for (std::size_t i = 0; i < qc.size(); ++i) q[i] = qc[i].real();

  // alpha[depth] is the forward vector after `depth` observations, before the
  // transition into the next state.
  std::vector<std::vector<double>> alpha(n + 1, std::vector<double>(states));
  const auto masses = lambda.masses();
  for (std::size_t x = 0; x < states; ++x) alpha[0][x] = masses[x].real();
  std::vector<std::size_t> symbol(n, 0);
  double total = 0.0;

  auto advance = [&](std::size_t depth) {
    const std::size_t y = symbol[depth];
    for (std::size_t to = 0; to < states; ++to) {
      double s = 0.0;
      for (std::size_t from = 0; from < states; ++from)
        s += alpha[depth][from] * p[from * states + to];
      alpha[depth + 1][to] = s * q[to * symbols + y];
    }
  };

  std::size_t depth = 0;
  advance(0);
  while (true) {
    if (depth + 1 == n) {
      double m = 0.0;
      for (double a : alpha[n]) m += a;
      if (m > 0.0) total += m * std::log(m);
      // next sequence in lexicographic order
      while (true) {
        if (++symbol[depth] < symbols) {
          advance(depth);
          break;
        }
        symbol[depth] = 0;
        if (depth == 0) return -total / static_cast<double>(n);
        --depth;
      }
    } else {
      ++depth;
      symbol[depth] = 0;
      advance(depth);
    }
  }
}

Extrapolation extrapolate(std::span<const std::size_t> horizons, std::span<const double> values) {
  if (horizons.size() != values.size())
    throw ConfigurationError("horizons and values differ in length");
  if (horizons.size() < 3) throw EstimationError("extrapolation needs at least three horizons");
  std::vector<double> inv(horizons.size());
  for (std::size_t i = 0; i < horizons.size(); ++i) {
    if (horizons[i] == 0) throw ConfigurationError("horizons must be positive");
    inv[i] = 1.0 / static_cast<double>(horizons[i]);
  }
  const LineFit fit = fit_line(inv, values);
  return {fit.intercept, fit.slope, fit.residual};
}

Extrapolation extrapolate(std::span<const RateEstimate> estimates) {
  std::vector<std::size_t> n;
  std::vector<double> v;
  for (const auto& e : estimates) {
    n.push_back(e.n);
    v.push_back(e.value.real());
  }
  return extrapolate(n, v);
}

double decay_exponent(std::span<const std::size_t> horizons, std::span<const double> differences) {
  std::vector<double> log_n, log_d;
  for (std::size_t h = 0; h < horizons.size() && h < differences.size(); ++h) {
    if (differences[h] > 0.0) {
      log_n.push_back(std::log(static_cast<double>(horizons[h])));
      log_d.push_back(std::log(differences[h]));
    }
  }
  return log_n.size() >= 2 ? -fit_line(log_n, log_d).slope
                           : std::numeric_limits<double>::quiet_NaN();
}

LambdaIndependenceReport lambda_independence(const ModelFamily& model,
                                             const ParameterPoint& theta,
                                             const GridMeasure& lambda_first,
                                             const GridMeasure& lambda_second,
                                             std::span<const std::size_t> horizons,
                                             const MonteCarloOptions& options,
                                             RateQuantity quantity) {
  LambdaIndependenceReport report;
  report.quantity = quantity;
  report.horizons.assign(horizons.begin(), horizons.end());
  if (quantity == RateQuantity::loglik) {
    report.shared_paths = true;
    const DataSource truth{&model, theta, GridMeasure::uniform(model.state_space())};
    const std::vector<GridMeasure> initials{lambda_first, lambda_second};
    const auto scores = score_initials(truth, model, theta, initials, horizons, options);
    report.first = scores.estimates[0];
    report.second = scores.estimates[1];
    for (std::size_t h = 0; h < horizons.size(); ++h) {
      report.difference.push_back(std::abs(scores.mean_difference[1][h]));
      report.difference_std_error.push_back(scores.difference_std_error[1][h]);
    }
  } else {
    report.shared_paths = false;
    MonteCarloOptions second = options;
    second.purpose = StreamPurpose::paired_trajectory;
    report.first = estimate_entropy(model, theta, lambda_first, horizons, options);
    report.second = estimate_entropy(model, theta, lambda_second, horizons, second);
    for (std::size_t h = 0; h < horizons.size(); ++h) {
      report.difference.push_back(std::abs(report.first[h].value - report.second[h].value));
      report.difference_std_error.push_back(
          std::hypot(report.first[h].std_error, report.second[h].std_error));
    }
  }

  report.decay_exponent = decay_exponent(horizons, report.difference);
  if (horizons.size() >= 3) {
    report.first_limit = extrapolate(report.first);
    report.second_limit = extrapolate(report.second);
  }
  return report;
}

}  // namespace hmm
