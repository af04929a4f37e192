#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hmm/measures.hpp"
#include "hmm/models.hpp"
#include "hmm/random.hpp"

namespace hmm {

/// Law of the observed process: a model at a real parameter started from an
/// initial state distribution.
struct DataSource {
  const ModelFamily* model = nullptr;
  ParameterPoint theta;
  GridMeasure initial;
};

struct SimulatedPath {
  std::vector<Point> states;  // x_0 .. x_n, empty unless requested
  ObservationPath observations;
};

/// Draws x_0 ~ initial and n steps of the joint chain.
SimulatedPath simulate(const BoundModel& model, const GridMeasure& initial, std::size_t n,
                       RngStream& rng, bool keep_states = false);

/// count observation paths of length n, path i from RngStream(seed, i, purpose).
std::vector<ObservationPath> sample_paths(const DataSource& source, std::size_t n,
                                          std::size_t count, std::uint64_t seed,
                                          StreamPurpose purpose = StreamPurpose::observation_paths);

struct Extrapolation {
  double limit = 0.0;
  double c = 0.0;
  double residual = 0.0;
};

struct RateEstimate {
  std::size_t n = 0;
  Complex value{0.0, 0.0};
  double std_error = 0.0;
  std::size_t num_traj = 0;  // trajectories that completed
  std::size_t aborted = 0;
};

struct MonteCarloOptions {
  std::size_t num_traj = 1000;
  std::uint64_t seed = 0;
  StreamPurpose purpose = StreamPurpose::trajectory;
};

/// h_n(theta, lambda) at every horizon, all horizons read off prefixes of the
/// same simulated paths. Trajectories whose filter fails are dropped and
/// counted; more than 1% dropped throws EstimationError.
std::vector<RateEstimate> estimate_entropy(const ModelFamily& model, const ParameterPoint& theta,
                                           const GridMeasure& lambda,
                                           std::span<const std::size_t> horizons,
                                           const MonteCarloOptions& options);
RateEstimate estimate_entropy(const ModelFamily& model, const ParameterPoint& theta,
                              const GridMeasure& lambda, std::size_t n,
                              const MonteCarloOptions& options);

/// Per-trajectory values -(1/n) log q^n at each horizon, completed
/// trajectories only, in trajectory order: values[h][i].
struct TrajectorySamples {
  std::vector<std::size_t> horizons;
  std::vector<std::vector<double>> values;
  std::size_t aborted = 0;
};
TrajectorySamples entropy_samples(const ModelFamily& model, const ParameterPoint& theta,
                                  const GridMeasure& lambda,
                                  std::span<const std::size_t> horizons,
                                  const MonteCarloOptions& options);

/// l_n: paths from `truth`, scored by (model, eta, lambda). eta may be complex.
std::vector<RateEstimate> estimate_loglik(const DataSource& truth, const ModelFamily& model,
                                          const ParameterPoint& eta, const GridMeasure& lambda,
                                          std::span<const std::size_t> horizons,
                                          const MonteCarloOptions& options);

/// Scores the same paths under several initial measures. result[j][h] is the
/// estimate for initials[j] at horizons[h]. `paired_std_error[j][h]` (if
/// requested) is the standard error of the per-path difference to initials[0].
struct SharedPathScores {
  std::vector<std::vector<RateEstimate>> estimates;
  std::vector<std::vector<Complex>> mean_difference;
  std::vector<std::vector<double>> difference_std_error;
};
SharedPathScores score_initials(const DataSource& truth, const ModelFamily& model,
                                const ParameterPoint& eta,
                                std::span<const GridMeasure> initials,
                                std::span<const std::size_t> horizons,
                                const MonteCarloOptions& options);

/// Enumerates every y_{1:n} of a finite model. Throws BudgetError when
/// symbols^n > 1e7.
double exact_entropy(const FiniteModel& model, const ParameterPoint& theta,
                     const GridMeasure& lambda, std::size_t n);

/// Least squares value_n = limit + c / n; needs at least three horizons.
Extrapolation extrapolate(std::span<const std::size_t> horizons, std::span<const double> values);
Extrapolation extrapolate(std::span<const RateEstimate> estimates);

/// -slope of log difference against log n over the horizons with a nonzero
/// difference; NaN when fewer than two qualify.
double decay_exponent(std::span<const std::size_t> horizons, std::span<const double> differences);

enum class RateQuantity { loglik, entropy };

struct LambdaIndependenceReport {
  RateQuantity quantity = RateQuantity::loglik;
  bool shared_paths = true;
  std::vector<std::size_t> horizons;
  std::vector<RateEstimate> first;
  std::vector<RateEstimate> second;
  std::vector<double> difference;  // |value(lambda') - value(lambda'')|
  std::vector<double> difference_std_error;
  /// -slope of log difference against log n; NaN when fewer than two
  /// horizons have a nonzero difference.
  double decay_exponent = 0.0;
  std::optional<Extrapolation> first_limit;
  std::optional<Extrapolation> second_limit;
};

/// l_n scores one set of paths, drawn from (model, theta) started uniform,
/// under both initials. h_n needs paths from each initial's own law, so the
/// two sides use independent stream purposes.
LambdaIndependenceReport lambda_independence(const ModelFamily& model,
                                             const ParameterPoint& theta,
                                             const GridMeasure& lambda_first,
                                             const GridMeasure& lambda_second,
                                             std::span<const std::size_t> horizons,
                                             const MonteCarloOptions& options,
                                             RateQuantity quantity = RateQuantity::loglik);

}  // namespace hmm
