#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hmm/measures.hpp"
#include "hmm/models.hpp"
#include "hmm/rates.hpp"

namespace hmm {

struct NamedValue {
  std::string name;
  double value = 0.0;
};

struct AssumptionReport {
  std::string assumption;
  bool pass = false;
  std::vector<NamedValue> constants;  // witnessed epsilon*, gamma*, K*, rho*, ...
  std::vector<NamedValue> evidence;   // sample sizes, worst-case locations
  std::string note;

  /// Throws std::out_of_range for an unknown name.
  double constant(std::string_view name) const;
};

/// Tensor grid with per_axis points on each axis of the box (the center when
/// per_axis is 1).
std::vector<ParameterPoint> parameter_grid(const ParameterBox& box, std::size_t per_axis);
/// count points uniform in the box, point i from RngStream(seed, i).
std::vector<ParameterPoint> parameter_samples(const ParameterBox& box, std::size_t count,
                                              std::uint64_t seed);

/// epsilon* = min(min p, 1 / max p) over the state grid and the parameters;
/// passes iff epsilon* > 0. The witness measure is q(y|x') mu(dx').
AssumptionReport check_mixing(const ModelFamily& model,
                              std::span<const ParameterPoint> thetas);

/// gamma* = min over (theta, x, y) of int r(y, x'|x) mu(dx') / |phi(y)|, with
/// y over the observation grid. Also requires |r| <= |phi| everywhere and
/// phi != 0; passes iff gamma* > 0 and both hold.
AssumptionReport check_density_ratio(const ModelFamily& model,
                                     std::span<const ParameterPoint> thetas);

/// int phi dnu and int psi phi dnu: exact sums for finite alphabets;
/// midpoint quadrature at 4x and 8x the observation grid for continuous Y,
/// which must agree to 1e-4 relative. The truncation box is compact, so the
/// tail contribution is zero.
AssumptionReport check_integrability(const ModelFamily& model);

/// Geometric ergodicity of the state chain at theta: rho* from
/// invariant_distribution, K* = max(sup_n sup_tv_n / rho*^n,
/// max_x int psi(y) q(y|x) nu(dy)).
AssumptionReport check_true_model_ergodicity(const ModelFamily& model,
                                             const ParameterPoint& theta);

struct ForgettingConfig {
  std::size_t num_paths = 200;
  std::size_t n_max = 100;
  std::uint64_t seed = 0;
  /// Initialization pairs; empty selects (delta at the first state, delta at
  /// the last state) and (uniform, delta at the first state).
  std::vector<std::pair<GridMeasure, GridMeasure>> pairs;
  /// When > 0, adds +i*eps*(delta_0 - delta_1) to the first measure of every
  /// pair and -i*eps*(delta_0 - delta_1) to the second.
  double complex_perturbation = 0.0;
  double floor = 1e-13;
  double slack = 0.05;
  /// 0 selects check_mixing at Re eta.
  double epsilon_star = 0.0;
};

struct ForgettingReport {
  double epsilon_star = 0.0;
  double benchmark = 0.0;  // 1 - epsilon*^2 + slack
  double mean_rate = 0.0;  // over fitted (path, pair) runs
  double worst_rate = 0.0;
  std::size_t fitted_runs = 0;
  std::size_t immediate_runs = 0;  // fewer than two d_n above the floor
  bool forgotten_immediately = false;
  bool within_benchmark = false;
  /// d_n averaged over paths and pairs, n = 0..n_max.
  std::vector<double> mean_distance;
  /// max of mean d_{n+1} / mean d_n - 1 over n with mean d_n < 0.1.
  double max_relative_increase = 0.0;
  bool monotone = false;  // max_relative_increase <= 0.1
  double final_distance = 0.0;  // max over runs of d_{n_max}
};

/// Paired filters at eta along paths sampled from the model at Re eta
/// started uniform; d_n = tv(F^{0:n}(lambda') - F^{0:n}(lambda'')).
ForgettingReport forgetting_experiment(const ModelFamily& model, const ParameterPoint& eta,
                                       const ForgettingConfig& config);

struct ConvergenceReport {
  std::vector<std::size_t> horizons;
  std::vector<RateEstimate> estimates;
  std::size_t reference_horizon = 0;
  /// Horizons used in the fit and their gaps h_n - h_ref with paired errors.
  std::vector<std::size_t> fitted_horizons;
  std::vector<double> gaps;
  std::vector<double> gap_std_errors;
  double slope = 0.0;
  bool inconclusive = false;
  std::string note;
  /// Mean per-step -Phi over each block (n_{j-1}, n_j].
  std::vector<double> block_phi_means;
};

/// Fits log|value_n - value_ref| against log n_eff, n_eff = 1 / (1/n -
/// 1/n_ref), over horizons n <= n_ref / 4. The reference is the longest
/// horizon. Inconclusive when a fitted gap is below 3 standard errors or
/// fewer than two horizons qualify.
ConvergenceReport convergence_from_values(std::span<const std::size_t> horizons,
                                          std::span<const double> values,
                                          std::span<const double> gap_std_errors);

ConvergenceReport rate_convergence_experiment(const ModelFamily& model,
                                              const ParameterPoint& theta,
                                              std::span<const std::size_t> horizons,
                                              const MonteCarloOptions& options);

}  // namespace hmm
