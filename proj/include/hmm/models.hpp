#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "hmm/measures.hpp"
#include "hmm/numerics.hpp"
#include "hmm/parameter.hpp"
#include "hmm/random.hpp"

namespace hmm {

using Point = std::vector<double>;

/// Observation sequence y_1..y_n stored flat with a fixed per-observation
/// dimension. Finite alphabets store the symbol index as a double.
class ObservationPath {
 public:
  explicit ObservationPath(std::size_t dim = 1) : dim_(dim) {}
  ObservationPath(std::size_t dim, std::vector<double> values);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return dim_ == 0 ? 0 : values_.size() / dim_; }
  bool empty() const { return values_.empty(); }
  /// Element k holds y_{k+1}.
  std::span<const double> operator[](std::size_t k) const {
    return {values_.data() + k * dim_, dim_};
  }
  std::span<const double> values() const { return values_; }
  void push_back(std::span<const double> y);
  void reserve(std::size_t n) { values_.reserve(n * dim_); }
  ObservationPath slice(std::size_t begin, std::size_t end) const;

 private:
  std::size_t dim_;
  std::vector<double> values_;
};

struct ObservationSpace {
  bool finite = true;
  /// Finite: the symbol set. Continuous: midpoint grid over the truncation
  /// box, used for normalization and quadrature.
  std::shared_ptr<const GridSpace> grid;

  std::size_t dim() const { return grid->dim(); }
  std::size_t symbols() const { return grid->size(); }
};

struct StepSample {
  Point state;
  Point observation;
};

class ModelFamily;

/// A model family evaluated at one (possibly complex) parameter, with the
/// grid transition matrix materialized.
class BoundModel {
 public:
  virtual ~BoundModel() = default;

  const ModelFamily& family() const { return *family_; }
  const ParameterPoint& parameter() const { return eta_; }
  const GridSpace& state_space() const;
  std::size_t size() const { return size_; }

  /// p(to | from) as a density against the state reference measure.
  Complex transition(std::size_t from, std::size_t to) const {
    return transition_[from * size_ + to];
  }
  /// Row `to` of p(to | from) * w_from, contiguous over `from`.
  std::span<const Complex> propagation_row(std::size_t to) const {
    return {propagation_.data() + to * size_, size_};
  }
  /// q(y | x') at every grid point x'.
  virtual void emission(std::span<const double> y, std::span<Complex> out) const = 0;
  /// Dominating function phi_eta(y) with |r(y, x' | x)| <= |phi_eta(y)|.
  virtual Complex envelope(std::span<const double> y) const = 0;
  /// Draws (x_next, y_next); real parameters only.
  virtual StepSample sample_step(std::span<const double> x, RngStream& rng) const = 0;

 protected:
  BoundModel(const ModelFamily& family, ParameterPoint eta,
             std::vector<Complex> transition);
  void require_real(const char* what) const;

  /// Max over grid pairs of |p(x'|x)|.
  double max_abs_transition() const;

 private:
  const ModelFamily* family_;
  ParameterPoint eta_;
  std::size_t size_;
  std::vector<Complex> transition_;
  std::vector<Complex> propagation_;
};

/// Bounds phi(y) >= |phi_eta(y)| and psi(y) >= |log |phi_eta(y)|| over the
/// continuation vicinity, per observation grid point.
struct EnvelopeBounds {
  std::vector<double> phi;
  std::vector<double> psi;
};

/// Parameterized hidden Markov model: transition density p_theta(x'|x) on a
/// gridded compact state space, observation density q_theta(y|x), both with
/// closed-form complex continuations on ||Im eta||_inf <= delta.
class ModelFamily {
 public:
  virtual ~ModelFamily() = default;

  virtual std::string_view kind() const = 0;

  std::size_t param_dim() const { return box_.size(); }
  const ParameterBox& parameter_box() const { return box_; }
  double continuation_radius() const { return delta_; }
  const std::shared_ptr<const GridSpace>& state_space() const { return states_; }
  const ObservationSpace& observation_space() const { return observations_; }

  /// Throws ContinuationDomainError unless eta is within continuation_radius()
  /// of the parameter box (sup norm on both real and imaginary parts).
  void require_in_vicinity(const ParameterPoint& eta) const;

  virtual std::unique_ptr<BoundModel> bind(const ParameterPoint& eta) const = 0;

  virtual Complex transition_density(const ParameterPoint& eta,
                                     std::span<const double> x_next,
                                     std::span<const double> x) const = 0;
  virtual Complex observation_density(const ParameterPoint& eta,
                                      std::span<const double> y,
                                      std::span<const double> x) const = 0;

  /// r(y, x' | x) = q(y | x') p(x' | x).
  Complex joint_density(const ParameterPoint& eta, std::span<const double> y,
                        std::span<const double> x_next,
                        std::span<const double> x) const;
  Complex envelope(const ParameterPoint& eta, std::span<const double> y) const;
  StepSample sample_step(const ParameterPoint& theta, std::span<const double> x,
                         RngStream& rng) const;

  /// Default: maximize over vicinity_samples(). Families with a closed form
  /// override.
  virtual EnvelopeBounds envelope_bounds(const GridSpace& ys) const;

  /// Box center and corners, each combined with zero and with every sign
  /// pattern of +-delta in the imaginary parts.
  std::vector<ParameterPoint> vicinity_samples() const;

 protected:
  ModelFamily(ParameterBox box, double delta, std::shared_ptr<const GridSpace> states,
              ObservationSpace observations);

  /// Checks Re p > 0 and Re q > 0 on the grids at every vicinity sample
  /// (entries that vanish identically are allowed). Called by the most
  /// derived constructor.
  void validate_continuation() const;

 private:
  ParameterBox box_;
  double delta_;
  std::shared_ptr<const GridSpace> states_;
  ObservationSpace observations_;
};

/// Affine logits for a row-stochastic table: logit(r, c) = base(r, c) +
/// sum_k slopes[k](r, c) * eta_k. Probabilities are the row-wise softmax.
struct LogitTable {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> base;                 // rows * cols, may hold -inf
  std::vector<std::vector<double>> slopes;  // one rows * cols table per parameter

  static LogitTable from_probabilities(std::size_t rows, std::size_t cols,
                                       std::span<const double> probabilities,
                                       std::size_t param_dim = 0);
  void softmax_row(std::span<const Complex> eta, std::size_t row,
                   std::span<Complex> out) const;
  /// max over entries of |Im logit| for the given imaginary parameter offsets.
  double max_imag_logit(std::span<const double> imag) const;
  /// max over entries of sum_k |slope_k|.
  double max_slope_sum() const;
  void validate(std::size_t param_dim, const char* name) const;
};

enum class EmissionDefect { none, conjugate };

/// Finite-state, finite-alphabet model; states and symbols carry counting
/// measure.
class FiniteModel final : public ModelFamily {
 public:
  FiniteModel(ParameterBox box, double delta, LogitTable transition, LogitTable emission,
              EmissionDefect defect = EmissionDefect::none);

  std::string_view kind() const override { return "finite"; }
  std::size_t states() const { return transition_.rows; }
  std::size_t symbols() const { return emission_.cols; }
  const LogitTable& transition_logits() const { return transition_; }
  const LogitTable& emission_logits() const { return emission_; }
  EmissionDefect defect() const { return defect_; }

  std::unique_ptr<BoundModel> bind(const ParameterPoint& eta) const override;
  Complex transition_density(const ParameterPoint& eta, std::span<const double> x_next,
                             std::span<const double> x) const override;
  Complex observation_density(const ParameterPoint& eta, std::span<const double> y,
                              std::span<const double> x) const override;

  /// N x N matrix P[x][x'] and N x M matrix Q[x][y] at eta.
  std::vector<Complex> transition_matrix(const ParameterPoint& eta) const;
  std::vector<Complex> emission_matrix(const ParameterPoint& eta) const;

 private:
  std::vector<Complex> emission_eta(const ParameterPoint& eta) const;

  LogitTable transition_;
  LogitTable emission_;
  EmissionDefect defect_;
};

struct GaussianComponent {
  std::vector<double> mean;
  std::vector<double> scale;
};

/// Softmax weights over K components: logit_i = base_i + sum_k theta_slopes[i][k]
/// * eta_k + sum_l state_slopes[i][l] * x_l.
struct SoftmaxWeights {
  std::vector<double> base;
  std::vector<std::vector<double>> theta_slopes;
  std::vector<std::vector<double>> state_slopes;

  std::size_t size() const { return base.size(); }
  void evaluate(std::span<const Complex> eta, std::span<const double> x,
                std::span<Complex> out) const;
  double max_theta_slope_sum() const;
  void validate(std::size_t param_dim, std::size_t state_dim, const char* name) const;
};

/// p(x'|x) = sum_i a_i(x) v_i(x'), q(y|x) = sum_j b_j(x) w_j(y) with
/// Gaussian components truncated to the state and observation boxes and
/// renormalized by the grid quadrature.
class MixtureModel final : public ModelFamily {
 public:
  struct Spec {
    ParameterBox box;
    double delta = 0.1;
    Box state_box;
    std::vector<std::size_t> state_cells;
    Box observation_box;
    std::vector<std::size_t> observation_cells;
    std::vector<GaussianComponent> state_components;
    SoftmaxWeights state_weights;
    std::vector<GaussianComponent> observation_components;
    SoftmaxWeights observation_weights;
  };

  explicit MixtureModel(Spec spec);

  std::string_view kind() const override { return "mixture"; }
  const Spec& spec() const { return spec_; }

  std::unique_ptr<BoundModel> bind(const ParameterPoint& eta) const override;
  Complex transition_density(const ParameterPoint& eta, std::span<const double> x_next,
                             std::span<const double> x) const override;
  Complex observation_density(const ParameterPoint& eta, std::span<const double> y,
                              std::span<const double> x) const override;
  EnvelopeBounds envelope_bounds(const GridSpace& ys) const override;

  double state_component(std::size_t i, std::span<const double> x) const;
  double observation_component(std::size_t j, std::span<const double> y) const;
  /// Envelope constant C in phi(y) = C * sum_j w_j(y).
  double envelope_constant() const { return envelope_constant_; }
  /// Minimum and maximum of v_i over the state box.
  double component_floor() const { return component_floor_; }
  double component_ceiling() const { return component_ceiling_; }

 private:
  friend class BoundMixture;
  Point sample_truncated(const GaussianComponent& c, const Box& box, RngStream& rng) const;

  Spec spec_;
  std::vector<double> state_norm_;
  std::vector<double> observation_norm_;
  double envelope_constant_ = 0.0;
  double component_floor_ = 0.0;
  double component_ceiling_ = 0.0;
};

struct Monomial {
  double coefficient = 0.0;
  std::vector<unsigned> theta_powers;
  std::vector<unsigned> state_powers;
};

/// Polynomial in (eta, x), complex in eta and real in x.
struct Polynomial {
  std::vector<Monomial> terms;

  Complex evaluate(std::span<const Complex> eta, std::span<const double> x) const;
  void validate(std::size_t param_dim, std::size_t state_dim, const char* name) const;
};

/// Truncation of X' = A(X) + B(X) V, Y = C(X) + D(X) W with standard Gaussian
/// V, W and diagonal B, D; densities are renormalized on the state and
/// observation boxes by the grid quadrature.
class StateSpaceModel final : public ModelFamily {
 public:
  struct Spec {
    ParameterBox box;
    double delta = 0.1;
    Box state_box;
    std::vector<std::size_t> state_cells;
    Box observation_box;
    std::vector<std::size_t> observation_cells;
    std::vector<Polynomial> drift;              // A, d_x entries
    std::vector<Polynomial> diffusion;          // diag B, d_x entries
    std::vector<Polynomial> observation_mean;   // C, d_y entries
    std::vector<Polynomial> observation_scale;  // diag D, d_y entries
  };

  explicit StateSpaceModel(Spec spec);

  std::string_view kind() const override { return "state_space"; }
  const Spec& spec() const { return spec_; }

  std::unique_ptr<BoundModel> bind(const ParameterPoint& eta) const override;
  Complex transition_density(const ParameterPoint& eta, std::span<const double> x_next,
                             std::span<const double> x) const override;
  Complex observation_density(const ParameterPoint& eta, std::span<const double> y,
                              std::span<const double> x) const override;

  /// Untruncated Gaussian kernel exp(-|D^{-1}(y - C)|^2 / 2) (and the state
  /// analogue); normalizers are grid sums of these.
  Complex state_kernel(std::span<const Complex> eta, std::span<const double> x_next,
                       std::span<const double> x) const;
  Complex observation_kernel(std::span<const Complex> eta, std::span<const double> y,
                             std::span<const double> x) const;
  Complex state_normalizer(std::span<const Complex> eta, std::span<const double> x) const;
  Complex observation_normalizer(std::span<const Complex> eta,
                                 std::span<const double> x) const;

 private:
  friend class BoundStateSpace;
  Spec spec_;
};

}  // namespace hmm
