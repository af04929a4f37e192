#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "hmm/measures.hpp"
#include "hmm/models.hpp"

namespace hmm {

/// Filter value after some number of updates: the normalized measure
/// F^{m:n}(xi), the accumulated log-normalizers and a branch flag.
struct FilterState {
  GridMeasure measure;
  Complex log_normalizer_sum{0.0, 0.0};
  std::size_t steps = 0;
  /// Re R(X | xi) > 0 at every step so far. When false, the principal
  /// logarithm may have jumped a branch and the Phi-sum is suspect.
  bool normalizer_in_right_half_plane = true;
};

/// Grid transcription of R_{eta,y}(dx' | xi): density
/// q(y|x') * sum_x p(x'|x) xi(x) w_x. Linear in xi.
GridMeasure update_unnormalized(const BoundModel& model, const GridMeasure& xi,
                                std::span<const double> y);

/// Principal logarithm of R_{eta,y}(X | xi). Throws UnderflowError when
/// |R(X | xi)| < 1e-300.
Complex log_normalizer(const BoundModel& model, const GridMeasure& xi,
                       std::span<const double> y);

/// One normalized step F = R / R(X), accumulating Phi into the state.
FilterState update(const BoundModel& model, const FilterState& state,
                   std::span<const double> y);
FilterState update(const BoundModel& model, const GridMeasure& xi, std::span<const double> y);

/// Runs the filter along y_1..y_n; log_normalizer_sum is then
/// log q^n(y_{1:n} | lambda).
FilterState filter_path(const BoundModel& model, const GridMeasure& initial,
                        const ObservationPath& ys);

GridMeasure update_unnormalized(const ModelFamily& model, const ParameterPoint& eta,
                                const GridMeasure& xi, std::span<const double> y);
Complex log_normalizer(const ModelFamily& model, const ParameterPoint& eta,
                       const GridMeasure& xi, std::span<const double> y);
FilterState update(const ModelFamily& model, const ParameterPoint& eta, const GridMeasure& xi,
                   std::span<const double> y);
FilterState filter_path(const ModelFamily& model, const ParameterPoint& eta,
                        const GridMeasure& initial, const ObservationPath& ys);

/// Allocation-free sequential filter for the estimators' inner loops.
class PathFilter {
 public:
  PathFilter(const BoundModel& model, const GridMeasure& initial);

  /// Advances one observation and returns Phi for it.
  Complex step(std::span<const double> y);
  void reset(const GridMeasure& initial);

  Complex log_normalizer_sum() const { return log_sum_; }
  std::size_t steps() const { return steps_; }
  bool normalizer_in_right_half_plane() const { return right_half_plane_; }
  GridMeasure measure() const;
  FilterState state() const;

 private:
  const BoundModel* model_;
  std::shared_ptr<const GridSpace> space_;
  std::vector<Complex> density_;
  std::vector<Complex> next_;
  std::vector<Complex> emission_;
  std::vector<Complex> masses_;
  Complex log_sum_{0.0, 0.0};
  std::size_t steps_ = 0;
  bool right_half_plane_ = true;
};

/// Result of checking F^{0:n}(l) = F^{k:n}(F^{0:k}(l)) and
/// <R^{0:n}(l)> = <R^{k:n}(F^{0:k}(l))> <R^{0:k}(l)> with every F^{m:k}
/// evaluated as R^{m:k}(xi) / <R^{m:k}(xi)> (no intermediate normalization).
struct CompositionCheck {
  double measure_deviation = 0.0;     // tv of split minus unsplit
  double normalizer_mismatch = 0.0;   // |log-normalizer identity residual|, phase wrapped
  double sequential_deviation = 0.0;  // tv of unsplit minus step-normalized filter
};

CompositionCheck compose_check(const BoundModel& model, const GridMeasure& initial,
                               const ObservationPath& ys, std::size_t k);
CompositionCheck compose_check(const ModelFamily& model, const ParameterPoint& eta,
                               const GridMeasure& initial, const ObservationPath& ys,
                               std::size_t k);

}  // namespace hmm
