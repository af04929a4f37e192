#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hmm/measures.hpp"
#include "hmm/models.hpp"

namespace hmm {

/// Scalar function of a (possibly complex) parameter. Must be safe to call
/// concurrently.
using ScalarFunction = std::function<Complex(const ParameterPoint&)>;

/// Im f(theta + i h e_k) / h for every coordinate k.
std::vector<double> complex_step_grad(const ScalarFunction& f, const ParameterPoint& theta,
                                      double h = 1e-20);
/// Re (f(theta + h e_k) - f(theta - h e_k)) / 2h.
std::vector<double> central_difference_grad(const ScalarFunction& f, const ParameterPoint& theta,
                                            double h = 1e-4);

struct TaylorProbe {
  ParameterPoint center;
  std::vector<double> direction;  // normalized to unit length on use
  double radius = 0.0;
  std::size_t num_nodes = 0;
  std::vector<Complex> coefficients;
};

/// c_0..c_K of t -> f(center + t u) by the trapezoid rule on |t| = radius,
/// stored into probe.coefficients. Throws BudgetError when K >= num_nodes/2.
std::vector<Complex> cauchy_coeffs(const ScalarFunction& f, TaylorProbe& probe, std::size_t K);

/// sum_k c_k t^k.
Complex taylor_evaluate(const std::vector<Complex>& coefficients, Complex t);

/// |df/dRe + i df/dIm| in coordinate k, by central differences of step h.
double cauchy_riemann_residual(const ScalarFunction& f, const ParameterPoint& eta,
                               std::size_t coordinate = 0, double h = 1e-6);

/// eta -> mean over frozen paths of (1/n) log q^n_eta(y_{1:n} | lambda), with
/// n the horizon (paths are read as prefixes).
class FrozenLogLikelihood {
 public:
  FrozenLogLikelihood(const ModelFamily& model, GridMeasure lambda,
                      std::vector<ObservationPath> paths, std::size_t horizon);

  Complex operator()(const ParameterPoint& eta) const;
  std::size_t horizon() const { return horizon_; }
  ScalarFunction function() const {
    return [this](const ParameterPoint& eta) { return (*this)(eta); };
  }

 private:
  const ModelFamily* model_;
  GridMeasure lambda_;
  std::vector<ObservationPath> paths_;
  std::size_t horizon_;
};

struct AnalyticityConfig {
  std::vector<std::size_t> horizons{8, 16, 32};
  std::size_t num_paths = 64;
  std::uint64_t seed = 0;
  /// 0 selects half the model's continuation radius.
  double radius = 0.0;
  std::size_t order = 24;
  /// Empty selects (1, ..., 1) / sqrt(d).
  std::vector<double> direction;
  double complex_step = 1e-20;
  double difference_step = 1e-4;
  double cauchy_riemann_step = 1e-6;
  double gradient_tolerance = 1e-5;
  double cauchy_riemann_tolerance = 1e-6;
  double taylor_tolerance = 1e-8;
  double node_tolerance = 1e-9;
  double center_tolerance = 1e-10;
  /// Multiplies every tolerance above.
  double tolerance_scale = 1.0;
};

struct AnalyticityReport {
  bool passed = true;
  std::vector<std::string> failed_checks;
  std::size_t horizon = 0;  // the longest, used for all single-horizon checks
  double f_center = 0.0;
  std::vector<double> complex_step_gradient;
  std::vector<double> difference_gradient;
  double gradient_error = 0.0;       // relative, sup norm
  double cauchy_riemann = 0.0;       // max of residual / (1 + |f|) over 8 points
  double taylor_error = 0.0;         // max of |series - f| / (1 + |f|) at radius/2
  double node_agreement = 0.0;       // max |c_k - c'_k| r^k between 4K and 8K nodes
  double center_error = 0.0;         // |c_0 - f(center)|
  double coefficient_imag = 0.0;     // max |Im c_k| r^k
  std::vector<Complex> coefficients;
  std::vector<Complex> c1_by_horizon;
  double c1_gradient_error = 0.0;    // |c_1 - grad . u| / max(|grad . u|, 1e-8)
};

/// Frozen-path analyticity checks for eta -> l_n at a real center. Paths are
/// drawn from (model, theta) started from the uniform measure, which is also
/// the scoring initial.
AnalyticityReport analyticity_report(const ModelFamily& model, const ParameterPoint& theta,
                                     const AnalyticityConfig& config);

}  // namespace hmm
