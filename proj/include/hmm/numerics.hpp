#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace hmm {

using Complex = std::complex<double>;

/// Pairwise (cascade) summation in fixed index order. The result depends
/// only on the input values, never on thread scheduling.
double pairwise_sum(std::span<const double> values);
Complex pairwise_sum(std::span<const Complex> values);

struct SampleSummary {
  double mean = 0.0;
  double std_error = 0.0;  // sample standard deviation / sqrt(count)
  std::size_t count = 0;
};

SampleSummary summarize(std::span<const double> values);

/// Ordinary least squares line y = intercept + slope * x.
struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
  double residual = 0.0;  // root mean square of the fit residuals
};

LineFit fit_line(std::span<const double> x, std::span<const double> y);

/// Principal argument wrapped into (-pi, pi].
double wrap_phase(double angle);

}  // namespace hmm
