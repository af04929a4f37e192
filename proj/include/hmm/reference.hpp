#pragma once

#include <span>
#include <vector>

#include "hmm/measures.hpp"
#include "hmm/models.hpp"

/// Serial implementations written straight from the pointwise densities.
/// They share no code with the grid kernels and exist to test them.
namespace hmm::reference {

GridMeasure update_unnormalized(const ModelFamily& model, const ParameterPoint& eta,
                                const GridMeasure& xi, std::span<const double> y);

/// Sum of step-normalized log-normalizers along ys, serial.
Complex path_log_likelihood(const ModelFamily& model, const ParameterPoint& eta,
                            const GridMeasure& initial, const ObservationPath& ys);

/// One step of a dense row-major kernel on point masses: out[j] =
/// sum_i masses[i] * kernel[i * n + j].
std::vector<Complex> apply_dense(std::span<const Complex> kernel,
                                 std::span<const Complex> masses);

}  // namespace hmm::reference
