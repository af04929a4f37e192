#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hmm/measures.hpp"
#include "hmm/models.hpp"

namespace hmm {

struct KernelOptions {
  /// Quantization of a continuous observation box, per axis.
  std::size_t bins_per_dim = 32;
};

/// Joint chain kernel S_eta on Z = Y x X, with the continued density
/// normalized by s_eta(x) so that every row has total mass one. Rows depend
/// only on the x-part of z and are stored once per state.
class JointKernel {
 public:
  JointKernel(ParameterPoint eta, std::shared_ptr<const GridSpace> joint_space,
              std::size_t states, std::vector<Complex> rows, std::vector<Complex> normalizers);

  const GridSpace& space() const { return *space_; }
  const std::shared_ptr<const GridSpace>& space_ptr() const { return space_; }
  const ParameterPoint& parameter() const { return eta_; }
  std::size_t size() const { return space_->size(); }
  std::size_t states() const { return states_; }
  std::size_t symbols() const { return size() / states_; }
  /// z = symbol * states() + state.
  std::size_t state_of(std::size_t z) const { return z % states_; }
  std::size_t symbol_of(std::size_t z) const { return z / states_; }

  /// S(z, {z'}) as a point mass.
  Complex entry(std::size_t z, std::size_t z_next) const {
    return rows_[state_of(z) * size() + z_next];
  }
  std::span<const Complex> row_for_state(std::size_t x) const {
    return {rows_.data() + x * size(), size()};
  }
  /// s_eta(x) before normalization.
  std::span<const Complex> normalizers() const { return normalizers_; }
  /// Full |Z| x |Z| row-major matrix of entry().
  std::vector<Complex> dense() const;

  /// One step zeta -> zeta S.
  GridMeasure apply(const GridMeasure& zeta) const;

 private:
  ParameterPoint eta_;
  std::shared_ptr<const GridSpace> space_;
  std::size_t states_;
  std::vector<Complex> rows_;
  std::vector<Complex> normalizers_;
};

/// Builds S_eta. Continuous observation spaces are quantized into
/// bins_per_dim midpoint bins per axis. Throws ContinuationDomainError if
/// |s_eta(x)| < 1/2 for some x.
JointKernel build_joint_kernel(const ModelFamily& model, const ParameterPoint& eta,
                               const KernelOptions& options = {});

/// The state chain P(x, dx') alone, as a kernel with a single observation
/// symbol.
JointKernel build_state_kernel(const ModelFamily& model, const ParameterPoint& eta);

/// n-fold application; n = 0 returns zeta.
GridMeasure iterate(const JointKernel& kernel, const GridMeasure& zeta, std::size_t n);

struct InvariantReport {
  GridMeasure sigma;
  bool converged = false;
  std::size_t iterations = 0;
  double last_change = 0.0;
  /// sup_z tv(S^n delta_z - sigma) for n = 0..60.
  std::vector<double> sup_tv;
  /// Fitted geometric rate of sup_tv.
  double rate = 0.0;
  bool ergodic = false;
  std::string failure;
};

/// Power iteration from the uniform measure until successive tv change
/// < 1e-12 (at most 1e4 steps), then a log-linear fit of the last 10
/// logged sup_tv values above 1e-10 among n = 1..60. Failure to converge
/// or a rate >= 1 is reported, not thrown.
InvariantReport invariant_distribution(const JointKernel& kernel);

}  // namespace hmm
