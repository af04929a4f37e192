#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace hmm {

/// Purpose tags keep independent uses of one master seed apart.
enum class StreamPurpose : std::uint64_t {
  trajectory = 1,
  paired_trajectory = 2,
  parameter_samples = 3,
  observation_paths = 4,
  initial_perturbation = 5,
};

/// Random stream for one trajectory, derived from (master seed, index,
/// purpose) by a counter-based mix, so the draws of trajectory i never
/// depend on which thread runs it or in what order.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t index,
            StreamPurpose purpose = StreamPurpose::trajectory);

  double uniform();
  double normal();
  /// Index drawn from nonnegative weights (need not be normalized).
  std::size_t discrete(std::span<const double> weights);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

std::uint64_t mix_seed(std::uint64_t master_seed, std::uint64_t index,
                       std::uint64_t purpose);

}  // namespace hmm
