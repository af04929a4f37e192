#include "hmm/random.hpp"

#include <stdexcept>

namespace hmm {

namespace {

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t master_seed, std::uint64_t index,
                       std::uint64_t purpose) {
  return mix64(mix64(mix64(master_seed) ^ index) ^ (purpose * 0xd1b54a32d192ed03ULL));
}

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t index, StreamPurpose purpose)
    : engine_(mix_seed(master_seed, index, static_cast<std::uint64_t>(purpose))) {}

double RngStream::uniform() { return uniform_(engine_); }

double RngStream::normal() { return normal_(engine_); }

std::size_t RngStream::discrete(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw std::invalid_argument("discrete weights must be nonnegative");
    total += w;
  }
  if (!(total > 0.0)) throw std::invalid_argument("discrete weights sum to zero");
  const double u = uniform() * total;
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] > 0.0) last_positive = i;
    acc += weights[i];
    if (u < acc) return i;
  }
  return last_positive;
}

}  // namespace hmm
