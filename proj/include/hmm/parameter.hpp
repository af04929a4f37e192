#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "hmm/numerics.hpp"

namespace hmm {

/// A model parameter, real (theta) or complex (eta). The real case is the
/// one with every imaginary coordinate exactly zero.
class ParameterPoint {
 public:
  ParameterPoint() = default;
  explicit ParameterPoint(std::vector<double> re);
  ParameterPoint(std::span<const double> re, std::span<const double> im);
  explicit ParameterPoint(std::vector<Complex> coords);

  std::size_t size() const { return coords_.size(); }
  Complex operator[](std::size_t k) const { return coords_[k]; }
  std::span<const Complex> coords() const { return coords_; }

  std::vector<double> real_part() const;
  std::vector<double> imag_part() const;
  bool is_real() const;
  double max_abs_imag() const;

  /// Copy with coordinate k displaced by delta.
  ParameterPoint shifted(std::size_t k, Complex delta) const;
  /// Copy displaced by scale * direction.
  ParameterPoint moved(Complex scale, std::span<const double> direction) const;

  friend bool operator==(const ParameterPoint&, const ParameterPoint&) = default;

 private:
  std::vector<Complex> coords_;
};

/// Axis-aligned box of admissible real parameters (the set Theta).
struct ParameterBox {
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t size() const { return lower.size(); }
  bool contains(std::span<const double> theta) const;
  /// Sup-norm distance from a real point to the box (0 inside).
  double distance(std::span<const double> theta) const;
  std::vector<double> center() const;
};

}  // namespace hmm
