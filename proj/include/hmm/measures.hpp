#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "hmm/numerics.hpp"

namespace hmm {

/// Axis-aligned box in R^d.
struct Box {
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t dim() const { return lower.size(); }
  bool contains(std::span<const double> x) const;
  double volume() const;
  friend bool operator==(const Box&, const Box&) = default;
};

/// Discretized compact state space: grid points with positive quadrature
/// weights (cell volumes of the reference measure).
class GridSpace {
 public:
  /// Tensor-product midpoint grid with `cells[k]` cells along axis k. Points
  /// are ordered lexicographically with the last axis fastest.
  static std::shared_ptr<const GridSpace> uniform(Box bounds,
                                                  std::vector<std::size_t> cells);
  /// Finite set {0, ..., count-1} with counting measure: one unit cell per
  /// state on [-0.5, count - 0.5].
  static std::shared_ptr<const GridSpace> finite(std::size_t count);
  /// Z = first x second, points concatenated (first coordinates leading),
  /// index = i_first * second.size() + i_second, weights multiplied.
  static std::shared_ptr<const GridSpace> product(const GridSpace& first,
                                                  const GridSpace& second);

  /// General grid; `points` is row-major size() x dim.
  GridSpace(std::vector<double> points, std::vector<double> weights, Box bounds);

  std::size_t size() const { return weights_.size(); }
  std::size_t dim() const { return bounds_.dim(); }
  std::span<const double> point(std::size_t i) const {
    return {points_.data() + i * dim(), dim()};
  }
  double weight(std::size_t i) const { return weights_[i]; }
  std::span<const double> weights() const { return weights_; }
  const Box& bounds() const { return bounds_; }
  double total_measure() const { return total_measure_; }
  bool is_tensor() const { return !cells_.empty(); }
  std::span<const std::size_t> cells() const { return cells_; }

  /// Index of the grid point nearest to x; ties go to the lower index.
  /// Throws DomainError when x is outside the bounds.
  std::size_t nearest(std::span<const double> x) const;

  friend bool operator==(const GridSpace& a, const GridSpace& b);

 private:
  std::vector<double> points_;
  std::vector<double> weights_;
  Box bounds_;
  std::vector<std::size_t> cells_;
  double total_measure_ = 0.0;
};

/// Complex measure on a grid, stored as a density against the grid weights.
/// Immutable once built.
class GridMeasure {
 public:
  GridMeasure(std::shared_ptr<const GridSpace> space, std::vector<Complex> density);

  static GridMeasure zero(std::shared_ptr<const GridSpace> space);
  static GridMeasure uniform(std::shared_ptr<const GridSpace> space);
  static GridMeasure dirac(std::shared_ptr<const GridSpace> space,
                           std::span<const double> x);
  /// Measure with the given point masses (mass_i = density_i * w_i).
  static GridMeasure from_masses(std::shared_ptr<const GridSpace> space,
                                 std::span<const Complex> masses);
  static GridMeasure from_masses(std::shared_ptr<const GridSpace> space,
                                 std::span<const double> masses);

  const GridSpace& space() const { return *space_; }
  const std::shared_ptr<const GridSpace>& space_ptr() const { return space_; }
  std::size_t size() const { return density_.size(); }
  std::span<const Complex> density() const { return density_; }
  Complex mass(std::size_t i) const { return density_[i] * space_->weight(i); }
  std::vector<Complex> masses() const;

  Complex total_mass() const;
  double tv_norm() const;
  /// Real, nonnegative, total mass 1 within tol.
  bool is_probability(double tol = 1e-10) const;

  GridMeasure scaled(Complex factor) const;
  GridMeasure operator+(const GridMeasure& other) const;
  GridMeasure operator-(const GridMeasure& other) const;

 private:
  std::shared_ptr<const GridSpace> space_;
  std::vector<Complex> density_;
};

double tv_norm(const GridMeasure& m);
Complex total_mass(const GridMeasure& m);
GridMeasure dirac(std::shared_ptr<const GridSpace> space, std::span<const double> x);
GridMeasure uniform(std::shared_ptr<const GridSpace> space);

}  // namespace hmm
