#include "hmm/measures.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hmm/errors.hpp"

namespace hmm {

bool Box::contains(std::span<const double> x) const {
  if (x.size() != dim()) return false;
  for (std::size_t k = 0; k < x.size(); ++k)
    if (!(x[k] >= lower[k] && x[k] <= upper[k])) return false;
  return true;
}

double Box::volume() const {
  double v = 1.0;
  for (std::size_t k = 0; k < dim(); ++k) v *= upper[k] - lower[k];
  return v;
}

GridSpace::GridSpace(std::vector<double> points, std::vector<double> weights, Box bounds)
    : points_(std::move(points)), weights_(std::move(weights)), bounds_(std::move(bounds)) {
  if (bounds_.lower.size() != bounds_.upper.size() || bounds_.dim() == 0)
    throw ConfigurationError("grid bounds must have matching nonzero dimension");
  if (points_.size() != weights_.size() * dim())
    throw ConfigurationError("grid points and weights disagree in count");
  if (weights_.empty()) throw ConfigurationError("grid must contain at least one point");
  for (std::size_t i = 0; i < size(); ++i) {
    if (!(weights_[i] > 0.0)) throw ConfigurationError("grid weights must be positive");
    if (!bounds_.contains(point(i))) throw ConfigurationError("grid point outside bounds");
  }
  total_measure_ = pairwise_sum(weights_);
}

std::shared_ptr<const GridSpace> GridSpace::uniform(Box bounds,
                                                    std::vector<std::size_t> cells) {
  const std::size_t d = bounds.dim();
  if (cells.size() != d || bounds.upper.size() != d)
    throw ConfigurationError("grid cell counts must match box dimension");
  std::size_t n = 1;
  double cell_volume = 1.0;
  std::vector<double> step(d);
  for (std::size_t k = 0; k < d; ++k) {
    if (cells[k] == 0) throw ConfigurationError("grid needs at least one cell per axis");
    if (!(bounds.upper[k] > bounds.lower[k]))
      throw ConfigurationError("grid box must have positive extent");
    n *= cells[k];
    step[k] = (bounds.upper[k] - bounds.lower[k]) / static_cast<double>(cells[k]);
    cell_volume *= step[k];
  }
  std::vector<double> points(n * d);
  std::vector<std::size_t> idx(d, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k)
      points[i * d + k] = bounds.lower[k] + (static_cast<double>(idx[k]) + 0.5) * step[k];
    for (std::size_t k = d; k-- > 0;) {
      if (++idx[k] < cells[k]) break;
      idx[k] = 0;
    }
  }
  auto space = std::make_shared<GridSpace>(std::move(points),
                                           std::vector<double>(n, cell_volume),
                                           std::move(bounds));
  space->cells_ = std::move(cells);
  return space;
}

std::shared_ptr<const GridSpace> GridSpace::finite(std::size_t count) {
  if (count == 0) throw ConfigurationError("finite space needs at least one element");
  return uniform(Box{{-0.5}, {static_cast<double>(count) - 0.5}}, {count});
}

std::shared_ptr<const GridSpace> GridSpace::product(const GridSpace& first,
                                                    const GridSpace& second) {
  const std::size_t d1 = first.dim(), d2 = second.dim();
  std::vector<double> points;
  std::vector<double> weights;
  points.reserve(first.size() * second.size() * (d1 + d2));
  weights.reserve(first.size() * second.size());
  for (std::size_t i = 0; i < first.size(); ++i) {
    for (std::size_t j = 0; j < second.size(); ++j) {
      auto a = first.point(i);
      auto b = second.point(j);
      points.insert(points.end(), a.begin(), a.end());
      points.insert(points.end(), b.begin(), b.end());
      weights.push_back(first.weight(i) * second.weight(j));
    }
  }
  Box bounds;
  bounds.lower = first.bounds().lower;
  bounds.upper = first.bounds().upper;
  bounds.lower.insert(bounds.lower.end(), second.bounds().lower.begin(),
                      second.bounds().lower.end());
  bounds.upper.insert(bounds.upper.end(), second.bounds().upper.begin(),
                      second.bounds().upper.end());
  return std::make_shared<GridSpace>(std::move(points), std::move(weights), std::move(bounds));
}

std::size_t GridSpace::nearest(std::span<const double> x) const {
  if (!bounds_.contains(x)) {
    std::ostringstream msg;
    msg << "point (";
    for (std::size_t k = 0; k < x.size(); ++k) msg << (k ? ", " : "") << x[k];
    msg << ") lies outside the state space bounds";
    throw DomainError(msg.str());
  }
  if (is_tensor()) {
    std::size_t flat = 0;
    for (std::size_t k = 0; k < dim(); ++k) {
      const double h = (bounds_.upper[k] - bounds_.lower[k]) / static_cast<double>(cells_[k]);
      const auto top = static_cast<double>(cells_[k] - 1);
      const double u = std::clamp((x[k] - bounds_.lower[k]) / h - 0.5, 0.0, top);
      // Candidates floor(u) and floor(u)+1; compare true distances so exact
      // midpoints between grid points go to the lower index.
      auto j = static_cast<std::size_t>(std::floor(u));
      if (j + 1 < cells_[k]) {
        const double left = bounds_.lower[k] + (static_cast<double>(j) + 0.5) * h;
        const double right = bounds_.lower[k] + (static_cast<double>(j) + 1.5) * h;
        if (std::abs(right - x[k]) < std::abs(x[k] - left)) ++j;
      }
      flat = flat * cells_[k] + j;
    }
    return flat;
  }
  std::size_t best = 0;
  double best_d = INFINITY;
  for (std::size_t i = 0; i < size(); ++i) {
    double d = 0.0;
    auto p = point(i);
    for (std::size_t k = 0; k < dim(); ++k) d += (p[k] - x[k]) * (p[k] - x[k]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

bool operator==(const GridSpace& a, const GridSpace& b) {
  return &a == &b || (a.bounds_ == b.bounds_ && a.points_ == b.points_ &&
                      a.weights_ == b.weights_);
}

GridMeasure::GridMeasure(std::shared_ptr<const GridSpace> space, std::vector<Complex> density)
    : space_(std::move(space)), density_(std::move(density)) {
  if (!space_) throw ConfigurationError("measure needs a space");
  if (density_.size() != space_->size())
    throw SpaceMismatchError("density length does not match the grid");
}

GridMeasure GridMeasure::zero(std::shared_ptr<const GridSpace> space) {
  const std::size_t n = space->size();
  return GridMeasure(std::move(space), std::vector<Complex>(n));
}

GridMeasure GridMeasure::uniform(std::shared_ptr<const GridSpace> space) {
  const std::size_t n = space->size();
  const double d = 1.0 / space->total_measure();
  return GridMeasure(std::move(space), std::vector<Complex>(n, Complex(d, 0.0)));
}

GridMeasure GridMeasure::dirac(std::shared_ptr<const GridSpace> space,
                               std::span<const double> x) {
  const std::size_t i = space->nearest(x);
  std::vector<Complex> density(space->size());
  density[i] = Complex(1.0 / space->weight(i), 0.0);
  return GridMeasure(std::move(space), std::move(density));
}

GridMeasure GridMeasure::from_masses(std::shared_ptr<const GridSpace> space,
                                     std::span<const Complex> masses) {
  if (masses.size() != space->size())
    throw SpaceMismatchError("mass vector length does not match the grid");
  std::vector<Complex> density(masses.size());
  for (std::size_t i = 0; i < masses.size(); ++i) density[i] = masses[i] / space->weight(i);
  return GridMeasure(std::move(space), std::move(density));
}

GridMeasure GridMeasure::from_masses(std::shared_ptr<const GridSpace> space,
                                     std::span<const double> masses) {
  std::vector<Complex> c(masses.begin(), masses.end());
  return from_masses(std::move(space), c);
}

std::vector<Complex> GridMeasure::masses() const {
  std::vector<Complex> m(size());
  for (std::size_t i = 0; i < size(); ++i) m[i] = mass(i);
  return m;
}

Complex GridMeasure::total_mass() const {
  const auto m = masses();
  return pairwise_sum(m);
}

double GridMeasure::tv_norm() const {
  std::vector<double> a(size());
  for (std::size_t i = 0; i < size(); ++i) a[i] = std::abs(density_[i]) * space_->weight(i);
  return pairwise_sum(a);
}

bool GridMeasure::is_probability(double tol) const {
  for (Complex d : density_)
    if (d.imag() != 0.0 || d.real() < 0.0) return false;
  return std::abs(total_mass() - 1.0) <= tol;
}

GridMeasure GridMeasure::scaled(Complex factor) const {
  std::vector<Complex> d(density_);
  for (Complex& v : d) v *= factor;
  return GridMeasure(space_, std::move(d));
}

GridMeasure GridMeasure::operator+(const GridMeasure& other) const {
  if (!(*space_ == *other.space_)) throw SpaceMismatchError("measures live on different grids");
  std::vector<Complex> d(density_);
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += other.density_[i];
  return GridMeasure(space_, std::move(d));
}

GridMeasure GridMeasure::operator-(const GridMeasure& other) const {
  if (!(*space_ == *other.space_)) throw SpaceMismatchError("measures live on different grids");
  std::vector<Complex> d(density_);
  for (std::size_t i = 0; i < d.size(); ++i) d[i] -= other.density_[i];
  return GridMeasure(space_, std::move(d));
}

double tv_norm(const GridMeasure& m) { return m.tv_norm(); }
Complex total_mass(const GridMeasure& m) { return m.total_mass(); }
GridMeasure dirac(std::shared_ptr<const GridSpace> space, std::span<const double> x) {
  return GridMeasure::dirac(std::move(space), x);
}
GridMeasure uniform(std::shared_ptr<const GridSpace> space) {
  return GridMeasure::uniform(std::move(space));
}

}  // namespace hmm
