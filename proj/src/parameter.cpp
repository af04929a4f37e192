#include "hmm/parameter.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hmm {

ParameterPoint::ParameterPoint(std::vector<double> re) : coords_(re.size()) {
  for (std::size_t k = 0; k < re.size(); ++k) coords_[k] = Complex(re[k], 0.0);
}

ParameterPoint::ParameterPoint(std::span<const double> re, std::span<const double> im)
    : coords_(re.size()) {
  if (re.size() != im.size())
    throw std::invalid_argument("parameter real and imaginary parts differ in length");
  for (std::size_t k = 0; k < re.size(); ++k) coords_[k] = Complex(re[k], im[k]);
}

ParameterPoint::ParameterPoint(std::vector<Complex> coords) : coords_(std::move(coords)) {}

std::vector<double> ParameterPoint::real_part() const {
  std::vector<double> out(coords_.size());
  for (std::size_t k = 0; k < coords_.size(); ++k) out[k] = coords_[k].real();
  return out;
}

std::vector<double> ParameterPoint::imag_part() const {
  std::vector<double> out(coords_.size());
  for (std::size_t k = 0; k < coords_.size(); ++k) out[k] = coords_[k].imag();
  return out;
}

bool ParameterPoint::is_real() const {
  return std::all_of(coords_.begin(), coords_.end(),
                     [](Complex c) { return c.imag() == 0.0; });
}

double ParameterPoint::max_abs_imag() const {
  double m = 0.0;
  for (Complex c : coords_) m = std::max(m, std::abs(c.imag()));
  return m;
}

ParameterPoint ParameterPoint::shifted(std::size_t k, Complex delta) const {
  ParameterPoint out = *this;
  out.coords_.at(k) += delta;
  return out;
}

ParameterPoint ParameterPoint::moved(Complex scale, std::span<const double> direction) const {
  if (direction.size() != coords_.size())
    throw std::invalid_argument("direction dimension does not match parameter");
  ParameterPoint out = *this;
  for (std::size_t k = 0; k < coords_.size(); ++k) out.coords_[k] += scale * direction[k];
  return out;
}

bool ParameterBox::contains(std::span<const double> theta) const {
  return distance(theta) == 0.0;
}

double ParameterBox::distance(std::span<const double> theta) const {
  if (theta.size() != lower.size())
    throw std::invalid_argument("parameter dimension does not match box");
  double d = 0.0;
  for (std::size_t k = 0; k < theta.size(); ++k) {
    if (theta[k] < lower[k]) d = std::max(d, lower[k] - theta[k]);
    if (theta[k] > upper[k]) d = std::max(d, theta[k] - upper[k]);
  }
  return d;
}

std::vector<double> ParameterBox::center() const {
  std::vector<double> c(lower.size());
  for (std::size_t k = 0; k < c.size(); ++k) c[k] = 0.5 * (lower[k] + upper[k]);
  return c;
}

}  // namespace hmm
