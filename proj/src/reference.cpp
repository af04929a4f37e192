#include "hmm/reference.hpp"

#include <cmath>

#include "hmm/errors.hpp"

namespace hmm::reference {

GridMeasure update_unnormalized(const ModelFamily& model, const ParameterPoint& eta,
                                const GridMeasure& xi, std::span<const double> y) {
  const GridSpace& space = xi.space();
  std::vector<Complex> out(space.size());
  for (std::size_t to = 0; to < space.size(); ++to) {
    Complex s(0.0, 0.0);
    for (std::size_t from = 0; from < space.size(); ++from)
      s += model.joint_density(eta, y, space.point(to), space.point(from)) * xi.density()[from] *
           space.weight(from);
    out[to] = s;
  }
  return GridMeasure(xi.space_ptr(), std::move(out));
}

Complex path_log_likelihood(const ModelFamily& model, const ParameterPoint& eta,
                            const GridMeasure& initial, const ObservationPath& ys) {
  GridMeasure xi = initial;
  Complex sum(0.0, 0.0);
  for (std::size_t k = 0; k < ys.size(); ++k) {
    const GridMeasure r = update_unnormalized(model, eta, xi, ys[k]);
    const Complex total = r.total_mass();
    if (std::abs(total) < 1e-300) throw UnderflowError("reference filter underflow");
    sum += std::log(total);
    xi = r.scaled(1.0 / total);
  }
  return sum;
}

std::vector<Complex> apply_dense(std::span<const Complex> kernel,
                                 std::span<const Complex> masses) {
  const std::size_t n = masses.size();
  if (kernel.size() % n != 0) throw SpaceMismatchError("kernel and measure sizes disagree");
  const std::size_t m = kernel.size() / n;
  std::vector<Complex> out(m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out[j] += masses[i] * kernel[i * m + j];
  return out;
}

}  // namespace hmm::reference
