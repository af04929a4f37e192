// Serial reference routes against the OpenMP kernels on the same inputs.
#include <omp.h>

#include <chrono>
#include <cstdio>
#include <memory>
#include <vector>

#include "hmm/filter.hpp"
#include "hmm/kernels.hpp"
#include "hmm/models.hpp"
#include "hmm/rates.hpp"
#include "hmm/reference.hpp"

namespace {

using clock_type = std::chrono::steady_clock;

template <class F>
double seconds(F&& f, int repeats) {
  const auto start = clock_type::now();
  for (int r = 0; r < repeats; ++r) f();
  return std::chrono::duration<double>(clock_type::now() - start).count() / repeats;
}

std::unique_ptr<hmm::MixtureModel> mixture(std::size_t cells) {
  hmm::MixtureModel::Spec s;
  s.box = {{-1.0}, {1.0}};
  s.delta = 0.2;
  s.state_box = {{0.0}, {1.0}};
  s.state_cells = {cells};
  s.observation_box = {{-3.0}, {4.0}};
  s.observation_cells = {64};
  s.state_components = {{{0.25}, {0.2}}, {{0.75}, {0.2}}};
  s.state_weights = {{0.0, 0.0}, {{0.5}, {-0.5}}, {{-1.0}, {1.0}}};
  s.observation_components = {{{0.0}, {1.0}}, {{1.5}, {1.0}}};
  s.observation_weights = {{0.0, 0.0}, {{0.0}, {0.5}}, {{-1.5}, {1.5}}};
  return std::make_unique<hmm::MixtureModel>(std::move(s));
}

}  // namespace

int main() {
  std::printf("threads available: %d\n", omp_get_max_threads());
  std::printf("%-28s %8s %14s %14s %9s\n", "routine", "size", "serial [s]", "parallel [s]", "speedup");

  for (std::size_t cells : {64, 256, 512}) {
    const auto model = mixture(cells);
    const hmm::ParameterPoint theta(std::vector<double>{0.1});
    const auto bound = model->bind(theta);
    const auto xi = hmm::GridMeasure::uniform(model->state_space());
    const double y[] = {0.7};
    const int reps = cells >= 512 ? 5 : 20;
    const double serial =
        seconds([&] { (void)hmm::reference::update_unnormalized(*model, theta, xi, y); }, reps);
    const double parallel = seconds([&] { (void)hmm::update_unnormalized(*bound, xi, y); }, reps);
    std::printf("%-28s %8zu %14.6f %14.6f %9.2f\n", "filter update", cells, serial, parallel,
                serial / parallel);
  }

  for (std::size_t cells : {32, 64}) {
    const auto model = mixture(cells);
    const hmm::ParameterPoint theta(std::vector<double>{0.1});
    const auto kernel = hmm::build_joint_kernel(*model, theta, {16});
    const auto dense = kernel.dense();
    const auto zeta = hmm::GridMeasure::uniform(kernel.space_ptr());
    const auto masses = zeta.masses();
    const double serial = seconds([&] { (void)hmm::reference::apply_dense(dense, masses); }, 10);
    const double parallel = seconds([&] { (void)kernel.apply(zeta); }, 10);
    std::printf("%-28s %8zu %14.6f %14.6f %9.2f\n", "joint kernel step", kernel.size(), serial,
                parallel, serial / parallel);
  }

  {
    const auto model = mixture(48);
    const hmm::ParameterPoint theta(std::vector<double>{0.1});
    const auto lambda = hmm::GridMeasure::uniform(model->state_space());
    const std::size_t horizons[] = {32};
    const int max_threads = omp_get_max_threads();
    omp_set_num_threads(1);
    const double serial = seconds(
        [&] { (void)hmm::estimate_entropy(*model, theta, lambda, horizons, {200, 1}); }, 1);
    omp_set_num_threads(max_threads);
    const double parallel = seconds(
        [&] { (void)hmm::estimate_entropy(*model, theta, lambda, horizons, {200, 1}); }, 1);
    std::printf("%-28s %8d %14.6f %14.6f %9.2f\n", "entropy estimate (200 traj)", 48, serial,
                parallel, serial / parallel);
  }
  return 0;
}
