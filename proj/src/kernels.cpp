#include "hmm/kernels.hpp"

#include <algorithm>
#include <cmath>

#include "hmm/errors.hpp"

namespace hmm {

namespace {

constexpr std::size_t logged_steps = 60;
constexpr std::size_t fitted_steps = 10;
constexpr double rate_floor = 1e-10;
constexpr double change_tolerance = 1e-12;
constexpr std::size_t max_power_steps = 10'000;

// emission(y_index, x', out) gives the per-bin mass of y given x'.
template <class EmissionMass>
JointKernel assemble(const ModelFamily& model, const ParameterPoint& eta,
                     std::shared_ptr<const GridSpace> ybins, EmissionMass&& emission_mass) {
  const auto bound = model.bind(eta);
  const GridSpace& xs = *model.state_space();
  const std::size_t n = xs.size();
  const std::size_t m = ybins->size();
  auto zspace = GridSpace::product(*ybins, xs);
  const std::size_t zsize = zspace->size();

  // qm[b * n + x'] = q(y_b | x') nu_b
  std::vector<Complex> qm(m * n);
  std::vector<Complex> col(n);
  for (std::size_t b = 0; b < m; ++b) {
    emission_mass(*bound, b, col);
    std::copy(col.begin(), col.end(), qm.begin() + b * n);
  }

  std::vector<Complex> rows(n * zsize);
  std::vector<Complex> norms(n);
  const auto sn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t xi = 0; xi < sn; ++xi) {
    const auto x = static_cast<std::size_t>(xi);
    std::span<Complex> row(rows.data() + x * zsize, zsize);
    for (std::size_t b = 0; b < m; ++b)
      for (std::size_t to = 0; to < n; ++to)
        row[b * n + to] = qm[b * n + to] * bound->transition(x, to) * xs.weight(to);
    norms[x] = pairwise_sum(std::span<const Complex>(row));
  }
  for (std::size_t x = 0; x < n; ++x) {
    if (std::abs(norms[x]) < 0.5)
      throw ContinuationDomainError("kernel normalizer |s_eta(x)| fell below 1/2");
    for (std::size_t z = 0; z < zsize; ++z) rows[x * zsize + z] /= norms[x];
  }
  return JointKernel(eta, std::move(zspace), n, std::move(rows), std::move(norms));
}

}  // namespace

JointKernel::JointKernel(ParameterPoint eta, std::shared_ptr<const GridSpace> joint_space,
                         std::size_t states, std::vector<Complex> rows,
                         std::vector<Complex> normalizers)
    : eta_(std::move(eta)),
      space_(std::move(joint_space)),
      states_(states),
      rows_(std::move(rows)),
      normalizers_(std::move(normalizers)) {
  if (states_ == 0 || space_->size() % states_ != 0 || rows_.size() != states_ * space_->size())
    throw ConfigurationError("joint kernel dimensions are inconsistent");
}

std::vector<Complex> JointKernel::dense() const {
  std::vector<Complex> d(size() * size());
  for (std::size_t z = 0; z < size(); ++z)
    for (std::size_t w = 0; w < size(); ++w) d[z * size() + w] = entry(z, w);
  return d;
}

GridMeasure JointKernel::apply(const GridMeasure& zeta) const {
  if (!(zeta.space() == *space_)) throw SpaceMismatchError("measure is not on the kernel's Z grid");
  const std::size_t zs = size();
  std::vector<Complex> marginal(states_);
  for (std::size_t z = 0; z < zs; ++z) marginal[state_of(z)] += zeta.mass(z);
  std::vector<Complex> out(zs);
  const auto szs = static_cast<std::ptrdiff_t>(zs);
#pragma omp parallel for schedule(static) if (zs >= 256)
  for (std::ptrdiff_t wi = 0; wi < szs; ++wi) {
    const auto w = static_cast<std::size_t>(wi);
    Complex s(0.0, 0.0);
    for (std::size_t x = 0; x < states_; ++x) s += marginal[x] * rows_[x * zs + w];
    out[w] = s / space_->weight(w);
  }
  return GridMeasure(space_, std::move(out));
}

JointKernel build_joint_kernel(const ModelFamily& model, const ParameterPoint& eta,
                               const KernelOptions& options) {
  const ObservationSpace& obs = model.observation_space();
  if (obs.finite) {
    return assemble(model, eta, obs.grid,
                    [&](const BoundModel& bound, std::size_t b, std::span<Complex> out) {
                      const double y = static_cast<double>(b);
                      bound.emission(std::span<const double>(&y, 1), out);
                    });
  }
  if (options.bins_per_dim == 0) throw ConfigurationError("quantization needs at least one bin");
  const Box& box = obs.grid->bounds();
  auto bins = GridSpace::uniform(box, std::vector<std::size_t>(box.dim(), options.bins_per_dim));
  return assemble(model, eta, bins,
                  [&](const BoundModel& bound, std::size_t b, std::span<Complex> out) {
                    bound.emission(bins->point(b), out);
                    for (Complex& v : out) v *= bins->weight(b);
                  });
}

JointKernel build_state_kernel(const ModelFamily& model, const ParameterPoint& eta) {
  return assemble(model, eta, GridSpace::finite(1),
                  [](const BoundModel&, std::size_t, std::span<Complex> out) {
                    std::fill(out.begin(), out.end(), Complex(1.0, 0.0));
                  });
}

GridMeasure iterate(const JointKernel& kernel, const GridMeasure& zeta, std::size_t n) {
  GridMeasure m = zeta;
  for (std::size_t k = 0; k < n; ++k) m = kernel.apply(m);
  return m;
}

InvariantReport invariant_distribution(const JointKernel& kernel) {
  InvariantReport report{GridMeasure::uniform(kernel.space_ptr()), false, 0, 0.0, {}, 0.0, false, {}};
  GridMeasure current = report.sigma;
  for (std::size_t it = 1; it <= max_power_steps; ++it) {
    GridMeasure next = kernel.apply(current);
    report.last_change = (next - current).tv_norm();
    report.iterations = it;
    current = std::move(next);
    if (report.last_change < change_tolerance) {
      report.converged = true;
      break;
    }
  }
  report.sigma = current;

  // Rows depend on the state only, so the sup over z is a sup over states.
  const std::size_t states = kernel.states();
  std::vector<std::vector<double>> per_state(states, std::vector<double>(logged_steps + 1));
  const auto ss = static_cast<std::ptrdiff_t>(states);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t xi = 0; xi < ss; ++xi) {
    const auto x = static_cast<std::size_t>(xi);
    std::vector<Complex> mass(kernel.size());
    mass[x] = Complex(1.0, 0.0);
    GridMeasure m = GridMeasure::from_masses(kernel.space_ptr(), mass);
    per_state[x][0] = (m - report.sigma).tv_norm();
    for (std::size_t n = 1; n <= logged_steps; ++n) {
      m = kernel.apply(m);
      per_state[x][n] = (m - report.sigma).tv_norm();
    }
  }
  report.sup_tv.assign(logged_steps + 1, 0.0);
  for (const auto& v : per_state)
    for (std::size_t n = 0; n <= logged_steps; ++n)
      report.sup_tv[n] = std::max(report.sup_tv[n], v[n]);

  std::vector<double> ns, logs;
  for (std::size_t n = 1; n <= logged_steps; ++n) {
    if (report.sup_tv[n] > rate_floor) {
      ns.push_back(static_cast<double>(n));
      logs.push_back(std::log(report.sup_tv[n]));
    }
  }
  if (ns.size() > fitted_steps) {
    ns.erase(ns.begin(), ns.end() - fitted_steps);
    logs.erase(logs.begin(), logs.end() - fitted_steps);
  }
  if (ns.size() >= 2) {
    report.rate = std::exp(fit_line(ns, logs).slope);
  } else if (ns.size() == 1) {
    report.rate = std::pow(report.sup_tv[static_cast<std::size_t>(ns[0])] / report.sup_tv[0],
                           1.0 / ns[0]);
  } else {
    report.rate = 0.0;
  }

  if (!report.converged) {
    report.failure = "power iteration did not converge within 1e4 steps";
  } else if (!(report.rate < 1.0 - 1e-9)) {
    report.failure = "no geometric decay towards the invariant measure";
  }
  report.ergodic = report.failure.empty();
  return report;
}

}  // namespace hmm
