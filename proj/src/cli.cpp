#include "hmm/cli.hpp"

#include <omp.h>

#include <CLI11.hpp>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <json.hpp>
#include <numbers>
#include <optional>
#include <sstream>

#include "hmm/analytic.hpp"
#include "hmm/config.hpp"
#include "hmm/errors.hpp"
#include "hmm/filter.hpp"
#include "hmm/kernels.hpp"
#include "hmm/rates.hpp"
#include "hmm/verify.hpp"

namespace hmm::cli {

namespace {

using nlohmann::json;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt(std::size_t v) { return std::to_string(v); }

std::string hex(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%016" PRIx64, v);
  return buf;
}

class Table {
 public:
  void meta(const std::string& key, const std::string& value) {
    meta_ += "# " + key + ": " + value + "\n";
  }
  void meta(const std::string& key, double value) { meta(key, fmt(value)); }
  void columns(const std::vector<std::string>& names) { header_ = join(names) + "\n"; }
  void row(const std::vector<std::string>& cells) { body_ += join(cells) + "\n"; }
  std::string str() const { return meta_ + header_ + body_; }

 private:
  static std::string join(const std::vector<std::string>& cells) {
    std::string s;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) s += ',';
      s += cells[i];
    }
    return s;
  }
  std::string meta_;
  std::string header_;
  std::string body_;
};

struct Options {
  std::string config;
  std::string out;
  std::string report;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  double tolerance_scale = 1.0;
};

struct Context {
  std::string command;
  Options options;
  std::optional<ExperimentConfig> config;
  std::uint64_t seed = 0;
  Table table;
  json report = json::object();
  std::vector<std::string> failures;

  const ExperimentConfig& cfg() const { return *config; }
  MonteCarloOptions monte_carlo() const { return {cfg().num_traj, seed, StreamPurpose::trajectory}; }
};

std::string status(bool passed) { return passed ? "PASSED" : "FAILED"; }

json complex_json(Complex z) { return json::array({z.real(), z.imag()}); }

void add_estimate_rows(Table& t, const std::vector<RateEstimate>& estimates) {
  t.columns({"n", "value", "stderr", "num_traj"});
  for (const auto& e : estimates)
    t.row({fmt(e.n), fmt(e.value.real()), fmt(e.std_error), fmt(e.num_traj)});
}

void meta_extrapolation(Table& t, json& report, const std::string& prefix,
                        std::span<const RateEstimate> estimates) {
  if (estimates.size() < 3) return;
  const Extrapolation x = extrapolate(estimates);
  t.meta(prefix + "limit", x.limit);
  t.meta(prefix + "c", x.c);
  t.meta(prefix + "residual", x.residual);
  report[prefix + "extrapolation"] = {{"limit", x.limit}, {"c", x.c}, {"residual", x.residual}};
}

// --- simulate ---------------------------------------------------------------

void cmd_simulate(Context& ctx) {
  const auto& c = ctx.cfg();
  const auto sec = c.section("simulate");
  const std::size_t n = sec.count_or("n", c.horizons.back());
  const auto bound = c.model->bind(c.theta);
  RngStream rng(ctx.seed, 0, StreamPurpose::trajectory);
  const SimulatedPath path = simulate(*bound, c.initial, n, rng, true);

  const std::size_t dx = c.model->state_space()->dim();
  const std::size_t dy = c.model->observation_space().dim();
  std::vector<std::string> names{"k"};
  for (std::size_t i = 0; i < dx; ++i) names.push_back("x" + std::to_string(i + 1));
  for (std::size_t i = 0; i < dy; ++i) names.push_back("y" + std::to_string(i + 1));
  ctx.table.columns(names);
  for (std::size_t k = 0; k <= n; ++k) {
    std::vector<std::string> row{fmt(k)};
    for (double v : path.states[k]) row.push_back(fmt(v));
    for (std::size_t i = 0; i < dy; ++i)
      row.push_back(k == 0 ? std::string() : fmt(path.observations[k - 1][i]));
    ctx.table.row(row);
  }
  ctx.report["steps"] = n;
}

// --- filter -----------------------------------------------------------------

ObservationPath read_observations(const ConfigNode& node, std::size_t dim) {
  ObservationPath path(dim);
  for (std::size_t k = 0; k < node.size(); ++k) {
    const ConfigNode item = node.at(k);
    std::vector<double> y;
    if (item.is_array()) y = item.numbers();
    else y.push_back(item.number());
    if (y.size() != dim) item.fail("observation has the wrong dimension");
    path.push_back(y);
  }
  return path;
}

void cmd_filter(Context& ctx) {
  const auto& c = ctx.cfg();
  const auto sec = c.section("filter");
  const ParameterPoint eta = build_eta(sec, c.theta);
  const std::size_t dy = c.model->observation_space().dim();
  ObservationPath ys(dy);
  if (auto obs = sec.find("observations")) {
    ys = read_observations(*obs, dy);
  } else {
    const DataSource source{c.model.get(), c.theta, c.initial};
    ys = sample_paths(source, sec.count_or("n", c.horizons.back()), 1, ctx.seed).front();
  }
  const auto bound = c.model->bind(eta);
  PathFilter filter(*bound, c.initial);

  std::vector<std::string> names{"n"};
  for (std::size_t i = 0; i < dy; ++i) names.push_back("y" + std::to_string(i + 1));
  for (const char* s : {"phi_re", "phi_im", "loglik_re", "loglik_im", "right_half_plane"})
    names.emplace_back(s);
  ctx.table.columns(names);
  for (std::size_t k = 0; k < ys.size(); ++k) {
    const Complex phi = filter.step(ys[k]);
    std::vector<std::string> row{fmt(k + 1)};
    for (double v : ys[k]) row.push_back(fmt(v));
    row.push_back(fmt(phi.real()));
    row.push_back(fmt(phi.imag()));
    row.push_back(fmt(filter.log_normalizer_sum().real()));
    row.push_back(fmt(filter.log_normalizer_sum().imag()));
    row.push_back(filter.normalizer_in_right_half_plane() ? "1" : "0");
    ctx.table.row(row);
  }
  ctx.report["log_likelihood"] = complex_json(filter.log_normalizer_sum());
}

// --- entropy ----------------------------------------------------------------

void cmd_entropy(Context& ctx) {
  const auto& c = ctx.cfg();
  const auto sec = c.section("entropy");
  const auto estimates = estimate_entropy(*c.model, c.theta, c.initial, c.horizons, ctx.monte_carlo());
  meta_extrapolation(ctx.table, ctx.report, "", estimates);
  if (sec.has("exact") && sec.at("exact").boolean()) {
    const auto* finite = dynamic_cast<const FiniteModel*>(c.model.get());
    if (!finite) sec.at("exact").fail("exact enumeration needs a finite model");
    for (std::size_t n : c.horizons) {
      try {
        const double h = exact_entropy(*finite, c.theta, c.initial, n);
        ctx.table.meta("exact_entropy_n" + fmt(n), h);
        ctx.report["exact"][fmt(n)] = h;
      } catch (const BudgetError&) {
        ctx.table.meta("exact_entropy_n" + fmt(n), "over budget");
      }
    }
  }
  add_estimate_rows(ctx.table, estimates);
  for (const auto& e : estimates)
    ctx.report["estimates"].push_back({{"n", e.n}, {"value", e.value.real()}, {"stderr", e.std_error}});
}

// --- loglik -----------------------------------------------------------------

void cmd_loglik(Context& ctx) {
  const auto& c = ctx.cfg();
  const auto sec = c.section("loglik");
  std::unique_ptr<ModelFamily> truth_model;
  const ModelFamily* truth_family = c.model.get();
  ParameterPoint truth_theta = c.theta;
  GridMeasure truth_initial = c.initial;
  if (auto truth = sec.find("truth")) {
    if (truth->has("model")) {
      truth_model = build_model(truth->at("model"));
      truth_family = truth_model.get();
      const auto& a = truth_family->observation_space();
      const auto& b = c.model->observation_space();
      if (a.finite != b.finite || a.dim() != b.dim() || (a.finite && a.symbols() != b.symbols()))
        truth->at("model").fail("observation space differs from the scored model");
    }
    truth_theta = truth->has("theta") ? build_theta(truth->at("theta"), *truth_family)
                                      : ParameterPoint(truth_family->parameter_box().center());
    if (!truth->has("theta") && !truth_model) truth_theta = c.theta;
    truth_initial = truth->has("initial") ? build_initial(truth->at("initial"), *truth_family)
                                          : GridMeasure::uniform(truth_family->state_space());
  }
  const ParameterPoint eta = build_eta(sec, c.theta);
  std::vector<GridMeasure> initials{c.initial};
  if (auto other = sec.find("compare_initial")) initials.push_back(build_initial(*other, *c.model));

  const DataSource truth{truth_family, truth_theta, truth_initial};
  const auto scores = score_initials(truth, *c.model, eta, initials, c.horizons, ctx.monte_carlo());
  const auto& first = scores.estimates[0];
  meta_extrapolation(ctx.table, ctx.report, "", first);

  std::vector<std::string> names{"n", "value_re", "value_im", "stderr", "num_traj"};
  if (initials.size() > 1) {
    for (const char* s : {"second_re", "second_im", "second_stderr", "difference", "difference_stderr"})
      names.emplace_back(s);
    meta_extrapolation(ctx.table, ctx.report, "second_", scores.estimates[1]);
    std::vector<double> diff;
    for (const auto& d : scores.mean_difference[1]) diff.push_back(std::abs(d));
    const double exponent = decay_exponent(c.horizons, diff);
    ctx.table.meta("difference_decay_exponent", exponent);
    ctx.report["difference_decay_exponent"] = exponent;
  }
  ctx.table.columns(names);
  for (std::size_t h = 0; h < c.horizons.size(); ++h) {
    const auto& e = first[h];
    std::vector<std::string> row{fmt(e.n), fmt(e.value.real()), fmt(e.value.imag()),
                                 fmt(e.std_error), fmt(e.num_traj)};
    if (initials.size() > 1) {
      const auto& s = scores.estimates[1][h];
      row.push_back(fmt(s.value.real()));
      row.push_back(fmt(s.value.imag()));
      row.push_back(fmt(s.std_error));
      row.push_back(fmt(std::abs(scores.mean_difference[1][h])));
      row.push_back(fmt(scores.difference_std_error[1][h]));
    }
    ctx.table.row(row);
    ctx.report["estimates"].push_back(
        {{"n", e.n}, {"value", complex_json(e.value)}, {"stderr", e.std_error}});
  }
}

// --- forgetting -------------------------------------------------------------

void cmd_forgetting(Context& ctx) {
  const auto& c = ctx.cfg();
  const auto sec = c.section("forgetting");
  ForgettingConfig fc;
  fc.num_paths = sec.count_or("num_paths", fc.num_paths);
  fc.n_max = sec.count_or("n_max", fc.n_max);
  fc.seed = ctx.seed;
  fc.complex_perturbation = sec.number_or("complex_perturbation", 0.0);
  fc.epsilon_star = sec.number_or("epsilon_star", 0.0);
  fc.slack = sec.number_or("slack", fc.slack) * ctx.options.tolerance_scale;
  if (fc.complex_perturbation < 0.0) sec.at("complex_perturbation").fail("must be nonnegative");
  const ParameterPoint eta = build_eta(sec, c.theta);
  const ForgettingReport r = forgetting_experiment(*c.model, eta, fc);

  const bool passed = r.within_benchmark && r.monotone;
  if (!r.within_benchmark) ctx.failures.push_back("mean rate above the mixing benchmark");
  if (!r.monotone) ctx.failures.push_back("distance increased by more than 10%");
  ctx.table.meta("status", status(passed));
  ctx.table.meta("epsilon_star", r.epsilon_star);
  ctx.table.meta("benchmark", r.benchmark);
  ctx.table.meta("mean_rate", r.mean_rate);
  ctx.table.meta("worst_rate", r.worst_rate);
  ctx.table.meta("fitted_runs", fmt(r.fitted_runs));
  ctx.table.meta("immediate_runs", fmt(r.immediate_runs));
  ctx.table.meta("max_relative_increase", r.max_relative_increase);
  ctx.table.meta("final_distance", r.final_distance);
  ctx.table.columns({"n", "mean_distance"});
  for (std::size_t n = 0; n < r.mean_distance.size(); ++n)
    ctx.table.row({fmt(n), fmt(r.mean_distance[n])});
  ctx.report["status"] = status(passed);
  ctx.report["mean_rate"] = r.mean_rate;
  ctx.report["worst_rate"] = r.worst_rate;
  ctx.report["benchmark"] = r.benchmark;
  ctx.report["forgotten_immediately"] = r.forgotten_immediately;
  ctx.report["monotone"] = r.monotone;
}

// --- ergodicity -------------------------------------------------------------

void cmd_ergodicity(Context& ctx) {
  const auto& c = ctx.cfg();
  const auto sec = c.section("ergodicity");
  KernelOptions ko;
  ko.bins_per_dim = sec.count_or("bins_per_dim", ko.bins_per_dim);
  const ParameterPoint eta = build_eta(sec, c.theta);
  const JointKernel kernel = build_joint_kernel(*c.model, eta, ko);
  const InvariantReport inv = invariant_distribution(kernel);
  const AssumptionReport state = check_true_model_ergodicity(*c.model, c.theta);

  const bool passed = inv.ergodic && state.pass;
  if (!inv.ergodic) ctx.failures.push_back("joint kernel: " + inv.failure);
  if (!state.pass) ctx.failures.push_back("state chain: " + state.note);
  const Complex mass = inv.sigma.total_mass();
  ctx.table.meta("status", status(passed));
  ctx.table.meta("joint_rate", inv.rate);
  ctx.table.meta("joint_converged", inv.converged ? "true" : "false");
  ctx.table.meta("joint_iterations", fmt(inv.iterations));
  ctx.table.meta("joint_invariant_mass_re", mass.real());
  ctx.table.meta("joint_invariant_mass_im", mass.imag());
  ctx.table.meta("state_rho", state.constant("rho"));
  ctx.table.meta("state_K", state.constant("K"));
  ctx.table.columns({"n", "joint_sup_tv"});
  for (std::size_t n = 0; n < inv.sup_tv.size(); ++n) ctx.table.row({fmt(n), fmt(inv.sup_tv[n])});
  ctx.report["status"] = status(passed);
  ctx.report["joint_rate"] = inv.rate;
  ctx.report["state_rho"] = state.constant("rho");
  ctx.report["state_K"] = state.constant("K");
}

// --- analyticity ------------------------------------------------------------

void cmd_analyticity(Context& ctx) {
  const auto& c = ctx.cfg();
  const auto sec = c.section("analyticity");
  AnalyticityConfig ac;
  if (sec.has("horizons")) ac.horizons = build_horizons(sec.at("horizons"));
  ac.num_paths = sec.count_or("num_paths", ac.num_paths);
  ac.radius = sec.number_or("radius", 0.0);
  ac.order = sec.count_or("order", ac.order);
  if (sec.has("direction")) ac.direction = sec.at("direction").numbers();
  ac.seed = ctx.seed;
  ac.tolerance_scale = ctx.options.tolerance_scale;
  const AnalyticityReport r = analyticity_report(*c.model, c.theta, ac);

  for (const auto& f : r.failed_checks) ctx.failures.push_back("failed check: " + f);
  std::string failed;
  for (const auto& f : r.failed_checks) failed += (failed.empty() ? "" : " ") + f;
  ctx.table.meta("status", status(r.passed));
  ctx.table.meta("failed_checks", failed.empty() ? "none" : failed);
  ctx.table.meta("horizon", fmt(r.horizon));
  ctx.table.meta("f_center", r.f_center);
  ctx.table.meta("gradient_error", r.gradient_error);
  ctx.table.meta("cauchy_riemann", r.cauchy_riemann);
  ctx.table.meta("taylor_error", r.taylor_error);
  ctx.table.meta("node_agreement", r.node_agreement);
  ctx.table.meta("center_error", r.center_error);
  ctx.table.meta("coefficient_imag", r.coefficient_imag);
  ctx.table.meta("c1_gradient_error", r.c1_gradient_error);
  for (std::size_t h = 0; h < r.c1_by_horizon.size(); ++h)
    ctx.table.meta("c1_n" + fmt(ac.horizons[h]), r.c1_by_horizon[h].real());
  ctx.table.columns({"k", "coefficient_re", "coefficient_im"});
  for (std::size_t k = 0; k < r.coefficients.size(); ++k)
    ctx.table.row({fmt(k), fmt(r.coefficients[k].real()), fmt(r.coefficients[k].imag())});
  ctx.report["status"] = status(r.passed);
  ctx.report["failed_checks"] = r.failed_checks;
  ctx.report["gradient_error"] = r.gradient_error;
  ctx.report["cauchy_riemann"] = r.cauchy_riemann;
  ctx.report["taylor_error"] = r.taylor_error;
  ctx.report["node_agreement"] = r.node_agreement;
  ctx.report["center_error"] = r.center_error;
  ctx.report["complex_step_gradient"] = r.complex_step_gradient;
  ctx.report["difference_gradient"] = r.difference_gradient;
}

// --- check ------------------------------------------------------------------

void cmd_check(Context& ctx) {
  const auto& c = ctx.cfg();
  const auto sec = c.section("check");
  const auto thetas = parameter_grid(c.model->parameter_box(), sec.count_or("grid_per_axis", 3));
  std::vector<AssumptionReport> reports{check_mixing(*c.model, thetas),
                                        check_density_ratio(*c.model, thetas),
                                        check_integrability(*c.model),
                                        check_true_model_ergodicity(*c.model, c.theta)};
  ctx.table.columns({"assumption", "pass", "quantity", "value"});
  bool passed = true;
  for (const auto& r : reports) {
    passed = passed && r.pass;
    if (!r.pass) ctx.failures.push_back(r.assumption + (r.note.empty() ? "" : ": " + r.note));
    for (const auto& v : r.constants) ctx.table.row({r.assumption, r.pass ? "1" : "0", v.name, fmt(v.value)});
    for (const auto& v : r.evidence) ctx.table.row({r.assumption, r.pass ? "1" : "0", v.name, fmt(v.value)});
    json entry{{"pass", r.pass}, {"note", r.note}};
    for (const auto& v : r.constants) entry["constants"][v.name] = v.value;
    ctx.report["assumptions"][r.assumption] = entry;
  }
  if (auto conv = sec.find("convergence")) {
    const auto horizons = build_horizons(conv->at("horizons"));
    MonteCarloOptions mc = ctx.monte_carlo();
    mc.num_traj = conv->count_or("num_traj", mc.num_traj);
    const ConvergenceReport r = rate_convergence_experiment(*c.model, c.theta, horizons, mc);
    const bool ok = r.inconclusive || (r.slope >= -1.3 && r.slope <= -0.7);
    passed = passed && ok;
    if (!ok) ctx.failures.push_back("convergence slope outside [-1.3, -0.7]");
    ctx.table.row({"convergence", ok ? "1" : "0", "slope", fmt(r.slope)});
    ctx.table.row({"convergence", ok ? "1" : "0", "inconclusive", r.inconclusive ? "1" : "0"});
    for (std::size_t i = 0; i < r.fitted_horizons.size(); ++i)
      ctx.table.row({"convergence", ok ? "1" : "0", "gap_n" + fmt(r.fitted_horizons[i]), fmt(r.gaps[i])});
    ctx.report["convergence"] = {{"slope", r.slope}, {"inconclusive", r.inconclusive}};
  }
  ctx.table.meta("status", status(passed));
  ctx.report["status"] = status(passed);
}

// --- selftest ---------------------------------------------------------------

struct CaseResult {
  bool pass = false;
  double value = 0.0;
};

struct SelfTestCase {
  const char* name;
  std::function<CaseResult(double tol, std::uint64_t seed)> run;
};

std::unique_ptr<FiniteModel> small_model(std::vector<double> p, std::vector<double> q,
                                         std::size_t states, std::size_t symbols) {
  return std::make_unique<FiniteModel>(
      ParameterBox{{-1.0}, {1.0}}, 0.5, LogitTable::from_probabilities(states, states, p, 1),
      LogitTable::from_probabilities(states, symbols, q, 1));
}

std::unique_ptr<FiniteModel> iid_uniform() {
  return small_model({0.5, 0.5, 0.5, 0.5}, {0.5, 0.5, 0.5, 0.5}, 2, 2);
}

std::unique_ptr<FiniteModel> sticky() {
  return small_model({0.9, 0.1, 0.2, 0.8}, {0.9, 0.1, 0.2, 0.8}, 2, 2);
}

CaseResult near(double value, double expected, double tol) {
  return {std::abs(value - expected) <= tol, value};
}

const ParameterPoint origin{std::vector<double>{0.0}};

std::vector<SelfTestCase> selftest_cases() {
  std::vector<SelfTestCase> cases;
  cases.push_back({"measures.dirac_difference_tv", [](double tol, std::uint64_t) {
                     const auto s = GridSpace::finite(3);
                     const double a[] = {0.0}, b[] = {2.0};
                     return near((dirac(s, a) - dirac(s, b)).tv_norm(), 2.0, 1e-15 * tol);
                   }});
  cases.push_back({"measures.uniform_total_mass", [](double tol, std::uint64_t) {
                     const auto s = GridSpace::uniform(Box{{0.0, -1.0}, {1.0, 2.0}}, {7, 5});
                     return near(uniform(s).total_mass().real(), 1.0, 1e-14 * tol);
                   }});
  cases.push_back({"filter.uniform_emission_phi", [](double tol, std::uint64_t) {
                     const auto m = iid_uniform();
                     const double y[] = {1.0};
                     const auto st = update(*m, origin, GridMeasure::uniform(m->state_space()), y);
                     return near(st.log_normalizer_sum.real(), -std::numbers::ln2, 1e-15 * tol);
                   }});
  cases.push_back({"kernels.iterate_zero_steps", [](double tol, std::uint64_t) {
                     const auto m = sticky();
                     const auto k = build_joint_kernel(*m, origin);
                     std::vector<double> w(k.size());
                     for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<double>(i + 1);
                     const auto z = GridMeasure::from_masses(k.space_ptr(), w);
                     return near((iterate(k, z, 0) - z).tv_norm(), 0.0, 0.0 * tol);
                   }});
  cases.push_back({"kernels.one_step_invariant", [](double tol, std::uint64_t) {
                     const auto m = small_model({0.3, 0.7, 0.3, 0.7}, {0.9, 0.1, 0.2, 0.8}, 2, 2);
                     const auto k = build_joint_kernel(*m, origin);
                     const auto inv = invariant_distribution(k);
                     std::vector<double> w(k.size(), 0.0);
                     w[0] = 1.0;
                     const auto z = GridMeasure::from_masses(k.space_ptr(), w);
                     return near((iterate(k, z, 1) - inv.sigma).tv_norm(), 0.0, 1e-12 * tol);
                   }});
  cases.push_back({"rates.exact_uniform_emission", [](double tol, std::uint64_t) {
                     const auto m = iid_uniform();
                     return near(exact_entropy(*m, origin, GridMeasure::uniform(m->state_space()), 6),
                                 std::numbers::ln2, 1e-14 * tol);
                   }});
  cases.push_back({"rates.exact_binary_entropy", [](double tol, std::uint64_t) {
                     const auto m = small_model({1.0, 0.0, 0.0, 1.0}, {0.9, 0.1, 0.2, 0.8}, 2, 2);
                     const double x0[] = {0.0};
                     const double h = exact_entropy(*m, origin, dirac(m->state_space(), x0), 1);
                     return near(h, 0.325083, 1e-6 * tol);
                   }});
  cases.push_back({"rates.estimate_uniform_emission", [](double tol, std::uint64_t seed) {
                     const auto m = iid_uniform();
                     const auto e = estimate_entropy(*m, origin, GridMeasure::uniform(m->state_space()),
                                                     16, {2000, seed});
                     return near(e.value.real(), std::numbers::ln2, 1e-12 * tol);
                   }});
  cases.push_back({"rates.estimate_sticky_bounds", [](double, std::uint64_t seed) {
                     const auto m = sticky();
                     const auto e = estimate_entropy(*m, origin, GridMeasure::uniform(m->state_space()),
                                                     16, {2000, seed});
                     const double v = e.value.real();
                     return CaseResult{v >= 0.0 && v <= std::numbers::ln2 + 1e-9 && e.std_error >= 0.0, v};
                   }});
  cases.push_back({"rates.extrapolate_synthetic", [](double tol, std::uint64_t) {
                     const std::size_t n[] = {8, 16, 32, 64};
                     std::vector<double> v;
                     for (std::size_t k : n) v.push_back(1.0 + 2.0 / static_cast<double>(k));
                     const auto x = extrapolate(n, v);
                     return CaseResult{std::abs(x.limit - 1.0) <= 1e-12 * tol &&
                                           std::abs(x.c - 2.0) <= 1e-10 * tol && x.residual <= 1e-12 * tol,
                                       x.limit};
                   }});
  cases.push_back({"rates.loglik_real_parameter_is_real", [](double, std::uint64_t seed) {
                     const auto m = sticky();
                     const auto lambda = GridMeasure::uniform(m->state_space());
                     const DataSource truth{m.get(), origin, lambda};
                     const std::size_t h[] = {8};
                     const auto e = estimate_loglik(truth, *m, origin, lambda, h, {500, seed});
                     return CaseResult{e[0].value.imag() == 0.0, e[0].value.real()};
                   }});
  cases.push_back({"analytic.complex_step_square", [](double tol, std::uint64_t) {
                     const ScalarFunction f = [](const ParameterPoint& p) { return p[0] * p[0]; };
                     return near(complex_step_grad(f, ParameterPoint(std::vector<double>{3.0}))[0], 6.0,
                                 1e-15 * tol);
                   }});
  cases.push_back({"analytic.complex_step_exp", [](double tol, std::uint64_t) {
                     const ScalarFunction f = [](const ParameterPoint& p) {
                       return std::exp(p[0] + 2.0 * p[1]);
                     };
                     const auto g = complex_step_grad(f, ParameterPoint(std::vector<double>{0.0, 0.0}));
                     return CaseResult{std::abs(g[0] - 1.0) <= 1e-15 * tol && std::abs(g[1] - 2.0) <= 2e-15 * tol,
                                       g[1]};
                   }});
  cases.push_back({"analytic.cauchy_exp_series", [](double tol, std::uint64_t) {
                     const ScalarFunction f = [](const ParameterPoint& p) { return std::exp(p[0]); };
                     TaylorProbe probe{ParameterPoint(std::vector<double>{0.0}), {1.0}, 0.5, 32, {}};
                     const auto c = cauchy_coeffs(f, probe, 6);
                     double err = 0.0, fact = 1.0;
                     for (std::size_t k = 0; k <= 6; ++k) {
                       if (k) fact *= static_cast<double>(k);
                       err = std::max(err, std::abs(c[k] - 1.0 / fact));
                     }
                     return CaseResult{err <= 1e-10 * tol, err};
                   }});
  cases.push_back({"analytic.cauchy_quadratic", [](double tol, std::uint64_t) {
                     const ScalarFunction f = [](const ParameterPoint& p) {
                       return 1.0 + 2.0 * p[0] + 3.0 * p[0] * p[0];
                     };
                     TaylorProbe probe{ParameterPoint(std::vector<double>{0.0}), {1.0}, 0.5, 24, {}};
                     const auto c = cauchy_coeffs(f, probe, 6);
                     double err = 0.0;
                     for (std::size_t k = 3; k <= 6; ++k) err = std::max(err, std::abs(c[k]));
                     return CaseResult{err <= 1e-12 * tol, err};
                   }});
  cases.push_back({"analytic.cauchy_riemann_square", [](double tol, std::uint64_t) {
                     const ScalarFunction f = [](const ParameterPoint& p) { return p[0] * p[0]; };
                     const double r = cauchy_riemann_residual(
                         f, ParameterPoint(std::vector<Complex>{Complex(0.3, 0.2)}));
                     return CaseResult{r <= 1e-8 * tol, r};
                   }});
  cases.push_back({"analytic.cauchy_riemann_conjugate", [](double tol, std::uint64_t) {
                     const ScalarFunction f = [](const ParameterPoint& p) { return std::conj(p[0]); };
                     return near(cauchy_riemann_residual(
                                     f, ParameterPoint(std::vector<Complex>{Complex(0.3, 0.2)})),
                                 2.0, 1e-8 * tol);
                   }});
  cases.push_back({"verify.mixing_uniform_rows", [](double tol, std::uint64_t) {
                     const auto m = iid_uniform();
                     const std::vector<ParameterPoint> at{origin};
                     return near(check_mixing(*m, at).constant("epsilon"), 0.5, 1e-15 * tol);
                   }});
  cases.push_back({"verify.mixing_extremes", [](double tol, std::uint64_t) {
                     const auto m = sticky();
                     const std::vector<ParameterPoint> at{origin};
                     return near(check_mixing(*m, at).constant("epsilon"), 0.1, 1e-14 * tol);
                   }});
  cases.push_back({"verify.density_ratio_iid", [](double tol, std::uint64_t) {
                     const auto m = small_model({0.5, 0.5, 0.5, 0.5}, {0.7, 0.3, 0.7, 0.3}, 2, 2);
                     const std::vector<ParameterPoint> at{origin};
                     return near(check_density_ratio(*m, at).constant("gamma"), 1.0, 1e-14 * tol);
                   }});
  cases.push_back({"verify.integrability_uniform_emission", [](double, std::uint64_t) {
                     const auto r = check_integrability(*iid_uniform());
                     return CaseResult{r.pass && std::isfinite(r.constant("psi_phi_integral")),
                                       r.constant("psi_phi_integral")};
                   }});
  cases.push_back({"verify.ergodicity_iid_chain", [](double tol, std::uint64_t) {
                     const auto r = check_true_model_ergodicity(*iid_uniform(), origin);
                     return CaseResult{r.pass && r.constant("rho") <= 1e-6 * tol, r.constant("rho")};
                   }});
  cases.push_back({"verify.ergodicity_periodic_chain_fails", [](double, std::uint64_t) {
                     const auto m = small_model({0.0, 1.0, 1.0, 0.0}, {0.9, 0.1, 0.2, 0.8}, 2, 2);
                     const auto r = check_true_model_ergodicity(*m, origin);
                     return CaseResult{!r.pass, r.constant("rho")};
                   }});
  cases.push_back({"verify.forgetting_equal_initials", [](double, std::uint64_t seed) {
                     const auto m = sticky();
                     ForgettingConfig fc;
                     fc.num_paths = 10;
                     fc.n_max = 20;
                     fc.seed = seed;
                     const auto u = GridMeasure::uniform(m->state_space());
                     fc.pairs.emplace_back(u, u);
                     const auto r = forgetting_experiment(*m, origin, fc);
                     double worst = 0.0;
                     for (double d : r.mean_distance) worst = std::max(worst, d);
                     return CaseResult{worst == 0.0 && r.forgotten_immediately, worst};
                   }});
  cases.push_back({"verify.forgetting_state_independent_transition", [](double tol, std::uint64_t seed) {
                     const auto m = small_model({0.3, 0.7, 0.3, 0.7}, {0.9, 0.1, 0.2, 0.8}, 2, 2);
                     ForgettingConfig fc;
                     fc.num_paths = 10;
                     fc.n_max = 5;
                     fc.seed = seed;
                     const auto r = forgetting_experiment(*m, origin, fc);
                     return CaseResult{r.mean_distance[1] <= 1e-15 * tol && r.forgotten_immediately,
                                       r.mean_distance[1]};
                   }});
  cases.push_back({"verify.convergence_synthetic_slope", [](double tol, std::uint64_t) {
                     const std::size_t n[] = {8, 16, 32, 64, 128, 256};
                     std::vector<double> v, e(6, 0.0);
                     for (std::size_t k : n) v.push_back(0.5 + 2.0 / static_cast<double>(k));
                     const auto r = convergence_from_values(n, v, e);
                     return near(r.slope, -1.0, 0.01 * tol);
                   }});
  return cases;
}

void cmd_selftest(Context& ctx) {
  ctx.table.columns({"case", "pass", "value"});
  const double tol = ctx.options.tolerance_scale;
  std::size_t passed = 0;
  const auto cases = selftest_cases();
  for (const auto& c : cases) {
    CaseResult r;
    try {
      r = c.run(tol, ctx.seed);
    } catch (const std::exception& e) {
      r = {false, std::nan("")};
      ctx.failures.push_back(std::string(c.name) + ": " + e.what());
    }
    if (r.pass) ++passed;
    else if (ctx.failures.empty() || ctx.failures.back().rfind(c.name, 0) != 0)
      ctx.failures.push_back(std::string(c.name) + " failed");
    ctx.table.row({c.name, r.pass ? "1" : "0", fmt(r.value)});
    ctx.report["cases"][c.name] = {{"pass", r.pass}, {"value", r.value}};
  }
  const bool ok = passed == cases.size();
  ctx.table.meta("status", status(ok));
  ctx.table.meta("cases", fmt(cases.size()));
  ctx.table.meta("passed", fmt(passed));
  ctx.report["status"] = status(ok);
}

// --- driver -----------------------------------------------------------------

struct Command {
  const char* name;
  const char* description;
  const char* columns;
  void (*handler)(Context&);
  bool needs_config;
};

const std::vector<Command>& commands() {
  static const std::vector<Command> list{
      {"simulate", "Simulate one path of the state and observation chain",
       "k, x1..x_dx, y1..y_dy (row k=0 holds x_0 and empty y)", cmd_simulate, true},
      {"filter", "Run the filter along configured or simulated observations",
       "n, y1..y_dy, phi_re, phi_im, loglik_re, loglik_im, right_half_plane", cmd_filter, true},
      {"entropy", "Monte Carlo entropy h_n per horizon", "n, value, stderr, num_traj", cmd_entropy,
       true},
      {"loglik", "Monte Carlo expected log-likelihood l_n per horizon",
       "n, value_re, value_im, stderr, num_traj [, second_re, second_im, second_stderr, "
       "difference, difference_stderr]",
       cmd_loglik, true},
      {"forgetting", "Filter forgetting experiment", "n, mean_distance", cmd_forgetting, true},
      {"ergodicity", "Joint kernel and state chain ergodicity", "n, joint_sup_tv", cmd_ergodicity,
       true},
      {"analyticity", "Frozen-path analyticity report", "k, coefficient_re, coefficient_im",
       cmd_analyticity, true},
      {"check", "Assumption checks", "assumption, pass, quantity, value", cmd_check, true},
      {"selftest", "Built-in example suite", "case, pass, value", cmd_selftest, false},
  };
  return list;
}

std::optional<std::uint64_t> seed_from_environment() {
  const char* env = std::getenv("HMM_ENTROPY_SEED");
  if (!env || !*env) return std::nullopt;
  const std::string s(env);
  if (s.find_first_not_of("0123456789") != std::string::npos)
    throw ConfigurationError("HMM_ENTROPY_SEED must be an unsigned integer");
  try {
    return std::stoull(s);
  } catch (const std::exception&) {
    throw ConfigurationError("HMM_ENTROPY_SEED is out of range");
  }
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ConfigurationError(path + ": cannot open output file");
  f << content;
  if (!f) throw ConfigurationError(path + ": write failed");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Entropy and log-likelihood rates of parameterized hidden Markov models",
               args.empty() ? "hmm-entropy" : args.front()};
  app.require_subcommand(1);
  Options options;
  std::uint64_t seed_flag = 0;
  for (const auto& c : commands()) {
    auto* sub = app.add_subcommand(c.name, c.description);
    sub->add_option("--config", options.config, "JSON experiment configuration");
    sub->add_option("--out", options.out, "CSV output file (default: standard output)");
    sub->add_option("--report", options.report, "Optional JSON report file");
    sub->add_option("--seed", seed_flag, "Master seed (overrides the config)");
    sub->add_option("--threads", options.threads, "Worker thread cap")->check(CLI::PositiveNumber);
    sub->add_option("--tolerance-scale", options.tolerance_scale, "Multiplies every tolerance")
        ->check(CLI::PositiveNumber);
    sub->footer(std::string("CSV columns: ") + c.columns);
  }

  std::vector<const char*> argv;
  argv.push_back(args.empty() ? "hmm-entropy" : args.front().c_str());
  for (std::size_t i = 1; i < args.size(); ++i) argv.push_back(args[i].c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return exit_invalid;
  }

  const CLI::App* sub = app.get_subcommands().front();
  const Command* command = nullptr;
  for (const auto& c : commands())
    if (sub->get_name() == c.name) command = &c;

  Context ctx;
  ctx.command = command->name;
  ctx.options = options;
  if (sub->count("--seed") > 0) ctx.options.seed = seed_flag;

  try {
    std::uint64_t config_hash = 0;
    if (!options.config.empty()) {
      auto doc = std::make_shared<const ConfigDocument>(ConfigDocument::load(options.config));
      config_hash = doc->hash();
      ctx.config = load_experiment(doc);
    } else if (command->needs_config) {
      err << "hmm-entropy " << command->name << ": --config is required\n";
      return exit_invalid;
    }
    ctx.seed = ctx.config ? ctx.config->seed : 0;
    if (ctx.options.seed) ctx.seed = *ctx.options.seed;
    if (const auto env = seed_from_environment()) ctx.seed = *env;
    if (options.threads > 0) omp_set_num_threads(options.threads);

    ctx.table.meta("command", command->name);
    ctx.table.meta("config_hash", ctx.config ? hex(config_hash) : std::string("none"));
    ctx.table.meta("seed", std::to_string(ctx.seed));
    command->handler(ctx);

    ctx.report["command"] = command->name;
    ctx.report["config_hash"] = ctx.config ? hex(config_hash) : std::string("none");
    ctx.report["seed"] = ctx.seed;
    if (options.out.empty()) out << ctx.table.str();
    else write_file(options.out, ctx.table.str());
    if (!options.report.empty()) write_file(options.report, ctx.report.dump(2) + "\n");
  } catch (const ConfigFileError& e) {
    err << e.what() << '\n';
    return exit_invalid;
  } catch (const ConfigurationError& e) {
    err << (options.config.empty() ? std::string("hmm-entropy") : options.config) << ": "
        << e.what() << '\n';
    return exit_invalid;
  } catch (const std::exception& e) {
    err << "hmm-entropy " << command->name << ": " << e.what() << '\n';
    return exit_invalid;
  }

  if (!ctx.failures.empty()) {
    err << "hmm-entropy " << command->name << ": FAILED\n";
    for (const auto& f : ctx.failures) err << "  " << f << '\n';
    return exit_failed;
  }
  return exit_ok;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace hmm::cli
