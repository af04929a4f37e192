#include "hmm/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "hmm/errors.hpp"

namespace hmm {

using nlohmann::json;

namespace {

std::size_t line_at(const std::string& text, std::size_t pos) {
  pos = std::min(pos, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

const json& empty_object() {
  static const json value = json::object();
  return value;
}

}  // namespace

ConfigDocument ConfigDocument::parse(std::string text, std::string source) {
  ConfigDocument doc;
  doc.text_ = std::move(text);
  doc.source_ = std::move(source);
  try {
    doc.root_ = json::parse(doc.text_);
  } catch (const json::parse_error& e) {
    const std::size_t pos = e.byte > 0 ? e.byte - 1 : 0;
    const std::size_t line = line_at(doc.text_, pos);
    const std::size_t line_start = doc.text_.rfind('\n', pos == 0 ? 0 : pos - 1);
    const std::size_t col = line_start == std::string::npos ? pos + 1 : pos - line_start;
    std::string what = e.what();
    if (const auto p = what.find("; last read"); p != std::string::npos) what = what.substr(p + 2);
    throw ConfigFileError(doc.source_ + ":" + std::to_string(line) + ":" + std::to_string(col) +
                          ": malformed JSON: " + what);
  }
  if (!doc.root_.is_object())
    throw ConfigFileError(doc.source_ + ":1: the configuration must be a JSON object");
  return doc;
}

ConfigDocument ConfigDocument::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigFileError(path + ":0: cannot open configuration file");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str(), path);
}

std::size_t ConfigDocument::line_of(const std::vector<std::string>& path) const {
  std::size_t pos = 0;
  bool found_any = false;
  for (const auto& key : path) {
    if (!key.empty() && key.front() == '[') continue;
    const auto p = text_.find("\"" + key + "\"", pos);
    if (p == std::string::npos) break;
    pos = p;
    found_any = true;
  }
  return found_any ? line_at(text_, pos) : 1;
}

std::uint64_t ConfigDocument::hash() const {
  const std::string canonical = root_.dump();
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

ConfigNode::ConfigNode(const ConfigDocument& doc, const json& value, std::vector<std::string> path)
    : doc_(&doc), value_(&value), path_(std::move(path)) {}

std::string ConfigNode::dotted() const {
  std::string s;
  for (const auto& p : path_) {
    if (!s.empty() && p.front() != '[') s += '.';
    s += p;
  }
  return s.empty() ? "<root>" : s;
}

void ConfigNode::fail(const std::string& problem) const {
  throw ConfigFileError(doc_->source() + ":" + std::to_string(doc_->line_of(path_)) + ": " +
                        dotted() + ": " + problem);
}

bool ConfigNode::has(const std::string& key) const {
  return value_->is_object() && value_->contains(key);
}

ConfigNode ConfigNode::at(const std::string& key) const {
  if (!value_->is_object()) fail("expected an object");
  auto it = value_->find(key);
  if (it == value_->end()) fail("missing required key \"" + key + "\"");
  auto path = path_;
  path.push_back(key);
  return ConfigNode(*doc_, *it, std::move(path));
}

std::optional<ConfigNode> ConfigNode::find(const std::string& key) const {
  if (!has(key)) return std::nullopt;
  return at(key);
}

ConfigNode ConfigNode::at(std::size_t index) const {
  if (!value_->is_array()) fail("expected an array");
  if (index >= value_->size()) fail("index " + std::to_string(index) + " out of range");
  auto path = path_;
  path.push_back("[" + std::to_string(index) + "]");
  return ConfigNode(*doc_, (*value_)[index], std::move(path));
}

std::size_t ConfigNode::size() const {
  if (!value_->is_array()) fail("expected an array");
  return value_->size();
}

double ConfigNode::number() const {
  if (!value_->is_number()) fail("expected a number");
  const double v = value_->get<double>();
  if (!std::isfinite(v)) fail("expected a finite number");
  return v;
}

double ConfigNode::positive() const {
  const double v = number();
  if (!(v > 0.0)) fail("expected a positive number");
  return v;
}

std::uint64_t ConfigNode::unsigned_integer() const {
  if (!value_->is_number_unsigned()) fail("expected a nonnegative integer");
  return value_->get<std::uint64_t>();
}

std::size_t ConfigNode::count() const {
  const auto v = unsigned_integer();
  if (v == 0) fail("expected a positive integer");
  return static_cast<std::size_t>(v);
}

bool ConfigNode::boolean() const {
  if (!value_->is_boolean()) fail("expected true or false");
  return value_->get<bool>();
}

std::string ConfigNode::string() const {
  if (!value_->is_string()) fail("expected a string");
  return value_->get<std::string>();
}

std::vector<double> ConfigNode::numbers() const {
  std::vector<double> out;
  for (std::size_t i = 0; i < size(); ++i) out.push_back(at(i).number());
  return out;
}

std::vector<std::size_t> ConfigNode::counts() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < size(); ++i) out.push_back(at(i).count());
  return out;
}

std::vector<unsigned> ConfigNode::powers() const {
  std::vector<unsigned> out;
  for (std::size_t i = 0; i < size(); ++i) {
    const auto v = at(i).unsigned_integer();
    if (v > 64) at(i).fail("power too large");
    out.push_back(static_cast<unsigned>(v));
  }
  return out;
}

std::vector<double> ConfigNode::matrix(std::size_t& rows, std::size_t& cols) const {
  rows = size();
  if (rows == 0) fail("expected a nonempty array of rows");
  cols = at(0).size();
  std::vector<double> out;
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = at(r).numbers();
    if (row.size() != cols) at(r).fail("rows must all have the same length");
    out.insert(out.end(), row.begin(), row.end());
  }
  return out;
}

double ConfigNode::number_or(const std::string& key, double fallback) const {
  return has(key) ? at(key).number() : fallback;
}

std::size_t ConfigNode::count_or(const std::string& key, std::size_t fallback) const {
  return has(key) ? at(key).count() : fallback;
}

namespace {

ParameterBox read_parameter_box(const ConfigNode& node) {
  ParameterBox box{node.at("lower").numbers(), node.at("upper").numbers()};
  if (box.lower.size() != box.upper.size()) node.fail("lower and upper differ in length");
  for (std::size_t k = 0; k < box.size(); ++k)
    if (!(box.lower[k] <= box.upper[k])) node.fail("lower must not exceed upper");
  return box;
}

Box read_box(const ConfigNode& node) {
  Box box{node.at("lower").numbers(), node.at("upper").numbers()};
  if (box.lower.size() != box.upper.size() || box.lower.empty())
    node.fail("lower and upper must be nonempty and of equal length");
  for (std::size_t k = 0; k < box.dim(); ++k)
    if (!(box.lower[k] < box.upper[k])) node.fail("lower must be below upper");
  return box;
}

LogitTable read_logits(const ConfigNode& node, std::size_t param_dim) {
  std::size_t rows = 0, cols = 0;
  const auto probs = node.at("probabilities").matrix(rows, cols);
  LogitTable t;
  try {
    t = LogitTable::from_probabilities(rows, cols, probs, param_dim);
  } catch (const ConfigurationError& e) {
    node.at("probabilities").fail(e.what());
  }
  if (auto slopes = node.find("slopes")) {
    if (slopes->size() != param_dim) slopes->fail("needs one table per parameter coordinate");
    for (std::size_t k = 0; k < param_dim; ++k) {
      std::size_t r = 0, c = 0;
      t.slopes[k] = slopes->at(k).matrix(r, c);
      if (r != rows || c != cols) slopes->at(k).fail("slope table shape differs from probabilities");
    }
  }
  return t;
}

GaussianComponent read_component(const ConfigNode& node) {
  return {node.at("mean").numbers(), node.at("scale").numbers()};
}

std::vector<GaussianComponent> read_components(const ConfigNode& node) {
  std::vector<GaussianComponent> out;
  for (std::size_t i = 0; i < node.size(); ++i) out.push_back(read_component(node.at(i)));
  return out;
}

std::vector<std::vector<double>> read_rows(const std::optional<ConfigNode>& node, std::size_t rows,
                                           std::size_t cols) {
  if (!node) return std::vector<std::vector<double>>(rows, std::vector<double>(cols, 0.0));
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < node->size(); ++i) out.push_back(node->at(i).numbers());
  return out;
}

SoftmaxWeights read_weights(const ConfigNode& node, std::size_t param_dim, std::size_t state_dim) {
  SoftmaxWeights w;
  w.base = node.at("base").numbers();
  w.theta_slopes = read_rows(node.find("theta_slopes"), w.base.size(), param_dim);
  w.state_slopes = read_rows(node.find("state_slopes"), w.base.size(), state_dim);
  return w;
}

std::vector<Polynomial> read_polynomials(const ConfigNode& node, std::size_t param_dim,
                                         std::size_t state_dim) {
  std::vector<Polynomial> out;
  for (std::size_t i = 0; i < node.size(); ++i) {
    const ConfigNode poly = node.at(i);
    Polynomial p;
    for (std::size_t j = 0; j < poly.size(); ++j) {
      const ConfigNode term = poly.at(j);
      Monomial m;
      m.coefficient = term.at("coefficient").number();
      m.theta_powers = term.has("theta_powers") ? term.at("theta_powers").powers()
                                                : std::vector<unsigned>(param_dim, 0);
      m.state_powers = term.has("state_powers") ? term.at("state_powers").powers()
                                                : std::vector<unsigned>(state_dim, 0);
      p.terms.push_back(std::move(m));
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

std::unique_ptr<ModelFamily> build_model(const ConfigNode& node) {
  const std::string kind = node.at("kind").string();
  if (kind != "finite" && kind != "mixture" && kind != "state_space")
    node.at("kind").fail("unknown model kind \"" + kind + "\"");
  const ParameterBox box = read_parameter_box(node.at("parameter_box"));
  const double delta = node.at("continuation_radius").positive();
  const std::size_t d = box.size();
  try {
    if (kind == "finite") {
      EmissionDefect defect = EmissionDefect::none;
      if (auto df = node.find("defect")) {
        const auto name = df->string();
        if (name == "conjugate") defect = EmissionDefect::conjugate;
        else if (name != "none") df->fail("unknown defect \"" + name + "\"");
      }
      return std::make_unique<FiniteModel>(box, delta, read_logits(node.at("transition"), d),
                                           read_logits(node.at("emission"), d), defect);
    }
    if (kind == "mixture") {
      MixtureModel::Spec spec;
      spec.box = box;
      spec.delta = delta;
      spec.state_box = read_box(node.at("state_box"));
      spec.state_cells = node.at("state_cells").counts();
      spec.observation_box = read_box(node.at("observation_box"));
      spec.observation_cells = node.at("observation_cells").counts();
      spec.state_components = read_components(node.at("state_components"));
      spec.state_weights = read_weights(node.at("state_weights"), d, spec.state_box.dim());
      spec.observation_components = read_components(node.at("observation_components"));
      spec.observation_weights =
          read_weights(node.at("observation_weights"), d, spec.state_box.dim());
      return std::make_unique<MixtureModel>(std::move(spec));
    }
    if (kind == "state_space") {
      StateSpaceModel::Spec spec;
      spec.box = box;
      spec.delta = delta;
      spec.state_box = read_box(node.at("state_box"));
      spec.state_cells = node.at("state_cells").counts();
      spec.observation_box = read_box(node.at("observation_box"));
      spec.observation_cells = node.at("observation_cells").counts();
      const std::size_t dx = spec.state_box.dim();
      spec.drift = read_polynomials(node.at("drift"), d, dx);
      spec.diffusion = read_polynomials(node.at("diffusion"), d, dx);
      spec.observation_mean = read_polynomials(node.at("observation_mean"), d, dx);
      spec.observation_scale = read_polynomials(node.at("observation_scale"), d, dx);
      return std::make_unique<StateSpaceModel>(std::move(spec));
    }
  } catch (const ConfigFileError&) {
    throw;
  } catch (const ConfigurationError& e) {
    node.fail(e.what());
  }
  node.at("kind").fail("unknown model kind \"" + kind + "\"");
}

GridMeasure build_initial(const ConfigNode& node, const ModelFamily& model) {
  const auto space = model.state_space();
  if (node.is_string()) {
    if (node.string() == "uniform") return GridMeasure::uniform(space);
    node.fail("expected \"uniform\", {\"dirac\": [...]} or {\"masses\": [...]}");
  }
  if (auto dirac = node.find("dirac")) {
    const auto x = dirac->numbers();
    if (x.size() != space->dim()) dirac->fail("point has the wrong dimension");
    if (!space->bounds().contains(x)) dirac->fail("point lies outside the state space");
    return GridMeasure::dirac(space, x);
  }
  if (auto masses = node.find("masses")) {
    const auto m = masses->numbers();
    if (m.size() != space->size()) masses->fail("needs one mass per state grid point");
    double total = 0.0;
    for (double v : m) {
      if (v < 0.0) masses->fail("masses must be nonnegative");
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-9) masses->fail("masses must sum to 1");
    return GridMeasure::from_masses(space, m);
  }
  node.fail("expected \"uniform\", {\"dirac\": [...]} or {\"masses\": [...]}");
}

ParameterPoint build_theta(const ConfigNode& node, const ModelFamily& model) {
  const auto theta = node.numbers();
  if (theta.size() != model.param_dim()) node.fail("parameter has the wrong dimension");
  if (!model.parameter_box().contains(theta)) node.fail("parameter lies outside the parameter box");
  return ParameterPoint(theta);
}

ParameterPoint build_eta(const ConfigNode& section, const ParameterPoint& theta) {
  auto imag = section.find("eta_imag");
  if (!imag) return theta;
  const auto im = imag->numbers();
  if (im.size() != theta.size()) imag->fail("imaginary part has the wrong dimension");
  const auto re = theta.real_part();
  return ParameterPoint(re, im);
}

std::vector<std::size_t> build_horizons(const ConfigNode& node) {
  auto h = node.counts();
  if (h.empty()) node.fail("at least one horizon is required");
  for (std::size_t i = 1; i < h.size(); ++i)
    if (h[i] <= h[i - 1]) node.fail("horizons must be strictly increasing");
  return h;
}

ConfigNode ExperimentConfig::root() const { return ConfigNode(*document, document->root(), {}); }

ConfigNode ExperimentConfig::section(const std::string& name) const {
  const auto r = root();
  if (r.has(name)) {
    auto s = r.at(name);
    if (!s.is_object()) s.fail("expected an object");
    return s;
  }
  return ConfigNode(*document, empty_object(), {name});
}

ExperimentConfig load_experiment(std::shared_ptr<const ConfigDocument> document) {
  ExperimentConfig cfg{document, nullptr, {}, GridMeasure::zero(GridSpace::finite(1)), {}, 1000, 0};
  const ConfigNode root(*document, document->root(), {});
  cfg.model = build_model(root.at("model"));
  cfg.theta = root.has("theta") ? build_theta(root.at("theta"), *cfg.model)
                                : ParameterPoint(cfg.model->parameter_box().center());
  cfg.initial = root.has("initial") ? build_initial(root.at("initial"), *cfg.model)
                                    : GridMeasure::uniform(cfg.model->state_space());
  cfg.horizons = root.has("horizons") ? build_horizons(root.at("horizons"))
                                      : std::vector<std::size_t>{8, 16, 32, 64};
  cfg.num_traj = root.count_or("num_traj", 1000);
  if (root.has("seed")) cfg.seed = root.at("seed").unsigned_integer();
  return cfg;
}

}  // namespace hmm
