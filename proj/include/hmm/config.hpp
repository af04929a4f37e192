#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hmm/errors.hpp"
#include "hmm/measures.hpp"
#include "hmm/models.hpp"

namespace hmm {

/// A configuration problem already anchored to "<source>:<line>".
class ConfigFileError : public ConfigurationError {
 public:
  using ConfigurationError::ConfigurationError;
};

/// Parsed JSON text plus what is needed to point errors at a line.
class ConfigDocument {
 public:
  /// Throws ConfigurationError("<source>:<line>:<col>: ...") on malformed JSON.
  static ConfigDocument parse(std::string text, std::string source);
  static ConfigDocument load(const std::string& path);

  const nlohmann::json& root() const { return root_; }
  const std::string& source() const { return source_; }
  /// Line of the value at the given key path, located in the raw text.
  std::size_t line_of(const std::vector<std::string>& path) const;
  /// FNV-1a 64 of the canonical (sorted-key, compact) dump.
  std::uint64_t hash() const;

 private:
  std::string text_;
  std::string source_;
  nlohmann::json root_;
};

/// A value inside a document; typed accessors throw ConfigurationError with
/// "<source>:<line>: <dotted.path>: <problem>".
class ConfigNode {
 public:
  ConfigNode(const ConfigDocument& doc, const nlohmann::json& value,
             std::vector<std::string> path);

  bool has(const std::string& key) const;
  ConfigNode at(const std::string& key) const;
  std::optional<ConfigNode> find(const std::string& key) const;
  ConfigNode at(std::size_t index) const;
  std::size_t size() const;

  bool is_string() const { return value_->is_string(); }
  bool is_object() const { return value_->is_object(); }
  bool is_array() const { return value_->is_array(); }

  double number() const;
  double positive() const;
  std::uint64_t unsigned_integer() const;
  std::size_t count() const;  // positive integer
  bool boolean() const;
  std::string string() const;
  std::vector<double> numbers() const;
  std::vector<std::size_t> counts() const;
  std::vector<unsigned> powers() const;
  /// Rectangular array of arrays, returned row-major with its shape.
  std::vector<double> matrix(std::size_t& rows, std::size_t& cols) const;

  double number_or(const std::string& key, double fallback) const;
  std::size_t count_or(const std::string& key, std::size_t fallback) const;

  [[noreturn]] void fail(const std::string& problem) const;
  const nlohmann::json& raw() const { return *value_; }
  std::string dotted() const;

 private:
  const ConfigDocument* doc_;
  const nlohmann::json* value_;
  std::vector<std::string> path_;
};

/// Builds a model family from a "model" object.
std::unique_ptr<ModelFamily> build_model(const ConfigNode& node);

/// "uniform", {"dirac": [x...]} or {"masses": [m...]}.
GridMeasure build_initial(const ConfigNode& node, const ModelFamily& model);

/// A real parameter inside the model's box.
ParameterPoint build_theta(const ConfigNode& node, const ModelFamily& model);

/// theta + i * imag, with imag from an optional "eta_imag" array.
ParameterPoint build_eta(const ConfigNode& section, const ParameterPoint& theta);

/// Strictly increasing positive horizons.
std::vector<std::size_t> build_horizons(const ConfigNode& node);

struct ExperimentConfig {
  std::shared_ptr<const ConfigDocument> document;
  std::shared_ptr<const ModelFamily> model;
  ParameterPoint theta;
  GridMeasure initial;
  std::vector<std::size_t> horizons;
  std::size_t num_traj = 1000;
  std::uint64_t seed = 0;

  ConfigNode root() const;
  /// The named command section, or an empty object when absent.
  ConfigNode section(const std::string& name) const;
};

/// Reads the common fields: model, theta (default box center), initial
/// (default uniform), horizons (default 8, 16, 32, 64), num_traj (default
/// 1000), seed (default 0).
ExperimentConfig load_experiment(std::shared_ptr<const ConfigDocument> document);

}  // namespace hmm
