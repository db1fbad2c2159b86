#pragma once
// JSON experiment configs with line-precise validation errors.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "nlv/calculus.hpp"
#include "nlv/solver.hpp"

namespace nlv::cli {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line, int column)
      : std::runtime_error(what), line_(line), column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

/// Line and column (1-based) of every member key and array element, keyed by
/// JSON pointer. Assumes syntactically valid input.
std::map<std::string, std::pair<int, int>> index_positions(const std::string& text);

struct Document;

/// Typed access to one object of the document; every read checks type and
/// range and reports errors at the offending line.
class Section {
 public:
  Section(const nlohmann::json* node, std::string pointer, std::shared_ptr<const Document> doc);

  bool has(const std::string& key) const;
  Section section(const std::string& key) const;  // missing -> empty section
  double number(const std::string& key, double def) const;
  double number_in(const std::string& key, double def, double lo, double hi, bool open_lo = false,
                   bool open_hi = false) const;
  int integer_in(const std::string& key, int def, int lo, int hi) const;
  bool boolean(const std::string& key, bool def) const;
  std::string text(const std::string& key, const std::string& def, const std::vector<std::string>& allowed = {}) const;
  std::vector<double> numbers(const std::string& key, const std::vector<double>& def) const;
  std::optional<double> optional_number(const std::string& key) const;
  /// Rejects members outside `keys`.
  void only(const std::vector<std::string>& keys) const;

  [[noreturn]] void fail(const std::string& key, const std::string& message) const;
  std::string pointer(const std::string& key) const { return pointer_ + "/" + key; }

 private:
  const nlohmann::json* member(const std::string& key) const;
  const nlohmann::json* node_;
  std::string pointer_;
  std::shared_ptr<const Document> doc_;
};

struct Document {
  std::string name;
  std::string text;
  nlohmann::json root;
  std::map<std::string, std::pair<int, int>> positions;

  /// Position of the pointer, or of its nearest present ancestor.
  std::pair<int, int> locate(std::string pointer) const;
  std::string dotted(const std::string& pointer) const;
};

/// Throws ConfigError on syntax errors, with the line of the failure.
std::shared_ptr<Document> parse_document(const std::string& text, const std::string& name);

struct MeshConfig {
  int dim = 1;
  double a = 0.0, b = 1.0;
  int elements = 8;
  double lx = 1.0, ly = 1.0;
  int nx = 8, ny = 8;
  std::optional<double> collar;
};

struct ExperimentConfig {
  std::string command;
  std::uint64_t seed = 1;
  nlohmann::json raw;
  MeshConfig mesh;
  KernelSpec spec;
  QuadratureOptions quad;
  TimeGrid grid;
  SolverOptions solver;
  Constraint constraint = Constraint::dirichlet;
  nlohmann::json experiment;  // validated by the command
  std::shared_ptr<Document> doc;

  Mesh build_mesh() const;
  Section experiment_section() const;
};

extern const std::vector<std::string> kCommands;

/// Parses and validates the common blocks for `command`; unset blocks take
/// the command defaults.
ExperimentConfig load_config(const std::string& text, const std::string& name, const std::string& command);

}  // namespace nlv::cli
