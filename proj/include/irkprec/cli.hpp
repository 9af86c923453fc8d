#pragma once

#include "irkprec/analysis.hpp"
#include "irkprec/driver.hpp"

#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace irkprec::cli {

enum class Command { Kappa, Spectrum, Fov, Gmres, Mms, Export };
enum class OutputFormat { Csv, Json, Markdown };

std::string_view to_string(Command command);
Command command_from_string(std::string_view name);
std::string_view to_string(OutputFormat format);
OutputFormat output_format_from_string(std::string_view name);

/// Invalid configuration, tagged with the offending field and the config-file
/// line it was set on (0 when it came from a flag or a default).
class ConfigError : public InvalidArgument {
 public:
  ConfigError(std::string field, int line, const std::string& message);
  const std::string& field() const { return field_; }
  int line() const { return line_; }

 private:
  std::string field_;
  int line_;
};

struct ExperimentConfig {
  Command command = Command::Kappa;
  ProblemName problem = ProblemName::Wave;
  bool variable = false;
  /// Base family; defaults to Radau IIA for mu = 1 and Gauss-Legendre for mu = 2.
  std::optional<TableauKind> method;
  std::vector<int> stages{2, 3, 4, 5};
  /// Mesh exponents k, h = 2^-k; defaults to {4}, or {3, 4, 5} for mms.
  std::optional<std::vector<int>> mesh_k;
  bool ht_rule = false;
  std::vector<double> ht;
  /// Defaults to all five kinds, or GSL, LD, DU for gmres.
  std::optional<std::vector<PreconditionerKind>> precond;
  /// Include the unpreconditioned system; defaults to true except for gmres.
  std::optional<bool> unpreconditioned;
  SubsolveKind subsolve = SubsolveKind::VCycle;
  Smoother smoother = Smoother::GaussSeidel;
  double tol = 1e-8;
  int max_iter = 500;
  /// Defaults to Nominal, or Element for mms.
  std::optional<MeshConvention> convention;
  int fov_angles = 128;
  double t_final = 1.0;
  bool random_rhs = false;
  unsigned seed = 0;
  int jobs = 1;
  std::string out;
  std::string data_dir = "irkprec-data";
  OutputFormat format = OutputFormat::Csv;
  /// Config-file line of each key that was set from a file.
  std::map<std::string, int> lines;

  CoefficientPreset preset() const;
  TableauKind family() const;
  std::vector<int> effective_mesh_k() const;
  std::vector<PreconditionerKind> effective_precond() const;
  bool effective_unpreconditioned() const;
  MeshConvention mesh_convention() const;
  int line_of(const std::string& key) const;
};

/// Applies one key = value setting; keys match the long flag names.
void apply_setting(ExperimentConfig& config, std::string_view key, std::string_view value, int line = 0);
/// Reads `key = value` lines ('#' starts a comment) on top of `base`.
ExperimentConfig parse_config(std::istream& is, ExperimentConfig base = {});
/// Throws ConfigError; dense-guard violations of kappa runs are caught here.
void validate(const ExperimentConfig& config);

using Cell = std::variant<std::monostate, std::string, long long, double, bool>;
using Row = std::vector<Cell>;

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<Row> rows;

  std::size_t column(std::string_view name) const;
  const Cell& at(std::size_t row, std::string_view column) const;
};

struct RunResult {
  Table table;
  /// 0 on success, 2 when some GMRES run did not converge.
  int exit_code = 0;
  std::vector<std::string> warnings;
};

RunResult run_kappa(const ExperimentConfig& config);
RunResult run_spectrum(const ExperimentConfig& config);
RunResult run_fov(const ExperimentConfig& config);
RunResult run_gmres(const ExperimentConfig& config);
RunResult run_mms(const ExperimentConfig& config);
RunResult run_export(const ExperimentConfig& config);
/// Validates, then dispatches on config.command.
RunResult run(const ExperimentConfig& config);

void write_csv(std::ostream& os, const Table& table);
void write_json(std::ostream& os, const Table& table);
/// Kappa and gmres tables are pivoted into the layout of the published
/// tables; other commands are written flat.
void write_markdown(std::ostream& os, const Table& table);
void write_table(std::ostream& os, const Table& table, OutputFormat format);

/// Runs the tasks on `jobs` threads; the rows come back in task order.
std::vector<Row> run_ordered(const std::vector<std::function<std::vector<Row>()>>& tasks, int jobs);

}  // namespace irkprec::cli
