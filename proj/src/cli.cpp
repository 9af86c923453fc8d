#include "irkprec/cli.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

namespace irkprec::cli {

namespace {

constexpr PreconditionerKind kAllKinds[] = {PreconditionerKind::J, PreconditionerKind::GSL, PreconditionerKind::LD,
                                           PreconditionerKind::DU, PreconditionerKind::TRIU};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_list(std::string_view value) {
  std::vector<std::string> items;
  std::string cur;
  for (char ch : value) {
    if (ch == ',' || std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) items.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) items.push_back(cur);
  return items;
}

int parse_int(std::string_view field, std::string_view text, int line) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError(std::string(field), line, "expected an integer, got '" + std::string(text) + "'");
  }
  return v;
}

double parse_double(std::string_view field, std::string_view text, int line) {
  const std::string s(text);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size() || !std::isfinite(v)) {
    throw ConfigError(std::string(field), line, "expected a number, got '" + s + "'");
  }
  return v;
}

bool parse_bool(std::string_view field, std::string_view text, int line) {
  if (text.empty() || text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ConfigError(std::string(field), line, "expected true or false, got '" + std::string(text) + "'");
}

/// Integers separated by commas, or an inclusive range a..b.
std::vector<int> parse_int_list(std::string_view field, std::string_view value, int line) {
  std::vector<int> out;
  for (const auto& item : split_list(value)) {
    const auto dots = item.find("..");
    if (dots == std::string::npos) {
      out.push_back(parse_int(field, item, line));
      continue;
    }
    const int a = parse_int(field, std::string_view(item).substr(0, dots), line);
    const int b = parse_int(field, std::string_view(item).substr(dots + 2), line);
    if (b < a) throw ConfigError(std::string(field), line, "empty range '" + item + "'");
    for (int i = a; i <= b; ++i) out.push_back(i);
  }
  return out;
}

TableauKind parse_method(std::string_view value, int line) {
  if (value == "radau-iia" || value == "radau" || value == "riia") return TableauKind::RadauIIA;
  if (value == "gauss-legendre" || value == "gauss" || value == "gl") return TableauKind::GaussLegendre;
  throw ConfigError("method", line, "expected radau-iia or gauss-legendre, got '" + std::string(value) + "'");
}

/// Rethrows library parse errors as ConfigError for the given field.
template <class F>
auto as_config(std::string_view field, int line, F&& parse) {
  try {
    return parse();
  } catch (const ConfigError&) {
    throw;
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string(field), line, e.what());
  }
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string format_cell(const Cell& c) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, std::monostate>) return "";
        else if constexpr (std::is_same_v<T, std::string>) return v;
        else if constexpr (std::is_same_v<T, long long>) return std::to_string(v);
        else if constexpr (std::is_same_v<T, double>) return format_double(v);
        else return v ? "true" : "false";
      },
      c);
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

std::string ht_tag(double h_t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", h_t);
  return buf;
}

// Parameters shared by every row of one grid point.
struct GridPoint {
  int s = 0;
  int k = 0;
  double h = 0.0;
  double h_t = 0.0;
  ButcherTableau tableau;
};

const std::vector<std::string> kCommonColumns{"command", "problem", "coeff", "method", "s",
                                              "k",       "h",       "h_t",   "mesh_convention"};

Row common_cells(const ExperimentConfig& cfg, const GridPoint& g) {
  return {std::string(to_string(cfg.command)),
          std::string(to_string(cfg.problem)),
          std::string(to_string(cfg.preset())),
          g.tableau.label(),
          static_cast<long long>(g.s),
          static_cast<long long>(g.k),
          g.h,
          g.h_t,
          std::string(to_string(cfg.mesh_convention()))};
}

std::vector<std::string> with_common(std::initializer_list<std::string> extra) {
  std::vector<std::string> cols = kCommonColumns;
  cols.insert(cols.end(), extra);
  return cols;
}

Index nodes_for(int k, MeshConvention convention) {
  const Index n = Index(1) << (convention == MeshConvention::Nominal ? k : k + 1);
  return (n + 1) * (n + 1);
}

/// Grid in the order k, h_t, s.
std::vector<GridPoint> grid(const ExperimentConfig& cfg) {
  const int mu = problem_order(cfg.problem);
  std::vector<GridPoint> pts;
  for (int k : cfg.effective_mesh_k()) {
    const double h = std::ldexp(1.0, -k);
    const std::size_t n_ht = cfg.ht.empty() ? 1 : cfg.ht.size();
    for (std::size_t j = 0; j < n_ht; ++j) {
      for (int s : cfg.stages) {
        GridPoint g;
        g.s = s;
        g.k = k;
        g.h = h;
        g.tableau = tableau_for(cfg.family(), s, mu);
        g.h_t = cfg.ht.empty() ? timestep_rule(h, 1, g.tableau.kind, s) : cfg.ht[j];
        pts.push_back(std::move(g));
      }
    }
  }
  return pts;
}

struct MeshData {
  TriMesh mesh;
  SemiDiscreteSystem sys;
  std::shared_ptr<const ModalBasis> basis;
  std::shared_ptr<const MultigridLevels> levels;
};

std::map<int, MeshData> prepare_meshes(const ExperimentConfig& cfg, bool need_basis, bool need_levels) {
  const ProblemSpec problem = mms_problem(cfg.problem, cfg.preset());
  const AnalysisOptions defaults;
  std::map<int, MeshData> out;
  for (int k : cfg.effective_mesh_k()) {
    MeshData d;
    d.mesh = mesh_for(k, cfg.mesh_convention());
    d.sys = discretize(d.mesh, problem);
    bool modal = false;
    for (int s : cfg.stages) {
      const Index size = s * d.mesh.num_nodes();
      modal = modal || (size > defaults.dense_limit && size <= kDenseGuard);
    }
    if (need_basis && modal) {
      d.basis = std::make_shared<const ModalBasis>(modal_basis(*d.sys.M, *d.sys.F));
    }
    if (need_levels && cfg.subsolve == SubsolveKind::VCycle) {
      d.levels = std::make_shared<const MultigridLevels>(
          build_multigrid_levels(hierarchy_for(k, cfg.mesh_convention()), problem.coeff));
    }
    out.emplace(k, std::move(d));
  }
  return out;
}

bool exceeds_guard(const ExperimentConfig& cfg, const GridPoint& g) {
  return static_cast<Index>(g.s) * nodes_for(g.k, cfg.mesh_convention()) > kDenseGuard;
}

std::string guard_note(const ExperimentConfig& cfg, const GridPoint& g) {
  return "system size " + std::to_string(g.s * nodes_for(g.k, cfg.mesh_convention())) + " exceeds dense guard " +
         std::to_string(kDenseGuard);
}

std::filesystem::path data_path(const ExperimentConfig& cfg, const std::string& name) {
  std::filesystem::create_directories(cfg.data_dir);
  return std::filesystem::path(cfg.data_dir) / name;
}

std::string point_file_name(const ExperimentConfig& cfg, const GridPoint& g, const std::string& what,
                            const std::string& kind) {
  std::string name = what + "_" + std::string(to_string(cfg.problem)) + "_" + g.tableau.label() + "_k" +
                     std::to_string(g.k);
  if (!cfg.ht.empty()) name += "_ht" + ht_tag(g.h_t);
  return name + "_" + kind + ".csv";
}

void write_points(const std::filesystem::path& path, const std::vector<std::complex<double>>& pts) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << "re,im\n";
  char buf[64];
  for (const auto& z : pts) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", z.real(), z.imag());
    os << buf;
  }
}

std::string kind_name(const PreconditionerKind* kind) { return kind ? std::string(to_string(*kind)) : "none"; }

/// Kinds to evaluate, with nullptr standing for the unpreconditioned system.
std::vector<const PreconditionerKind*> analysis_kinds(const ExperimentConfig& cfg,
                                                      const std::vector<PreconditionerKind>& kinds) {
  std::vector<const PreconditionerKind*> out;
  if (cfg.effective_unpreconditioned()) out.push_back(nullptr);
  for (const auto& k : kinds) out.push_back(&k);
  return out;
}

RunResult finish(Table table, std::vector<Row> rows) {
  RunResult res;
  res.table = std::move(table);
  res.table.rows = std::move(rows);
  const std::size_t status = res.table.column("status");
  const std::size_t note = res.table.column("note");
  for (const auto& row : res.table.rows) {
    const auto& st = std::get<std::string>(row[status]);
    if (st == "not-converged") res.exit_code = 2;
    if (st == "skipped") res.warnings.push_back("skipped: " + std::get<std::string>(row[note]));
  }
  return res;
}

}  // namespace

ConfigError::ConfigError(std::string field, int line, const std::string& message)
    : InvalidArgument((line > 0 ? "line " + std::to_string(line) + ": " : std::string()) + "field '" + field +
                      "': " + message),
      field_(std::move(field)),
      line_(line) {}

std::string_view to_string(Command command) {
  switch (command) {
    case Command::Kappa: return "kappa";
    case Command::Spectrum: return "spectrum";
    case Command::Fov: return "fov";
    case Command::Gmres: return "gmres";
    case Command::Mms: return "mms";
    case Command::Export: return "export";
  }
  return "kappa";
}

Command command_from_string(std::string_view name) {
  for (auto c : {Command::Kappa, Command::Spectrum, Command::Fov, Command::Gmres, Command::Mms, Command::Export}) {
    if (name == to_string(c)) return c;
  }
  throw InvalidArgument("unknown command '" + std::string(name) + "'");
}

std::string_view to_string(OutputFormat format) {
  switch (format) {
    case OutputFormat::Csv: return "csv";
    case OutputFormat::Json: return "json";
    case OutputFormat::Markdown: return "md";
  }
  return "csv";
}

OutputFormat output_format_from_string(std::string_view name) {
  if (name == "csv") return OutputFormat::Csv;
  if (name == "json") return OutputFormat::Json;
  if (name == "md" || name == "markdown") return OutputFormat::Markdown;
  throw InvalidArgument("unknown format '" + std::string(name) + "'");
}

CoefficientPreset ExperimentConfig::preset() const { return preset_for(problem, variable); }

TableauKind ExperimentConfig::family() const { return method ? *method : default_family(problem); }

std::vector<int> ExperimentConfig::effective_mesh_k() const {
  if (mesh_k) return *mesh_k;
  return command == Command::Mms ? std::vector<int>{3, 4, 5} : std::vector<int>{4};
}

std::vector<PreconditionerKind> ExperimentConfig::effective_precond() const {
  if (precond) return *precond;
  if (command == Command::Gmres) return {PreconditionerKind::GSL, PreconditionerKind::LD, PreconditionerKind::DU};
  return {std::begin(kAllKinds), std::end(kAllKinds)};
}

bool ExperimentConfig::effective_unpreconditioned() const {
  return unpreconditioned ? *unpreconditioned : command != Command::Gmres;
}

MeshConvention ExperimentConfig::mesh_convention() const {
  if (convention) return *convention;
  return command == Command::Mms ? MeshConvention::Element : MeshConvention::Nominal;
}

int ExperimentConfig::line_of(const std::string& key) const {
  const auto it = lines.find(key);
  return it == lines.end() ? 0 : it->second;
}

void apply_setting(ExperimentConfig& cfg, std::string_view key_in, std::string_view value_in, int line) {
  const std::string key(trim(key_in));
  const std::string value(trim(value_in));
  if (key == "command") {
    cfg.command = as_config(key, line, [&] { return command_from_string(value); });
  } else if (key == "problem") {
    cfg.problem = as_config(key, line, [&] { return problem_name_from_string(value); });
  } else if (key == "coeff") {
    if (value != "constant" && value != "variable") {
      throw ConfigError(key, line, "expected constant or variable, got '" + value + "'");
    }
    cfg.variable = value == "variable";
  } else if (key == "method") {
    cfg.method = parse_method(value, line);
  } else if (key == "stages") {
    cfg.stages = parse_int_list(key, value, line);
  } else if (key == "mesh-k") {
    cfg.mesh_k = parse_int_list(key, value, line);
  } else if (key == "ht-rule") {
    cfg.ht_rule = parse_bool(key, value, line);
  } else if (key == "ht") {
    cfg.ht.clear();
    for (const auto& item : split_list(value)) cfg.ht.push_back(parse_double(key, item, line));
  } else if (key == "precond") {
    std::vector<PreconditionerKind> kinds;
    if (value == "all") {
      kinds.assign(std::begin(kAllKinds), std::end(kAllKinds));
    } else if (value != "none") {
      for (const auto& item : split_list(value)) {
        kinds.push_back(as_config(key, line, [&] { return preconditioner_kind_from_string(item); }));
      }
    }
    cfg.precond = kinds;
  } else if (key == "unpreconditioned") {
    cfg.unpreconditioned = parse_bool(key, value, line);
  } else if (key == "subsolve") {
    cfg.subsolve = as_config(key, line, [&] { return subsolve_kind_from_string(value); });
  } else if (key == "smoother") {
    cfg.smoother = as_config(key, line, [&] { return smoother_from_string(value); });
  } else if (key == "tol") {
    cfg.tol = parse_double(key, value, line);
  } else if (key == "max-iter") {
    cfg.max_iter = parse_int(key, value, line);
  } else if (key == "mesh-convention") {
    cfg.convention = as_config(key, line, [&] { return mesh_convention_from_string(value); });
  } else if (key == "fov-angles") {
    cfg.fov_angles = parse_int(key, value, line);
  } else if (key == "t-final") {
    cfg.t_final = parse_double(key, value, line);
  } else if (key == "rhs") {
    if (value != "first-step" && value != "random") {
      throw ConfigError(key, line, "expected first-step or random, got '" + value + "'");
    }
    cfg.random_rhs = value == "random";
  } else if (key == "seed") {
    const int seed = parse_int(key, value, line);
    if (seed < 0) throw ConfigError(key, line, "seed must be nonnegative");
    cfg.seed = static_cast<unsigned>(seed);
  } else if (key == "jobs") {
    cfg.jobs = parse_int(key, value, line);
  } else if (key == "out") {
    cfg.out = value;
  } else if (key == "data-dir") {
    cfg.data_dir = value;
  } else if (key == "format") {
    cfg.format = as_config(key, line, [&] { return output_format_from_string(value); });
  } else {
    throw ConfigError(key, line, "unknown key");
  }
  if (line > 0) cfg.lines[key] = line;
}

ExperimentConfig parse_config(std::istream& is, ExperimentConfig base) {
  std::string raw;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    std::string_view text(raw);
    if (const auto hash = text.find('#'); hash != std::string_view::npos) text = text.substr(0, hash);
    text = trim(text);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) throw ConfigError(std::string(text), line, "expected key = value");
    apply_setting(base, text.substr(0, eq), text.substr(eq + 1), line);
  }
  return base;
}

void validate(const ExperimentConfig& cfg) {
  auto fail = [&](const std::string& field, const std::string& msg) {
    throw ConfigError(field, cfg.line_of(field), msg);
  };
  const int mu = problem_order(cfg.problem);
  if (cfg.stages.empty()) fail("stages", "at least one stage count is required");
  for (int s : cfg.stages) {
    if (s < 1 || s > 5) fail("stages", "stage counts must be in 1..5, got " + std::to_string(s));
  }
  const auto ks = cfg.effective_mesh_k();
  if (ks.empty()) fail("mesh-k", "at least one mesh exponent is required");
  for (int k : ks) {
    const int eff = cfg.mesh_convention() == MeshConvention::Nominal ? k - 1 : k;
    if (k < 1 || eff > 12) fail("mesh-k", "mesh exponent " + std::to_string(k) + " is out of range");
  }
  if (cfg.ht_rule && !cfg.ht.empty()) fail("ht", "an explicit h_t list and ht-rule are mutually exclusive");
  for (double h_t : cfg.ht) {
    if (!(h_t > 0.0)) fail("ht", "time steps must be positive");
  }
  if (cfg.command == Command::Mms && !cfg.ht.empty()) fail("ht", "mms always couples h_t to h by the rule");
  if (mu == 2 && cfg.family() != TableauKind::GaussLegendre) {
    fail("method", "second-order problems use the Gauss-Legendre Nystrom family");
  }
  if (!(cfg.tol > 0.0 && cfg.tol <= 1.0)) fail("tol", "tolerance must lie in (0, 1]");
  if (cfg.max_iter < 1) fail("max-iter", "must be at least 1");
  if (cfg.fov_angles < 8) fail("fov-angles", "must be at least 8");
  if (!(cfg.t_final > 0.0)) fail("t-final", "must be positive");
  if (cfg.jobs < 1 || cfg.jobs > 256) fail("jobs", "must be in 1..256");
  if (cfg.command == Command::Kappa) {
    const int s_max = *std::max_element(cfg.stages.begin(), cfg.stages.end());
    for (int k : ks) {
      const Index size = s_max * nodes_for(k, cfg.mesh_convention());
      if (size > kDenseGuard) {
        fail("mesh-k", "k=" + std::to_string(k) + " with s=" + std::to_string(s_max) + " gives system size " +
                           std::to_string(size) + " above the dense guard " + std::to_string(kDenseGuard));
      }
    }
  }
}

std::size_t Table::column(std::string_view name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw InvalidArgument("no column '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - columns.begin());
}

const Cell& Table::at(std::size_t row, std::string_view name) const { return rows.at(row).at(column(name)); }

std::vector<Row> run_ordered(const std::vector<std::function<std::vector<Row>()>>& tasks, int jobs) {
  std::vector<std::vector<Row>> results(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      try {
        results[i] = tasks[i]();
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(tasks.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<Row> rows;
  for (auto& r : results) {
    for (auto& row : r) rows.push_back(std::move(row));
  }
  return rows;
}

RunResult run_kappa(const ExperimentConfig& cfg) {
  Table table{"kappa", with_common({"preconditioner", "kappa", "status", "note"}), {}};
  const auto kinds = cfg.effective_precond();
  const auto meshes = prepare_meshes(cfg, true, false);
  const int mu = problem_order(cfg.problem);
  std::vector<std::function<std::vector<Row>()>> tasks;
  for (const auto& g : grid(cfg)) {
    tasks.push_back([&, g] {
      const MeshData& md = meshes.at(g.k);
      const StageOperator op = stage_operator(md.sys, g.tableau, g.h_t, mu);
      std::vector<Row> rows;
      for (const PreconditionerKind* kind : analysis_kinds(cfg, kinds)) {
        const DenseMatrix P = kind ? butcher_preconditioner_matrix(g.tableau, *kind) : DenseMatrix();
        Row row = common_cells(cfg, g);
        row.push_back(kind_name(kind));
        row.push_back(condition_number(op, kind ? &P : nullptr, md.basis.get()));
        row.push_back(std::string("ok"));
        row.push_back(std::string());
        rows.push_back(std::move(row));
      }
      return rows;
    });
  }
  return finish(std::move(table), run_ordered(tasks, cfg.jobs));
}

RunResult run_spectrum(const ExperimentConfig& cfg) {
  Table table{"spectrum",
              with_common({"preconditioner", "n_eigenvalues", "min_abs", "max_abs", "kappa", "file", "status", "note"}),
              {}};
  const auto kinds = cfg.effective_precond();
  const auto meshes = prepare_meshes(cfg, true, false);
  const int mu = problem_order(cfg.problem);
  std::vector<std::function<std::vector<Row>()>> tasks;
  for (const auto& g : grid(cfg)) {
    tasks.push_back([&, g] {
      std::vector<Row> rows;
      const bool skip = exceeds_guard(cfg, g);
      const MeshData& md = meshes.at(g.k);
      for (const PreconditionerKind* kind : analysis_kinds(cfg, kinds)) {
        Row row = common_cells(cfg, g);
        row.push_back(kind_name(kind));
        if (skip) {
          row.insert(row.end(), {Cell{}, Cell{}, Cell{}, Cell{}, std::string(), std::string("skipped"),
                                 guard_note(cfg, g)});
          rows.push_back(std::move(row));
          continue;
        }
        const StageOperator op = stage_operator(md.sys, g.tableau, g.h_t, mu);
        const DenseMatrix P = kind ? butcher_preconditioner_matrix(g.tableau, *kind) : DenseMatrix();
        const SpectrumResult sp = spectrum(op, kind ? &P : nullptr, md.basis.get());
        const std::string file = point_file_name(cfg, g, "spectrum", kind_name(kind));
        write_points(data_path(cfg, file), sp.eigenvalues);
        row.insert(row.end(), {static_cast<long long>(sp.eigenvalues.size()), sp.min_abs(), sp.max_abs(), sp.kappa,
                               file, std::string("ok"), std::string()});
        rows.push_back(std::move(row));
      }
      return rows;
    });
  }
  return finish(std::move(table), run_ordered(tasks, cfg.jobs));
}

RunResult run_fov(const ExperimentConfig& cfg) {
  Table table{"fov", with_common({"preconditioner", "n_angles", "min_distance", "file", "status", "note"}), {}};
  const auto kinds = cfg.effective_precond();
  const auto meshes = prepare_meshes(cfg, false, false);
  const int mu = problem_order(cfg.problem);
  std::vector<std::function<std::vector<Row>()>> tasks;
  for (const auto& g : grid(cfg)) {
    tasks.push_back([&, g] {
      std::vector<Row> rows;
      const bool skip = exceeds_guard(cfg, g);
      const MeshData& md = meshes.at(g.k);
      for (const PreconditionerKind* kind : analysis_kinds(cfg, kinds)) {
        Row row = common_cells(cfg, g);
        row.push_back(kind_name(kind));
        if (skip) {
          row.insert(row.end(), {static_cast<long long>(cfg.fov_angles), Cell{}, std::string(),
                                 std::string("skipped"), guard_note(cfg, g)});
          rows.push_back(std::move(row));
          continue;
        }
        const StageOperator op = stage_operator(md.sys, g.tableau, g.h_t, mu);
        const DenseMatrix P = kind ? butcher_preconditioner_matrix(g.tableau, *kind) : DenseMatrix();
        const FovResult fov = field_of_values(preconditioned_matrix(op, kind ? &P : nullptr), cfg.fov_angles);
        const std::string file = point_file_name(cfg, g, "fov", kind_name(kind));
        write_points(data_path(cfg, file), fov.boundary_points);
        row.insert(row.end(), {static_cast<long long>(cfg.fov_angles), fov.min_distance_to_origin, file,
                               std::string("ok"), std::string()});
        rows.push_back(std::move(row));
      }
      return rows;
    });
  }
  return finish(std::move(table), run_ordered(tasks, cfg.jobs));
}

RunResult run_gmres(const ExperimentConfig& cfg) {
  Table table{"gmres",
              with_common({"preconditioner", "subsolve", "smoother", "tol", "max_iter", "rhs", "seed", "iterations",
                           "converged", "time_s", "rel_residual", "true_rel_residual", "rel_error_linear",
                           "rel_error_pde", "status", "note"}),
              {}};
  const auto kinds = cfg.effective_precond();
  const auto meshes = prepare_meshes(cfg, false, true);
  const ProblemSpec problem = mms_problem(cfg.problem, cfg.preset());
  const int mu = problem.mu;
  std::vector<std::function<std::vector<Row>()>> tasks;
  for (const auto& g : grid(cfg)) {
    tasks.push_back([&, g] {
      const MeshData& md = meshes.at(g.k);
      const StageOperator op = stage_operator(md.sys, g.tableau, g.h_t, mu);
      const StepperState state = initial_state(md.mesh, problem, g.h_t);
      const Vector rhs = [&] {
        if (!cfg.random_rhs) return stage_rhs(state, g.tableau, md.sys, mu);
        std::mt19937 gen(cfg.seed);
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        Vector r(op.size());
        for (Index i = 0; i < r.size(); ++i) r[i] = dist(gen);
        return r;
      }();
      const Vector reference = reference_solve(op, rhs);
      const Vector exact_next =
          interpolate(md.mesh, [&](double x, double y) { return problem.exact(x, y, state.t + g.h_t); });
      const double exact_norm = mass_norm(*md.sys.M, exact_next);

      VCycleOptions vcycle;
      vcycle.smoother = cfg.smoother;
      GmresOptions opts;
      opts.tol = cfg.tol;
      opts.max_iter = cfg.max_iter;
      opts.reference = &reference;

      std::vector<Row> rows;
      for (const PreconditionerKind* kind : analysis_kinds(cfg, kinds)) {
        GmresResult res;
        if (kind) {
          const auto prec = BlockPreconditioner::build(g.tableau, *kind, md.sys.M, md.sys.F, g.h_t, mu,
                                                       cfg.subsolve, md.levels.get(), vcycle);
          res = gmres(op, prec, rhs, opts);
        } else {
          res = gmres([&](const Vector& x) { return op.apply(x); }, [](const Vector& x) { return x; }, rhs, opts);
        }
        const auto& rep = res.report;
        double pde_error = std::numeric_limits<double>::quiet_NaN();
        if (!cfg.random_rhs) {
          const StepperState next = complete_step(state, g.tableau, res.x);
          pde_error = mass_norm(*md.sys.M, next.u - exact_next) / exact_norm;
        }
        Row row = common_cells(cfg, g);
        row.insert(row.end(),
                   {kind_name(kind), std::string(to_string(cfg.subsolve)), std::string(to_string(cfg.smoother)),
                    cfg.tol, static_cast<long long>(cfg.max_iter),
                    std::string(cfg.random_rhs ? "random" : "first-step"), static_cast<long long>(cfg.seed),
                    static_cast<long long>(rep.iterations), rep.converged, rep.wall_time, rep.rel_residual,
                    rep.true_rel_residual,
                    rep.rel_error ? Cell{*rep.rel_error} : Cell{}, pde_error,
                    std::string(rep.converged ? "ok" : "not-converged"), std::string()});
        rows.push_back(std::move(row));
      }
      return rows;
    });
  }
  return finish(std::move(table), run_ordered(tasks, cfg.jobs));
}

RunResult run_mms(const ExperimentConfig& cfg) {
  Table table{"mms", with_common({"steps", "t_final", "l2_error", "rel_l2_error", "rate", "status", "note"}), {}};
  const ProblemSpec problem = mms_problem(cfg.problem, cfg.preset());
  const int mu = problem.mu;
  std::vector<std::function<std::vector<Row>()>> tasks;
  for (int k : cfg.effective_mesh_k()) {
    for (int s : cfg.stages) {
      tasks.push_back([&, k, s] {
        GridPoint g;
        g.s = s;
        g.k = k;
        g.h = std::ldexp(1.0, -k);
        g.tableau = tableau_for(cfg.family(), s, mu);
        const MmsResult r = irkprec::run_mms(problem, g.tableau, k, cfg.mesh_convention(), cfg.t_final);
        g.h_t = r.h_t;
        Row row = common_cells(cfg, g);
        row.insert(row.end(), {static_cast<long long>(r.steps), r.t_final, r.l2_error, r.rel_l2_error, Cell{},
                               std::string("ok"), std::string()});
        return std::vector<Row>{row};
      });
    }
  }
  RunResult res = finish(std::move(table), run_ordered(tasks, cfg.jobs));
  Table& t = res.table;
  const std::size_t cs = t.column("s"), ch = t.column("h"), ce = t.column("l2_error"), cr = t.column("rate");
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    for (std::size_t j = i; j-- > 0;) {
      if (std::get<long long>(t.rows[j][cs]) != std::get<long long>(t.rows[i][cs])) continue;
      const double e0 = std::get<double>(t.rows[j][ce]), e1 = std::get<double>(t.rows[i][ce]);
      const double h0 = std::get<double>(t.rows[j][ch]), h1 = std::get<double>(t.rows[i][ch]);
      t.rows[i][cr] = std::log(e0 / e1) / std::log(h0 / h1);
      break;
    }
  }
  return res;
}

RunResult run_export(const ExperimentConfig& cfg) {
  Table table{"export", with_common({"file_mass", "file_stiffness", "file_tableau", "file_rhs", "status", "note"}),
              {}};
  const auto meshes = prepare_meshes(cfg, false, false);
  const ProblemSpec problem = mms_problem(cfg.problem, cfg.preset());
  std::vector<std::function<std::vector<Row>()>> tasks;
  for (const auto& g : grid(cfg)) {
    tasks.push_back([&, g] {
      const MeshData& md = meshes.at(g.k);
      const std::string stem = std::string(to_string(cfg.problem)) + "_" + std::string(to_string(cfg.preset())) +
                               "_k" + std::to_string(g.k);
      const std::string point = stem + "_" + g.tableau.label() + "_ht" + ht_tag(g.h_t);
      const std::string fm = stem + "_mass.mtx", ff = stem + "_stiffness.mtx";
      const std::string ft = g.tableau.label() + (g.tableau.is_nystrom() ? "_nystrom" : "") + ".json";
      const std::string fr = point + "_rhs.mtx";
      {
        std::ofstream os(data_path(cfg, fm));
        write_matrix_market(os, *md.sys.M);
      }
      {
        std::ofstream os(data_path(cfg, ff));
        write_matrix_market(os, *md.sys.F);
      }
      {
        std::ofstream os(data_path(cfg, ft));
        os << tableau_to_json(g.tableau) << "\n";
      }
      {
        const StepperState state = initial_state(md.mesh, problem, g.h_t);
        const Vector rhs = stage_rhs(state, g.tableau, md.sys, problem.mu);
        std::ofstream os(data_path(cfg, fr));
        write_matrix_market(os, DenseMatrix(rhs));
      }
      Row row = common_cells(cfg, g);
      row.insert(row.end(), {fm, ff, ft, fr, std::string("ok"), std::string()});
      return std::vector<Row>{row};
    });
  }
  return finish(std::move(table), run_ordered(tasks, 1));
}

RunResult run(const ExperimentConfig& cfg) {
  validate(cfg);
  switch (cfg.command) {
    case Command::Kappa: return run_kappa(cfg);
    case Command::Spectrum: return run_spectrum(cfg);
    case Command::Fov: return run_fov(cfg);
    case Command::Gmres: return run_gmres(cfg);
    case Command::Mms: return run_mms(cfg);
    case Command::Export: return run_export(cfg);
  }
  return {};
}

void write_csv(std::ostream& os, const Table& table) {
  for (std::size_t c = 0; c < table.columns.size(); ++c) os << (c ? "," : "") << table.columns[c];
  os << "\n";
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << csv_escape(format_cell(row[c]));
    os << "\n";
  }
}

void write_json(std::ostream& os, const Table& table) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& row : table.rows) {
    nlohmann::ordered_json obj = nlohmann::ordered_json::object();
    for (std::size_t c = 0; c < row.size(); ++c) {
      std::visit(
          [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, std::monostate>) obj[table.columns[c]] = nullptr;
            else if constexpr (std::is_same_v<T, double>) {
              if (std::isfinite(v)) obj[table.columns[c]] = v;
              else obj[table.columns[c]] = nullptr;
            } else obj[table.columns[c]] = v;
          },
          row[c]);
    }
    arr.push_back(std::move(obj));
  }
  os << arr.dump(2) << "\n";
}

namespace {

std::string md_number(const Cell& c, int digits) {
  if (!std::holds_alternative<double>(c)) return format_cell(c);
  const double v = std::get<double>(c);
  if (std::isnan(v)) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string md_sci(const Cell& c) {
  if (!std::holds_alternative<double>(c) || std::isnan(std::get<double>(c))) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1e", std::get<double>(c));
  return buf;
}

std::string h_label(const Cell& k) { return "2^-" + std::to_string(std::get<long long>(k)); }

void write_flat_markdown(std::ostream& os, const Table& t) {
  os << "|";
  for (const auto& c : t.columns) os << " " << c << " |";
  os << "\n|";
  for (std::size_t i = 0; i < t.columns.size(); ++i) os << "---|";
  os << "\n";
  for (const auto& row : t.rows) {
    os << "|";
    for (const auto& c : row) os << " " << format_cell(c) << " |";
    os << "\n";
  }
}

// One block per (k, h_t group), one row per method, one column per kind.
void write_kappa_markdown(std::ostream& os, const Table& t) {
  const std::size_t ck = t.column("k"), cht = t.column("h_t"), cm = t.column("method"), cp = t.column("preconditioner"),
                    cv = t.column("kappa"), cs = t.column("s");
  std::vector<std::string> kinds;
  for (const auto& row : t.rows) {
    const auto& p = std::get<std::string>(row[cp]);
    if (std::find(kinds.begin(), kinds.end(), p) == kinds.end()) kinds.push_back(p);
  }
  auto header = [&] {
    os << "| method |";
    for (const auto& k : kinds) os << (k == "none" ? " kappa(A) |" : " kappa(P_" + k + "^-1 A) |");
    os << "\n|---|";
    for (std::size_t i = 0; i < kinds.size(); ++i) os << "---:|";
    os << "\n";
  };
  // A block is a run of rows with one k in which no stage count repeats.
  std::vector<std::vector<std::size_t>> blocks;
  std::set<long long> seen;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const long long k = std::get<long long>(t.rows[r][ck]), s = std::get<long long>(t.rows[r][cs]);
    const bool same_k = !blocks.empty() && std::get<long long>(t.rows[blocks.back().back()][ck]) == k;
    const bool same_s = !blocks.empty() && std::get<long long>(t.rows[blocks.back().back()][cs]) == s;
    if (!same_k || (!same_s && seen.count(s))) {
      blocks.emplace_back();
      seen.clear();
    }
    blocks.back().push_back(r);
    seen.insert(s);
  }
  for (const auto& block : blocks) {
    os << "\n**h = " << h_label(t.rows[block.front()][ck]) << "**";
    const double h_t = std::get<double>(t.rows[block.front()][cht]);
    const bool fixed = std::all_of(block.begin(), block.end(),
                                   [&](std::size_t r) { return std::get<double>(t.rows[r][cht]) == h_t; });
    if (fixed) os << ", h_t = " << format_double(h_t);
    os << "\n\n";
    header();
    std::size_t r = 0;
    while (r < block.size()) {
      const long long s = std::get<long long>(t.rows[block[r]][cs]);
      os << "| " << std::get<std::string>(t.rows[block[r]][cm]) << " |";
      std::map<std::string, std::string> vals;
      while (r < block.size() && std::get<long long>(t.rows[block[r]][cs]) == s) {
        vals[std::get<std::string>(t.rows[block[r]][cp])] = md_number(t.rows[block[r]][cv], 2);
        ++r;
      }
      for (const auto& kind : kinds) os << " " << (vals.count(kind) ? vals[kind] : "-") << " |";
      os << "\n";
    }
  }
}

// One row per (s, h), an it / t / err triple per kind.
void write_gmres_markdown(std::ostream& os, const Table& t) {
  const std::size_t cm = t.column("method"), ck = t.column("k"), cp = t.column("preconditioner"),
                    ci = t.column("iterations"), cc = t.column("converged"), ct = t.column("time_s"),
                    ce = t.column("rel_error_linear"), cs = t.column("s"), cht = t.column("h_t");
  std::vector<std::string> kinds;
  for (const auto& row : t.rows) {
    const auto& p = std::get<std::string>(row[cp]);
    if (std::find(kinds.begin(), kinds.end(), p) == kinds.end()) kinds.push_back(p);
  }
  struct Key {
    long long s, k;
    double h_t;
    bool operator<(const Key& o) const { return std::tie(s, k, h_t) < std::tie(o.s, o.k, o.h_t); }
  };
  std::map<Key, std::map<std::string, std::size_t>> cells;
  std::map<Key, std::string> method;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const Key key{std::get<long long>(t.rows[r][cs]), std::get<long long>(t.rows[r][ck]),
                  std::get<double>(t.rows[r][cht])};
    cells[key][std::get<std::string>(t.rows[r][cp])] = r;
    method[key] = std::get<std::string>(t.rows[r][cm]);
  }
  os << "| method | h |";
  for (const auto& k : kinds) os << " " << k << " it. | " << k << " t | " << k << " err |";
  os << "\n|---|---|";
  for (std::size_t i = 0; i < kinds.size(); ++i) os << "---:|---:|---:|";
  os << "\n";
  for (const auto& [key, by_kind] : cells) {
    os << "| " << method[key] << " | 2^-" << key.k << " |";
    for (const auto& kind : kinds) {
      const auto it = by_kind.find(kind);
      if (it == by_kind.end()) {
        os << " - | - | - |";
        continue;
      }
      const Row& row = t.rows[it->second];
      os << " " << std::get<long long>(row[ci]) << (std::get<bool>(row[cc]) ? "" : "*") << " | "
         << md_number(row[ct], 2) << " | " << md_sci(row[ce]) << " |";
    }
    os << "\n";
  }
}

}  // namespace

void write_markdown(std::ostream& os, const Table& table) {
  if (table.rows.empty()) {
    write_flat_markdown(os, table);
  } else if (table.name == "kappa") {
    write_kappa_markdown(os, table);
  } else if (table.name == "gmres") {
    write_gmres_markdown(os, table);
  } else {
    write_flat_markdown(os, table);
  }
}

void write_table(std::ostream& os, const Table& table, OutputFormat format) {
  switch (format) {
    case OutputFormat::Csv: write_csv(os, table); break;
    case OutputFormat::Json: write_json(os, table); break;
    case OutputFormat::Markdown: write_markdown(os, table); break;
  }
}

}  // namespace irkprec::cli
