#include "irkprec/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace {

struct FlagSpec {
  const char* key;
  const char* help;
};

constexpr FlagSpec kValueFlags[] = {
    {"command", "kappa, spectrum, fov, gmres, mms or export"},
    {"problem", "diffusion, pennes, wave or klein-gordon"},
    {"coeff", "constant or variable"},
    {"method", "radau-iia or gauss-legendre (default follows the problem)"},
    {"stages", "stage counts, e.g. 2,3,4,5 or 2..5"},
    {"mesh-k", "mesh exponents k with h = 2^-k"},
    {"ht", "explicit time steps, e.g. 5.0,0.5,0.005"},
    {"precond", "kinds from J,GSL,LD,DU,TRIU; 'all' or 'none'"},
    {"unpreconditioned", "include the unpreconditioned system (true/false)"},
    {"subsolve", "exact or vcycle"},
    {"smoother", "gauss-seidel or jacobi"},
    {"tol", "GMRES relative residual tolerance"},
    {"max-iter", "GMRES iteration limit"},
    {"mesh-convention", "nominal or element"},
    {"fov-angles", "number of rotation angles for the field of values"},
    {"t-final", "final time for mms"},
    {"rhs", "first-step or random"},
    {"seed", "seed for the random right-hand side"},
    {"jobs", "worker threads"},
    {"out", "output file (stdout when empty)"},
    {"data-dir", "directory for point clouds and exported matrices"},
    {"format", "csv, json or md"},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Block preconditioners for IRK and IRKN stage equations"};
  std::string config_path;
  app.add_option("--config", config_path, "key = value config file; flags override it")->check(CLI::ExistingFile);
  std::vector<std::pair<std::string, std::optional<std::string>>> values;
  values.reserve(std::size(kValueFlags));
  for (const auto& f : kValueFlags) {
    values.emplace_back(f.key, std::nullopt);
    app.add_option("--" + std::string(f.key), values.back().second, f.help);
  }
  bool ht_rule = false;
  app.add_flag("--ht-rule", ht_rule, "couple h_t to h by the order rule (the default)");
  CLI11_PARSE(app, argc, argv);

  using namespace irkprec::cli;
  ExperimentConfig cfg;
  try {
    if (!config_path.empty()) {
      std::ifstream is(config_path);
      cfg = parse_config(is);
    }
    for (const auto& [key, value] : values) {
      if (value) apply_setting(cfg, key, *value);
    }
    if (ht_rule) apply_setting(cfg, "ht-rule", "true");
    validate(cfg);
  } catch (const irkprec::InvalidArgument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }

  try {
    const RunResult res = run(cfg);
    for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
    if (cfg.out.empty()) {
      write_table(std::cout, res.table, cfg.format);
    } else {
      std::ofstream os(cfg.out);
      if (!os) {
        std::cerr << "cannot write " << cfg.out << "\n";
        return 1;
      }
      write_table(os, res.table, cfg.format);
    }
    return res.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
