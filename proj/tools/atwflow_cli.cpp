#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "atwflow/cli_io.hpp"

namespace {

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Anisotropic mean curvature flow by minimizing movements"};
  app.require_subcommand(1);

  std::string scenario, out, trace, checks, ladder, variant;
  int levels = 0;

  auto* run = app.add_subcommand("run", "Run the set flow of a scenario");
  run->add_option("--scenario", scenario, "Scenario JSON file")->required();
  run->add_option("--out", out, "Output directory")->required();

  auto* ls = app.add_subcommand("levelset", "Run the level-set scheme on a ladder of superlevel sets");
  ls->add_option("--scenario", scenario, "Scenario JSON file")->required();
  ls->add_option("--out", out, "Output directory")->required();
  auto* levels_opt = ls->add_option("--levels", levels, "Number of levels");
  ls->add_option("--variant", variant, "plus, minus or both")->check(CLI::IsMember({"plus", "minus", "both"}));

  auto* verify = app.add_subcommand("verify", "Check a stored trace");
  verify->add_option("--trace", trace, "Trace directory")->required();
  verify->add_option("--checks", checks, "Comma-separated checks; empty runs all");
  verify->add_option("--out", out, "Report directory (default: the trace directory)");

  auto* conv = app.add_subcommand("convergence", "Refinement study over a ladder of time steps");
  conv->add_option("--scenario", scenario, "Scenario JSON file")->required();
  conv->add_option("--ladder", ladder, "Decreasing time steps, e.g. 1e-3,5e-4,2.5e-4")->required();
  conv->add_option("--out", out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : atwflow::kExitInput;
  }

  if (run->parsed()) return atwflow::command_run(scenario, out, std::cout, std::cerr);
  if (ls->parsed()) {
    std::optional<int> m;
    if (levels_opt->count() > 0) m = levels;
    return atwflow::command_levelset(scenario, out, m, variant, std::cout, std::cerr);
  }
  if (verify->parsed()) return atwflow::command_verify(trace, split(checks), out, std::cout, std::cerr);
  std::vector<double> hs;
  for (const std::string& s : split(ladder)) {
    try {
      std::size_t used = 0;
      hs.push_back(std::stod(s, &used));
      if (used != s.size()) throw std::invalid_argument(s);
    } catch (const std::exception&) {
      std::cerr << "input error: --ladder: cannot parse '" << s << "'\n";
      return atwflow::kExitInput;
    }
  }
  return atwflow::command_convergence(scenario, hs, out, std::cout, std::cerr);
}
