// agcsim: multi-area frequency-dynamics and AGC analysis tool.
//
// Exit codes: 0 success, 1 usage or input errors, 2 infeasible configuration
// (load deviation outside the attainable secondary response), 3 numerical
// failure (diverged integration or non-convergent equilibrium solve).

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "agc/commands.hpp"
#include "agc/types.hpp"

namespace {

std::optional<agc::AgcVariant> parse_variant(const std::string& name) {
  if (name.empty()) return std::nullopt;
  return name == "textbook" ? agc::AgcVariant::Textbook : agc::AgcVariant::Simplified;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-area frequency dynamics and AGC analysis"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::string out_dir;
  std::string variant_name;
  double exclusion_s = 30.0;
  int jobs = 1;
  std::string experiment_name;
  std::vector<std::string> sections;

  auto add_common = [&](CLI::App* cmd, bool needs_scenario) {
    if (needs_scenario)
      cmd->add_option("--scenario", scenario_path, "scenario JSON file")->required();
    cmd->add_option("--out", out_dir,
                    "output directory (default: the scenario's output.directory)");
    cmd->add_option("--variant", variant_name, "controller variant override")
        ->check(CLI::IsMember({"simplified", "textbook"}));
  };

  CLI::App* simulate = app.add_subcommand("simulate", "integrate the full model");
  add_common(simulate, true);

  CLI::App* reduce = app.add_subcommand("reduce", "integrate the reduced model");
  add_common(reduce, true);

  CLI::App* compare = app.add_subcommand("compare", "run both models and compare");
  add_common(compare, true);
  compare->add_option("--exclusion-s", exclusion_s,
                      "blanking window after each disturbance, seconds");

  CLI::App* analyze = app.add_subcommand("analyze", "coupling, spectrum, and gain analysis");
  add_common(analyze, true);
  analyze
      ->add_option("--sections", sections,
                   "report sections: eig, bode, peak, matrices, steady_state (default: all)")
      ->delimiter(',');

  CLI::App* experiment =
      app.add_subcommand("experiment", "run a bundled multi-tuning experiment");
  experiment->add_option("name", experiment_name, "experiment bundle: two-area (alias: paper)")
      ->required()
      ->check(CLI::IsMember({"two-area", "paper"}));
  add_common(experiment, false);
  experiment->add_option("--exclusion-s", exclusion_s,
                         "blanking window after each disturbance, seconds");
  experiment->add_option("--jobs", jobs, "worker threads across tunings")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  const agc::CommonArgs args{scenario_path, out_dir, parse_variant(variant_name)};
  try {
    if (simulate->parsed())
      agc::run_simulate(args);
    else if (reduce->parsed())
      agc::run_reduce(args);
    else if (compare->parsed())
      agc::run_compare(args, exclusion_s);
    else if (analyze->parsed())
      agc::run_analyze(args, sections);
    else if (experiment->parsed())
      agc::run_experiment(out_dir, args.variant, exclusion_s, jobs);
  } catch (const agc::InfeasibleError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const agc::NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
