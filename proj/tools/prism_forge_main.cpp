// prism-forge: batch front-end for the prethermal-orbit magnetometry
// simulator and its signal-processing pipeline.
//
// Exit codes: 0 success; 2 spec/input parse error (with line/column);
// 3 configuration or engine error (with diagnostic).

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "prism/errors.hpp"
#include "prism/experiment.hpp"
#include "prism/io.hpp"

namespace {

struct common_args {
  std::string spec_path;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
  std::string target_csv;
};

void add_run_options(CLI::App* cmd, common_args& args, bool spec_required) {
  auto* spec = cmd->add_option("--spec", args.spec_path, "experiment spec file (JSON)");
  if (spec_required) spec->required();
  cmd->add_option("--out", args.out_dir, "output directory (default: current)");
  cmd->add_option("--seed", args.seed, "override scenario.rng_seed")
      ->each([&args](const std::string&) { args.seed_set = true; });
  cmd->add_option("--threads", args.threads,
                  "worker threads (default: PRISM_FORGE_THREADS, then hardware)");
  cmd->add_option("--target-csv", args.target_csv,
                  "replace the target waveform with a sampled time_s,value table");
}

prism::run_options to_run_options(const common_args& args) {
  prism::run_options opt;
  opt.out_dir = args.out_dir;
  opt.threads = args.threads;
  if (args.seed_set) opt.seed_override = args.seed;
  if (!args.target_csv.empty()) opt.target_csv = args.target_csv;
  return opt;
}

void report_written(const prism::run_result& result, const std::string& out_dir) {
  std::cout << "wrote " << result.files.size() << " file(s) under " << out_dir << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "prism-forge: simulator and signal-processing toolkit for "
      "prethermal-orbit magnetometry records"};
  app.require_subcommand(1);

  common_args sim_args;
  auto* sim = app.add_subcommand(
      "simulate", "run one experiment spec and write the requested artifacts");
  add_run_options(sim, sim_args, true);

  common_args sweep_args;
  auto* sweep = app.add_subcommand(
      "sweep", "run a spec's parameter sweep, one point_### directory per value");
  add_run_options(sweep, sweep_args, true);

  common_args val_args;
  auto* val = app.add_subcommand("validate", "check a spec without executing it");
  val->add_option("--spec", val_args.spec_path, "experiment spec file (JSON)")->required();

  common_args ext_args;
  std::string ext_input;
  std::string ext_variant = "plain";
  bool ext_halve = false;
  long long ext_smooth_window = 3;
  long long ext_envelope_window = 100;
  long long ext_baseline_window = 2000;
  auto* ext = app.add_subcommand("extract",
                                 "derive a differential/reconstruction series from a record CSV");
  ext->add_option("--input", ext_input, "record CSV (time_s,mx,my,frame)")->required();
  ext->add_option("--out", ext_args.out_dir, "output directory (default: current)");
  ext->add_option("--variant", ext_variant, "plain|normalized|extended|reconstruct");
  ext->add_flag("--halve", ext_halve, "divide the differential by 2");
  ext->add_option("--smooth-window", ext_smooth_window,
                  "normalized variant: baseline smoothing window (odd, >= 3)");
  ext->add_option("--envelope-window", ext_envelope_window,
                  "reconstruct variant: per-frame envelope smoothing window");
  ext->add_option("--baseline-window", ext_baseline_window,
                  "reconstruct variant: amplitude-baseline window");

  common_args met_args;
  std::string met_input;
  double met_response_freq = 0.0;
  bool met_response_set = false;
  bool met_spectrum = false;
  auto* met = app.add_subcommand(
      "metrics", "metric reports from a record CSV and/or a spec's synthetic sweeps");
  met->add_option("--spec", met_args.spec_path, "experiment spec file (JSON)");
  met->add_option("--input", met_input, "record CSV (time_s,mx,my,frame)");
  met->add_option("--out", met_args.out_dir, "output directory (default: current)");
  met->add_option("--threads", met_args.threads, "worker threads for synthetic sweeps");
  met->add_option("--response-freq", met_response_freq, "report the response at this tone (Hz)")
      ->each([&met_response_set](const std::string&) { met_response_set = true; });
  met->add_flag("--spectrum", met_spectrum, "also write spectrum.csv of the differential");

  common_args map_args;
  int map_points = 0;
  auto* map = app.add_subcommand(
      "stability-map", "per-direction one-cycle displacement map of a spec's protocol");
  map->add_option("--spec", map_args.spec_path, "experiment spec file (JSON)")->required();
  map->add_option("--out", map_args.out_dir, "output directory (default: current)");
  map->add_option("--points", map_points, "sphere-grid size (default: spec value)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      const prism::experiment_spec spec = prism::load_experiment_file(sim_args.spec_path);
      report_written(prism::run_experiment(spec, to_run_options(sim_args)), sim_args.out_dir);
    } else if (sweep->parsed()) {
      const prism::experiment_spec spec = prism::load_experiment_file(sweep_args.spec_path);
      if (!spec.sweep) {
        throw prism::contract_error("spec has no sweep section (use `simulate`)");
      }
      report_written(prism::run_experiment(spec, to_run_options(sweep_args)),
                     sweep_args.out_dir);
    } else if (val->parsed()) {
      const prism::experiment_spec spec = prism::load_experiment_file(val_args.spec_path);
      const prism::validation_report rep = prism::validate_experiment(spec);
      if (rep.violations.empty()) {
        std::cout << "spec OK";
        if (spec.sweep) std::cout << " (sweep over " << spec.sweep->values.size() << " values)";
        std::cout << "\n";
      } else {
        std::cout << rep.violations.size() << " violation(s):\n";
        for (const std::string& v : rep.violations) std::cout << "  violation: " << v << "\n";
      }
      for (const std::string& w : rep.warnings) std::cout << "  warning: " << w << "\n";
    } else if (ext->parsed()) {
      const prism::acquisition_record rec =
          prism::io::record_from_csv(prism::io::read_file(ext_input));
      prism::output_request outputs;
      outputs.extraction_csv = true;
      if (ext_variant == "plain") {
        outputs.variant = prism::extraction_variant::plain;
      } else if (ext_variant == "normalized") {
        outputs.variant = prism::extraction_variant::normalized;
      } else if (ext_variant == "extended") {
        outputs.variant = prism::extraction_variant::extended;
      } else if (ext_variant == "reconstruct") {
        outputs.variant = prism::extraction_variant::reconstruct;
      } else {
        throw prism::contract_error("--variant '" + ext_variant +
                                    "': expected plain|normalized|extended|reconstruct");
      }
      outputs.halve = ext_halve;
      outputs.normalized_window = static_cast<std::size_t>(ext_smooth_window);
      outputs.reconstruct.envelope_window = static_cast<std::size_t>(ext_envelope_window);
      outputs.reconstruct.baseline_window = static_cast<std::size_t>(ext_baseline_window);
      report_written(prism::run_extract(rec, outputs, ext_args.out_dir), ext_args.out_dir);
    } else if (met->parsed()) {
      prism::output_request outputs;
      outputs.record_csv = false;
      if (!met_args.spec_path.empty()) {
        outputs = prism::load_experiment_file(met_args.spec_path).outputs;
      }
      outputs.metrics_json = true;
      if (met_response_set) outputs.response_freq_hz = met_response_freq;
      if (met_spectrum) outputs.spectrum_csv = true;
      std::optional<prism::acquisition_record> rec;
      if (!met_input.empty()) {
        rec = prism::io::record_from_csv(prism::io::read_file(met_input));
      }
      report_written(prism::run_metrics(rec, outputs, met_args.out_dir, met_args.threads),
                     met_args.out_dir);
    } else if (map->parsed()) {
      const prism::experiment_spec spec = prism::load_experiment_file(map_args.spec_path);
      const int points = map_points > 0 ? map_points : spec.outputs.stability_map_points;
      report_written(prism::run_stability_map(spec.protocol, spec.scenario.bias, points,
                                              map_args.out_dir),
                     map_args.out_dir);
    }
    return 0;
  } catch (const prism::parse_error& e) {
    std::cerr << "parse error";
    if (e.line > 0) std::cerr << " at line " << e.line << ", column " << e.column;
    std::cerr << ": " << e.what() << "\n";
    return 2;
  } catch (const prism::engine_error& e) {
    std::cerr << "engine error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
