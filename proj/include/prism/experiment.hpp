#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "prism/acquisition.hpp"
#include "prism/extraction.hpp"
#include "prism/metrics.hpp"

namespace prism {

// Which extracted series an experiment emits.
enum class extraction_variant { plain, normalized, extended, reconstruct };

// Artifacts one experiment run produces.  Every run writes only what is
// requested here, plus a manifest indexing the files it wrote.
struct output_request {
  bool record_csv = true;       // record.csv + record.json sidecar
  bool extraction_csv = false;  // extraction.csv in the selected variant
  extraction_variant variant = extraction_variant::plain;
  bool halve = false;                 // divide the differential by 2
  std::size_t normalized_window = 3;  // baseline smoother, `normalized` variant
  reconstruct_options reconstruct{};  // knobs for the `reconstruct` variant
  bool spectrum_csv = false;          // spectrum.csv of the plain differential
  bool metrics_json = false;          // metrics.json report
  std::optional<double> response_freq_hz;      // report the response at this tone
  std::vector<std::size_t> sensitivity_mask;   // non-empty: report sensitivity
  bool stability_map_csv = false;              // stability_map.csv on a sphere grid
  int stability_map_points = 2000;
  std::optional<suppression_sweep_config> suppression;  // suppression.csv
};

// One-parameter scan over rerun experiments.  `parameter` is a dotted path
// into the experiment's own JSON document (e.g. "protocol.flip_angle_deg");
// each value is substituted at that path and the mutated document is run
// into its own point_### subdirectory.  `shuffled` randomizes only the
// execution order (drift-mitigation practice); outputs are always indexed
// and named by sweep position, so results are order-independent.
struct sweep_request {
  std::string parameter;
  std::vector<double> values;
  bool shuffled = false;
};

struct experiment_spec {
  int version = 1;
  protocol_config protocol{};
  field_scenario scenario{};
  engine_mode mode{};
  output_request outputs{};
  std::optional<sweep_request> sweep;
  // Declares that a drive period detuned from two pulse cycles (an orbit
  // period override or frequency offset) is intentional; silences the
  // validation warning.
  bool orbit_offset_intended = false;
  // The JSON document this spec was parsed from; retained so sweeps can
  // substitute parameters and so artifacts can carry a config digest.
  std::string source_text;
};

// Parse a versioned JSON experiment document.  Unknown keys, wrong types,
// bad enum strings, and unsupported versions all throw parse_error carrying
// a 1-based line/column (located at the offending key where possible).
experiment_spec parse_experiment_text(const std::string& text);
experiment_spec load_experiment_file(const std::filesystem::path& path);

struct validation_report {
  std::vector<std::string> violations;  // the spec cannot run as written
  std::vector<std::string> warnings;    // runs, but looks unintended
  bool ok() const { return violations.empty(); }
};

// Report-only checks: configuration invariants (the same ones execution
// enforces) plus advisory warnings.  Every spec that runs cleanly validates
// with an empty violation list.
validation_report validate_experiment(const experiment_spec& spec);

struct run_options {
  run_options() = default;
  run_options(std::filesystem::path dir, int thread_count = 0)
      : out_dir(std::move(dir)), threads(thread_count) {}

  std::filesystem::path out_dir;
  int threads = 0;  // 0: PRISM_FORGE_THREADS env var, then hardware count
  std::optional<std::uint64_t> seed_override;               // scenario.rng_seed
  std::optional<std::filesystem::path> target_csv;          // replace the target
};

struct run_result {
  // Manifest-relative paths of everything written, sorted (the same list is
  // stored in manifest.json with content digests).
  std::vector<std::string> files;
};

// Execute a spec: run the engine if any requested artifact needs a record,
// derive the requested outputs, and write them plus manifest.json under
// opt.out_dir.  Specs with a sweep run every point (worker pool, see
// sweep_request) before the manifest is written.  All outputs are
// deterministic: identical spec + seed produce byte-identical files.
run_result run_experiment(const experiment_spec& spec, const run_options& opt);

// Standalone pipeline stages over an existing record (the `extract` and
// `metrics` subcommands).  They write only their own artifact files (no
// manifest).  run_metrics accepts a record-free request when only the
// synthetic suppression sweep is wanted.
run_result run_extract(const acquisition_record& rec, const output_request& outputs,
                       const std::filesystem::path& out_dir);
run_result run_metrics(const std::optional<acquisition_record>& rec,
                       const output_request& outputs, const std::filesystem::path& out_dir,
                       int threads = 0);

// Stability map of a protocol under a constant bias field, written as
// stability_map.csv (columns x,y,z,displacement1,displacement2).
run_result run_stability_map(const protocol_config& protocol, double bias_tesla, int points,
                             const std::filesystem::path& out_dir);

// Thread-count resolution chain: explicit request, then PRISM_FORGE_THREADS,
// then hardware concurrency (at least 1).
int resolve_threads(int requested);

}  // namespace prism
