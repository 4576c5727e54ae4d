#include "prism/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numeric>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "prism/errors.hpp"
#include "prism/io.hpp"
#include "prism/rng.hpp"

namespace prism {

namespace {

using njson = nlohmann::json;

// ---------------------------------------------------------------------------
// Error locations

std::pair<int, int> line_col_at(const std::string& text, std::size_t byte) {
  int line = 1, column = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

struct parse_ctx {
  const std::string& text;
};

// Schema problems are reported at the first occurrence of the offending key
// in the document (good enough to jump an editor to the right place).
[[noreturn]] void fail_key(const parse_ctx& ctx, const std::string& key, const std::string& msg) {
  int line = 1, column = 1;
  const std::size_t pos = ctx.text.find('"' + key + '"');
  if (pos != std::string::npos) std::tie(line, column) = line_col_at(ctx.text, pos);
  throw parse_error(msg, line, column);
}

// ---------------------------------------------------------------------------
// Typed field access

const njson* find(const njson& obj, const char* key) {
  const auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

void check_keys(const parse_ctx& ctx, const njson& obj, const std::string& where,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) fail_key(ctx, where, where + " must be a JSON object");
  for (const auto& item : obj.items()) {
    const std::string& key = item.key();
    if (std::find_if(allowed.begin(), allowed.end(),
                     [&](const char* a) { return key == a; }) == allowed.end()) {
      fail_key(ctx, key, "unknown key '" + where + "." + key + "'");
    }
  }
}

double get_num(const parse_ctx& ctx, const njson& obj, const std::string& where, const char* key,
               double fallback) {
  const njson* j = find(obj, key);
  if (!j) return fallback;
  if (!j->is_number()) fail_key(ctx, key, where + "." + key + " must be a number");
  return j->get<double>();
}

bool get_bool(const parse_ctx& ctx, const njson& obj, const std::string& where, const char* key,
              bool fallback) {
  const njson* j = find(obj, key);
  if (!j) return fallback;
  if (!j->is_boolean()) fail_key(ctx, key, where + "." + key + " must be true or false");
  return j->get<bool>();
}

long long get_int(const parse_ctx& ctx, const njson& obj, const std::string& where,
                  const char* key, long long fallback) {
  const njson* j = find(obj, key);
  if (!j) return fallback;
  if (j->is_number_integer()) return j->get<long long>();
  if (j->is_number_float()) {
    const double v = j->get<double>();
    if (std::trunc(v) == v) return static_cast<long long>(v);
  }
  fail_key(ctx, key, where + "." + key + " must be an integer");
}

std::uint64_t get_u64(const parse_ctx& ctx, const njson& obj, const std::string& where,
                      const char* key, std::uint64_t fallback) {
  const njson* j = find(obj, key);
  if (!j) return fallback;
  if (j->is_number_unsigned()) return j->get<std::uint64_t>();
  const long long v = j->is_number_integer() ? j->get<long long>() : -1;
  if (v >= 0) return static_cast<std::uint64_t>(v);
  if (j->is_number_float() && std::trunc(j->get<double>()) == j->get<double>() &&
      j->get<double>() >= 0) {
    return static_cast<std::uint64_t>(j->get<double>());
  }
  fail_key(ctx, key, where + "." + key + " must be a non-negative integer");
}

std::string get_str(const parse_ctx& ctx, const njson& obj, const std::string& where,
                    const char* key, const std::string& fallback) {
  const njson* j = find(obj, key);
  if (!j) return fallback;
  if (!j->is_string()) fail_key(ctx, key, where + "." + key + " must be a string");
  return j->get<std::string>();
}

std::vector<double> get_num_array(const parse_ctx& ctx, const njson& j, const std::string& where) {
  if (!j.is_array()) fail_key(ctx, where, where + " must be an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& e : j) {
    if (!e.is_number()) fail_key(ctx, where, where + " must contain only numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Section materializers

sample_table parse_table(const parse_ctx& ctx, const njson& j, const std::string& where,
                         const char* tkey, const char* vkey) {
  check_keys(ctx, j, where, {tkey, vkey});
  const njson* t = find(j, tkey);
  const njson* v = find(j, vkey);
  if (!t || !v) fail_key(ctx, where, where + " needs both '" + tkey + "' and '" + vkey + "'");
  sample_table table;
  table.t = get_num_array(ctx, *t, where + "." + tkey);
  table.v = get_num_array(ctx, *v, where + "." + vkey);
  return table;
}

waveform::kind parse_waveform_kind(const parse_ctx& ctx, const std::string& s,
                                   const std::string& where) {
  if (s == "none") return waveform::kind::none;
  if (s == "sine") return waveform::kind::sine;
  if (s == "square") return waveform::kind::square;
  if (s == "triangle_fm") return waveform::kind::triangle_fm;
  if (s == "swish") return waveform::kind::swish;
  if (s == "table") return waveform::kind::table;
  fail_key(ctx, "kind", where + ".kind '" + s +
                            "': expected none|sine|square|triangle_fm|swish|table");
}

waveform parse_waveform(const parse_ctx& ctx, const njson& j, const std::string& where) {
  check_keys(ctx, j, where,
             {"kind", "amplitude_t", "frequency_hz", "phase_rad", "fm_deviation_hz",
              "fm_rate_hz", "sweep_from_hz", "sweep_to_hz", "table"});
  waveform w;
  w.k = parse_waveform_kind(ctx, get_str(ctx, j, where, "kind", "none"), where);
  w.amplitude = get_num(ctx, j, where, "amplitude_t", 0.0);
  w.frequency = get_num(ctx, j, where, "frequency_hz", 0.0);
  w.phase = get_num(ctx, j, where, "phase_rad", 0.0);
  w.fm_deviation = get_num(ctx, j, where, "fm_deviation_hz", 0.0);
  w.fm_rate = get_num(ctx, j, where, "fm_rate_hz", 0.0);
  w.sweep_from = get_num(ctx, j, where, "sweep_from_hz", 0.0);
  w.sweep_to = get_num(ctx, j, where, "sweep_to_hz", 0.0);
  if (const njson* t = find(j, "table")) {
    w.table = parse_table(ctx, *t, where + ".table", "time_s", "value");
  }
  return w;
}

background_spec parse_background(const parse_ctx& ctx, const njson& j, const std::string& where) {
  check_keys(ctx, j, where,
             {"modulation", "carrier_offset_hz", "amplitude", "phase_rad", "fm_deviation_hz",
              "fm_rate_hz", "sweep_max_hz"});
  background_spec b;
  const std::string mod = get_str(ctx, j, where, "modulation", "none");
  if (mod == "none") {
    b.mod = background_spec::modulation::none;
  } else if (mod == "triangular_fm") {
    b.mod = background_spec::modulation::triangular_fm;
  } else if (mod == "swish") {
    b.mod = background_spec::modulation::swish;
  } else {
    fail_key(ctx, "modulation",
             where + ".modulation '" + mod + "': expected none|triangular_fm|swish");
  }
  b.carrier_offset = get_num(ctx, j, where, "carrier_offset_hz", 0.0);
  b.amplitude = get_num(ctx, j, where, "amplitude", 0.0);
  b.phase = get_num(ctx, j, where, "phase_rad", 0.0);
  b.fm_deviation = get_num(ctx, j, where, "fm_deviation_hz", 0.0);
  b.fm_rate = get_num(ctx, j, where, "fm_rate_hz", 0.0);
  b.sweep_max = get_num(ctx, j, where, "sweep_max_hz", 0.0);
  return b;
}

vibration_spec parse_vibration(const parse_ctx& ctx, const njson& j, const std::string& where) {
  check_keys(ctx, j, where,
             {"amplitude_m", "frequency_hz", "phase_rad", "trajectory", "coil", "b1_profile",
              "travel_limit_m"});
  vibration_spec v;
  v.amplitude = get_num(ctx, j, where, "amplitude_m", 0.0);
  v.frequency = get_num(ctx, j, where, "frequency_hz", 0.0);
  v.phase = get_num(ctx, j, where, "phase_rad", 0.0);
  v.travel_limit = get_num(ctx, j, where, "travel_limit_m", v.travel_limit);
  if (const njson* t = find(j, "trajectory")) {
    v.trajectory = parse_table(ctx, *t, where + ".trajectory", "time_s", "value");
  }
  if (const njson* c = find(j, "coil")) {
    const std::string cw = where + ".coil";
    check_keys(ctx, *c, cw, {"radius_m", "turns", "current_scale"});
    v.coil.radius = get_num(ctx, *c, cw, "radius_m", v.coil.radius);
    v.coil.turns = static_cast<int>(get_int(ctx, *c, cw, "turns", v.coil.turns));
    v.coil.current_scale = get_num(ctx, *c, cw, "current_scale", v.coil.current_scale);
  }
  if (const njson* p = find(j, "b1_profile")) {
    v.b1_profile = parse_table(ctx, *p, where + ".b1_profile", "z_m", "value");
  }
  return v;
}

protocol_config parse_protocol(const parse_ctx& ctx, const njson& j) {
  const std::string where = "protocol";
  check_keys(ctx, j, where,
             {"pulse_duration_s", "spacing_s", "flip_angle_deg", "detuning_hz",
              "orbit_rate_deg_per_100us", "orbit_phase_rad", "orbit_period_s",
              "orbit_freq_offset_hz", "calibration_duration_s", "segments_per_pulse",
              "acquisition_offset_s", "acquisition_length_s"});
  protocol_config p;
  p.pulse_duration = get_num(ctx, j, where, "pulse_duration_s", p.pulse_duration);
  p.spacing = get_num(ctx, j, where, "spacing_s", p.spacing);
  p.flip_angle =
      get_num(ctx, j, where, "flip_angle_deg", p.flip_angle * 180.0 / M_PI) * M_PI / 180.0;
  p.detuning = 2.0 * M_PI * get_num(ctx, j, where, "detuning_hz", 0.0);
  p.orbit_amplitude = rate_from_deg_per_100us(
      get_num(ctx, j, where, "orbit_rate_deg_per_100us", 18.0));
  if (find(j, "orbit_phase_rad")) {
    p.orbit_phase = get_num(ctx, j, where, "orbit_phase_rad", 0.0);
  }
  p.orbit_period = get_num(ctx, j, where, "orbit_period_s", p.orbit_period);
  p.orbit_freq_offset = get_num(ctx, j, where, "orbit_freq_offset_hz", p.orbit_freq_offset);
  p.calibration_duration =
      get_num(ctx, j, where, "calibration_duration_s", p.calibration_duration);
  p.segments_per_pulse =
      static_cast<int>(get_int(ctx, j, where, "segments_per_pulse", p.segments_per_pulse));
  p.acquisition_offset = get_num(ctx, j, where, "acquisition_offset_s", p.acquisition_offset);
  p.acquisition_length = get_num(ctx, j, where, "acquisition_length_s", p.acquisition_length);
  return p;
}

engine_mode parse_engine(const parse_ctx& ctx, const njson& j) {
  const std::string where = "engine";
  check_keys(ctx, j, where, {"mode", "n_eq_cycles"});
  engine_mode m;
  const std::string mode = get_str(ctx, j, where, "mode", "geometric");
  if (mode == "geometric") {
    m.k = engine_mode::kind::geometric;
  } else if (mode == "dynamic") {
    m.k = engine_mode::kind::dynamic;
  } else {
    fail_key(ctx, "mode", "engine.mode '" + mode + "': expected geometric|dynamic");
  }
  m.n_eq = get_num(ctx, j, where, "n_eq_cycles", m.n_eq);
  return m;
}

field_scenario parse_scenario(const parse_ctx& ctx, const njson& j) {
  const std::string where = "scenario";
  check_keys(ctx, j, where,
             {"duration_s", "magnetization0", "noise_sigma", "rng_seed", "bias_t", "bias_table",
              "target", "backgrounds", "vibration", "decay"});
  field_scenario s;
  s.duration = get_num(ctx, j, where, "duration_s", s.duration);
  s.magnetization0 = get_num(ctx, j, where, "magnetization0", s.magnetization0);
  s.noise_sigma = get_num(ctx, j, where, "noise_sigma", s.noise_sigma);
  s.rng_seed = get_u64(ctx, j, where, "rng_seed", s.rng_seed);
  s.bias = get_num(ctx, j, where, "bias_t", s.bias);
  if (const njson* t = find(j, "bias_table")) {
    s.bias_table = parse_table(ctx, *t, "scenario.bias_table", "time_s", "value");
  }
  if (const njson* t = find(j, "target")) {
    s.target = parse_waveform(ctx, *t, "scenario.target");
  }
  if (const njson* b = find(j, "backgrounds")) {
    if (!b->is_array()) fail_key(ctx, "backgrounds", "scenario.backgrounds must be an array");
    int i = 0;
    for (const auto& e : *b) {
      s.backgrounds.push_back(
          parse_background(ctx, e, "scenario.backgrounds[" + std::to_string(i) + "]"));
      ++i;
    }
  }
  if (const njson* v = find(j, "vibration")) {
    s.vibration = parse_vibration(ctx, *v, "scenario.vibration");
  }
  if (const njson* d = find(j, "decay")) {
    const std::string dw = "scenario.decay";
    check_keys(ctx, *d, dw, {"r_p_per_s", "r_d_per_s"});
    s.decay.r_p = get_num(ctx, *d, dw, "r_p_per_s", 0.0);
    s.decay.r_d = get_num(ctx, *d, dw, "r_d_per_s", 0.0);
  }
  return s;
}

output_request parse_outputs(const parse_ctx& ctx, const njson& j) {
  const std::string where = "outputs";
  check_keys(ctx, j, where,
             {"record_csv", "extraction_csv", "variant", "halve", "normalized_window",
              "envelope_window", "baseline_window", "prominence_fraction",
              "rotation_phase_hint", "smoother", "spectrum_csv", "metrics_json",
              "response_freq_hz", "sensitivity_mask_bins", "stability_map_csv",
              "stability_map_points", "suppression"});
  output_request o;
  o.record_csv = get_bool(ctx, j, where, "record_csv", o.record_csv);
  o.extraction_csv = get_bool(ctx, j, where, "extraction_csv", o.extraction_csv);
  const std::string variant = get_str(ctx, j, where, "variant", "plain");
  if (variant == "plain") {
    o.variant = extraction_variant::plain;
  } else if (variant == "normalized") {
    o.variant = extraction_variant::normalized;
  } else if (variant == "extended") {
    o.variant = extraction_variant::extended;
  } else if (variant == "reconstruct") {
    o.variant = extraction_variant::reconstruct;
  } else {
    fail_key(ctx, "variant", "outputs.variant '" + variant +
                                 "': expected plain|normalized|extended|reconstruct");
  }
  o.halve = get_bool(ctx, j, where, "halve", o.halve);
  o.normalized_window = static_cast<std::size_t>(
      get_int(ctx, j, where, "normalized_window", static_cast<long long>(o.normalized_window)));
  o.reconstruct.envelope_window = static_cast<std::size_t>(get_int(
      ctx, j, where, "envelope_window", static_cast<long long>(o.reconstruct.envelope_window)));
  o.reconstruct.baseline_window = static_cast<std::size_t>(get_int(
      ctx, j, where, "baseline_window", static_cast<long long>(o.reconstruct.baseline_window)));
  o.reconstruct.prominence_fraction =
      get_num(ctx, j, where, "prominence_fraction", o.reconstruct.prominence_fraction);
  o.reconstruct.rotation_phase_hint = static_cast<int>(
      get_int(ctx, j, where, "rotation_phase_hint", o.reconstruct.rotation_phase_hint));
  const std::string smoother = get_str(ctx, j, where, "smoother", "moving_average");
  if (smoother == "moving_average") {
    o.reconstruct.smoother = smoother_kind::moving_average;
  } else if (smoother == "quadratic_local") {
    o.reconstruct.smoother = smoother_kind::quadratic_local;
  } else {
    fail_key(ctx, "smoother",
             "outputs.smoother '" + smoother + "': expected moving_average|quadratic_local");
  }
  o.spectrum_csv = get_bool(ctx, j, where, "spectrum_csv", o.spectrum_csv);
  o.metrics_json = get_bool(ctx, j, where, "metrics_json", o.metrics_json);
  if (find(j, "response_freq_hz")) {
    o.response_freq_hz = get_num(ctx, j, where, "response_freq_hz", 0.0);
  }
  if (const njson* m = find(j, "sensitivity_mask_bins")) {
    if (!m->is_array()) {
      fail_key(ctx, "sensitivity_mask_bins",
               "outputs.sensitivity_mask_bins must be an array of bin indices");
    }
    for (const auto& e : *m) {
      if (!e.is_number_integer() || e.get<long long>() < 0) {
        fail_key(ctx, "sensitivity_mask_bins",
                 "outputs.sensitivity_mask_bins must contain non-negative integers");
      }
      o.sensitivity_mask.push_back(static_cast<std::size_t>(e.get<long long>()));
    }
  }
  o.stability_map_csv = get_bool(ctx, j, where, "stability_map_csv", o.stability_map_csv);
  o.stability_map_points = static_cast<int>(
      get_int(ctx, j, where, "stability_map_points", o.stability_map_points));
  if (const njson* sj = find(j, "suppression")) {
    const std::string sw = "outputs.suppression";
    check_keys(ctx, *sj, sw,
               {"raw_rate_hz", "duration_s", "f_signal_hz", "signal_amplitude",
                "signal_phase_rad", "bg_amplitude", "bg_phase_rad", "f_min_hz", "f_max_hz",
                "f_step_hz"});
    suppression_sweep_config c;
    c.raw_rate = get_num(ctx, *sj, sw, "raw_rate_hz", c.raw_rate);
    c.duration = get_num(ctx, *sj, sw, "duration_s", c.duration);
    c.f_signal = get_num(ctx, *sj, sw, "f_signal_hz", c.f_signal);
    c.signal_amplitude = get_num(ctx, *sj, sw, "signal_amplitude", c.signal_amplitude);
    c.signal_phase = get_num(ctx, *sj, sw, "signal_phase_rad", c.signal_phase);
    c.bg_amplitude = get_num(ctx, *sj, sw, "bg_amplitude", c.bg_amplitude);
    c.bg_phase = get_num(ctx, *sj, sw, "bg_phase_rad", c.bg_phase);
    c.f_min = get_num(ctx, *sj, sw, "f_min_hz", c.f_min);
    c.f_max = get_num(ctx, *sj, sw, "f_max_hz", c.f_max);
    c.f_step = get_num(ctx, *sj, sw, "f_step_hz", c.f_step);
    o.suppression = c;
  }
  return o;
}

sweep_request parse_sweep(const parse_ctx& ctx, const njson& j) {
  const std::string where = "sweep";
  check_keys(ctx, j, where, {"parameter", "values", "order"});
  sweep_request s;
  s.parameter = get_str(ctx, j, where, "parameter", "");
  if (s.parameter.empty()) fail_key(ctx, "parameter", "sweep.parameter is required");
  const njson* values = find(j, "values");
  if (!values) fail_key(ctx, "values", "sweep.values is required");
  if (values->is_array()) {
    s.values = get_num_array(ctx, *values, "sweep.values");
  } else if (values->is_object()) {
    const std::string vw = "sweep.values";
    check_keys(ctx, *values, vw, {"from", "to", "step"});
    const double from = get_num(ctx, *values, vw, "from", 0.0);
    const double to = get_num(ctx, *values, vw, "to", 0.0);
    const double step = get_num(ctx, *values, vw, "step", 0.0);
    if (!(step > 0.0) || !std::isfinite(step)) {
      fail_key(ctx, "step", "sweep.values.step must be > 0");
    }
    if (to < from) fail_key(ctx, "to", "sweep.values.to must be >= from");
    const long long count = std::llround((to - from) / step) + 1;
    for (long long i = 0; i < count; ++i) {
      s.values.push_back(from + static_cast<double>(i) * step);
    }
  } else {
    fail_key(ctx, "values", "sweep.values must be an array or a from/to/step object");
  }
  if (s.values.empty()) fail_key(ctx, "values", "sweep.values must not be empty");
  const std::string order = get_str(ctx, j, where, "order", "given");
  if (order == "given") {
    s.shuffled = false;
  } else if (order == "shuffled") {
    s.shuffled = true;
  } else {
    fail_key(ctx, "order", "sweep.order '" + order + "': expected given|shuffled");
  }
  return s;
}

// ---------------------------------------------------------------------------
// Dotted-path navigation inside the spec document (sweep substitution)

njson* navigate(njson& doc, const std::string& dotted) {
  njson* cur = &doc;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = dotted.find('.', start);
    const std::string key =
        dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) return nullptr;
    if (cur->is_array()) {
      if (key.find_first_not_of("0123456789") != std::string::npos) return nullptr;
      const std::size_t idx = std::strtoull(key.c_str(), nullptr, 10);
      if (idx >= cur->size()) return nullptr;
      cur = &(*cur)[idx];
    } else if (cur->is_object()) {
      const auto it = cur->find(key);
      if (it == cur->end()) return nullptr;
      cur = &*it;
    } else {
      return nullptr;
    }
    if (dot == std::string::npos) return cur;
    start = dot + 1;
  }
}

// ---------------------------------------------------------------------------
// Output-parameter checks shared by validation and execution

std::vector<std::string> output_request_violations(const output_request& o,
                                                   const protocol_config& protocol) {
  std::vector<std::string> v;
  if (o.extraction_csv && o.variant == extraction_variant::normalized) {
    if (o.normalized_window < 3 || o.normalized_window % 2 == 0) {
      v.push_back("outputs.normalized_window must be odd and >= 3");
    }
  }
  if (o.extraction_csv && o.variant == extraction_variant::reconstruct) {
    if (o.reconstruct.envelope_window < 1) v.push_back("outputs.envelope_window must be >= 1");
    if (o.reconstruct.baseline_window < 1) v.push_back("outputs.baseline_window must be >= 1");
    if (!(o.reconstruct.prominence_fraction > 0.0) || o.reconstruct.prominence_fraction > 1.0) {
      v.push_back("outputs.prominence_fraction must lie in (0, 1]");
    }
    if (o.reconstruct.rotation_phase_hint != 1 && o.reconstruct.rotation_phase_hint != -1) {
      v.push_back("outputs.rotation_phase_hint must be +1 or -1");
    }
  }
  if (o.metrics_json && o.response_freq_hz) {
    const double nyq = protocol.sample_rate() / 4.0;  // differential output Nyquist
    if (!(*o.response_freq_hz > 0.0) || *o.response_freq_hz > nyq) {
      v.push_back("outputs.response_freq_hz must lie in (0, record_rate/4]");
    }
  }
  if (o.stability_map_csv && o.stability_map_points < 4) {
    v.push_back("outputs.stability_map_points must be >= 4");
  }
  if (o.suppression) {
    const suppression_sweep_config& c = *o.suppression;
    if (!(c.raw_rate > 0.0)) v.push_back("outputs.suppression.raw_rate_hz must be > 0");
    if (!(c.duration > 0.0)) v.push_back("outputs.suppression.duration_s must be > 0");
    if (!(c.f_step > 0.0)) v.push_back("outputs.suppression.f_step_hz must be > 0");
    if (c.f_min < 0.0 || c.f_max < c.f_min) {
      v.push_back("outputs.suppression f_min_hz/f_max_hz must satisfy 0 <= f_min <= f_max");
    }
    if (!(c.f_signal > 0.0) || c.f_signal >= c.raw_rate / 4.0) {
      v.push_back("outputs.suppression.f_signal_hz must lie in (0, raw_rate/4)");
    }
    if (c.f_max >= c.raw_rate / 4.0) {
      v.push_back("outputs.suppression.f_max_hz must stay below raw_rate/4");
    }
    if (c.duration * c.raw_rate < 16.0) {
      v.push_back("outputs.suppression duration_s * raw_rate_hz must be >= 16 samples");
    }
  }
  return v;
}

// ---------------------------------------------------------------------------
// Artifact sink: atomic per-file writes plus a digest index for the manifest.

struct artifact_entry {
  std::string name;
  std::size_t bytes = 0;
  std::uint64_t digest = 0;
};

class artifact_sink {
 public:
  explicit artifact_sink(std::filesystem::path root) : root_(std::move(root)) {}

  void add(const std::string& rel, const std::string& content) {
    io::write_file_atomic(root_ / rel, content);
    const std::lock_guard<std::mutex> lock(mu_);
    entries_.push_back({rel, content.size(), io::content_digest(content)});
  }

  std::vector<artifact_entry> sorted_entries() {
    const std::lock_guard<std::mutex> lock(mu_);
    std::vector<artifact_entry> out = entries_;
    std::sort(out.begin(), out.end(),
              [](const artifact_entry& a, const artifact_entry& b) { return a.name < b.name; });
    return out;
  }

  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
  std::mutex mu_;
  std::vector<artifact_entry> entries_;
};

// ---------------------------------------------------------------------------
// CSV emitters

std::string series_csv(const differential_signal& d) {
  std::string out = "time_s,value\n";
  for (std::size_t k = 0; k < d.values.size(); ++k) {
    out += io::format_double(d.times[k]);
    out += ',';
    out += io::format_double(d.values[k]);
    out += '\n';
  }
  return out;
}

std::string reconstruction_csv(const reconstruction& r) {
  std::string out = "time_s,mx,my,mz,norm,envelope,frame\n";
  for (std::size_t k = 0; k < r.times.size(); ++k) {
    out += io::format_double(r.times[k]);
    out += ',';
    out += io::format_double(r.mx[k]);
    out += ',';
    out += io::format_double(r.my[k]);
    out += ',';
    out += io::format_double(r.mz[k]);
    out += ',';
    out += io::format_double(r.norm[k]);
    out += ',';
    out += io::format_double(r.envelope[k]);
    out += ',';
    out += std::to_string(r.frame[k]);
    out += '\n';
  }
  return out;
}

std::string spectrum_csv_text(const spectrum& s) {
  std::string out = "freq_hz,magnitude\n";
  for (std::size_t k = 0; k < s.freqs.size(); ++k) {
    out += io::format_double(s.freqs[k]);
    out += ',';
    out += io::format_double(s.magnitudes[k]);
    out += '\n';
  }
  return out;
}

std::string suppression_csv_text(const suppression_curve& c) {
  std::string out = "f_background_hz,eta\n";
  for (std::size_t k = 0; k < c.bg_freqs.size(); ++k) {
    out += io::format_double(c.bg_freqs[k]);
    out += ',';
    out += io::format_double(c.eta[k]);
    out += '\n';
  }
  return out;
}

std::string stability_csv_text(const stability_map_result& m) {
  std::string out = "x,y,z,displacement1,displacement2\n";
  for (std::size_t k = 0; k < m.points.size(); ++k) {
    out += io::format_double(m.points[k].x());
    out += ',';
    out += io::format_double(m.points[k].y());
    out += ',';
    out += io::format_double(m.points[k].z());
    out += ',';
    out += io::format_double(m.displacement1[k]);
    out += ',';
    out += io::format_double(m.displacement2[k]);
    out += '\n';
  }
  return out;
}

std::string extraction_csv_text(const acquisition_record& rec, const output_request& o) {
  switch (o.variant) {
    case extraction_variant::plain:
      return series_csv(differential(rec, o.halve));
    case extraction_variant::normalized:
      return series_csv(normalized_differential(rec, o.normalized_window, o.halve));
    case extraction_variant::extended:
      return series_csv(extended_extraction(rec, o.halve));
    case extraction_variant::reconstruct:
      return reconstruction_csv(reconstruct_3d(rec, o.reconstruct));
  }
  throw contract_error("outputs.variant: unknown extraction variant");
}

// Record-derived metrics document; returns the response result alongside so
// sweep tables can collect it.
std::pair<njson, std::optional<response_result>> build_metrics_json(
    const acquisition_record* rec, const output_request& o) {
  njson m;
  std::optional<response_result> response;
  if (rec) {
    m["record"] = {{"samples", rec->times.size()}, {"sample_rate_hz", rec->sample_rate}};
    if (o.response_freq_hz) {
      const response_result r = measured_response(*rec, *o.response_freq_hz, o.halve);
      m["response"] = {{"f_test_hz", *o.response_freq_hz},
                       {"amplitude", r.amplitude},
                       {"below_floor", r.below_floor}};
      response = r;
    }
    if (!o.sensitivity_mask.empty()) {
      const differential_signal d = differential(*rec, o.halve);
      const sensitivity_report rep =
          sensitivity(amplitude_spectrum(d.values, d.sample_rate), o.sensitivity_mask);
      m["sensitivity"] = {{"sensitivity", rep.sensitivity},
                          {"rms_floor", rep.rms_floor},
                          {"used_bins", rep.used_bins},
                          {"masked_bins", rep.masked_bins}};
    }
  }
  return {std::move(m), response};
}

// ---------------------------------------------------------------------------
// Single-point execution

struct single_result {
  std::optional<response_result> response;
};

single_result run_single(const experiment_spec& spec, const std::string& prefix,
                         artifact_sink& out, const run_options& opt,
                         const std::string& config_dump) {
  experiment_spec local = spec;
  if (opt.seed_override) local.scenario.rng_seed = *opt.seed_override;
  if (opt.target_csv) {
    const io::target_samples samples = io::target_from_csv(io::read_file(*opt.target_csv));
    waveform w;
    w.k = waveform::kind::table;
    w.table.t = samples.t;
    w.table.v = samples.v;
    local.scenario.target = w;
  }

  local.protocol.validate();
  local.scenario.validate();
  {
    const auto violations = output_request_violations(local.outputs, local.protocol);
    if (!violations.empty()) throw contract_error(violations.front());
  }

  const output_request& o = local.outputs;
  single_result result;

  const bool need_record =
      o.record_csv || o.extraction_csv || o.spectrum_csv || o.metrics_json;
  if (need_record) {
    engine_options eopt;
    eopt.mode = local.mode;
    eopt.with_trace = false;
    const auto [rec, trace] = run(local.protocol, local.scenario, eopt);

    if (o.record_csv) {
      out.add(prefix + "record.csv", io::record_to_csv(rec));
      njson sidecar = {{"config_fnv1a", io::digest_hex(io::content_digest(config_dump))},
                       {"samples", rec.times.size()},
                       {"sample_rate_hz", rec.sample_rate},
                       {"clamp_warnings", rec.clamp_warnings}};
      out.add(prefix + "record.json", sidecar.dump(2) + "\n");
    }
    if (o.extraction_csv) out.add(prefix + "extraction.csv", extraction_csv_text(rec, o));
    if (o.spectrum_csv) {
      const differential_signal d = differential(rec, o.halve);
      out.add(prefix + "spectrum.csv",
              spectrum_csv_text(amplitude_spectrum(d.values, d.sample_rate)));
    }
    if (o.metrics_json) {
      auto [m, response] = build_metrics_json(&rec, o);
      out.add(prefix + "metrics.json", m.dump(2) + "\n");
      result.response = response;
    }
  }

  if (o.suppression) {
    suppression_sweep_config cfg = *o.suppression;
    cfg.threads = resolve_threads(opt.threads);
    out.add(prefix + "suppression.csv", suppression_csv_text(suppression_sweep(cfg)));
  }
  if (o.stability_map_csv) {
    const double extra_z =
        2.0 * M_PI * carbon13_gamma_hz_per_tesla * local.scenario.bias;
    const stability_map_result map =
        stability_map(local.protocol, fibonacci_sphere(o.stability_map_points), extra_z);
    out.add(prefix + "stability_map.csv", stability_csv_text(map));
  }
  return result;
}

std::string point_dir_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "point_%03zu", index);
  return buf;
}

void deterministic_shuffle(std::vector<std::size_t>& order, std::uint64_t seed) {
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(mix64(mix64(seed) ^ i) % i);
    std::swap(order[i - 1], order[j]);
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Public entry points

experiment_spec parse_experiment_text(const std::string& text) {
  njson doc;
  try {
    doc = njson::parse(text);
  } catch (const njson::parse_error& e) {
    const auto [line, column] = line_col_at(text, e.byte > 0 ? e.byte - 1 : 0);
    throw parse_error(e.what(), line, column);
  }
  const parse_ctx ctx{text};
  check_keys(ctx, doc, "spec",
             {"version", "protocol", "engine", "scenario", "outputs", "sweep",
              "orbit_offset_intended"});
  experiment_spec spec;
  const njson* version = find(doc, "version");
  if (!version || !version->is_number_integer()) {
    fail_key(ctx, "version", "spec.version is required and must be an integer");
  }
  spec.version = version->get<int>();
  if (spec.version != 1) {
    fail_key(ctx, "version",
             "unsupported spec version " + std::to_string(spec.version) + " (expected 1)");
  }
  if (const njson* p = find(doc, "protocol")) spec.protocol = parse_protocol(ctx, *p);
  if (const njson* e = find(doc, "engine")) spec.mode = parse_engine(ctx, *e);
  if (const njson* s = find(doc, "scenario")) spec.scenario = parse_scenario(ctx, *s);
  if (const njson* o = find(doc, "outputs")) spec.outputs = parse_outputs(ctx, *o);
  if (const njson* s = find(doc, "sweep")) spec.sweep = parse_sweep(ctx, *s);
  spec.orbit_offset_intended = get_bool(ctx, doc, "spec", "orbit_offset_intended", false);
  spec.source_text = text;
  return spec;
}

experiment_spec load_experiment_file(const std::filesystem::path& path) {
  return parse_experiment_text(io::read_file(path));
}

validation_report validate_experiment(const experiment_spec& spec) {
  validation_report rep;

  const protocol_config& p = spec.protocol;
  if (p.spacing > 0.0 && p.acquisition_offset >= 0.0 &&
      p.acquisition_offset + p.acquisition_window() > p.spacing * (1.0 + 1e-12)) {
    rep.violations.push_back(
        "protocol.acquisition_offset_s + protocol.acquisition_length_s: acquisition window "
        "exceeds the spacing");
  }
  try {
    p.validate();
  } catch (const contract_error& e) {
    if (std::string(e.what()).find("acquisition window") == std::string::npos) {
      rep.violations.push_back(e.what());
    }
  }
  try {
    spec.scenario.validate();
  } catch (const contract_error& e) {
    rep.violations.push_back(e.what());
  }
  auto output_violations = output_request_violations(spec.outputs, p);
  for (std::string& v : output_violations) rep.violations.push_back(std::move(v));

  if (spec.sweep) {
    if (spec.sweep->values.empty()) {
      rep.violations.push_back("sweep.values must not be empty");
    }
    if (spec.source_text.empty()) {
      rep.violations.push_back("sweep requires the originating spec document");
    } else {
      try {
        njson doc = njson::parse(spec.source_text);
        njson* slot = navigate(doc, spec.sweep->parameter);
        if (!slot) {
          rep.violations.push_back("sweep.parameter '" + spec.sweep->parameter +
                                   "' not found in the spec document");
        } else if (!slot->is_number()) {
          rep.violations.push_back("sweep.parameter '" + spec.sweep->parameter +
                                   "' must reference a number");
        }
      } catch (const njson::parse_error&) {
        rep.violations.push_back("sweep requires a parseable spec document");
      }
    }
  }

  const double matched = p.orbit_period_matched();
  const bool period_overridden =
      p.orbit_period > 0.0 && std::abs(p.orbit_period - matched) > 1e-12 * matched;
  if ((period_overridden || p.orbit_freq_offset != 0.0) && !spec.orbit_offset_intended) {
    rep.warnings.push_back(
        "drive period is detuned from two pulse cycles "
        "(protocol.orbit_period_s / protocol.orbit_freq_offset_hz); set "
        "orbit_offset_intended=true if this is deliberate");
  }
  return rep;
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("PRISM_FORGE_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0 && v <= 1024) return static_cast<int>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

run_result run_experiment(const experiment_spec& spec, const run_options& opt) {
  if (opt.out_dir.empty()) throw contract_error("run: output directory is required");
  artifact_sink sink(opt.out_dir);

  if (!spec.sweep) {
    std::string dump = "{}";
    if (!spec.source_text.empty()) {
      try {
        dump = njson::parse(spec.source_text).dump();
      } catch (const njson::parse_error&) {
        dump = spec.source_text;
      }
    }
    run_single(spec, "", sink, opt, dump);
  } else {
    const sweep_request& sw = *spec.sweep;
    if (sw.values.empty()) throw contract_error("sweep.values must not be empty");
    if (spec.source_text.empty()) {
      throw contract_error("sweep execution requires the originating spec document");
    }
    njson doc;
    try {
      doc = njson::parse(spec.source_text);
    } catch (const njson::parse_error&) {
      throw contract_error("sweep requires a parseable spec document");
    }
    {
      njson* slot = navigate(doc, sw.parameter);
      if (!slot) {
        throw contract_error("sweep.parameter '" + sw.parameter +
                             "' not found in the spec document");
      }
      if (!slot->is_number()) {
        throw contract_error("sweep.parameter '" + sw.parameter + "' must reference a number");
      }
    }
    doc.erase("sweep");

    const std::size_t n = sw.values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    const std::uint64_t seed =
        opt.seed_override ? *opt.seed_override : spec.scenario.rng_seed;
    if (sw.shuffled) deterministic_shuffle(order, seed);

    std::vector<single_result> results(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> cursor{0};
    const int nthreads =
        std::max(1, std::min<int>(resolve_threads(opt.threads), static_cast<int>(n)));

    const auto worker = [&]() {
      while (true) {
        const std::size_t slot = cursor.fetch_add(1);
        if (slot >= n) return;
        const std::size_t idx = order[slot];
        try {
          njson point = doc;
          *navigate(point, sw.parameter) = sw.values[idx];
          const experiment_spec pspec = parse_experiment_text(point.dump(2) + "\n");
          results[idx] =
              run_single(pspec, point_dir_name(idx) + "/", sink, opt, point.dump());
        } catch (...) {
          errors[idx] = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(nthreads));
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();

    for (std::size_t idx = 0; idx < n; ++idx) {
      if (!errors[idx]) continue;
      const std::string at =
          "sweep point " + std::to_string(idx) + " (" + sw.parameter + " = " +
          io::format_double(sw.values[idx]) + "): ";
      try {
        std::rethrow_exception(errors[idx]);
      } catch (const contract_error& e) {
        throw contract_error(at + e.what());
      } catch (const engine_error& e) {
        throw engine_error(at + e.what());
      } catch (const std::exception& e) {
        throw engine_error(at + e.what());
      }
    }

    const bool with_response = spec.outputs.metrics_json && spec.outputs.response_freq_hz;
    std::string table = with_response ? "index,value,response_amplitude,below_floor\n"
                                      : "index,value\n";
    for (std::size_t idx = 0; idx < n; ++idx) {
      table += std::to_string(idx);
      table += ',';
      table += io::format_double(sw.values[idx]);
      if (with_response) {
        const response_result r = results[idx].response.value_or(response_result{});
        table += ',';
        table += io::format_double(r.amplitude);
        table += ',';
        table += r.below_floor ? '1' : '0';
      }
      table += '\n';
    }
    sink.add("sweep.csv", table);
  }

  const std::vector<artifact_entry> entries = sink.sorted_entries();
  njson files = njson::array();
  run_result out;
  for (const artifact_entry& e : entries) {
    files.push_back(
        {{"name", e.name}, {"bytes", e.bytes}, {"fnv1a", io::digest_hex(e.digest)}});
    out.files.push_back(e.name);
  }
  const njson manifest = {{"version", 1}, {"files", files}};
  io::write_file_atomic(opt.out_dir / "manifest.json", manifest.dump(2) + "\n");
  out.files.push_back("manifest.json");
  return out;
}

run_result run_extract(const acquisition_record& rec, const output_request& outputs,
                       const std::filesystem::path& out_dir) {
  if (out_dir.empty()) throw contract_error("extract: output directory is required");
  output_request o = outputs;
  o.extraction_csv = true;
  protocol_config fallback;  // window checks only need outputs fields here
  const auto violations = output_request_violations(o, fallback);
  if (!violations.empty()) throw contract_error(violations.front());
  io::write_file_atomic(out_dir / "extraction.csv", extraction_csv_text(rec, o));
  return {{"extraction.csv"}};
}

run_result run_metrics(const std::optional<acquisition_record>& rec,
                       const output_request& outputs, const std::filesystem::path& out_dir,
                       int threads) {
  if (out_dir.empty()) throw contract_error("metrics: output directory is required");
  const bool record_based =
      outputs.response_freq_hz || !outputs.sensitivity_mask.empty() || outputs.spectrum_csv;
  if (record_based && !rec) {
    throw contract_error("metrics: a record input is required for record-based metrics");
  }
  if (!record_based && !rec && !outputs.suppression) {
    throw contract_error("metrics: nothing requested");
  }
  run_result out;
  njson m;
  if (rec) {
    if (outputs.response_freq_hz) {
      const double nyq = rec->sample_rate / 4.0;
      if (!(*outputs.response_freq_hz > 0.0) || *outputs.response_freq_hz > nyq) {
        throw contract_error("metrics: response_freq_hz must lie in (0, record_rate/4]");
      }
    }
    auto built = build_metrics_json(&*rec, outputs);
    m = std::move(built.first);
    if (outputs.spectrum_csv) {
      const differential_signal d = differential(*rec, outputs.halve);
      io::write_file_atomic(out_dir / "spectrum.csv",
                            spectrum_csv_text(amplitude_spectrum(d.values, d.sample_rate)));
      out.files.push_back("spectrum.csv");
    }
  }
  if (outputs.suppression) {
    suppression_sweep_config cfg = *outputs.suppression;
    cfg.threads = resolve_threads(threads);
    const suppression_curve curve = suppression_sweep(cfg);
    io::write_file_atomic(out_dir / "suppression.csv", suppression_csv_text(curve));
    out.files.push_back("suppression.csv");
    m["suppression"] = {{"points", curve.bg_freqs.size()}, {"csv", "suppression.csv"}};
  }
  io::write_file_atomic(out_dir / "metrics.json", m.dump(2) + "\n");
  out.files.push_back("metrics.json");
  std::sort(out.files.begin(), out.files.end());
  return out;
}

run_result run_stability_map(const protocol_config& protocol, double bias_tesla, int points,
                             const std::filesystem::path& out_dir) {
  if (out_dir.empty()) throw contract_error("stability-map: output directory is required");
  if (points < 4) throw contract_error("stability-map: points must be >= 4");
  protocol.validate();
  const double extra_z = 2.0 * M_PI * carbon13_gamma_hz_per_tesla * bias_tesla;
  const stability_map_result map =
      stability_map(protocol, fibonacci_sphere(points), extra_z);
  io::write_file_atomic(out_dir / "stability_map.csv", stability_csv_text(map));
  return {{"stability_map.csv"}};
}

}  // namespace prism
