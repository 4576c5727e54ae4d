#include "prism/scenario.hpp"

#include <algorithm>
#include <cmath>

namespace prism {

namespace {

constexpr double mu0 = 4.0e-7 * M_PI;

// Symmetric unit triangle wave: period 1, tri(0) = 0 rising, peaks ±1.
double tri_wave(double x) {
  x -= std::floor(x);
  if (x < 0.25) return 4.0 * x;
  if (x < 0.75) return 2.0 - 4.0 * x;
  return 4.0 * x - 4.0;
}

// Integral of tri_wave from 0 to x (x in cycles); zero over whole cycles.
double tri_integral(double x) {
  const double whole = std::floor(x);
  x -= whole;
  double acc;
  if (x < 0.25) {
    acc = 2.0 * x * x;
  } else if (x < 0.75) {
    acc = 2.0 * x - 2.0 * x * x - 0.25;
  } else {
    acc = 2.0 * x * x - 4.0 * x + 2.0;
  }
  return acc;  // the whole cycles contribute nothing
}

void require_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw contract_error(std::string(what) + ": non-finite value");
}

}  // namespace

void sample_table::validate(const char* what) const {
  if (t.size() != v.size()) throw contract_error(std::string(what) + ": time/value size mismatch");
  for (std::size_t i = 0; i < t.size(); ++i) {
    require_finite(t[i], what);
    require_finite(v[i], what);
    if (i > 0 && !(t[i] > t[i - 1]))
      throw contract_error(std::string(what) + ": times must be strictly increasing");
  }
}

double sample_table::value(double time) const {
  if (t.empty()) throw contract_error("sample_table: empty table");
  if (time <= t.front()) return v.front();
  if (time >= t.back()) return v.back();
  const auto it = std::upper_bound(t.begin(), t.end(), time);
  const std::size_t hi = it - t.begin();
  const std::size_t lo = hi - 1;
  const double w = (time - t[lo]) / (t[hi] - t[lo]);
  return v[lo] + w * (v[hi] - v[lo]);
}

void waveform::validate() const {
  require_finite(amplitude, "waveform.amplitude");
  require_finite(frequency, "waveform.frequency");
  require_finite(phase, "waveform.phase");
  switch (k) {
    case kind::none:
      break;
    case kind::sine:
    case kind::square:
      if (frequency < 0.0) throw contract_error("waveform: frequency must be >= 0");
      break;
    case kind::triangle_fm:
      if (fm_rate <= 0.0) throw contract_error("waveform: triangle modulation rate must be > 0");
      if (fm_deviation < 0.0) throw contract_error("waveform: deviation must be >= 0");
      break;
    case kind::swish:
      if (sweep_from < 0.0 || sweep_to < 0.0)
        throw contract_error("waveform: sweep frequencies must be >= 0");
      break;
    case kind::table:
      if (table.empty()) throw contract_error("waveform: table kind without table data");
      table.validate("waveform.table");
      break;
  }
}

double waveform::value(double t, double duration) const {
  switch (k) {
    case kind::none:
      return 0.0;
    case kind::sine:
      return amplitude * std::sin(2.0 * M_PI * frequency * t + phase);
    case kind::square: {
      // rising edge inclusive: positions [0, 1/2) of the cycle are +amplitude
      double pos = frequency * t + phase / (2.0 * M_PI);
      pos -= std::floor(pos);
      return pos < 0.5 ? amplitude : -amplitude;
    }
    case kind::triangle_fm: {
      const double cycles = frequency * t + fm_deviation / fm_rate * tri_integral(fm_rate * t);
      return amplitude * std::sin(2.0 * M_PI * cycles + phase);
    }
    case kind::swish: {
      const double span = duration > 0.0 ? duration : 1.0;
      const double cycles = sweep_from * t + (sweep_to - sweep_from) * t * t / (2.0 * span);
      return amplitude * std::sin(2.0 * M_PI * cycles + phase);
    }
    case kind::table:
      return table.value(t);
  }
  return 0.0;
}

void background_spec::validate() const {
  require_finite(carrier_offset, "background.carrier_offset");
  require_finite(amplitude, "background.amplitude");
  if (amplitude < 0.0) throw contract_error("background: amplitude must be >= 0");
  if (mod == modulation::triangular_fm && fm_rate <= 0.0)
    throw contract_error("background: triangular modulation rate must be > 0");
  if (mod == modulation::swish && sweep_max < 0.0)
    throw contract_error("background: sweep bound must be >= 0");
}

double background_spec::instantaneous_offset(double t, double duration) const {
  switch (mod) {
    case modulation::none:
      return carrier_offset;
    case modulation::triangular_fm:
      return carrier_offset + fm_deviation * tri_wave(fm_rate * t);
    case modulation::swish: {
      const double span = duration > 0.0 ? duration : 1.0;
      return carrier_offset + sweep_max * t / span;
    }
  }
  return carrier_offset;
}

double background_spec::phase_at(double t, double duration) const {
  double cycles = carrier_offset * t;
  switch (mod) {
    case modulation::none:
      break;
    case modulation::triangular_fm:
      cycles += fm_deviation / fm_rate * tri_integral(fm_rate * t);
      break;
    case modulation::swish: {
      const double span = duration > 0.0 ? duration : 1.0;
      cycles += sweep_max * t * t / (2.0 * span);
      break;
    }
  }
  return 2.0 * M_PI * cycles + phase;
}

std::complex<double> background_spec::value(double t, double duration) const {
  return std::polar(amplitude, phase_at(t, duration));
}

std::complex<double> background_signal(const background_spec& b, double t, double duration) {
  return b.value(t, duration);
}

double vibration_spec::position(double t) const {
  if (!trajectory.empty()) return trajectory.value(t);
  return amplitude * std::sin(2.0 * M_PI * frequency * t + phase);
}

double vibration_spec::rabi_scale(double z) const {
  if (!b1_profile.empty()) return b1_profile.value(z);
  return coil_profile(coil, z);
}

void decay_spec::validate() const {
  if (r_p < 0.0 || r_d < 0.0 || !std::isfinite(r_p) || !std::isfinite(r_d))
    throw contract_error("decay: rates must be finite and >= 0");
}

double decay_spec::factor(double t) const {
  const double t_pos = std::max(t, 0.0);
  return std::exp(-std::sqrt(r_p * t_pos)) * std::exp(-r_d * t_pos);
}

void field_scenario::validate() const {
  if (!(duration > 0.0) || !std::isfinite(duration))
    throw contract_error("scenario: duration must be > 0");
  require_finite(bias, "scenario.bias");
  if (noise_sigma < 0.0 || !std::isfinite(noise_sigma))
    throw contract_error("scenario: noise_sigma must be >= 0");
  if (!(magnetization0 >= 0.0) || !std::isfinite(magnetization0))
    throw contract_error("scenario: magnetization0 must be >= 0");
  target.validate();
  if (!bias_table.empty()) bias_table.validate("scenario.bias_table");
  for (const background_spec& b : backgrounds) b.validate();
  if (vibration) {
    if (!vibration->trajectory.empty()) vibration->trajectory.validate("vibration.trajectory");
    if (!vibration->b1_profile.empty()) vibration->b1_profile.validate("vibration.b1_profile");
    if (!(vibration->coil.radius > 0.0)) throw contract_error("vibration: coil radius must be > 0");
    if (vibration->coil.turns < 1) throw contract_error("vibration: coil needs at least one turn");
  }
  decay.validate();
}

double sample_target(const field_scenario& s, double t) {
  if (t < 0.0 || t > s.duration)
    throw contract_error("sample_target: time outside the record");
  return s.target.value(t, s.duration);
}

double coil_field_on_axis(const coil_spec& coil, double z) {
  if (!(coil.radius > 0.0)) throw contract_error("coil_field_on_axis: radius must be > 0");
  const double r2 = coil.radius * coil.radius;
  const double denom = std::pow(r2 + z * z, 1.5);
  return coil.turns * coil.current_scale * mu0 * r2 / (2.0 * denom);
}

double coil_profile(const coil_spec& coil, double z) {
  if (!(coil.radius > 0.0)) throw contract_error("coil_profile: radius must be > 0");
  const double r2 = coil.radius * coil.radius;
  return std::pow(r2 / (r2 + z * z), 1.5);
}

effective_params effective_params_at(const field_scenario& s, double t) {
  if (t < 0.0 || t > s.duration)
    throw contract_error("effective_params_at: time outside the record");
  effective_params out;
  out.bias_total = s.bias + (s.bias_table.empty() ? 0.0 : s.bias_table.value(t));
  out.target_value = s.target.value(t, s.duration);
  out.decay_factor = s.decay.factor(t);
  if (s.vibration) {
    double z = s.vibration->position(t);
    const double limit = s.vibration->travel_limit;
    if (std::abs(z) > limit) {
      z = std::clamp(z, -limit, limit);
      ++out.clamp_warnings;
    }
    out.flip_scale = s.vibration->rabi_scale(z);
    out.coupling_scale = out.flip_scale;  // reciprocity: drive and pickup share the profile
    out.target_value *= coil_profile(s.vibration->coil, z);
  }
  return out;
}

}  // namespace prism
