#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "prism/errors.hpp"

namespace prism {

// Sampled (time, value) table with linear interpolation; evaluation outside
// the covered span holds the endpoint values.
struct sample_table {
  std::vector<double> t;
  std::vector<double> v;

  void validate(const char* what) const;
  double value(double time) const;
  bool empty() const { return t.empty(); }
};

// A declarative time-domain channel. `amplitude` is in tesla for field
// channels (or rad/s when a waveform drives a rotation rate directly).
struct waveform {
  enum class kind { none, sine, square, triangle_fm, swish, table };

  kind k = kind::none;
  double amplitude = 0.0;
  double frequency = 0.0;   // Hz; base frequency of the periodic kinds
  double phase = 0.0;       // radians
  double fm_deviation = 0.0;  // Hz, triangle_fm: instantaneous frequency swings ±deviation
  double fm_rate = 0.0;       // Hz, triangle_fm: modulation rate
  double sweep_from = 0.0;    // Hz, swish start frequency
  double sweep_to = 0.0;      // Hz, swish end frequency (reached at `duration`)
  sample_table table;

  void validate() const;
  // Evaluate at time t; `duration` scales the swish ramp (ignored otherwise).
  double value(double t, double duration) const;
};

// Additive readout contamination: a phasor at an offset from the carrier,
// optionally frequency-modulated. Enters the record through the resonator
// response, not through the spin dynamics.
struct background_spec {
  enum class modulation { none, triangular_fm, swish };

  double carrier_offset = 0.0;  // Hz
  double amplitude = 0.0;       // detected-signal units
  double phase = 0.0;           // radians
  modulation mod = modulation::none;
  double fm_deviation = 0.0;  // Hz, triangular_fm
  double fm_rate = 0.0;       // Hz, triangular_fm
  double sweep_max = 0.0;     // Hz, swish: offset ramps 0 → sweep_max over the record

  void validate() const;
  double instantaneous_offset(double t, double duration) const;
  // Accumulated phase 2π·∫f(t')dt' + phase, exact for each modulation law.
  double phase_at(double t, double duration) const;
  std::complex<double> value(double t, double duration) const;
};

// Sample motion along the coil axis plus the geometry needed to turn it into
// amplitude effects: a current loop (Biot–Savart on axis) and a relative
// drive-field profile.
struct coil_spec {
  double radius = 0.02;     // meters
  int turns = 1;
  double current_scale = 1.0;  // amperes per unit drive
};

struct vibration_spec {
  // trajectory: sinusoid by default, table when provided
  double amplitude = 0.0;   // meters
  double frequency = 0.0;   // Hz
  double phase = 0.0;
  sample_table trajectory;  // optional (time , z) table
  coil_spec coil;
  sample_table b1_profile;  // optional (z , relative rate); default: on-axis loop model
  double travel_limit = 5e-3;  // |z| sanity bound, meters

  double position(double t) const;
  // Relative pulse-amplitude factor at z — table lookup or loop model.
  double rabi_scale(double z) const;
};

// Amplitude decay e^{−sqrt(R_p·t)}·e^{−R_d·t}.
struct decay_spec {
  double r_p = 0.0;  // 1/s, stretched component
  double r_d = 0.0;  // 1/s, exponential component

  void validate() const;
  double factor(double t) const;
};

// Everything the sensor experiences during one record.
struct field_scenario {
  double duration = 1.0;  // seconds
  waveform target;        // sensed field B(t), tesla
  double bias = 0.0;      // tesla, constant part
  sample_table bias_table;  // optional slow drift, added to `bias`
  std::vector<background_spec> backgrounds;
  std::optional<vibration_spec> vibration;
  decay_spec decay;
  double noise_sigma = 0.0;  // per-sample Gaussian on I and Q
  double magnetization0 = 1.0;
  std::uint64_t rng_seed = 1;

  void validate() const;
};

// Target field at time t (tesla). Throws when t falls outside the record.
double sample_target(const field_scenario& s, double t);

// Pre-resonator background phasor at time t (sum over all backgrounds is done
// by the caller so individual channels stay inspectable).
std::complex<double> background_signal(const background_spec& b, double t, double duration);

// On-axis field of a circular loop at axial distance z, in tesla per unit
// drive: turns·mu0·I·R²/(2(R²+z²)^{3/2}).
double coil_field_on_axis(const coil_spec& coil, double z);

// Same profile normalized to 1 at the loop center.
double coil_profile(const coil_spec& coil, double z);

struct effective_params {
  double flip_scale = 1.0;      // pulse-amplitude factor from vibration
  double coupling_scale = 1.0;  // detected-amplitude factor (reciprocity: same profile)
  double bias_total = 0.0;      // tesla
  double target_value = 0.0;    // tesla, after coil-profile scaling
  double decay_factor = 1.0;
  int clamp_warnings = 0;       // vibration excursions clipped to the travel limit
};

effective_params effective_params_at(const field_scenario& s, double t);

}  // namespace prism
