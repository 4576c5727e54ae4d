#pragma once

#include <complex>
#include <optional>
#include <vector>

#include "prism/rotor.hpp"

namespace prism {

// Peak z-rotation rate for a drive quoted as "degrees per 100 microseconds".
constexpr double rate_from_deg_per_100us(double deg) {
  return deg * (M_PI / 180.0) / 100e-6;
}

// Timing and drive parameters of one pulse cycle. One "pulse cycle" is a
// spacing followed by a pulse (duration cycle_time()); the full drive period
// spans two of them, so consecutive samples alternate between the two
// stroboscopic frames.
struct protocol_config {
  double pulse_duration = 100e-6;            // tau_p, seconds
  double spacing = 100e-6;                   // tau_s, seconds
  double flip_angle = 166.0 * M_PI / 180.0;  // theta, radians; Rabi rate = theta/tau_p
  double detuning = 0.0;                     // rad/s, constant z-rate from carrier offset
  double orbit_amplitude = rate_from_deg_per_100us(18.0);  // peak z-drive rate, rad/s
  std::optional<double> orbit_phase;         // radians; unset = phase-locked default
  double orbit_period = 0.0;                 // seconds; 0 = matched to 2(tau_p+tau_s)
  double orbit_freq_offset = 0.0;            // Hz, added to the matched drive frequency
  double calibration_duration = 0.0;         // seconds the freq offset stays active; 0 = whole record
  int segments_per_pulse = 8;                // N
  double acquisition_offset = 0.0;           // window start inside the spacing, seconds
  double acquisition_length = -1.0;          // window length, seconds; < 0 = full spacing

  double cycle_time() const { return pulse_duration + spacing; }
  double orbit_period_matched() const { return 2.0 * cycle_time(); }
  double orbit_period_effective() const {
    return orbit_period > 0.0 ? orbit_period : orbit_period_matched();
  }
  // Base drive frequency; the calibration offset is applied on top of this
  // for t < calibration window end (see orbit_frequency_at).
  double orbit_frequency() const { return 1.0 / orbit_period_effective(); }
  double orbit_frequency_at(double t) const;
  // Phase-locked default: the drive's positive lobe is centered in the first
  // spacing, so its zero crossings fall at the pulse centers.
  double orbit_phase_effective() const;
  // Accumulated drive phase argument at time t (handles the calibration
  // frequency switch continuously).
  double orbit_phase_arg(double t) const;
  double rabi_rate() const { return flip_angle / pulse_duration; }
  double acquisition_window() const {
    return acquisition_length < 0.0 ? spacing : acquisition_length;
  }
  double sample_rate() const { return 1.0 / cycle_time(); }
  // Flip-angle deviation from a perfect inversion, signed: flip_angle − pi.
  double epsilon() const { return flip_angle - M_PI; }

  void validate() const;  // throws contract_error on bad values

  static protocol_config reference() { return protocol_config{}; }
};

namespace detail {
// Building blocks of the cycle products, shared with the simulation engine.
// Full z-phase (drive + detuning + extra constant rate) over [t0, t1].
double z_phase(const protocol_config& cfg, double extra_z_rate, double t0, double t1);
mat3d z_rotation(double angle);
// Product of the segment rotations of one pulse starting at t0.
mat3d pulse_rotation(const protocol_config& cfg, double extra_z_rate, double t0,
                     double flip_scale);
}  // namespace detail

// One-cycle rotations in the two stroboscopic frames.
// r_frame1 covers [spacing a][pulse 1][spacing b][pulse 2] (earliest factor
// rightmost); r_frame2 starts half a period later at spacing b.
struct cycle_rotations {
  mat3d r_frame1;
  mat3d r_frame2;
  double phi_a = 0.0;  // free-evolution z-phase over spacing a
  double phi_b = 0.0;  // ... and over spacing b
};

// prethermal_axes output: the two long-lived axes with their elevations
// (atan2(n·z, n·x), signed toward ±z) and mutual arc angle.
struct prethermal_axes_result {
  vec3d n1;
  vec3d n2;
  double elevation1 = 0.0;
  double elevation2 = 0.0;
  double inter_vector_angle = 0.0;
};

// Builds the two one-cycle rotations. `extra_z_rate` is a constant additional
// z-rotation rate (rad/s) — bias and quasi-static sensed field enter here.
// `cycle_start_time` places the cycle on the absolute drive clock (needed
// whenever the drive frequency is detuned from the matched period), and
// `flip_scale` scales the Rabi rate (pulse-amplitude modulation).
cycle_rotations build_cycle(const protocol_config& cfg, double extra_z_rate = 0.0,
                            double cycle_start_time = 0.0, double flip_scale = 1.0);

// Axes of the one-cycle rotations, each conjugated to the midpoint of its own
// spacing before eigenvector extraction. That anchoring zeroes the azimuth the
// spacing phase would otherwise smear over the two frames and is the same
// convention the acquisition readout uses; with it the two axes are exact
// z-mirrors for a phase-locked sine drive. Sign bias: positive x-component
// when resolvable, then positive z, then positive y.
prethermal_axes_result prethermal_axes(const cycle_rotations& cyc);

// Axis of one frame's cycle rotation anchored at an arbitrary offset into the
// cycle: the rotation over [t0, t0 + period) for the frame whose spacing
// starts at spacing_start ≤ t0. Used by the engine for instantaneous axes.
vec3d axis_at_time(const protocol_config& cfg, double extra_z_rate, double spacing_start,
                   double anchor_offset, double flip_scale = 1.0);

// Ideal-pulse elevation of the frame-1 axis, to leading order in the drive
// phase phi_a and the flip-angle excess epsilon: atan(phi_a/epsilon). Reports
// the positive-x axis representative, matching prethermal_axes (negative for
// epsilon < 0).
double delta_pulse_elevation(double phi_a, double epsilon);

// Exact ideal-pulse elevation from composing the two instantaneous pulses
// with the spacing phases: elevation = atan(tan(phi_a/2) / tan(epsilon/2)),
// same branch convention as above. Agrees with delta_pulse_elevation to
// O(phi_a·eps·(phi_a²−eps²)).
double delta_pulse_elevation_exact(double phi_a, double epsilon);

// Tilt of the effective pulse axis toward ±z for a z-rate offset against the
// Rabi rate: atan(total_z_rate / rabi_rate).
double spin_lock_tilt(double total_z_rate, double rabi_rate);

// dM_x/dB = sin(elevation)·d(elevation)/dB on a sampled elevation curve;
// central differences inside, one-sided at the ends.
std::vector<double> response_function(const std::vector<double>& elevation,
                                      const std::vector<double>& bias);

// Post-step equilibration model: the transverse deviation from the new axis,
// written as a complex number g = (y-component) + i·(z-component) in the
// sampled frame, precesses by epsilon per pulse cycle while relaxing toward
// g_eq with time constant n_eq cycles. The (−1)^n factor is the frame
// alternation visible in raw records.
struct transient_params {
  std::complex<double> g0;
  std::complex<double> g_eq = 0.0;
  double epsilon = 0.0;      // radians per pulse cycle
  double n_eq = 25.0;        // pulse cycles
  double tau_cycle = 200e-6; // seconds per pulse cycle
  double magnetization0 = 1.0;
};

struct transient_series_result {
  std::vector<std::complex<double>> g;  // g(0..n_max)
  std::vector<double> mx;               // sqrt(M0² − |g|²), clamped at 0
  std::vector<double> times;            // n·tau_cycle
  int clamped = 0;                      // samples where |g| exceeded M0
};

transient_series_result transient_series(const transient_params& p, int n_max);

// Model beat frequency of the transient: epsilon advances the phase once per
// pulse cycle, so f = epsilon / (2π·tau_cycle).
inline double transient_frequency(double epsilon, double tau_cycle) {
  return epsilon / (2.0 * M_PI * tau_cycle);
}

// Near-uniform unit-sphere sampling (golden-angle spiral).
std::vector<vec3d> fibonacci_sphere(int count = 10000);

// Geodesic displacement of every grid direction under one cycle, per frame —
// the prethermal axes show up as the displacement minima.
struct stability_map_result {
  std::vector<vec3d> points;
  std::vector<double> displacement1;
  std::vector<double> displacement2;
};

stability_map_result stability_map(const protocol_config& cfg, const std::vector<vec3d>& grid,
                                   double extra_z_rate = 0.0);

}  // namespace prism
