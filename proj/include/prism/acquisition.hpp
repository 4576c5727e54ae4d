#pragma once

#include <complex>
#include <optional>
#include <utility>
#include <vector>

#include "prism/floquet.hpp"
#include "prism/scenario.hpp"

namespace prism {

// 13C gyromagnetic ratio as gamma/2pi, Hz per tesla.
constexpr double carbon13_gamma_hz_per_tesla = 10.7084e6;

struct engine_mode {
  enum class kind {
    geometric,  // state pinned to the instantaneous prethermal axis
    dynamic,    // state advanced through the rotations, relaxing toward the axis
  };
  kind k = kind::geometric;
  double n_eq = 25.0;  // dynamic mode: relaxation time constant, pulse cycles
};

inline engine_mode geometric_mode() { return {}; }
inline engine_mode dynamic_mode(double n_eq = 25.0) {
  return {engine_mode::kind::dynamic, n_eq};
}

// Detection-chain amplitude response for additive off-carrier backgrounds:
// the acquisition-window average (a sinc in offset) on top of a Lorentzian
// roll-off set by the resonator quality factor.
struct resonator_model {
  double q = 77.0;
  double carrier_frequency = 75.4e6;  // Hz
};

// sin(x)/x with the continuous limit at 0.
double sinc(double x);

// |sinc(pi*f*t_acq)| times the Lorentzian 1/sqrt(1 + (2*q*f/f_carrier)^2).
// Nulls fall exactly at integer multiples of 1/t_acq.
double resonator_gain(double f_offset, double t_acq, const resonator_model& model = {});

// Arithmetic mean of a complex I/Q stream. Throws contract_error when empty.
std::complex<double> window_average(const std::vector<std::complex<double>>& iq);

// Window-averaged phasor of one background over [t_mid - t_acq/2, t_mid +
// t_acq/2], including the resonator roll-off at the instantaneous offset.
// Constant-offset backgrounds use the exact closed form (so the nulls at
// k/t_acq are exact); frequency-modulated ones integrate the exact phase law
// by Simpson quadrature.
std::complex<double> background_window_value(const background_spec& bg, double t_mid,
                                             double t_acq, double scenario_duration,
                                             const resonator_model& model = {});

// One detected sample per spacing window. Timestamps are the window
// midpoints, so they step by pulse_duration + spacing exactly; the frame tag
// flips every sample. mx/my are the in-phase and quadrature projections in
// the frame-aligned convention: the azimuthal phase accumulated inside the
// spacing up to the sampling instant is rotated out before projection.
struct acquisition_record {
  std::vector<double> times;
  std::vector<double> mx;
  std::vector<double> my;
  std::vector<int> frame;
  double sample_rate = 0.0;
  protocol_config protocol;
  field_scenario scenario;
  engine_mode mode;
  double gamma_hz_per_tesla = carbon13_gamma_hz_per_tesla;
  int clamp_warnings = 0;  // vibration excursions clipped to the travel limit
};

// Simulation truth sampled alongside the record: the internal state vector
// (decay applied) and the instantaneous frame axis, both in the frame-aligned
// readout convention.
struct trajectory_trace {
  std::vector<double> times;
  std::vector<vec3d> state;
  std::vector<vec3d> axis;
  std::vector<int> frame;
};

struct engine_options {
  engine_mode mode{};
  double gamma_hz_per_tesla = carbon13_gamma_hz_per_tesla;
  resonator_model resonator{};
  // Dynamic-mode start vector; defaults to magnetization0 along +x.
  std::optional<vec3d> initial_state;
  bool with_trace = true;
};

// Advance the magnetization through the pulse cycles of `protocol` under
// `scenario` and emit the raw record plus the truth trace.
//
// Geometric mode pins the state to the instantaneous one-cycle rotation axis
// (perfect adiabatic following). Dynamic mode adds the equilibration
// transient: the component along the axis is carried to where the axis will
// sit at the next window under the current field, so the protocol's built-in
// frame alternation is tracked exactly while any field change launches a
// decaying transverse spiral; the deviation precesses about the axis by the
// signed flip error once per pulse and shrinks by e^{-1/n_eq}, with the norm
// restored (directional relaxation — the spin part stays on its sphere;
// amplitude decay is applied at readout). Odd-frame samples are folded
// through the half-turn about x in this bookkeeping, so the deviation's
// x-projection is common to both frames while the axis motion itself carries
// the frame-alternating field imprint.
std::pair<acquisition_record, trajectory_trace> run(const protocol_config& protocol,
                                                    const field_scenario& scenario,
                                                    const engine_options& options = {});

}  // namespace prism
