#include "prism/floquet.hpp"

#include <cmath>
#include <limits>

namespace prism {

namespace {

// End of the interval where the calibration frequency offset is active.
// A zero calibration_duration with a nonzero offset means "the whole record".
double calibration_end(const protocol_config& cfg) {
  if (cfg.orbit_freq_offset == 0.0) return 0.0;
  if (cfg.calibration_duration > 0.0) return cfg.calibration_duration;
  return std::numeric_limits<double>::infinity();
}

// Integral of the drive rate A·sin(phase_arg(t)) over [t0, t1] within one
// constant-frequency piece whose phase argument is phi0 + omega·(t − tref).
double sine_piece_integral(double amplitude, double omega, double phi_at_t0, double dt) {
  if (omega == 0.0) return amplitude * std::sin(phi_at_t0) * dt;
  return amplitude / omega * (std::cos(phi_at_t0) - std::cos(phi_at_t0 + omega * dt));
}

}  // namespace

double protocol_config::orbit_frequency_at(double t) const {
  const double base = orbit_frequency();
  return t < calibration_end(*this) ? base + orbit_freq_offset : base;
}

double protocol_config::orbit_phase_effective() const {
  if (orbit_phase) return *orbit_phase;
  // Positive lobe centered in the first spacing: peak at t = spacing/2, which
  // also puts the drive's zero crossings at the pulse centers.
  return M_PI / 2.0 - 2.0 * M_PI * orbit_frequency_at(0.0) * spacing / 2.0;
}

double protocol_config::orbit_phase_arg(double t) const {
  const double t_cal = calibration_end(*this);
  const double f_base = orbit_frequency();
  const double f_cal = f_base + orbit_freq_offset;
  double cycles;
  if (t <= t_cal) {
    cycles = f_cal * t;
  } else {
    cycles = f_cal * t_cal + f_base * (t - t_cal);
  }
  return orbit_phase_effective() + 2.0 * M_PI * cycles;
}

void protocol_config::validate() const {
  auto bad = [](const std::string& what) { throw contract_error("protocol: " + what); };
  if (!(pulse_duration > 0.0) || !std::isfinite(pulse_duration)) bad("pulse_duration must be > 0");
  if (!(spacing > 0.0) || !std::isfinite(spacing)) bad("spacing must be > 0");
  if (!(flip_angle > 0.0) || !(flip_angle < 2.0 * M_PI)) bad("flip_angle must lie in (0, 2*pi)");
  if (!std::isfinite(detuning)) bad("detuning must be finite");
  if (!(orbit_amplitude >= 0.0) || !std::isfinite(orbit_amplitude)) bad("orbit_amplitude must be >= 0");
  if (orbit_phase && !std::isfinite(*orbit_phase)) bad("orbit_phase must be finite");
  if (orbit_period < 0.0 || !std::isfinite(orbit_period)) bad("orbit_period must be >= 0");
  if (!std::isfinite(orbit_freq_offset)) bad("orbit_freq_offset must be finite");
  if (calibration_duration < 0.0) bad("calibration_duration must be >= 0");
  if (segments_per_pulse < 8) bad("segments_per_pulse must be at least 8");
  if (acquisition_offset < 0.0) bad("acquisition_offset must be >= 0");
  const double window = acquisition_window();
  if (!(window > 0.0)) bad("acquisition window must have positive length");
  if (acquisition_offset + window > spacing * (1.0 + 1e-12))
    bad("acquisition window must fit inside the spacing");
}

namespace detail {

// Drive-only z-phase accumulated over [t0, t1], splitting at the calibration
// frequency switch so the phase stays continuous.
double drive_phase(const protocol_config& cfg, double t0, double t1) {
  if (cfg.orbit_amplitude == 0.0 || t1 <= t0) return 0.0;
  const double t_cal = calibration_end(cfg);
  double total = 0.0;
  double a = t0;
  if (a < t_cal && t1 > t_cal) {
    const double omega = 2.0 * M_PI * cfg.orbit_frequency_at(a);
    total += sine_piece_integral(cfg.orbit_amplitude, omega, cfg.orbit_phase_arg(a), t_cal - a);
    a = t_cal;
  }
  const double omega = 2.0 * M_PI * cfg.orbit_frequency_at(a);
  total += sine_piece_integral(cfg.orbit_amplitude, omega, cfg.orbit_phase_arg(a), t1 - a);
  return total;
}

// Full z-phase (drive + detuning + extra constant rate) over [t0, t1].
double z_phase(const protocol_config& cfg, double extra_z_rate, double t0, double t1) {
  return drive_phase(cfg, t0, t1) + (cfg.detuning + extra_z_rate) * (t1 - t0);
}

mat3d z_rotation(double angle) {
  return rodrigues(vec3d(0.0, 0.0, angle));
}

// Product of the N segment rotations of one pulse starting at t0. Segment j
// rotates about (rabi, 0, mean z-rate over the segment) for its duration;
// the mean is the analytic integral of the drive over the segment.
mat3d pulse_rotation(const protocol_config& cfg, double extra_z_rate, double t0,
                     double flip_scale) {
  const int n = cfg.segments_per_pulse;
  const double dt = cfg.pulse_duration / n;
  const double rabi = cfg.rabi_rate() * flip_scale;
  mat3d acc = mat3d::Identity();
  for (int j = 0; j < n; ++j) {
    const double a = t0 + j * dt;
    const double zbar = z_phase(cfg, extra_z_rate, a, a + dt) / dt;
    acc = rodrigues(vec3d(rabi * dt, 0.0, zbar * dt)) * acc;
  }
  return acc;
}

}  // namespace detail

cycle_rotations build_cycle(const protocol_config& cfg, double extra_z_rate,
                            double cycle_start_time, double flip_scale) {
  cfg.validate();
  const double ts = cfg.spacing, tp = cfg.pulse_duration;
  const double t0 = cycle_start_time;
  const double a_end = t0 + ts;
  const double p1_end = a_end + tp;
  const double b_end = p1_end + ts;
  const double p2_end = b_end + tp;

  cycle_rotations out;
  out.phi_a = detail::z_phase(cfg, extra_z_rate, t0, a_end);
  out.phi_b = detail::z_phase(cfg, extra_z_rate, p1_end, b_end);

  const mat3d r_a = detail::z_rotation(out.phi_a);
  const mat3d p1 = detail::pulse_rotation(cfg, extra_z_rate, a_end, flip_scale);
  const mat3d r_b = detail::z_rotation(out.phi_b);
  const mat3d p2 = detail::pulse_rotation(cfg, extra_z_rate, b_end, flip_scale);

  out.r_frame1 = p2 * r_b * p1 * r_a;

  // Frame 2 starts half a period later, at spacing b; its trailing factors
  // fall in the next cycle, which matters once the drive is detuned from the
  // matched period.
  const mat3d r_a_next = detail::z_rotation(detail::z_phase(cfg, extra_z_rate, p2_end, p2_end + ts));
  const mat3d p1_next = detail::pulse_rotation(cfg, extra_z_rate, p2_end + ts, flip_scale);
  out.r_frame2 = p1_next * r_a_next * p2 * r_b;
  return out;
}

namespace {

vec3d bias_axis_sign(vec3d n) {
  if (std::abs(n.x()) > 1e-9) {
    if (n.x() < 0.0) n = -n;
  } else if (std::abs(n.z()) > 1e-9) {
    if (n.z() < 0.0) n = -n;
  } else if (n.y() < 0.0) {
    n = -n;
  }
  return n;
}

// Axes are anchored where each frame's cycle product starts: the beginning of
// its leading spacing. This is the same anchor the record engine uses when it
// samples axes window by window.
vec3d frame_axis(const mat3d& r) {
  if (rotation_angle(r) <= 1e-9)
    throw engine_error("degenerate protocol: one-cycle rotation is the identity");
  return bias_axis_sign(invariant_axis(r));
}

}  // namespace

prethermal_axes_result prethermal_axes(const cycle_rotations& cyc) {
  prethermal_axes_result out;
  out.n1 = frame_axis(cyc.r_frame1);
  out.n2 = frame_axis(cyc.r_frame2);
  out.elevation1 = std::atan2(out.n1.z(), out.n1.x());
  out.elevation2 = std::atan2(out.n2.z(), out.n2.x());
  out.inter_vector_angle = geodesic_distance(out.n1, out.n2);
  return out;
}

vec3d axis_at_time(const protocol_config& cfg, double extra_z_rate, double spacing_start,
                   double anchor_offset, double flip_scale) {
  const double ts = cfg.spacing, tp = cfg.pulse_duration;
  const double t0 = spacing_start + anchor_offset;
  mat3d acc = detail::z_rotation(detail::z_phase(cfg, extra_z_rate, t0, spacing_start + ts));
  double t = spacing_start + ts;
  for (int half = 0; half < 2; ++half) {
    acc = detail::pulse_rotation(cfg, extra_z_rate, t, flip_scale) * acc;
    t += tp;
    const double spacing_end = half == 0 ? t + ts : t + anchor_offset;
    acc = detail::z_rotation(detail::z_phase(cfg, extra_z_rate, t, spacing_end)) * acc;
    t += ts;
  }
  if (rotation_angle(acc) <= 1e-9)
    throw engine_error("degenerate protocol: one-cycle rotation is the identity");
  return bias_axis_sign(invariant_axis(acc));
}

// Both forms report the elevation of the axis representative with a positive
// x-component — the same branch prethermal_axes picks — so for epsilon < 0
// (flip short of a half turn) the elevation comes out negative.
double delta_pulse_elevation(double phi_a, double epsilon) {
  if (epsilon == 0.0) return phi_a >= 0.0 ? M_PI / 2.0 : -M_PI / 2.0;
  return std::atan(phi_a / epsilon);
}

double delta_pulse_elevation_exact(double phi_a, double epsilon) {
  const double te = std::tan(epsilon / 2.0);
  if (te == 0.0) return phi_a >= 0.0 ? M_PI / 2.0 : -M_PI / 2.0;
  return std::atan(std::tan(phi_a / 2.0) / te);
}

double spin_lock_tilt(double total_z_rate, double rabi_rate) {
  if (!(rabi_rate > 0.0)) throw contract_error("spin_lock_tilt: rabi rate must be > 0");
  return std::atan2(total_z_rate, rabi_rate);
}

std::vector<double> response_function(const std::vector<double>& elevation,
                                      const std::vector<double>& bias) {
  if (elevation.size() != bias.size())
    throw contract_error("response_function: series lengths differ");
  const std::size_t n = bias.size();
  if (n < 3) throw contract_error("response_function: need at least 3 points");
  for (std::size_t i = 1; i < n; ++i)
    if (!(bias[i] > bias[i - 1]))
      throw contract_error("response_function: bias grid must be strictly increasing");

  std::vector<double> out(n);
  auto slope = [&](std::size_t lo, std::size_t hi) {
    return (elevation[hi] - elevation[lo]) / (bias[hi] - bias[lo]);
  };
  out[0] = std::sin(elevation[0]) * slope(0, 1);
  for (std::size_t i = 1; i + 1 < n; ++i)
    out[i] = std::sin(elevation[i]) * slope(i - 1, i + 1);
  out[n - 1] = std::sin(elevation[n - 1]) * slope(n - 2, n - 1);
  return out;
}

transient_series_result transient_series(const transient_params& p, int n_max) {
  if (!(p.n_eq > 0.0)) throw contract_error("transient_series: n_eq must be > 0");
  if (n_max < 0) throw contract_error("transient_series: n_max must be >= 0");
  if (!(p.magnetization0 >= 0.0)) throw contract_error("transient_series: bad magnetization0");

  transient_series_result out;
  out.g.reserve(n_max + 1);
  out.mx.reserve(n_max + 1);
  out.times.reserve(n_max + 1);
  const std::complex<double> rate(-1.0 / p.n_eq, p.epsilon);
  for (int n = 0; n <= n_max; ++n) {
    const double parity = (n % 2 == 0) ? 1.0 : -1.0;
    const std::complex<double> g = parity * (p.g_eq + (p.g0 - p.g_eq) * std::exp(rate * double(n)));
    const double a = std::abs(g);
    double mx;
    if (a <= p.magnetization0) {
      mx = std::sqrt(p.magnetization0 * p.magnetization0 - a * a);
    } else {
      mx = 0.0;
      ++out.clamped;
    }
    out.g.push_back(g);
    out.mx.push_back(mx);
    out.times.push_back(n * p.tau_cycle);
  }
  return out;
}

std::vector<vec3d> fibonacci_sphere(int count) {
  if (count < 1) throw contract_error("fibonacci_sphere: count must be >= 1");
  std::vector<vec3d> pts;
  pts.reserve(count);
  const double golden_angle = M_PI * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < count; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / count;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double th = golden_angle * i;
    pts.emplace_back(r * std::cos(th), r * std::sin(th), z);
  }
  return pts;
}

stability_map_result stability_map(const protocol_config& cfg, const std::vector<vec3d>& grid,
                                   double extra_z_rate) {
  if (grid.empty()) throw contract_error("stability_map: empty grid");
  const cycle_rotations cyc = build_cycle(cfg, extra_z_rate);

  // Same anchoring as prethermal_axes, so the displacement minima coincide
  // with the reported axes.
  const mat3d& u1 = cyc.r_frame1;
  const mat3d& u2 = cyc.r_frame2;

  stability_map_result out;
  out.points = grid;
  out.displacement1.reserve(grid.size());
  out.displacement2.reserve(grid.size());
  for (const vec3d& v : grid) {
    out.displacement1.push_back(geodesic_distance(v, (u1 * v).normalized().eval()));
    out.displacement2.push_back(geodesic_distance(v, (u2 * v).normalized().eval()));
  }
  return out;
}

}  // namespace prism
