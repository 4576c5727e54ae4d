#include "prism/acquisition.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <string>

#include "prism/rng.hpp"

namespace prism {

double sinc(double x) {
  if (std::abs(x) < 1e-8) return 1.0 - x * x / 6.0;
  return std::sin(x) / x;
}

double resonator_gain(double f_offset, double t_acq, const resonator_model& model) {
  if (!(t_acq > 0.0)) throw contract_error("resonator_gain: t_acq must be > 0");
  const double window = std::abs(sinc(M_PI * f_offset * t_acq));
  const double x = 2.0 * model.q * f_offset / model.carrier_frequency;
  return window / std::sqrt(1.0 + x * x);
}

std::complex<double> window_average(const std::vector<std::complex<double>>& iq) {
  if (iq.empty()) throw contract_error("window_average: empty window");
  std::complex<double> acc = 0.0;
  for (const std::complex<double>& s : iq) acc += s;
  return acc / double(iq.size());
}

std::complex<double> background_window_value(const background_spec& bg, double t_mid,
                                             double t_acq, double scenario_duration,
                                             const resonator_model& model) {
  if (!(t_acq > 0.0)) throw contract_error("background_window_value: t_acq must be > 0");
  const double f_inst = bg.instantaneous_offset(t_mid, scenario_duration);
  const double x = 2.0 * model.q * f_inst / model.carrier_frequency;
  const double lorentz = 1.0 / std::sqrt(1.0 + x * x);

  if (bg.mod == background_spec::modulation::none) {
    // exact window average of a fixed-offset phasor
    return std::polar(bg.amplitude * sinc(M_PI * bg.carrier_offset * t_acq) * lorentz,
                      bg.phase_at(t_mid, scenario_duration));
  }

  // Simpson quadrature of e^{i*phase(t)} across the window (the phase law is
  // exact, so only the window averaging is numeric).
  const int n = 32;  // intervals; plenty for offsets up to a few window nulls
  const double h = t_acq / n;
  const double t0 = t_mid - t_acq / 2.0;
  std::complex<double> acc = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    acc += w * std::polar(1.0, bg.phase_at(t0 + i * h, scenario_duration));
  }
  acc *= h / 3.0 / t_acq;
  return bg.amplitude * lorentz * acc;
}

namespace {

// Half-turn about x: maps one orbit hemisphere onto the other. Mirroring the
// odd-frame samples through it folds both frames onto a single smoothly
// moving equilibrium axis.
vec3d mirror_x(const vec3d& v) { return {v.x(), -v.y(), -v.z()}; }

}  // namespace

std::pair<acquisition_record, trajectory_trace> run(const protocol_config& protocol,
                                                    const field_scenario& scenario,
                                                    const engine_options& options) {
  protocol.validate();
  scenario.validate();
  if (options.mode.k == engine_mode::kind::dynamic && !(options.mode.n_eq > 0.0))
    throw contract_error("engine: n_eq must be > 0 in dynamic mode");

  const double tc = protocol.cycle_time();
  const long n_samples = long(std::floor(scenario.duration / tc + 1e-9));
  if (n_samples < 8)
    throw contract_error("engine: scenario duration must cover at least four full drive periods");

  const double t_acq = protocol.acquisition_window();
  const double mid_offset = protocol.acquisition_offset + t_acq / 2.0;
  const double gamma_rad = 2.0 * M_PI * options.gamma_hz_per_tesla;
  const bool dynamic = options.mode.k == engine_mode::kind::dynamic;
  const double relax_factor = dynamic ? std::exp(-1.0 / options.mode.n_eq) : 1.0;

  acquisition_record rec;
  rec.sample_rate = protocol.sample_rate();
  rec.protocol = protocol;
  rec.scenario = scenario;
  rec.mode = options.mode;
  rec.gamma_hz_per_tesla = options.gamma_hz_per_tesla;
  rec.times.reserve(n_samples);
  rec.mx.reserve(n_samples);
  rec.my.reserve(n_samples);
  rec.frame.reserve(n_samples);

  trajectory_trace trace;
  if (options.with_trace) {
    trace.times.reserve(n_samples);
    trace.state.reserve(n_samples);
    trace.axis.reserve(n_samples);
    trace.frame.reserve(n_samples);
  }

  noise_stream noise_i(scenario.rng_seed, "iq.i");
  noise_stream noise_q(scenario.rng_seed, "iq.q");

  // Axis continuity per frame: the adiabatic state follows the axis smoothly,
  // so each new axis is signed to match the previous one of the same frame
  // (the static positive-x convention only seeds the first cycle).
  vec3d prev_axis[2];
  bool have_axis[2] = {false, false};

  vec3d state = options.initial_state.value_or(scenario.magnetization0 * vec3d::UnitX());

  for (long k = 0; k < n_samples; ++k) {
    const double t0 = k * tc;
    const double t_mid = t0 + mid_offset;
    const int f = int(k % 2);

    const effective_params p = effective_params_at(scenario, t_mid);
    rec.clamp_warnings += p.clamp_warnings;
    const double extra = gamma_rad * (p.bias_total + p.target_value);

    vec3d axis = axis_at_time(protocol, extra, t0, 0.0, p.flip_scale);
    if (have_axis[f] && axis.dot(prev_axis[f]) < 0.0) axis = -axis;
    prev_axis[f] = axis;
    have_axis[f] = true;

    if (!dynamic) state = scenario.magnetization0 * axis;
    if (!state.allFinite())
      throw engine_error("engine: non-finite state at cycle " + std::to_string(k));

    const double decay = scenario.decay.factor(t_mid);
    const vec3d truth = state * decay;

    std::complex<double> iq(truth.x(), truth.y());
    iq *= p.coupling_scale;
    for (const background_spec& bg : scenario.backgrounds)
      iq += background_window_value(bg, t_mid, t_acq, scenario.duration, options.resonator);
    if (scenario.noise_sigma > 0.0) {
      iq += std::complex<double>(scenario.noise_sigma * noise_i.gaussian(std::uint64_t(k)),
                                 scenario.noise_sigma * noise_q.gaussian(std::uint64_t(k)));
    }

    rec.times.push_back(t_mid);
    rec.mx.push_back(iq.real());
    rec.my.push_back(iq.imag());
    rec.frame.push_back(f);
    if (options.with_trace) {
      trace.times.push_back(t_mid);
      trace.state.push_back(truth);
      trace.axis.push_back(axis);
      trace.frame.push_back(f);
    }

    if (dynamic && k + 1 < n_samples) {
      // Equilibration step between windows. In the mirrored (single-axis)
      // picture the component along the equilibrium axis is carried to where
      // the axis will sit at the next window *under the current field*, so
      // the built-in frame alternation of the axis is tracked exactly while
      // any field change shows up as a fresh transverse deviation at the
      // next window's decomposition. The deviation precesses about the
      // parity-mean axis — a frame-independent direction, so its
      // x-projection stays common to both frames — by the signed flip error
      // once per pulse and shrinks by e^{-1/n_eq}; the norm is then
      // restored, so relaxation is directional and the spin part stays on
      // its sphere. The axis motion itself carries the frame-alternating
      // field imprint that the downstream differential doubles.
      const double t1 = (k + 1) * tc;
      vec3d next_axis = axis_at_time(protocol, extra, t1, 0.0, p.flip_scale);
      const int f1 = int((k + 1) % 2);
      if (have_axis[f1] && next_axis.dot(prev_axis[f1]) < 0.0) next_axis = -next_axis;

      const vec3d m_cur = (f == 0) ? axis : mirror_x(axis);
      const vec3d m_next = (f1 == 0) ? next_axis : mirror_x(next_axis);
      const vec3d s = (f == 0) ? state : mirror_x(state);

      const double along = s.dot(m_cur);
      const vec3d delta = s - along * m_cur;
      const double eps_eff = p.flip_scale * protocol.flip_angle - M_PI;
      const vec3d m_mean = (m_cur + m_next).normalized();
      vec3d s_next = along * m_next + Eigen::AngleAxisd(eps_eff, m_mean) * delta * relax_factor;
      const double n_now = state.norm();
      const double n_next = s_next.norm();
      if (n_next > 0.0) s_next *= n_now / n_next;
      state = (f1 == 0) ? s_next : mirror_x(s_next);
    }
  }

  return {std::move(rec), std::move(trace)};
}

}  // namespace prism
