#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>
#include <functional>

#include "prism/rng.hpp"
#include "prism/scenario.hpp"

using namespace prism;

namespace {

// Simpson quadrature of the instantaneous-frequency law: an independent route
// to the accumulated phase. The integrands below are piecewise linear, so the
// rule is exact except for O(h^2) slivers at the kink points.
double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  if (n % 2) ++n;
  const double h = (b - a) / n;
  double acc = f(a) + f(b);
  for (int i = 1; i < n; ++i) acc += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

// Symmetric triangle, period 1, tri(0)=0 rising — written out independently
// of the library so the comparison is a real cross-check.
double tri_ref(double x) {
  x -= std::floor(x);
  if (x < 0.25) return 4.0 * x;
  if (x < 0.75) return 2.0 - 4.0 * x;
  return 4.0 * x - 4.0;
}

}  // namespace

TEST_SUITE("sample_table") {
  TEST_CASE("linear interpolation with endpoint hold") {
    sample_table tab;
    tab.t = {0.0, 1.0, 3.0};
    tab.v = {2.0, 4.0, 0.0};
    tab.validate("tab");
    CHECK(tab.value(0.0) == doctest::Approx(2.0));
    CHECK(tab.value(0.5) == doctest::Approx(3.0));
    CHECK(tab.value(2.0) == doctest::Approx(2.0));
    CHECK(tab.value(3.0) == doctest::Approx(0.0));
    // outside the span: hold the nearest endpoint
    CHECK(tab.value(-5.0) == doctest::Approx(2.0));
    CHECK(tab.value(9.0) == doctest::Approx(0.0));
  }

  TEST_CASE("validation rejects malformed tables") {
    sample_table bad;
    bad.t = {0.0, 1.0};
    bad.v = {1.0};
    CHECK_THROWS_AS(bad.validate("bad"), contract_error);
    bad.v = {1.0, 2.0};
    bad.t = {1.0, 1.0};
    CHECK_THROWS_AS(bad.validate("bad"), contract_error);
    sample_table empty;
    CHECK_THROWS_AS(empty.value(0.0), contract_error);
  }
}

TEST_SUITE("waveforms") {
  TEST_CASE("sine basics") {
    waveform w;
    w.k = waveform::kind::sine;
    w.amplitude = 16.5e-6;
    w.frequency = 20.0;
    w.validate();
    CHECK(w.value(0.0, 1.0) == doctest::Approx(0.0).scale(1e-6));
    // quarter period: full amplitude
    CHECK(w.value(1.0 / 80.0, 1.0) == doctest::Approx(16.5e-6).epsilon(1e-12));
    CHECK(w.value(1.0 / 40.0, 1.0) == doctest::Approx(0.0).scale(1e-6));
  }

  TEST_CASE("sine has zero mean over whole periods") {
    waveform w;
    w.k = waveform::kind::sine;
    w.amplitude = 1.0;
    w.frequency = 20.0;
    const int per_period = 64, periods = 7;
    double mean = 0.0;
    const double dt = (1.0 / 20.0) / per_period;
    for (int n = 0; n < per_period * periods; ++n) mean += w.value(n * dt, 1.0);
    mean /= per_period * periods;
    CHECK(std::abs(mean) < 1e-12);
  }

  TEST_CASE("square flips every half period, rising edge inclusive") {
    waveform w;
    w.k = waveform::kind::square;
    w.amplitude = 33e-6;
    w.frequency = 10.0;  // flips every 50 ms
    w.validate();
    CHECK(w.value(0.0, 1.0) == doctest::Approx(33e-6));
    CHECK(w.value(0.049, 1.0) == doctest::Approx(33e-6));
    CHECK(w.value(0.050, 1.0) == doctest::Approx(-33e-6));  // edge belongs to the new level
    CHECK(w.value(0.099, 1.0) == doctest::Approx(-33e-6));
    CHECK(w.value(0.100, 1.0) == doctest::Approx(33e-6));
    // zero mean over whole periods with edge-aligned sampling
    double mean = 0.0;
    for (int n = 0; n < 400; ++n) mean += w.value(n * (0.1 / 100.0), 1.0);
    CHECK(std::abs(mean / 400.0) < 1e-18);
  }

  TEST_CASE("triangle-FM phase matches numeric quadrature of the frequency law") {
    waveform w;
    w.k = waveform::kind::triangle_fm;
    w.amplitude = 2.0;
    w.frequency = 500.0;
    w.fm_deviation = 100.0;
    w.fm_rate = 2.5;
    w.validate();
    auto f_inst = [&](double t) { return w.frequency + w.fm_deviation * tri_ref(w.fm_rate * t); };
    for (double t : {0.05, 0.2, 0.33, 0.5}) {
      const double cycles = simpson(f_inst, 0.0, t, 200000);
      const double expect = w.amplitude * std::sin(2.0 * M_PI * cycles);
      CHECK(w.value(t, 1.0) == doctest::Approx(expect).epsilon(1e-6));
    }
  }

  TEST_CASE("swish sweeps linearly between the endpoints") {
    waveform w;
    w.k = waveform::kind::swish;
    w.amplitude = 1.0;
    w.sweep_from = 0.0;
    w.sweep_to = 250.0;
    w.validate();
    const double T = 1.0;
    auto f_inst = [&](double t) { return w.sweep_from + (w.sweep_to - w.sweep_from) * t / T; };
    for (double t : {0.1, 0.5, 0.9}) {
      const double cycles = simpson(f_inst, 0.0, t, 100000);
      const double expect = std::sin(2.0 * M_PI * cycles);
      CHECK(w.value(t, T) == doctest::Approx(expect).epsilon(1e-7));
    }
    // starts slow: first zero crossing far later than for the end frequency
    CHECK(std::abs(w.value(1e-4, T)) < 1e-5);
  }

  TEST_CASE("table waveform interpolates its samples") {
    waveform w;
    w.k = waveform::kind::table;
    w.table.t = {0.0, 1.0};
    w.table.v = {0.0, 2.0};
    w.validate();
    CHECK(w.value(0.25, 1.0) == doctest::Approx(0.5));
  }

  TEST_CASE("validation rejects bad parameters") {
    waveform w;
    w.k = waveform::kind::sine;
    w.frequency = -1.0;
    CHECK_THROWS_AS(w.validate(), contract_error);
    w = waveform{};
    w.k = waveform::kind::triangle_fm;
    w.fm_rate = 0.0;
    CHECK_THROWS_AS(w.validate(), contract_error);
    w = waveform{};
    w.k = waveform::kind::table;
    CHECK_THROWS_AS(w.validate(), contract_error);
  }
}

TEST_SUITE("backgrounds") {
  TEST_CASE("unmodulated background is a pure phasor at the offset") {
    background_spec b;
    b.carrier_offset = 100.0;
    b.amplitude = 3.0;
    b.phase = 0.4;
    b.validate();
    for (double t : {0.0, 0.123, 0.9}) {
      const std::complex<double> got = b.value(t, 1.0);
      CHECK(std::abs(got) == doctest::Approx(3.0));
      const std::complex<double> expect =
          std::polar(3.0, 2.0 * M_PI * 100.0 * t + 0.4);
      CHECK(std::abs(got - expect) < 1e-9);
    }
    // zero offset: constant phasor
    b.carrier_offset = 0.0;
    CHECK(std::abs(b.value(0.7, 1.0) - b.value(0.0, 1.0)) < 1e-15);
  }

  TEST_CASE("triangular FM offset ramps linearly and reverses every half modulation period") {
    background_spec b;
    b.carrier_offset = 50.0;
    b.amplitude = 1.0;
    b.mod = background_spec::modulation::triangular_fm;
    b.fm_deviation = 200.0;
    b.fm_rate = 2.5;  // modulation period 0.4 s: reversals every 0.2 s
    b.validate();
    auto slope = [&](double t) {
      const double h = 1e-6;
      return (b.instantaneous_offset(t + h, 1.0) - b.instantaneous_offset(t - h, 1.0)) / (2 * h);
    };
    CHECK(slope(0.05) == doctest::Approx(4.0 * 200.0 * 2.5).epsilon(1e-9));   // rising
    CHECK(slope(0.15) == doctest::Approx(-4.0 * 200.0 * 2.5).epsilon(1e-9));  // reversed
    CHECK(slope(0.25) == doctest::Approx(-4.0 * 200.0 * 2.5).epsilon(1e-9));
    CHECK(slope(0.35) == doctest::Approx(4.0 * 200.0 * 2.5).epsilon(1e-9));   // reversed again
    // extremes hit carrier ± deviation
    CHECK(b.instantaneous_offset(0.1, 1.0) == doctest::Approx(250.0));
    CHECK(b.instantaneous_offset(0.3, 1.0) == doctest::Approx(-150.0));
  }

  TEST_CASE("accumulated phase is the exact integral of the instantaneous offset") {
    background_spec b;
    b.carrier_offset = 50.0;
    b.amplitude = 1.0;
    b.phase = 0.2;
    b.mod = background_spec::modulation::triangular_fm;
    b.fm_deviation = 200.0;
    b.fm_rate = 2.5;
    auto f_inst = [&](double t) { return b.instantaneous_offset(t, 1.0); };
    for (double t : {0.07, 0.2, 0.31, 0.63}) {
      const double cycles = simpson(f_inst, 0.0, t, 200000);
      CHECK(b.phase_at(t, 1.0) ==
            doctest::Approx(2.0 * M_PI * cycles + 0.2).epsilon(1e-9));
    }
    // whole modulation periods leave only the carrier phase behind
    CHECK(b.phase_at(0.8, 1.0) == doctest::Approx(2.0 * M_PI * 50.0 * 0.8 + 0.2).epsilon(1e-12));
  }

  TEST_CASE("swish background ramps its offset over the record") {
    background_spec b;
    b.amplitude = 1.0;
    b.mod = background_spec::modulation::swish;
    b.sweep_max = 400.0;
    b.validate();
    CHECK(b.instantaneous_offset(0.0, 2.0) == doctest::Approx(0.0));
    CHECK(b.instantaneous_offset(1.0, 2.0) == doctest::Approx(200.0));
    CHECK(b.instantaneous_offset(2.0, 2.0) == doctest::Approx(400.0));
    auto f_inst = [&](double t) { return b.instantaneous_offset(t, 2.0); };
    const double cycles = simpson(f_inst, 0.0, 1.3, 50000);
    CHECK(b.phase_at(1.3, 2.0) == doctest::Approx(2.0 * M_PI * cycles).epsilon(1e-10));
  }
}

TEST_SUITE("coil and vibration") {
  TEST_CASE("loop field closed forms") {
    coil_spec c;
    c.radius = 0.02;
    c.turns = 1;
    c.current_scale = 1.0;
    const double mu0 = 4.0e-7 * M_PI;
    CHECK(coil_field_on_axis(c, 0.0) == doctest::Approx(mu0 / (2.0 * 0.02)).epsilon(1e-12));
    // at z = R the on-axis field drops by 2^{3/2}
    CHECK(coil_field_on_axis(c, 0.02) ==
          doctest::Approx(coil_field_on_axis(c, 0.0) / std::pow(2.0, 1.5)).epsilon(1e-12));
    c.turns = 3;
    CHECK(coil_field_on_axis(c, 0.0) == doctest::Approx(3.0 * mu0 / (2.0 * 0.02)).epsilon(1e-12));
    CHECK(coil_profile(c, 0.0) == doctest::Approx(1.0));
    CHECK(coil_profile(c, 0.01) < 1.0);
    CHECK(coil_profile(c, 0.02) == doctest::Approx(1.0 / std::pow(2.0, 1.5)).epsilon(1e-12));
  }

  TEST_CASE("midpoint value stands in for the average over a 2.1 mm sample near the axis center") {
    coil_spec c;
    c.radius = 0.02;
    c.turns = 2;
    const double thickness = 2.1e-3;
    for (double z0 : {0.0, 1.0e-3, 2.0e-3}) {
      double avg = 0.0;
      const int nseg = 2001;
      for (int i = 0; i < nseg; ++i) {
        const double z = z0 - thickness / 2 + thickness * (i + 0.5) / nseg;
        avg += coil_field_on_axis(c, z);
      }
      avg /= nseg;
      const double mid = coil_field_on_axis(c, z0);
      CHECK(std::abs(avg - mid) / mid < 0.01);
    }
  }

  TEST_CASE("vibration position and pulse-amplitude scaling") {
    vibration_spec v;
    v.amplitude = 1e-3;
    v.frequency = 5.0;
    CHECK(v.position(0.0) == doctest::Approx(0.0));
    CHECK(v.position(0.05) == doctest::Approx(1e-3));  // quarter period
    CHECK(v.rabi_scale(0.0) == doctest::Approx(1.0));
    CHECK(v.rabi_scale(2e-3) == doctest::Approx(coil_profile(v.coil, 2e-3)));
    // table overrides win
    v.trajectory.t = {0.0, 1.0};
    v.trajectory.v = {2e-3, 2e-3};
    CHECK(v.position(0.5) == doctest::Approx(2e-3));
    v.b1_profile.t = {-1e-2, 1e-2};
    v.b1_profile.v = {0.9, 1.1};
    CHECK(v.rabi_scale(0.0) == doctest::Approx(1.0));
    CHECK(v.rabi_scale(5e-3) == doctest::Approx(1.05));
  }
}

TEST_SUITE("decay and scenario") {
  TEST_CASE("decay closed forms") {
    decay_spec d;
    CHECK(d.factor(17.0) == doctest::Approx(1.0));
    d.r_d = 1.0 / 56.0;
    CHECK(d.factor(0.0) == doctest::Approx(1.0));
    CHECK(d.factor(56.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    d.r_d = 0.0;
    d.r_p = 0.25;
    CHECK(d.factor(4.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    d.r_d = 0.5;
    CHECK(d.factor(4.0) == doctest::Approx(std::exp(-1.0) * std::exp(-2.0)).epsilon(1e-12));
    d.r_p = -1.0;
    CHECK_THROWS_AS(d.validate(), contract_error);
  }

  TEST_CASE("scenario validation") {
    field_scenario s;
    s.target.k = waveform::kind::sine;
    s.target.amplitude = 1e-6;
    s.target.frequency = 20.0;
    CHECK_NOTHROW(s.validate());
    s.noise_sigma = -1.0;
    CHECK_THROWS_AS(s.validate(), contract_error);
    s.noise_sigma = 0.0;
    s.duration = 0.0;
    CHECK_THROWS_AS(s.validate(), contract_error);
    s.duration = 1.0;
    background_spec bad;
    bad.amplitude = -2.0;
    s.backgrounds.push_back(bad);
    CHECK_THROWS_AS(s.validate(), contract_error);
  }

  TEST_CASE("target sampling honors the record span") {
    field_scenario s;
    s.duration = 0.5;
    s.target.k = waveform::kind::sine;
    s.target.amplitude = 2e-6;
    s.target.frequency = 10.0;
    CHECK(sample_target(s, 0.025) == doctest::Approx(2e-6));
    CHECK_THROWS_AS(sample_target(s, 0.6), contract_error);
    CHECK_THROWS_AS(sample_target(s, -0.1), contract_error);
  }

  TEST_CASE("effective parameters without vibration are passthrough") {
    field_scenario s;
    s.bias = 1e-7;
    s.bias_table.t = {0.0, 1.0};
    s.bias_table.v = {0.0, 2e-7};
    s.target.k = waveform::kind::sine;
    s.target.amplitude = 1e-6;
    s.target.frequency = 1.0;
    s.decay.r_d = 1.0;
    const effective_params p = effective_params_at(s, 0.25);
    CHECK(p.flip_scale == doctest::Approx(1.0));
    CHECK(p.coupling_scale == doctest::Approx(1.0));
    CHECK(p.bias_total == doctest::Approx(1e-7 + 0.5e-7));
    CHECK(p.target_value == doctest::Approx(1e-6 * std::sin(2.0 * M_PI * 0.25)));
    CHECK(p.decay_factor == doctest::Approx(std::exp(-0.25)));
    CHECK(p.clamp_warnings == 0);
  }

  TEST_CASE("vibration scales pulse amplitude and target, clamping wild excursions") {
    field_scenario s;
    s.target.k = waveform::kind::none;
    vibration_spec v;
    v.trajectory.t = {0.0, 1.0};
    v.trajectory.v = {2e-3, 2e-3};
    s.vibration = v;
    effective_params p = effective_params_at(s, 0.5);
    const double expect = coil_profile(v.coil, 2e-3);
    CHECK(p.flip_scale == doctest::Approx(expect));
    CHECK(p.coupling_scale == doctest::Approx(expect));
    CHECK(p.clamp_warnings == 0);
    // 6 mm exceeds the 5 mm travel limit: clamp and warn
    s.vibration->trajectory.v = {6e-3, 6e-3};
    p = effective_params_at(s, 0.5);
    CHECK(p.clamp_warnings == 1);
    CHECK(p.flip_scale == doctest::Approx(coil_profile(v.coil, 5e-3)));
  }

  TEST_CASE("vibrating sample sees the target through the coil profile") {
    field_scenario s;
    s.target.k = waveform::kind::sine;
    s.target.amplitude = 1e-6;
    s.target.frequency = 0.25;  // sin(2π·0.25·1···) at t=1 → full amplitude at t=1
    s.duration = 2.0;
    vibration_spec v;
    v.trajectory.t = {0.0, 2.0};
    v.trajectory.v = {3e-3, 3e-3};
    s.vibration = v;
    const effective_params p = effective_params_at(s, 1.0);
    CHECK(p.target_value == doctest::Approx(1e-6 * coil_profile(v.coil, 3e-3)).epsilon(1e-12));
  }
}

TEST_SUITE("noise streams") {
  TEST_CASE("same key reproduces, different keys decorrelate") {
    noise_stream a(42, "iq.i");
    noise_stream a2(42, "iq.i");
    noise_stream b(42, "iq.q");
    noise_stream c(43, "iq.i");
    for (std::uint64_t i = 0; i < 100; ++i) {
      CHECK(a.gaussian(i) == a2.gaussian(i));
    }
    CHECK(a.gaussian(7) != b.gaussian(7));
    CHECK(a.gaussian(7) != c.gaussian(7));
    // draws are index-addressed: order of evaluation is irrelevant
    CHECK(a.gaussian(3) == a2.gaussian(3));
  }

  TEST_CASE("moments match a standard normal") {
    noise_stream s(20260817, "moments");
    const int n = 200000;
    double mean = 0.0, m2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = s.gaussian(i);
      mean += x;
      m2 += x * x;
    }
    mean /= n;
    m2 /= n;
    CHECK(std::abs(mean) < 0.01);
    CHECK(std::abs(m2 - 1.0) < 0.02);
    // neighboring channels look independent
    noise_stream t(20260817, "moments2");
    double cross = 0.0;
    for (int i = 0; i < n; ++i) cross += s.gaussian(i) * t.gaussian(i);
    CHECK(std::abs(cross / n) < 0.02);
  }
}
