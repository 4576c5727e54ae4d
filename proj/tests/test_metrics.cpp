#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "prism/acquisition.hpp"
#include "prism/errors.hpp"
#include "prism/metrics.hpp"
#include "prism/rng.hpp"

using namespace prism;

namespace {

std::vector<double> tone(std::size_t n, double rate, double f, double amp, double phase = 0.0) {
  std::vector<double> v(n);
  for (std::size_t k = 0; k < n; ++k) {
    v[k] = amp * std::sin(2.0 * M_PI * f * static_cast<double>(k) / rate + phase);
  }
  return v;
}

std::vector<double> white_noise(std::size_t n, double sigma, std::uint64_t seed) {
  noise_stream ns(seed, "mc");
  std::vector<double> v(n);
  for (std::size_t k = 0; k < n; ++k) v[k] = sigma * ns.gaussian(k);
  return v;
}

}  // namespace

TEST_CASE("unit sine at an exact bin reads 1.0 in the amplitude spectrum") {
  const auto s = amplitude_spectrum(tone(5000, 5000.0, 100.0, 1.0, 0.31), 5000.0);
  CHECK(s.delta_f == doctest::Approx(1.0));
  CHECK(peak_magnitude(s, 100.0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(s.magnitudes[250] < 1e-9);
  CHECK(s.magnitudes[0] < 1e-9);

  // Odd length, exact bin k=37 of L=2499 at 5 kHz.
  const std::size_t L = 2499;
  const double f = 37.0 * 5000.0 / static_cast<double>(L);
  const auto s2 = amplitude_spectrum(tone(L, 5000.0, f, 1.0), 5000.0);
  CHECK(peak_magnitude(s2, f) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(s2.magnitudes[40] < 1e-9);
}

TEST_CASE("constant series concentrates in the DC bin at its own value") {
  std::vector<double> v(1000, 0.7);
  const auto s = amplitude_spectrum(v, 1000.0);
  CHECK(s.magnitudes[0] == doctest::Approx(0.7).epsilon(1e-12));
  for (std::size_t k = 1; k < s.magnitudes.size(); ++k) CHECK(s.magnitudes[k] <= 1e-12);
}

TEST_CASE("Nyquist-rate alternation reads at the edge bin without doubling") {
  std::vector<double> v(1000);
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = (k % 2 == 0) ? 0.5 : -0.5;
  const auto s = amplitude_spectrum(v, 1000.0);
  CHECK(s.magnitudes.back() == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(s.freqs.back() == doctest::Approx(500.0));
}

TEST_CASE("Parseval identity holds in the documented scaling") {
  for (std::size_t L : {1000u, 999u}) {
    const auto v = white_noise(L, 1.3, 11);
    const auto s = amplitude_spectrum(v, 5000.0);
    const double time_energy = std::inner_product(v.begin(), v.end(), v.begin(), 0.0);
    double freq_energy = s.magnitudes[0] * s.magnitudes[0];
    const bool even = (L % 2 == 0);
    for (std::size_t k = 1; k < s.magnitudes.size(); ++k) {
      const bool edge = even && k == s.magnitudes.size() - 1;
      freq_energy += (edge ? 1.0 : 0.5) * s.magnitudes[k] * s.magnitudes[k];
    }
    freq_energy *= static_cast<double>(L);
    CHECK(freq_energy == doctest::Approx(time_energy).epsilon(1e-9));
  }
}

TEST_CASE("white-noise bin magnitudes match the analytic expectation") {
  // Interior bins of a sigma white-noise spectrum average sigma*sqrt(pi/L).
  const std::size_t L = 5000;
  const double sigma = 1.0;
  const auto s = amplitude_spectrum(white_noise(L, sigma, 21), 5000.0);
  double mean = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 1; k + 1 < s.magnitudes.size(); ++k) {
    mean += s.magnitudes[k];
    ++count;
  }
  mean /= static_cast<double>(count);
  const double expected = sigma * std::sqrt(M_PI / static_cast<double>(L));
  CHECK(mean == doctest::Approx(expected).epsilon(0.03));
}

TEST_CASE("amplitude_spectrum validates its inputs") {
  CHECK_THROWS_AS(amplitude_spectrum({}, 100.0), contract_error);
  CHECK_THROWS_AS(amplitude_spectrum(std::vector<double>(5, 1.0), 100.0), contract_error);
  CHECK_THROWS_AS(amplitude_spectrum(std::vector<double>(100, 1.0), 0.0), contract_error);
}

TEST_CASE("Hann window keeps exact-bin tone amplitude after gain correction") {
  const auto s = amplitude_spectrum(tone(4096, 4096.0, 256.0, 1.0), 4096.0, true);
  CHECK(peak_magnitude(s, 256.0) == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("identical spectra give suppression factor exactly 1") {
  const auto v = tone(5000, 5000.0, 20.0, 1.0);
  const auto s = amplitude_spectrum(v, 5000.0);
  CHECK(suppression_factor(s, s, 10.0, 20.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("suppression at 20 Hz exceeds 1e3 and matches the closed form") {
  suppression_sweep_config cfg;
  cfg.f_min = cfg.f_max = 20.0;
  const auto curve = suppression_sweep(cfg);
  REQUIRE(curve.eta.size() == 1);
  CHECK(curve.bg_freqs[0] == doctest::Approx(20.0));
  CHECK(curve.eta[0] > 1e3);
  CHECK(curve.eta[0] ==
        doctest::Approx(suppression_closed_form(10.0, 20.0, 10000.0)).epsilon(1e-3));
}

TEST_CASE("suppression rolls off as 1/f^2 and matches the closed form off-bin") {
  suppression_sweep_config cfg;
  cfg.f_min = 400.0;
  cfg.f_max = 800.5;
  cfg.f_step = 400.5;  // points at 400 and 800.5 Hz (exact bin and half bin)
  const auto curve = suppression_sweep(cfg);
  REQUIRE(curve.eta.size() == 2);
  CHECK(curve.eta[0] ==
        doctest::Approx(suppression_closed_form(10.0, 400.0, 10000.0)).epsilon(1e-3));
  CHECK(curve.eta[1] ==
        doctest::Approx(suppression_closed_form(10.0, 800.5, 10000.0)).epsilon(1e-2));
  const double ratio = curve.eta[0] / curve.eta[1];
  CHECK(ratio == doctest::Approx(std::pow(800.5 / 400.0, 2)).epsilon(0.05));
}

TEST_CASE("suppression sweep skips points overlapping the signal") {
  suppression_sweep_config cfg;
  cfg.f_min = 7.0;
  cfg.f_max = 13.0;
  cfg.f_step = 0.5;  // 13 candidate points around the 10 Hz signal
  const auto curve = suppression_sweep(cfg);
  // Resolvability asks for >= 3 bins between the signal and background peak
  // bins; with 1 Hz bins and round-to-nearest, 7.0 (bin 7), 12.5 (bin 13) and
  // 13.0 (bin 13) survive while 7.5 rounds up to bin 8 and is skipped.
  REQUIRE(curve.bg_freqs.size() == 3);
  CHECK(curve.bg_freqs[0] == doctest::Approx(7.0));
  CHECK(curve.bg_freqs[1] == doctest::Approx(12.5));
  CHECK(curve.bg_freqs[2] == doctest::Approx(13.0));
}

TEST_CASE("suppression factor is scale invariant") {
  suppression_sweep_config cfg;
  cfg.f_min = cfg.f_max = 50.0;
  const auto base = suppression_sweep(cfg);
  cfg.signal_amplitude *= 37.0;
  cfg.bg_amplitude *= 37.0;
  const auto scaled = suppression_sweep(cfg);
  REQUIRE(base.eta.size() == 1);
  REQUIRE(scaled.eta.size() == 1);
  CHECK(scaled.eta[0] == doctest::Approx(base.eta[0]).epsilon(1e-9));
}

TEST_CASE("suppression sweep validates its configuration") {
  suppression_sweep_config cfg;
  cfg.f_step = 0.0;
  CHECK_THROWS_AS(suppression_sweep(cfg), contract_error);
  cfg = {};
  cfg.f_max = 3000.0;  // beyond the output Nyquist band
  CHECK_THROWS_AS(suppression_sweep(cfg), contract_error);
  cfg = {};
  cfg.f_signal = 0.0;
  CHECK_THROWS_AS(suppression_sweep(cfg), contract_error);
}

TEST_CASE("white-noise sensitivity matches 2*sigma/sqrt(fs)") {
  const double sigma = 1.0, rate = 5000.0;
  const auto s = amplitude_spectrum(white_noise(5000, sigma, 33), rate);
  const auto rep = sensitivity(s, {0});
  const double expected = 2.0 * sigma / std::sqrt(rate);
  CHECK(rep.sensitivity == doctest::Approx(expected).epsilon(0.05));
  CHECK(rep.used_bins == s.magnitudes.size() - 1);
}

TEST_CASE("sensitivity scales linearly with the noise and masks the signal") {
  const double rate = 5000.0;
  auto v = white_noise(5000, 0.5, 44);
  const auto base = sensitivity(amplitude_spectrum(v, rate), {0});

  // Doubling the noise doubles S.
  for (double& x : v) x *= 2.0;
  const auto doubled = sensitivity(amplitude_spectrum(v, rate), {0});
  CHECK(doubled.sensitivity == doctest::Approx(2.0 * base.sensitivity).epsilon(1e-12));

  // A strong masked tone does not change S.
  auto withtone = white_noise(5000, 0.5, 44);
  const auto t = tone(5000, rate, 100.0, 50.0);
  for (std::size_t k = 0; k < withtone.size(); ++k) withtone[k] += t[k];
  const auto masked =
      sensitivity(amplitude_spectrum(withtone, rate), {0, 98, 99, 100, 101, 102});
  CHECK(masked.sensitivity == doctest::Approx(base.sensitivity).epsilon(0.02));
}

TEST_CASE("noiseless spectrum yields a zero floor") {
  const auto s = amplitude_spectrum(tone(2000, 2000.0, 100.0, 1.0), 2000.0);
  const auto rep = sensitivity(s, {0, 99, 100, 101});
  CHECK(rep.sensitivity < 1e-12);
}

TEST_CASE("sensitivity validates the mask") {
  const auto s = amplitude_spectrum(white_noise(100, 1.0, 55), 100.0);
  CHECK_THROWS_AS(sensitivity(s, {}), contract_error);        // DC not masked
  CHECK_THROWS_AS(sensitivity(s, {0, 9999}), contract_error); // out of range
  std::vector<std::size_t> all(s.magnitudes.size());
  std::iota(all.begin(), all.end(), 0);
  CHECK_THROWS_AS(sensitivity(s, all), contract_error);       // nothing left
}

TEST_CASE("transient fit finds a 138.9 Hz tone within a quarter bin in 12 ms") {
  const double rate = 5000.0, f = 138.9;
  const auto v = tone(60, rate, f, 1.0, 0.7);
  const auto r = transient_fit(v, rate);
  const double bin = rate / 60.0;
  CHECK(std::abs(r.frequency - f) < bin / 4.0);
  CHECK(r.stderr_hz == doctest::Approx(bin / 2.0));
}

TEST_CASE("transient fit honors the window argument") {
  const double rate = 5000.0, f = 300.0;
  auto v = tone(1000, rate, f, 1.0);
  // Corrupt everything after the first 100 samples; a 20 ms window ignores it.
  for (std::size_t k = 100; k < v.size(); ++k) v[k] = 0.0;
  const auto r = transient_fit(v, rate, 0.02);
  CHECK(std::abs(r.frequency - f) < rate / 100.0 / 4.0);
}

TEST_CASE("transient fit rejects flat series and short windows") {
  std::vector<double> flat(100, 3.14);
  CHECK_THROWS_AS(transient_fit(flat, 1000.0), engine_error);
  CHECK_THROWS_AS(transient_fit(std::vector<double>(4, 1.0), 1000.0), contract_error);
}

TEST_CASE("measured response sees an injected tone and flags empty bands") {
  protocol_config cfg;
  cfg.pulse_duration = 24e-6;
  cfg.spacing = 76e-6;

  field_scenario scn;
  scn.duration = 1.0;
  scn.target.k = waveform::kind::sine;
  scn.target.amplitude = 1.8e-6;
  scn.target.frequency = 20.0;

  auto [rec, trace] = run(cfg, scn);
  const auto at_tone = measured_response(rec, 20.0);
  CHECK(at_tone.amplitude > 0.0);
  CHECK(!at_tone.below_floor);

  const auto off_tone = measured_response(rec, 1234.0);
  CHECK(off_tone.below_floor);
  CHECK(off_tone.amplitude < 0.01 * at_tone.amplitude);
}

TEST_CASE("sensor response is flat within 20% across 5-1000 Hz") {
  protocol_config cfg;
  cfg.pulse_duration = 24e-6;
  cfg.spacing = 76e-6;

  std::vector<double> freqs{5.0, 50.0, 200.0, 500.0, 1000.0};
  std::vector<double> resp;
  for (double f : freqs) {
    field_scenario scn;
    scn.duration = 1.0;
    scn.target.k = waveform::kind::sine;
    scn.target.amplitude = 1.8e-6;
    scn.target.frequency = f;
    auto [rec, trace] = run(cfg, scn);
    const auto r = measured_response(rec, f);
    CHECK(!r.below_floor);
    resp.push_back(r.amplitude);
  }
  const double lo = *std::min_element(resp.begin(), resp.end());
  const double hi = *std::max_element(resp.begin(), resp.end());
  CHECK((hi - lo) / hi < 0.20);
}
