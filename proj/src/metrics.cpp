#include "prism/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <thread>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "prism/errors.hpp"

namespace prism {

std::size_t spectrum::nearest_bin(double f) const {
  if (magnitudes.empty()) throw contract_error("spectrum: empty");
  if (!(f >= 0.0) || f > nyquist() + 0.5 * delta_f)
    throw contract_error("spectrum: frequency outside the one-sided range");
  const auto b = static_cast<std::size_t>(std::llround(f / delta_f));
  return std::min(b, magnitudes.size() - 1);
}

spectrum amplitude_spectrum(const std::vector<double>& series, double sample_rate,
                            bool hann_window) {
  if (series.empty()) throw contract_error("amplitude_spectrum: empty input");
  if (series.size() < 8) throw contract_error("amplitude_spectrum: need at least 8 samples");
  if (!(sample_rate > 0.0)) throw contract_error("amplitude_spectrum: sample rate must be positive");

  const std::size_t L = series.size();
  std::vector<double> in = series;
  double gain = 1.0;
  if (hann_window) {
    double sum = 0.0;
    for (std::size_t k = 0; k < L; ++k) {
      const double w = 0.5 * (1.0 - std::cos(2.0 * M_PI * static_cast<double>(k) /
                                             static_cast<double>(L - 1)));
      in[k] *= w;
      sum += w;
    }
    gain = sum / static_cast<double>(L);
  }

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> bins;
  fft.fwd(bins, in);

  const bool even = (L % 2 == 0);
  const std::size_t nbins = L / 2 + 1;
  spectrum s;
  s.length = L;
  s.sample_rate = sample_rate;
  s.delta_f = sample_rate / static_cast<double>(L);
  s.freqs.resize(nbins);
  s.magnitudes.resize(nbins);
  for (std::size_t k = 0; k < nbins; ++k) {
    s.freqs[k] = static_cast<double>(k) * s.delta_f;
    double mag = std::abs(bins[k]) / static_cast<double>(L);
    const bool edge = (k == 0) || (even && k == L / 2);
    if (!edge) mag *= 2.0;
    s.magnitudes[k] = mag / gain;
  }
  return s;
}

double peak_magnitude(const spectrum& s, double f) { return s.magnitudes[s.nearest_bin(f)]; }

namespace {

// Reads a component's peak: the larger of the face bin and the alternation
// alias bin (Nyquist - f), returning {magnitude, bin index}.
std::pair<double, std::size_t> component_peak(const spectrum& s, double f) {
  const std::size_t face = s.nearest_bin(f);
  double mag = s.magnitudes[face];
  std::size_t bin = face;
  const double alias = s.nyquist() - f;
  if (alias >= 0.0) {
    const std::size_t ab = s.nearest_bin(alias);
    if (s.magnitudes[ab] > mag) {
      mag = s.magnitudes[ab];
      bin = ab;
    }
  }
  return {mag, bin};
}

}  // namespace

double suppression_factor(const spectrum& before, const spectrum& after,
                          double f_signal, double f_background) {
  const auto [sig_b, sig_b_bin] = component_peak(before, f_signal);
  const auto [bg_b, bg_b_bin] = component_peak(before, f_background);
  const auto [sig_a, sig_a_bin] = component_peak(after, f_signal);
  const auto [bg_a, bg_a_bin] = component_peak(after, f_background);

  const auto resolvable = [](std::size_t a, std::size_t b) {
    return (a > b ? a - b : b - a) >= 3;
  };
  if (!resolvable(sig_b_bin, bg_b_bin) || !resolvable(sig_a_bin, bg_a_bin))
    throw contract_error("suppression_factor: signal and background peaks closer than 3 bins");

  return (bg_b / bg_a) * (sig_a / sig_b);
}

double suppression_closed_form(double f_signal, double f_background, double raw_rate) {
  const double tau = 1.0 / raw_rate;
  const double num = 1.0 + std::cos(2.0 * M_PI * f_signal * tau);
  const double den = 1.0 - std::cos(2.0 * M_PI * f_background * tau);
  return num / den;
}

suppression_curve suppression_sweep(const suppression_sweep_config& cfg) {
  if (!(cfg.raw_rate > 0.0) || !(cfg.duration > 0.0) || !(cfg.f_step > 0.0))
    throw contract_error("suppression_sweep: rate, duration and step must be positive");
  if (!(cfg.f_max >= cfg.f_min) || !(cfg.f_min >= 0.0))
    throw contract_error("suppression_sweep: bad frequency range");
  if (!(cfg.f_signal > 0.0) || cfg.f_signal >= 0.25 * cfg.raw_rate)
    throw contract_error("suppression_sweep: signal frequency must lie inside the output band");
  if (cfg.f_max >= 0.25 * cfg.raw_rate)
    throw contract_error("suppression_sweep: sweep exceeds the output Nyquist band");

  // Two extra raw samples so the differential output spans exactly `duration`
  // seconds too: both spectra then share delta_f = 1/duration and the
  // off-bin leakage factors cancel in the ratio.
  const auto n_base = static_cast<std::size_t>(std::llround(cfg.duration * cfg.raw_rate));
  if (n_base < 16) throw contract_error("suppression_sweep: record too short");
  const std::size_t n_raw = n_base + 2;

  const std::size_t n_points =
      static_cast<std::size_t>(std::floor((cfg.f_max - cfg.f_min) / cfg.f_step + 1e-9)) + 1;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> etas(n_points, nan);
  std::vector<double> freqs(n_points, 0.0);

  const auto worker_count = [&] {
    unsigned t = cfg.threads != 0 ? cfg.threads : std::thread::hardware_concurrency();
    if (t == 0) t = 1;
    return std::min<std::size_t>(t, n_points);
  }();

  std::atomic<std::size_t> cursor{0};
  const auto body = [&] {
    std::vector<double> series(n_raw);
    for (;;) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= n_points) return;
      const double f_bg = cfg.f_min + static_cast<double>(i) * cfg.f_step;
      freqs[i] = f_bg;
      for (std::size_t k = 0; k < n_raw; ++k) {
        const double t = static_cast<double>(k) / cfg.raw_rate;
        const double sign = (k % 2 == 0) ? 1.0 : -1.0;
        series[k] = sign * cfg.signal_amplitude *
                        std::sin(2.0 * M_PI * cfg.f_signal * t + cfg.signal_phase) +
                    cfg.bg_amplitude * std::cos(2.0 * M_PI * f_bg * t + cfg.bg_phase);
      }
      const std::vector<double> raw_window(series.begin(), series.end() - 2);
      const spectrum before = amplitude_spectrum(raw_window, cfg.raw_rate);
      const differential_signal diff = differential_series(series, cfg.raw_rate);
      const spectrum after = amplitude_spectrum(diff.values, diff.sample_rate);
      try {
        etas[i] = suppression_factor(before, after, cfg.f_signal, f_bg);
      } catch (const contract_error&) {
        // Unresolvable point (background too close to the signal): skipped.
      }
    }
  };

  if (worker_count <= 1) {
    body();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(worker_count);
    for (std::size_t w = 0; w < worker_count; ++w) pool.emplace_back(body);
    for (auto& th : pool) th.join();
  }

  suppression_curve curve;
  curve.bg_freqs.reserve(n_points);
  curve.eta.reserve(n_points);
  for (std::size_t i = 0; i < n_points; ++i) {
    if (std::isnan(etas[i])) continue;
    curve.bg_freqs.push_back(freqs[i]);
    curve.eta.push_back(etas[i]);
  }
  return curve;
}

sensitivity_report sensitivity(const spectrum& s, const std::vector<std::size_t>& mask) {
  if (s.magnitudes.empty()) throw contract_error("sensitivity: empty spectrum");
  std::vector<bool> masked(s.magnitudes.size(), false);
  bool dc_masked = false;
  for (std::size_t b : mask) {
    if (b >= s.magnitudes.size()) throw contract_error("sensitivity: mask bin out of range");
    masked[b] = true;
    if (b == 0) dc_masked = true;
  }
  if (!dc_masked) throw contract_error("sensitivity: mask must cover the DC bin");

  double sum2 = 0.0;
  std::size_t used = 0;
  for (std::size_t b = 0; b < s.magnitudes.size(); ++b) {
    if (masked[b]) continue;
    sum2 += s.magnitudes[b] * s.magnitudes[b];
    ++used;
  }
  if (used < 16) throw contract_error("sensitivity: need at least 16 unmasked bins");

  sensitivity_report rep;
  rep.rms_floor = std::sqrt(sum2 / static_cast<double>(used));
  rep.sensitivity = rep.rms_floor / std::sqrt(s.delta_f);
  rep.used_bins = used;
  rep.masked_bins.assign(mask.begin(), mask.end());
  std::sort(rep.masked_bins.begin(), rep.masked_bins.end());
  rep.masked_bins.erase(std::unique(rep.masked_bins.begin(), rep.masked_bins.end()),
                        rep.masked_bins.end());
  return rep;
}

transient_fit_result transient_fit(const std::vector<double>& series, double sample_rate,
                                   double window_seconds) {
  if (!(sample_rate > 0.0)) throw contract_error("transient_fit: sample rate must be positive");
  std::size_t n = series.size();
  if (window_seconds > 0.0) {
    n = std::min(n, static_cast<std::size_t>(std::llround(window_seconds * sample_rate)));
  }
  if (n < 8) throw contract_error("transient_fit: window must cover at least 8 samples");

  std::vector<double> w(series.begin(), series.begin() + static_cast<std::ptrdiff_t>(n));
  double mean = 0.0;
  for (double v : w) mean += v;
  mean /= static_cast<double>(n);
  double rms = 0.0;
  for (double& v : w) {
    v -= mean;
    rms += v * v;
  }
  rms = std::sqrt(rms / static_cast<double>(n));
  if (rms <= 1e-14 * std::max(1.0, std::abs(mean)))
    throw engine_error("transient_fit: no peak (flat spectrum)");

  const spectrum s = amplitude_spectrum(w, sample_rate);
  std::size_t kmax = 1;
  for (std::size_t k = 2; k < s.magnitudes.size(); ++k)
    if (s.magnitudes[k] > s.magnitudes[kmax]) kmax = k;
  if (!(s.magnitudes[kmax] > 0.0))
    throw engine_error("transient_fit: no peak (flat spectrum)");

  // Refine by time-domain least squares: at a candidate frequency, project the
  // window onto {sin, cos, 1} and score the residual power; golden-section
  // search over +-1 bin around the coarse peak. For white noise this is the
  // maximum-likelihood frequency estimate, and it stays sharp even when the
  // window covers only a couple of periods.
  const auto residual = [&w, sample_rate](double f) {
    double ss = 0.0, sc = 0.0, s1 = 0.0, cc = 0.0, c1 = 0.0;
    double ys = 0.0, yc = 0.0, y1 = 0.0, yy = 0.0;
    const double wrad = 2.0 * M_PI * f / sample_rate;
    const double nn = static_cast<double>(w.size());
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double si = std::sin(wrad * static_cast<double>(k));
      const double co = std::cos(wrad * static_cast<double>(k));
      ss += si * si;
      sc += si * co;
      s1 += si;
      cc += co * co;
      c1 += co;
      ys += w[k] * si;
      yc += w[k] * co;
      y1 += w[k];
      yy += w[k] * w[k];
    }
    Eigen::Matrix3d g;
    g << ss, sc, s1, sc, cc, c1, s1, c1, nn;
    const Eigen::Vector3d rhs(ys, yc, y1);
    const Eigen::Vector3d coef = g.ldlt().solve(rhs);
    return yy - coef.dot(rhs);
  };

  const double f_lo = std::max(0.5 * s.delta_f, (static_cast<double>(kmax) - 1.0) * s.delta_f);
  const double f_hi =
      std::min(0.5 * sample_rate, (static_cast<double>(kmax) + 1.0) * s.delta_f);
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = f_lo, b = f_hi;
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  double r1 = residual(x1), r2 = residual(x2);
  for (int it = 0; it < 60 && (b - a) > 1e-9 * s.delta_f; ++it) {
    if (r1 <= r2) {
      b = x2;
      x2 = x1;
      r2 = r1;
      x1 = b - gr * (b - a);
      r1 = residual(x1);
    } else {
      a = x1;
      x1 = x2;
      r1 = r2;
      x2 = a + gr * (b - a);
      r2 = residual(x2);
    }
  }

  transient_fit_result r;
  r.frequency = 0.5 * (a + b);
  r.stderr_hz = 0.5 * s.delta_f;
  return r;
}

response_result measured_response(const acquisition_record& rec, double f_test, bool halve) {
  const differential_signal d = differential(rec, halve);
  if (d.values.size() < 8) throw contract_error("measured_response: record too short");
  const spectrum s = amplitude_spectrum(d.values, d.sample_rate);
  const std::size_t k = s.nearest_bin(f_test);

  std::vector<double> floor_bins;
  const std::size_t radius = 25;
  const std::size_t lo = k > radius ? k - radius : 1;
  const std::size_t hi = std::min(k + radius, s.magnitudes.size() - 1);
  for (std::size_t b = lo; b <= hi; ++b) {
    if (b + 2 >= k && b <= k + 2) continue;  // exclude the peak neighbourhood
    floor_bins.push_back(s.magnitudes[b]);
  }
  if (floor_bins.size() < 8) {
    floor_bins.clear();
    for (std::size_t b = 1; b < s.magnitudes.size(); ++b) {
      if (b + 2 >= k && b <= k + 2) continue;
      floor_bins.push_back(s.magnitudes[b]);
    }
  }

  response_result r;
  r.amplitude = s.magnitudes[k];
  if (!floor_bins.empty()) {
    const std::size_t mid = floor_bins.size() / 2;
    std::nth_element(floor_bins.begin(), floor_bins.begin() + static_cast<std::ptrdiff_t>(mid),
                     floor_bins.end());
    const double median = floor_bins[mid];
    r.below_floor = r.amplitude < 3.0 * median;
  }
  return r;
}

}  // namespace prism
