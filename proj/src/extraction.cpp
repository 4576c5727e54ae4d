#include "prism/extraction.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "prism/errors.hpp"

namespace prism {

namespace {

std::vector<double> core_differential(const std::vector<double>& m, double scale) {
  // Centers sit on the even-index samples, so the retained alternating
  // component keeps the sign it has on the first acquisition window.
  const std::size_t count = (m.size() - 2) / 2;
  std::vector<double> d(count);
  for (std::size_t j = 0; j < count; ++j) {
    const std::size_t c = 2 * j + 2;
    d[j] = scale * (m[c] - 0.5 * (m[c - 1] + m[c + 1]));
  }
  return d;
}

void require_record_shape(const acquisition_record& rec, const char* what) {
  const std::size_t n = rec.times.size();
  if (rec.mx.size() != n || rec.my.size() != n)
    throw contract_error(std::string(what) + ": record component lengths disagree");
  if (rec.frame.size() != n)
    throw contract_error(std::string(what) + ": record is missing alternation tags");
  if (!(rec.sample_rate > 0.0))
    throw contract_error(std::string(what) + ": record sample rate must be positive");
}

}  // namespace

differential_signal differential(const acquisition_record& rec, bool halve) {
  require_record_shape(rec, "differential");
  if (rec.mx.size() < 3) throw contract_error("differential: need at least 3 samples");
  differential_signal out;
  out.values = core_differential(rec.mx, halve ? 0.5 : 1.0);
  out.times.resize(out.values.size());
  for (std::size_t j = 0; j < out.values.size(); ++j) out.times[j] = rec.times[2 * j + 2];
  out.sample_rate = rec.sample_rate / 2.0;
  return out;
}

differential_signal differential_series(const std::vector<double>& values, double sample_rate,
                                        double t0, bool halve) {
  if (values.size() < 3) throw contract_error("differential: need at least 3 samples");
  if (!(sample_rate > 0.0)) throw contract_error("differential: sample rate must be positive");
  differential_signal out;
  out.values = core_differential(values, halve ? 0.5 : 1.0);
  out.times.resize(out.values.size());
  const double dt = 1.0 / sample_rate;
  for (std::size_t j = 0; j < out.values.size(); ++j)
    out.times[j] = t0 + static_cast<double>(2 * j + 2) * dt;
  out.sample_rate = sample_rate / 2.0;
  return out;
}

differential_signal normalized_differential(const acquisition_record& rec,
                                            std::size_t smooth_window, bool halve) {
  require_record_shape(rec, "normalized differential");
  if (rec.mx.size() < 3) throw contract_error("normalized differential: need at least 3 samples");
  if (smooth_window < 3 || smooth_window % 2 == 0)
    throw contract_error("normalized differential: smoothing window must be odd and at least 3");

  differential_signal out = differential(rec, halve);
  std::vector<double> baseline(out.values.size());
  for (std::size_t j = 0; j < baseline.size(); ++j) {
    const std::size_t c = 2 * j + 2;
    baseline[j] = 0.5 * (rec.mx[c] + 0.5 * (rec.mx[c - 1] + rec.mx[c + 1]));
  }
  baseline = smooth_series(baseline, smooth_window, smoother_kind::moving_average);

  for (std::size_t j = 0; j < baseline.size(); ++j) {
    if (baseline[j] == 0.0 || std::signbit(baseline[j]) != std::signbit(baseline[0]))
      throw engine_error("normalized differential: baseline vanishes or changes sign near sample " +
                         std::to_string(2 * j + 2));
    out.values[j] /= baseline[j];
  }
  return out;
}

differential_signal extended_extraction(const acquisition_record& rec, bool halve) {
  require_record_shape(rec, "extended extraction");
  const std::size_t n = rec.mx.size();
  if (n < 3) throw contract_error("extended extraction: need at least 3 samples");
  const double scale = halve ? 0.5 : 1.0;
  differential_signal out;
  out.values.resize(n - 2);
  out.times.resize(n - 2);
  for (std::size_t k = 1; k + 1 < n; ++k) {
    out.values[k - 1] = scale * (rec.mx[k] - 0.5 * (rec.mx[k - 1] + rec.mx[k + 1]));
    out.times[k - 1] = rec.times[k];
  }
  out.sample_rate = rec.sample_rate;
  return out;
}

std::vector<double> smooth_series(const std::vector<double>& values, std::size_t window,
                                  smoother_kind kind) {
  if (window <= 1 || values.size() < 2) return values;
  const std::size_t n = values.size();
  const std::size_t half = window / 2;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t h = std::min({half, i, n - 1 - i});
    if (h == 0) {
      out[i] = values[i];
      continue;
    }
    if (kind == smoother_kind::moving_average) {
      double sum = 0.0;
      for (std::size_t q = i - h; q <= i + h; ++q) sum += values[q];
      out[i] = sum / static_cast<double>(2 * h + 1);
    } else {
      // Least-squares quadratic over offsets -h..h evaluated at the centre.
      // Only the even moments enter the centre value.
      const double hd = static_cast<double>(h);
      const double s0 = 2.0 * hd + 1.0;
      const double s2 = hd * (hd + 1.0) * (2.0 * hd + 1.0) / 3.0;
      const double s4 = s2 * (3.0 * hd * hd + 3.0 * hd - 1.0) / 5.0;
      double sy = 0.0;
      double sx2y = 0.0;
      for (std::size_t q = i - h; q <= i + h; ++q) {
        const double x = static_cast<double>(q) - static_cast<double>(i);
        sy += values[q];
        sx2y += x * x * values[q];
      }
      const double denom = s0 * s4 - s2 * s2;
      out[i] = denom > 0.0 ? (s4 * sy - s2 * sx2y) / denom : values[i];
    }
  }
  return out;
}

namespace {

// Topographic prominence of a local maximum: height above the higher of the
// two valley floors separating it from higher ground (or the series end).
double peak_prominence(const std::vector<double>& e, std::size_t j) {
  double left_min = e[j];
  for (std::size_t q = j; q-- > 0;) {
    if (e[q] > e[j]) break;
    left_min = std::min(left_min, e[q]);
  }
  double right_min = e[j];
  for (std::size_t q = j + 1; q < e.size(); ++q) {
    if (e[q] > e[j]) break;
    right_min = std::min(right_min, e[q]);
  }
  return e[j] - std::max(left_min, right_min);
}

}  // namespace

reconstruction reconstruct_3d(const acquisition_record& rec, const reconstruct_options& opt) {
  require_record_shape(rec, "reconstruct");
  const std::size_t n = rec.times.size();
  if (n < 8) throw contract_error("reconstruct: need at least 8 samples");
  if (opt.rotation_phase_hint != 1 && opt.rotation_phase_hint != -1)
    throw contract_error("reconstruct: rotation phase hint must be +1 or -1");
  if (!(opt.prominence_fraction >= 0.0 && opt.prominence_fraction <= 1.0))
    throw contract_error("reconstruct: prominence fraction must lie in [0, 1]");

  reconstruction out;
  out.times = rec.times;
  out.mx = rec.mx;
  out.my = rec.my;
  out.frame = rec.frame;
  out.mz.assign(n, 0.0);
  out.norm.assign(n, 0.0);
  out.envelope.assign(n, 0.0);

  for (int f = 0; f < 2; ++f) {
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < n; ++k)
      if (rec.frame[k] == f) idx.push_back(k);
    if (idx.size() < 4) throw contract_error("reconstruct: record does not cover both frames");

    const std::size_t m = idx.size();
    std::vector<double> xy(m);
    for (std::size_t j = 0; j < m; ++j) xy[j] = std::hypot(rec.mx[idx[j]], rec.my[idx[j]]);

    const std::vector<double> env = smooth_series(xy, opt.envelope_window, opt.smoother);
    const std::vector<double> base = smooth_series(xy, opt.baseline_window, smoother_kind::moving_average);

    const auto [lo_it, hi_it] = std::minmax_element(env.begin(), env.end());
    const double range = *hi_it - *lo_it;

    if (range <= 1e-9 * std::max(1.0, std::abs(*hi_it))) {
      // In-plane trajectory: the full magnetization is the envelope itself.
      for (std::size_t j = 0; j < m; ++j) {
        out.envelope[idx[j]] = env[j];
        out.norm[idx[j]] = env[j];
        out.mz[idx[j]] = 0.0;
      }
      continue;
    }

    std::vector<std::size_t> peaks;
    const double thresh = opt.prominence_fraction * range;
    for (std::size_t j = 1; j + 1 < m; ++j) {
      if (env[j] > env[j - 1] && env[j] >= env[j + 1] && peak_prominence(env, j) >= thresh)
        peaks.push_back(j);
    }
    if (peaks.empty())
      throw engine_error("reconstruct: no envelope maxima found; cannot calibrate the norm");

    // Norm: exact at crossings, linear between them, baseline-proportional outside.
    std::vector<double> norm(m, 0.0);
    for (std::size_t p = 0; p + 1 < peaks.size(); ++p) {
      const std::size_t a = peaks[p];
      const std::size_t b = peaks[p + 1];
      for (std::size_t j = a; j <= b; ++j) {
        const double w = static_cast<double>(j - a) / static_cast<double>(b - a);
        norm[j] = (1.0 - w) * env[a] + w * env[b];
      }
    }
    const std::size_t first = peaks.front();
    const std::size_t last = peaks.back();
    // Baseline-proportional extrapolation outside the outermost maxima. The
    // baseline is read at full-window indices only (clamped away from the
    // record ends), so the extrapolated norm tracks slow amplitude drift
    // without collapsing onto the raw samples where the window shrinks.
    const std::size_t lo = std::min(opt.baseline_window / 2, (m - 1) / 2);
    const std::size_t hi = m - 1 - lo;
    const auto base_at = [&](std::size_t j) { return base[std::clamp(j, lo, hi)]; };
    for (std::size_t j = 0; j < first; ++j)
      norm[j] = base_at(first) > 0.0 ? env[first] * base_at(j) / base_at(first) : env[first];
    for (std::size_t j = last + (peaks.size() > 1 ? 1 : 0); j < m; ++j)
      norm[j] = base_at(last) > 0.0 ? env[last] * base_at(j) / base_at(last) : env[last];
    if (peaks.size() == 1) norm[first] = env[first];

    // Signs: fixed after the last crossing by the hint (frame 1 opposite),
    // alternating across crossings going backwards.
    const int last_sign = (f == 0) ? opt.rotation_phase_hint : -opt.rotation_phase_hint;
    const std::size_t nseg = peaks.size() + 1;
    for (std::size_t j = 0; j < m; ++j) {
      const std::size_t seg = static_cast<std::size_t>(
          std::upper_bound(peaks.begin(), peaks.end(), j) - peaks.begin());
      const int sign = ((nseg - 1 - seg) % 2 == 0) ? last_sign : -last_sign;
      const double rad = norm[j] * norm[j] - env[j] * env[j];
      double z = 0.0;
      if (rad < 0.0) {
        ++out.clamp_count;
      } else {
        z = sign * std::sqrt(rad);
      }
      out.mz[idx[j]] = z;
      out.norm[idx[j]] = norm[j];
      out.envelope[idx[j]] = env[j];
    }
    for (std::size_t p : peaks) out.maxima.push_back(idx[p]);
  }

  std::sort(out.maxima.begin(), out.maxima.end());
  return out;
}

}  // namespace prism
