#pragma once

#include <cstddef>
#include <vector>

#include "prism/acquisition.hpp"

namespace prism {

// A derived time series produced by one of the record-domain transforms below.
// `times` keeps the source record's window-midpoint convention.
struct differential_signal {
  std::vector<double> times;
  std::vector<double> values;
  double sample_rate = 0.0;  // rate of this series, not of the source record
};

// Differential extraction: for every interior sample with an odd 0-based index
// c (the second, fourth, ... sample), emit
//
//   d = M[c] - (M[c-1] + M[c+1]) / 2
//
// i.e. the sample minus the linear interpolation of its two neighbours, which
// belong to the opposite stroboscopic frame.  Common-mode content cancels to
// second order in the tone frequency while the parity-inverted field imprint
// adds constructively.  The output grid is the odd-index subsequence, so the
// output rate is half the record rate.  `halve` applies an optional factor of
// 1/2 so the output can be read as the deviation from the neighbour mean per
// manifold; it is off by default.
//
// Preconditions: the record carries alternation tags and at least 3 samples.
differential_signal differential(const acquisition_record& rec, bool halve = false);

// Low-level entry for synthetic series (no record bookkeeping).  The series is
// assumed uniformly sampled at `sample_rate` starting at `t0`.
differential_signal differential_series(const std::vector<double>& values, double sample_rate,
                                        double t0 = 0.0, bool halve = false);

// Differential normalized by the smoothed local amplitude baseline
//
//   baseline[c] = ( M[c] + (M[c-1] + M[c+1]) / 2 ) / 2
//
// smoothed with a centred moving average of `smooth_window` points (odd, >= 3).
// The output is d / baseline, which removes slow amplitude decay from the
// extracted signal.  Throws if the smoothed baseline vanishes or changes sign
// (the message names the offending record sample).
differential_signal normalized_differential(const acquisition_record& rec,
                                            std::size_t smooth_window = 3, bool halve = false);

// Full-rate variant: e[n] = M[n] - (M[n-1] + M[n+1]) / 2 for every interior
// sample n = 1 .. len-2.  At odd n this reproduces `differential` exactly; the
// even-index values interleave the opposite parity, so a genuine alternating
// imprint at frequency f appears at (record Nyquist - f) in this series.
differential_signal extended_extraction(const acquisition_record& rec, bool halve = false);

enum class smoother_kind {
  moving_average,   // centred boxcar mean
  quadratic_local,  // centred local least-squares quadratic fit evaluated at the centre
};

// Symmetric smoother with shrinking half-window at the edges (the window is
// truncated symmetrically so the estimate stays centred).  `window` is the
// full width in samples; even widths behave like the next odd width, and
// window <= 1 returns the input unchanged.
std::vector<double> smooth_series(const std::vector<double>& values, std::size_t window,
                                  smoother_kind kind = smoother_kind::moving_average);

struct reconstruct_options {
  // Smoothing window (in per-frame samples) for the |M_xy| envelope.  Window
  // sizes are data-set tuning knobs: wide windows reject noise but bias the
  // envelope near its maxima, so noiseless data should use a narrow window.
  std::size_t envelope_window = 100;
  // Long moving-average window for the amplitude baseline used to extrapolate
  // the recovered norm before the first and after the last detected maximum.
  std::size_t baseline_window = 2000;
  // An envelope local maximum qualifies as a plane crossing only if its
  // topographic prominence is at least this fraction of the envelope range.
  double prominence_fraction = 0.05;
  // Sign (+1 or -1) assigned to frame-0 M_z after the last detected crossing;
  // frame 1 takes the opposite sign, and the sign alternates backwards across
  // crossings.  This seeds the otherwise unobservable hemisphere choice.
  int rotation_phase_hint = +1;
  smoother_kind smoother = smoother_kind::moving_average;
};

// Result of the out-of-plane reconstruction.  All arrays are indexed like the
// source record (both frames interleaved).
struct reconstruction {
  std::vector<double> times;
  std::vector<double> mx, my;          // copied from the record
  std::vector<double> mz;              // recovered out-of-plane component
  std::vector<double> norm;            // recovered total magnetization |M|
  std::vector<double> envelope;        // smoothed |M_xy| actually used
  std::vector<int> frame;
  std::vector<std::size_t> maxima;     // record indices of detected envelope maxima
  int clamp_count = 0;                 // samples where envelope > norm forced mz = 0
};

// Recovers M_z(t) from the in-plane record of a slow calibration rotation.
// Per frame: |M_xy| is smoothed into an envelope; envelope maxima mark the
// instants where the magnetization crosses the transverse plane, where
// |M| = |M_xy|; the norm is linearly interpolated between maxima and
// extrapolated outside them proportionally to the long-window amplitude
// baseline; finally M_z = sign * sqrt(norm^2 - envelope^2) with the sign
// flipping at every crossing and opposite between the two frames.
//
// A constant envelope (relative range below 1e-9) is treated as an in-plane
// trajectory: M_z = 0 everywhere and no maxima are reported.  Otherwise a
// record without any qualifying envelope maximum is an error, since the norm
// cannot be calibrated.
reconstruction reconstruct_3d(const acquisition_record& rec, const reconstruct_options& opt = {});

}  // namespace prism
