#pragma once

#include <cstddef>
#include <vector>

#include "prism/extraction.hpp"

namespace prism {

// One-sided amplitude spectrum.  Interior bins carry 2|X_k|/L so a unit sine
// at an exact bin reads 1.0; the DC bin and (for even lengths) the Nyquist
// bin carry |X_k|/L without the doubling, so a constant c reads c at DC.
// With this convention Parseval's identity takes the form
//   sum x^2 = L * ( m_0^2 + (1/2) * sum_interior m_k^2 + m_Nyquist^2 ).
struct spectrum {
  std::vector<double> freqs;       // Hz, uniform from 0 to Nyquist
  std::vector<double> magnitudes;  // amplitude units per the convention above
  double delta_f = 0.0;            // sample_rate / length
  double sample_rate = 0.0;
  std::size_t length = 0;          // time-domain sample count

  double nyquist() const { return 0.5 * sample_rate; }
  // Index of the bin closest to f (ties round half away from zero).
  std::size_t nearest_bin(double f) const;
};

// Rectangular window by default; `hann_window` applies a Hann taper whose
// coherent gain is divided back out so exact-bin tone amplitudes stay ~1.
spectrum amplitude_spectrum(const std::vector<double>& series, double sample_rate,
                            bool hann_window = false);

// Magnitude at the bin nearest to f.
double peak_magnitude(const spectrum& s, double f);

// Background-suppression figure of merit:
//
//   eta = (bg_before / bg_after) * (signal_after / signal_before)
//
// with all four terms read as nearest-bin peak magnitudes.  Because the
// extraction demodulates the parity-inverted imprint, a component injected at
// frequency f can surface either at f or at its alternation alias
// (Nyquist - f); each term therefore reads the larger of the two candidate
// bins in its own spectrum, which also makes eta == 1 exactly when both
// spectra are identical.  Throws if the chosen signal and background bins sit
// closer than 3 bins in either spectrum (unresolvable peaks).
double suppression_factor(const spectrum& before, const spectrum& after,
                          double f_signal, double f_background);

struct suppression_sweep_config {
  double raw_rate = 10000.0;     // rate of the synthetic raw series (Hz); the
                                 // differential output grid runs at half this
  double duration = 1.0;         // seconds of raw record per frequency point
  double f_signal = 10.0;        // imprinted (parity-inverted) tone
  double signal_amplitude = 1.0;
  double signal_phase = 0.0;
  double bg_amplitude = 1.0;     // common-mode tone swept in frequency
  double bg_phase = 0.0;
  double f_min = 0.0;
  double f_max = 1200.0;
  double f_step = 0.5;
  unsigned threads = 0;          // 0 = hardware concurrency
};

struct suppression_curve {
  std::vector<double> bg_freqs;  // evaluated background frequencies (Hz)
  std::vector<double> eta;
};

// Synthetic suppression sweep: per background frequency, builds
//   M[k] = (-1)^k * A_s sin(2 pi f_s t_k + p_s) + A_bg cos(2 pi f_bg t_k + p_bg)
// on the raw grid, applies the differential extraction, and evaluates
// suppression_factor on the before/after spectra.  One extra raw sample is
// generated beyond the nominal duration so that both spectra share exactly
// the same bin spacing (1/duration); points whose background lands within
// 3 bins of the signal are skipped (they would be unresolvable).
// Deterministic: results are ordered by frequency regardless of thread count.
suppression_curve suppression_sweep(const suppression_sweep_config& cfg = {});

// Closed-form expectation for the synthetic sweep above, with tau the raw
// sample spacing: the background residual after neighbour interpolation is
// (1 - cos(2 pi f_bg tau)) of its input amplitude while the imprinted signal
// gains (1 + cos(2 pi f_s tau)).
double suppression_closed_form(double f_signal, double f_background, double raw_rate);

struct sensitivity_report {
  double sensitivity = 0.0;                 // rms_floor / sqrt(delta_f)
  double rms_floor = 0.0;                   // RMS of unmasked bin magnitudes
  std::vector<std::size_t> masked_bins;     // the mask actually applied
  std::size_t used_bins = 0;                // unmasked bin count
};

// Noise-floor sensitivity: RMS over the unmasked bin magnitudes divided by
// sqrt(delta_f).  The mask must cover the DC bin (and should cover any signal
// bins); at least 16 bins must remain unmasked.  Units follow the spectrum:
// a record calibrated in tesla yields tesla per sqrt(Hz).
sensitivity_report sensitivity(const spectrum& s, const std::vector<std::size_t>& mask);

struct transient_fit_result {
  double frequency = 0.0;   // Hz
  double stderr_hz = 0.0;   // heuristic uncertainty (half a bin width)
};

// Frequency of the dominant non-DC spectral peak of the (mean-subtracted)
// leading `window_seconds` of the series, refined by three-bin quadratic
// interpolation.  window_seconds <= 0 uses the whole series.  A flat series
// (no structure above numerical noise) raises a "no peak" error.
transient_fit_result transient_fit(const std::vector<double>& series, double sample_rate,
                                   double window_seconds = 0.0);

struct response_result {
  double amplitude = 0.0;
  bool below_floor = false;  // peak under 3x the local median floor
};

// Amplitude of the differential-signal spectral peak at the test frequency.
// The local floor is the median magnitude of nearby bins (excluding the peak
// neighbourhood); a peak below 3x that floor sets the warning flag.
response_result measured_response(const acquisition_record& rec, double f_test,
                                  bool halve = false);

}  // namespace prism
