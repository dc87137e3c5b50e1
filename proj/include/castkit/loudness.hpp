#pragma once

#include <limits>
#include <vector>

#include "castkit/audio.hpp"

namespace castkit::loudness {

/// Rate at which every measurement runs. `measure` resamples other inputs.
inline constexpr int kMeterRate = 48000;

/// Value reported for inputs in which every block is gated out.
inline constexpr double kSilent = -std::numeric_limits<double>::infinity();

/// BS.1770 / EBU R128 measurements of one programme.
struct LoudnessReport {
  double integrated_lufs = kSilent;  // IDL, LOUD-IT
  double true_peak_dbtp = kSilent;   // TP, LOUD-TP
  double loudness_range_lu = 0.0;    // LRA, LOUD-RA
  bool silent = true;                // integrated loudness fully gated
};

/// Per-metric scores in [0, 1]; 1 inside the reference band.
struct LoudnessScores {
  double s_idl = 0, s_tp = 0, s_lra = 0;
  bool silent_input = false;  // IDL was -inf and s_idl was forced to 0
};

/// Reference bands and decay constants for the scoring curves.
struct ScoringConstants {
  double idl_low = -18.0, idl_high = -14.0;
  double tp_max = -1.0;
  double lra_low = 4.0, lra_high = 18.0;
  double k1 = 0.0858;  // below the IDL band
  double k2 = 0.3291;  // above the IDL band
  double k3 = 4.605;   // above the TP ceiling
  double k4 = 1.1513;  // below the LRA band
  double k5 = 0.2554;  // above the LRA band
};

/// Gated integrated loudness in LUFS; kSilent when every 400 ms block is
/// gated. Requires 48 kHz input of 1 or 2 channels and at least 400 ms.
double integrated_loudness(const AudioBuffer& buffer);

/// 4x oversampled peak in dBTP; kSilent for digital silence.
double true_peak(const AudioBuffer& buffer);

/// EBU Tech 3342 loudness range in LU (3 s windows, 1 s hop). 0 when no
/// window survives gating. Requires at least 3 s of 48 kHz audio.
double loudness_range(const AudioBuffer& buffer);

/// All three measurements; resamples to 48 kHz first when needed.
LoudnessReport measure(const AudioBuffer& buffer);

LoudnessScores score(const LoudnessReport& report, const ScoringConstants& k = {});

double score_idl(double idl, const ScoringConstants& k = {});
double score_tp(double tp, const ScoringConstants& k = {});
double score_lra(double lra, const ScoringConstants& k = {});

/// Density histogram over fixed bin edges (counts / (n * width)). Values
/// outside [edges.front(), edges.back()] are ignored; non-finite values too.
std::vector<double> density_histogram(const std::vector<double>& values,
                                      const std::vector<double>& edges);

}  // namespace castkit::loudness
