#include "castkit/loudness.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include "castkit/error.hpp"
#include "castkit/stats.hpp"

namespace castkit::loudness {

namespace {

struct Biquad {
  double b0, b1, b2, a1, a2;
};

// BS.1770-4 K-weighting at 48 kHz: pre-filter (high shelf), then RLB high-pass.
constexpr Biquad kShelf{1.53512485958697, -2.69169618940638, 1.19839281085285,
                        -1.69065929318241, 0.73248077421585};
constexpr Biquad kHighPass{1.0, -2.0, 1.0, -1.99004745483398, 0.99007225036621};

constexpr std::size_t kStep = kMeterRate / 10;  // 100 ms
constexpr std::size_t kBlockSteps = 4;          // 400 ms gating block
constexpr std::size_t kShortTermSteps = 30;     // 3 s window
constexpr std::size_t kShortTermHop = 10;       // 1 s
constexpr double kAbsoluteGate = -70.0;
constexpr double kRelativeGate = -10.0;
constexpr double kLraRelativeGate = -20.0;

void require_meter_input(const AudioBuffer& buffer, double min_seconds) {
  if (buffer.sample_rate() != kMeterRate)
    throw ValidationError("loudness meter needs 48000 Hz input, got " +
                          std::to_string(buffer.sample_rate()));
  if (buffer.channel_count() > 2)
    throw ValidationError("loudness meter supports mono or stereo only");
  if (buffer.duration_s() + 1e-9 < min_seconds)
    throw ValidationError("input too short for loudness measurement (" +
                          std::to_string(buffer.duration_s()) + " s < " +
                          std::to_string(min_seconds) + " s)");
}

double to_lufs(double mean_square) { return -0.691 + 10.0 * std::log10(mean_square); }

// K-weighted energy per 100 ms step, summed over channels (all weights 1.0).
std::vector<double> step_energies(const AudioBuffer& buffer) {
  const std::size_t steps = buffer.frames() / kStep;
  std::vector<double> energy(steps, 0.0);
  for (const auto& ch : buffer.channels()) {
    double s1[2] = {0, 0}, s2[2] = {0, 0};  // direct form II transposed state
    for (std::size_t i = 0; i < steps * kStep; ++i) {
      const double x = ch[i];
      const double y1 = kShelf.b0 * x + s1[0];
      s1[0] = kShelf.b1 * x - kShelf.a1 * y1 + s1[1];
      s1[1] = kShelf.b2 * x - kShelf.a2 * y1;
      const double y2 = kHighPass.b0 * y1 + s2[0];
      s2[0] = kHighPass.b1 * y1 - kHighPass.a1 * y2 + s2[1];
      s2[1] = kHighPass.b2 * y1 - kHighPass.a2 * y2;
      energy[i / kStep] += y2 * y2;
    }
  }
  return energy;
}

// Mean squares of windows of `len` steps advancing by `hop` steps.
std::vector<double> window_powers(const std::vector<double>& energy, std::size_t len, std::size_t hop) {
  std::vector<double> out;
  if (energy.size() < len) return out;
  for (std::size_t start = 0; start + len <= energy.size(); start += hop) {
    double sum = 0.0;
    for (std::size_t j = start; j < start + len; ++j) sum += energy[j];
    out.push_back(sum / static_cast<double>(len * kStep));
  }
  return out;
}

double gated_mean_power(const std::vector<double>& powers, double threshold_lufs) {
  double sum = 0.0;
  std::size_t n = 0;
  for (double p : powers) {
    if (p > 0 && to_lufs(p) > threshold_lufs) {
      sum += p;
      ++n;
    }
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

// Windowed-sinc interpolator for 4x true-peak oversampling: 24 taps per
// phase, 96 in total. Phase 0 is the identity and is not stored.
constexpr int kOversample = 4;
constexpr int kTapsPerPhase = 24;

using PhaseBank = std::array<std::array<double, kTapsPerPhase>, kOversample - 1>;

PhaseBank make_phase_bank() {
  constexpr double beta = 7.0;
  constexpr double half = kTapsPerPhase / 2.0;
  const double i0_beta = std::cyl_bessel_i(0.0, beta);
  PhaseBank bank{};
  for (int p = 1; p < kOversample; ++p) {
    double sum = 0.0;
    for (int t = 0; t < kTapsPerPhase; ++t) {
      const int k = t - kTapsPerPhase / 2;  // y[m + p/4] uses x[m - k]
      const double tau = static_cast<double>(p) / kOversample + k;
      const double u = tau / half;
      const double w = std::cyl_bessel_i(0.0, beta * std::sqrt(std::max(0.0, 1.0 - u * u))) / i0_beta;
      const double x = std::numbers::pi * tau;
      bank[p - 1][t] = std::sin(x) / x * w;
      sum += bank[p - 1][t];
    }
    for (double& c : bank[p - 1]) c /= sum;
  }
  return bank;
}

}  // namespace

double integrated_loudness(const AudioBuffer& buffer) {
  require_meter_input(buffer, 0.4);
  const auto blocks = window_powers(step_energies(buffer), kBlockSteps, 1);
  const double abs_mean = gated_mean_power(blocks, kAbsoluteGate);
  if (abs_mean <= 0.0) return kSilent;
  const double rel_gate = to_lufs(abs_mean) + kRelativeGate;
  const double gated = gated_mean_power(blocks, std::max(kAbsoluteGate, rel_gate));
  return gated <= 0.0 ? kSilent : to_lufs(gated);
}

double true_peak(const AudioBuffer& buffer) {
  static const PhaseBank bank = make_phase_bank();
  double peak = buffer.peak();
  constexpr int half = kTapsPerPhase / 2;
  std::vector<double> padded;
  for (const auto& ch : buffer.channels()) {
    // Zero padding on both sides keeps the tap loop branch-free.
    padded.assign(ch.size() + kTapsPerPhase, 0.0);
    std::copy(ch.begin(), ch.end(), padded.begin() + half);
    const std::size_t n = ch.size();
    for (std::size_t m = 0; m < n; ++m) {
      // Tap t reads sample m - (t - half), i.e. padded[m + kTapsPerPhase - t].
      const double* x = padded.data() + m + kTapsPerPhase;
      for (const auto& phase : bank) {
        double acc = 0.0;
        for (int t = 0; t < kTapsPerPhase; ++t) acc += phase[t] * x[-t];
        peak = std::max(peak, std::fabs(acc));
      }
    }
  }
  return peak > 0.0 ? 20.0 * std::log10(peak) : kSilent;
}

double loudness_range(const AudioBuffer& buffer) {
  require_meter_input(buffer, 3.0);
  const auto windows = window_powers(step_energies(buffer), kShortTermSteps, kShortTermHop);
  const double abs_mean = gated_mean_power(windows, kAbsoluteGate);
  if (abs_mean <= 0.0) return 0.0;
  const double rel_gate = to_lufs(abs_mean) + kLraRelativeGate;
  std::vector<double> levels;
  for (double p : windows) {
    if (p <= 0) continue;
    const double l = to_lufs(p);
    if (l > kAbsoluteGate && l > rel_gate) levels.push_back(l);
  }
  if (levels.empty()) return 0.0;
  return std::max(0.0, stats::quantile(levels, 0.95) - stats::quantile(levels, 0.10));
}

LoudnessReport measure(const AudioBuffer& buffer) {
  const AudioBuffer at_rate =
      buffer.sample_rate() == kMeterRate ? buffer : resample(buffer, kMeterRate);
  LoudnessReport r;
  r.integrated_lufs = integrated_loudness(at_rate);
  r.true_peak_dbtp = true_peak(at_rate);
  r.loudness_range_lu = loudness_range(at_rate);
  r.silent = std::isinf(r.integrated_lufs);
  return r;
}

double score_idl(double idl, const ScoringConstants& k) {
  if (std::isnan(idl)) throw ValidationError("integrated loudness is NaN");
  if (idl < k.idl_low) return std::exp(-k.k1 * (k.idl_low - idl));
  if (idl > k.idl_high) return std::exp(-k.k2 * (idl - k.idl_high));
  return 1.0;
}

double score_tp(double tp, const ScoringConstants& k) {
  if (std::isnan(tp)) throw ValidationError("true peak is NaN");
  return tp <= k.tp_max ? 1.0 : std::exp(-k.k3 * (tp - k.tp_max));
}

double score_lra(double lra, const ScoringConstants& k) {
  if (std::isnan(lra)) throw ValidationError("loudness range is NaN");
  if (lra < k.lra_low) return std::exp(-k.k4 * (k.lra_low - lra));
  if (lra > k.lra_high) return std::exp(-k.k5 * (lra - k.lra_high));
  return 1.0;
}

LoudnessScores score(const LoudnessReport& report, const ScoringConstants& k) {
  LoudnessScores s;
  // exp(-k1 * inf) is already 0, but the flag tells callers it was forced.
  s.silent_input = report.silent || std::isinf(report.integrated_lufs);
  s.s_idl = s.silent_input ? 0.0 : score_idl(report.integrated_lufs, k);
  s.s_tp = score_tp(report.true_peak_dbtp, k);
  s.s_lra = score_lra(report.loudness_range_lu, k);
  return s;
}

std::vector<double> density_histogram(const std::vector<double>& values, const std::vector<double>& edges) {
  if (edges.size() < 2) throw ValidationError("histogram needs at least two bin edges");
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (!(edges[i] > edges[i - 1])) throw ValidationError("histogram edges must increase");
  std::vector<double> counts(edges.size() - 1, 0.0);
  std::size_t n = 0;
  for (double v : values) {
    if (!std::isfinite(v) || v < edges.front() || v > edges.back()) continue;
    auto it = std::upper_bound(edges.begin(), edges.end(), v);
    auto bin = static_cast<std::size_t>(it - edges.begin()) - 1;
    if (bin >= counts.size()) bin = counts.size() - 1;  // right edge is inclusive
    counts[bin] += 1.0;
    ++n;
  }
  if (n == 0) return counts;
  for (std::size_t i = 0; i < counts.size(); ++i)
    counts[i] /= static_cast<double>(n) * (edges[i + 1] - edges[i]);
  return counts;
}

}  // namespace castkit::loudness
