#include "castkit/audio.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "castkit/error.hpp"

namespace castkit {

AudioBuffer::AudioBuffer(std::vector<std::vector<float>> channels, int sample_rate)
    : channels_(std::move(channels)), sample_rate_(sample_rate) {
  if (channels_.empty()) throw ValidationError("audio buffer needs at least one channel");
  if (sample_rate_ <= 0) throw ValidationError("sample rate must be positive");
  const std::size_t n = channels_.front().size();
  for (const auto& ch : channels_) {
    if (ch.size() != n) throw ValidationError("audio channels differ in length");
    for (float v : ch)
      if (!std::isfinite(v)) throw ValidationError("audio contains non-finite samples");
  }
}

AudioBuffer AudioBuffer::silence(double duration_s, int sample_rate, int channels) {
  if (duration_s < 0) throw ValidationError("negative duration");
  const auto n = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
  return AudioBuffer(std::vector<std::vector<float>>(channels, std::vector<float>(n, 0.0f)),
                     sample_rate);
}

float AudioBuffer::peak() const {
  float p = 0.0f;
  for (const auto& ch : channels_)
    for (float v : ch) p = std::max(p, std::fabs(v));
  return p;
}

AudioBuffer AudioBuffer::scaled(double gain) const {
  auto out = channels_;
  for (auto& ch : out)
    for (float& v : ch) v = static_cast<float>(v * gain);
  return AudioBuffer(std::move(out), sample_rate_);
}

AudioBuffer AudioBuffer::with_channels(int channels) const {
  if (channel_count() == channels) return *this;
  if (channel_count() != 1)
    throw ValidationError("cannot map " + std::to_string(channel_count()) + " channels to " +
                          std::to_string(channels));
  return AudioBuffer(std::vector<std::vector<float>>(channels, channels_.front()), sample_rate_);
}

namespace {

constexpr int kResampleTaps = 128;         // at the narrower rate
constexpr double kCutoff = 0.46;           // of the narrower rate
constexpr double kKaiserBeta = 8.6;
constexpr int kTablePerCrossing = 1024;

// Kaiser-windowed sinc tabulated over u = t / half_width in [0, 1], where t is
// measured in zero crossings of the narrow-band sinc.
class SincTable {
 public:
  SincTable() : values_(static_cast<std::size_t>(kHalf * kTablePerCrossing) + 2) {
    const double i0_beta = std::cyl_bessel_i(0.0, kKaiserBeta);
    for (std::size_t i = 0; i < values_.size(); ++i) {
      const double t = static_cast<double>(i) / kTablePerCrossing;  // in crossings
      const double u = std::min(1.0, t / kHalf);
      const double w = std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(1.0 - u * u)) / i0_beta;
      const double x = std::numbers::pi * 2.0 * kCutoff * t;
      values_[i] = (t == 0.0 ? 1.0 : std::sin(x) / x) * w;
    }
  }

  // Window-sinc at t narrow-rate samples from the centre.
  double operator()(double t) const {
    t = std::fabs(t);
    if (t >= kHalf) return 0.0;
    const double pos = t * kTablePerCrossing;
    const auto i = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    return values_[i] + frac * (values_[i + 1] - values_[i]);
  }

  static constexpr double kHalf = kResampleTaps / 2.0;

 private:
  std::vector<double> values_;
};

const SincTable& sinc_table() {
  static const SincTable table;
  return table;
}

}  // namespace

AudioBuffer resample(const AudioBuffer& buffer, int target_rate) {
  if (target_rate <= 0) throw ValidationError("target rate must be positive");
  const int source_rate = buffer.sample_rate();
  if (target_rate == source_rate) return buffer;

  const double ratio = static_cast<double>(target_rate) / source_rate;
  const double narrow = std::min(1.0, ratio);          // narrow rate / source rate
  const double half_width = SincTable::kHalf / narrow;  // in source samples
  const double gain = 2.0 * kCutoff * narrow;
  const auto& kernel = sinc_table();

  const std::size_t in_frames = buffer.frames();
  const auto out_frames = static_cast<std::size_t>(
      (static_cast<unsigned long long>(in_frames) * target_rate + source_rate / 2) / source_rate);

  std::vector<std::vector<float>> out(buffer.channel_count(), std::vector<float>(out_frames));
  std::vector<double> weights;
  for (std::size_t n = 0; n < out_frames; ++n) {
    const double x = static_cast<double>(n) / ratio;
    const auto first = static_cast<long long>(std::floor(x - half_width)) + 1;
    const auto last = static_cast<long long>(std::floor(x + half_width));
    const long long lo = std::max<long long>(first, 0);
    const long long hi = std::min<long long>(last, static_cast<long long>(in_frames) - 1);
    weights.clear();
    for (long long k = lo; k <= hi; ++k)
      weights.push_back(gain * kernel((x - static_cast<double>(k)) * narrow));
    for (int c = 0; c < buffer.channel_count(); ++c) {
      const auto src = buffer.channel(c);
      double acc = 0.0;
      for (long long k = lo; k <= hi; ++k) acc += weights[k - lo] * src[k];
      out[c][n] = static_cast<float>(acc);
    }
  }
  return AudioBuffer(std::move(out), target_rate);
}

AudioBuffer synth_beep(double duration_s, double freq_hz, double level_dbfs, int sample_rate) {
  if (!(duration_s > 0)) throw ValidationError("beep duration must be positive");
  if (level_dbfs > 0) throw ValidationError("beep level must be <= 0 dBFS");
  if (sample_rate <= 0) throw ValidationError("sample rate must be positive");
  if (!(freq_hz > 0) || freq_hz >= sample_rate / 2.0)
    throw ValidationError("beep frequency must lie in (0, rate/2)");

  const auto n = static_cast<std::size_t>(std::llround(duration_s * sample_rate));
  const double amp = std::pow(10.0, level_dbfs / 20.0);
  const auto fade = std::min<std::size_t>(static_cast<std::size_t>(std::llround(0.01 * sample_rate)), n / 2);

  std::vector<float> tone(n);
  for (std::size_t i = 0; i < n; ++i) {
    double env = 1.0;
    const std::size_t from_end = n - 1 - i;
    if (fade > 0 && i < fade)
      env = 0.5 * (1.0 - std::cos(std::numbers::pi * static_cast<double>(i) / fade));
    else if (fade > 0 && from_end < fade)
      env = 0.5 * (1.0 - std::cos(std::numbers::pi * static_cast<double>(from_end) / fade));
    const double phase = 2.0 * std::numbers::pi * freq_hz * static_cast<double>(i) / sample_rate;
    tone[i] = static_cast<float>(amp * env * std::sin(phase));
  }
  return AudioBuffer({std::move(tone)}, sample_rate);
}

AudioBuffer make_separator(const BeepSpec& spec, int sample_rate, int channels) {
  if (spec.padding_s < 0) throw ValidationError("beep padding must be non-negative");
  const AudioBuffer beep =
      synth_beep(spec.duration_s, spec.freq_hz, spec.level_dbfs, sample_rate).with_channels(channels);
  const auto total = static_cast<std::size_t>(std::llround(spec.padding_s * sample_rate));
  if (total == 0) return beep;
  const auto lead = total / 2;
  std::vector<std::vector<float>> out(static_cast<std::size_t>(channels));
  for (int c = 0; c < channels; ++c) {
    auto& ch = out[static_cast<std::size_t>(c)];
    ch.assign(total + beep.frames(), 0.0f);
    std::copy(beep.channel(c).begin(), beep.channel(c).end(), ch.begin() + static_cast<std::ptrdiff_t>(lead));
  }
  return AudioBuffer(std::move(out), sample_rate);
}

AudioBuffer slice_frames(const AudioBuffer& buffer, std::size_t begin, std::size_t end) {
  if (begin >= end || end > buffer.frames())
    throw ValidationError("slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                          ") outside buffer of " + std::to_string(buffer.frames()) + " frames");
  std::vector<std::vector<float>> out;
  out.reserve(buffer.channel_count());
  for (const auto& ch : buffer.channels())
    out.emplace_back(ch.begin() + static_cast<std::ptrdiff_t>(begin),
                     ch.begin() + static_cast<std::ptrdiff_t>(end));
  return AudioBuffer(std::move(out), buffer.sample_rate());
}

AudioBuffer slice(const AudioBuffer& buffer, double start_s, double end_s) {
  if (!(start_s >= 0) || !(start_s < end_s) || end_s > buffer.duration_s() + 1e-9)
    throw ValidationError("slice [" + std::to_string(start_s) + ", " + std::to_string(end_s) +
                          ") outside audio of " + std::to_string(buffer.duration_s()) + " s");
  const auto rate = static_cast<double>(buffer.sample_rate());
  const auto begin = static_cast<std::size_t>(std::floor(start_s * rate));
  const auto end = std::min(buffer.frames(), static_cast<std::size_t>(std::floor(end_s * rate)));
  return slice_frames(buffer, begin, end);
}

AudioBuffer concat(std::span<const AudioBuffer> parts) {
  if (parts.empty()) throw ValidationError("concat of no buffers");
  const int rate = parts.front().sample_rate();
  const int channels = parts.front().channel_count();
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.sample_rate() != rate) throw ValidationError("concat: mismatched sample rates");
    if (p.channel_count() != channels) throw ValidationError("concat: mismatched channel counts");
    total += p.frames();
  }
  std::vector<std::vector<float>> out(channels);
  for (int c = 0; c < channels; ++c) {
    out[c].reserve(total);
    for (const auto& p : parts) {
      const auto src = p.channel(c);
      out[c].insert(out[c].end(), src.begin(), src.end());
    }
  }
  return AudioBuffer(std::move(out), rate);
}

}  // namespace castkit
