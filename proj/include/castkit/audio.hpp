#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace castkit {

/// Decoded PCM audio. Samples are stored planar (one vector per channel),
/// nominally in [-1, 1]. Instances are immutable once built; every operation
/// below returns a new buffer.
class AudioBuffer {
 public:
  AudioBuffer() = default;

  /// Validates the invariants: at least one channel, equal channel lengths,
  /// positive rate, finite samples.
  AudioBuffer(std::vector<std::vector<float>> channels, int sample_rate);

  static AudioBuffer silence(double duration_s, int sample_rate, int channels = 1);

  int sample_rate() const { return sample_rate_; }
  int channel_count() const { return static_cast<int>(channels_.size()); }
  std::size_t frames() const { return channels_.empty() ? 0 : channels_.front().size(); }
  double duration_s() const { return static_cast<double>(frames()) / sample_rate_; }

  std::span<const float> channel(int index) const { return channels_.at(index); }
  const std::vector<std::vector<float>>& channels() const { return channels_; }

  /// Largest absolute sample over all channels.
  float peak() const;

  /// Returns a copy with every sample multiplied by `gain`.
  AudioBuffer scaled(double gain) const;

  /// Broadcasts a mono buffer to `channels` identical channels. Buffers that
  /// already have that many channels are returned unchanged.
  AudioBuffer with_channels(int channels) const;

  bool operator==(const AudioBuffer&) const = default;

 private:
  std::vector<std::vector<float>> channels_;
  int sample_rate_ = 0;
};

enum class SampleFormat { Pcm16, Pcm24, Pcm32, Float32 };

/// RIFF/WAVE reader: PCM 16/24/32-bit integer or 32-bit IEEE float,
/// 1 or 2 channels (WAVE_FORMAT_EXTENSIBLE accepted). Integer samples are
/// divided by 2^(bits-1).
AudioBuffer decode_wav(const std::filesystem::path& path);
AudioBuffer decode_wav(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_wav(const AudioBuffer& buffer, SampleFormat format = SampleFormat::Pcm16);
void write_wav(const std::filesystem::path& path, const AudioBuffer& buffer,
               SampleFormat format = SampleFormat::Pcm16);

/// Kaiser-windowed sinc resampler (128 taps at the narrower of the two
/// rates). Output length is round(frames * target / source).
AudioBuffer resample(const AudioBuffer& buffer, int target_rate);

/// Sine tone with a 10 ms raised-cosine fade at each end. Peak amplitude is
/// 10^(level_dbfs / 20).
AudioBuffer synth_beep(double duration_s, double freq_hz, double level_dbfs, int sample_rate);

/// Beep parameters used when building minute concatenations.
struct BeepSpec {
  double duration_s = 0.5;
  double freq_hz = 1000.0;
  double level_dbfs = -20.0;
  double padding_s = 0.25;  // total silence, split evenly around the tone
};

/// The tone centred in `padding_s` of silence: beep + padding seconds long.
AudioBuffer make_separator(const BeepSpec& spec, int sample_rate, int channels = 1);

/// Frames [floor(start_s * rate), floor(end_s * rate)).
AudioBuffer slice(const AudioBuffer& buffer, double start_s, double end_s);
AudioBuffer slice_frames(const AudioBuffer& buffer, std::size_t begin, std::size_t end);

AudioBuffer concat(std::span<const AudioBuffer> parts);

}  // namespace castkit
