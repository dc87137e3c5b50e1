#include "castkit/mix_metrics.hpp"

#include <cmath>
#include <string>

#include "castkit/error.hpp"
#include "castkit/loudness.hpp"

namespace castkit {

namespace {

AudioBuffer restrict_to(const AudioBuffer& buffer, const std::vector<Interval>& activity) {
  std::vector<AudioBuffer> parts;
  for (const auto& iv : activity) {
    const double end = std::min(iv.end_s, buffer.duration_s());
    if (iv.start_s < 0 || !(iv.start_s < end)) throw ValidationError("activity interval outside stem");
    parts.push_back(slice(buffer, iv.start_s, end));
  }
  if (parts.empty()) throw ValidationError("activity mask selects nothing");
  return concat(parts);
}

}  // namespace

SmrResult smr(const StemPair& pair, const std::optional<std::vector<Interval>>& activity) {
  const auto& s = pair.speech;
  const auto& m = pair.mse;
  if (s.sample_rate() != m.sample_rate()) throw ValidationError("stems differ in sample rate");
  const auto diff = s.frames() > m.frames() ? s.frames() - m.frames() : m.frames() - s.frames();
  if (diff > 1) throw ValidationError("stems differ in length by " + std::to_string(diff) + " samples");
  if (s.duration_s() < 3.0 || m.duration_s() < 3.0) throw ValidationError("SMR needs stems of at least 3 s");

  AudioBuffer speech = s, mse = m;
  if (activity) {
    speech = restrict_to(s, *activity);
    mse = restrict_to(m, *activity);
  }
  if (speech.sample_rate() != loudness::kMeterRate) {
    speech = resample(speech, loudness::kMeterRate);
    mse = resample(mse, loudness::kMeterRate);
  }
  const double ls = loudness::integrated_loudness(speech);
  if (std::isinf(ls)) throw ValidationError("speech stem is silent; SMR undefined");
  const double lm = loudness::integrated_loudness(mse);
  if (std::isinf(lm)) return {std::numeric_limits<double>::infinity(), true};
  return {ls - lm, false};
}

SmrScore smr_score(std::span<const SmrResult> values) {
  SmrScore out;
  std::size_t above = 0;
  for (const auto& v : values) {
    if (v.no_mse) {
      ++out.no_mse;
      continue;
    }
    ++out.valid;
    if (v.smr_db > 0) ++above;
  }
  if (out.valid == 0) throw ValidationError("no valid SMR values to score");
  out.score = static_cast<double>(above) / static_cast<double>(out.valid);
  return out;
}

}  // namespace castkit
