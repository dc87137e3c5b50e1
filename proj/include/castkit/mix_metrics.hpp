#pragma once

#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "castkit/audio.hpp"

namespace castkit {

/// Speech stem and music/sound-effects stem of one episode.
struct StemPair {
  AudioBuffer speech;
  AudioBuffer mse;
};

/// Half-open time interval in seconds.
struct Interval {
  double start_s = 0;
  double end_s = 0;
};

struct SmrResult {
  double smr_db = 0.0;  // +inf when no_mse
  bool no_mse = false;  // the MSE stem is fully gated
};

/// Speech-to-music ratio: integrated loudness of the speech stem minus that
/// of the MSE stem. When `activity` is given only those regions of both
/// stems are measured. Throws when the speech stem is silent.
SmrResult smr(const StemPair& pair, const std::optional<std::vector<Interval>>& activity = std::nullopt);

struct SmrScore {
  double score = 0.0;          // count(smr > 0) / count(valid)
  std::size_t valid = 0;
  std::size_t no_mse = 0;      // excluded from the denominator
};

SmrScore smr_score(std::span<const SmrResult> values);

}  // namespace castkit
