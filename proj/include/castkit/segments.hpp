#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "castkit/audio.hpp"
#include "castkit/json_util.hpp"

namespace castkit::segments {

/// Who spoke when. Overlapping segments are allowed.
struct DiarizationSegment {
  std::string speaker_id;
  double start_s = 0;
  double end_s = 0;
};

/// Parses NIST RTTM ("SPEAKER <file> <chan> <start> <dur> <NA> <NA> <spk> ...")
/// or JSON-lines {"speaker_id", "start", "end"}; sorted by start on return.
std::vector<DiarizationSegment> parse_diarization(std::string_view text, const std::string& origin);
std::vector<DiarizationSegment> read_diarization(const std::filesystem::path& path);

/// Indices of segments that overlap their predecessor in start order.
std::vector<std::size_t> overlapping_segments(const std::vector<DiarizationSegment>& sorted);

enum class StimulusKind { DialogueSegment, FmlConcat };

struct StimulusSpec {
  std::string episode_id;
  double start_s = 0;
  double end_s = 0;
  StimulusKind kind = StimulusKind::DialogueSegment;
  std::string output_path;
  // Ranking evidence for dialogue segments.
  std::size_t speaker_changes = 0;
  double max_speaker_share = 0;
};

json to_json(const StimulusSpec& s);

struct DialogueOptions {
  double min_len_s = 15.0;
  double max_len_s = 25.0;
  std::size_t count = 1;
  double min_gap_s = 0.2;  // pauses shorter than this are not snap targets
  double snap_reach_s = 1.0;
};

/// Picks up to `count` disjoint turn-taking windows. Candidate windows start
/// at a segment start and end at a segment end; a segment belongs to a
/// window when its start lies inside it. Ranking: more speaker changes, then
/// smaller largest per-speaker time share, then earlier start, then longer.
/// Each boundary is moved outward to the centre of the nearest pause of at
/// least `min_gap_s` within `snap_reach_s`, unless that breaks the length
/// bounds. Results are sorted by start.
std::vector<StimulusSpec> extract_dialogue_segments(const std::vector<DiarizationSegment>& diarization,
                                                    double duration_s, const DialogueOptions& options = {},
                                                    const std::string& episode_id = "");

/// Speaker changes among the segments whose start lies in [start, end).
std::size_t count_speaker_changes(const std::vector<DiarizationSegment>& sorted, double start_s, double end_s);

/// The minute windows used for a questionnaire stimulus: first, middle
/// (centred on T/2) and final minute when T >= 180 s; the first and final
/// minute when 120 <= T < 180; the first minute when 60 <= T < 120.
/// Windows are in frames so that each is exactly one minute long.
struct FrameWindow {
  std::size_t begin = 0;
  std::size_t end = 0;
};
std::vector<FrameWindow> fml_windows(std::size_t frames, int sample_rate);

/// Concatenates the minute windows with `separator` between them. A mono
/// separator is broadcast to the buffer's channel count.
AudioBuffer extract_fml_minutes(const AudioBuffer& buffer, const AudioBuffer& separator);

}  // namespace castkit::segments
