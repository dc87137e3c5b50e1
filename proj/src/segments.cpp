#include "castkit/segments.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "castkit/error.hpp"

namespace castkit::segments {

namespace {

constexpr double kEps = 1e-9;

bool looks_like_jsonl(std::string_view text) {
  const auto p = text.find_first_not_of(" \t\r\n");
  return p != std::string_view::npos && text[p] == '{';
}

struct Gap {
  double start, end;
  double centre() const { return 0.5 * (start + end); }
};

// Pauses of at least `min_gap` in [0, duration] where nobody speaks.
std::vector<Gap> find_gaps(const std::vector<DiarizationSegment>& sorted, double duration, double min_gap) {
  std::vector<Gap> gaps;
  double covered_until = 0.0;
  for (const auto& s : sorted) {
    if (s.start_s - covered_until >= min_gap) gaps.push_back({covered_until, s.start_s});
    covered_until = std::max(covered_until, s.end_s);
  }
  if (duration - covered_until >= min_gap) gaps.push_back({covered_until, duration});
  return gaps;
}

double max_share(const std::vector<DiarizationSegment>& sorted, double start, double end) {
  std::map<std::string, double> time;
  double total = 0;
  for (const auto& s : sorted) {
    if (s.start_s < start - kEps || s.start_s >= end - kEps) continue;
    const double t = std::min(s.end_s, end) - s.start_s;
    time[s.speaker_id] += t;
    total += t;
  }
  double best = 0;
  for (const auto& [_, t] : time) best = std::max(best, t);
  return total > 0 ? best / total : 1.0;
}

}  // namespace

std::vector<DiarizationSegment> parse_diarization(std::string_view text, const std::string& origin) {
  std::vector<DiarizationSegment> out;
  if (looks_like_jsonl(text)) {
    for (const auto& line : parse_jsonl(text)) {
      const std::string ctx = origin + ":" + std::to_string(line.line);
      DiarizationSegment s;
      s.speaker_id = line.value.contains("speaker_id") ? require_string(line.value, "speaker_id", ctx)
                                                       : require_string(line.value, "speaker", ctx);
      s.start_s = require_number(line.value, "start", ctx);
      s.end_s = require_number(line.value, "end", ctx);
      if (!(s.end_s > s.start_s) || s.start_s < 0) throw ValidationError(ctx + ": segment end must exceed start");
      out.push_back(std::move(s));
    }
  } else {
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::istringstream fields(line);
      std::string type, file, chan, start, dur, ortho, stype, speaker;
      if (!(fields >> type)) continue;
      if (type != "SPEAKER") continue;  // other RTTM record types carry no turns
      const std::string ctx = origin + ":" + std::to_string(line_no);
      if (!(fields >> file >> chan >> start >> dur >> ortho >> stype >> speaker))
        throw ParseError(ctx + ": truncated RTTM SPEAKER record");
      DiarizationSegment s;
      try {
        s.start_s = std::stod(start);
        s.end_s = s.start_s + std::stod(dur);
      } catch (const std::exception&) {
        throw ParseError(ctx + ": bad RTTM onset/duration");
      }
      s.speaker_id = speaker;
      if (!(s.end_s > s.start_s) || s.start_s < 0) throw ValidationError(ctx + ": segment end must exceed start");
      out.push_back(std::move(s));
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.start_s < b.start_s || (a.start_s == b.start_s && a.end_s < b.end_s);
  });
  return out;
}

std::vector<DiarizationSegment> read_diarization(const std::filesystem::path& path) {
  return parse_diarization(read_text_file(path), path.string());
}

std::vector<std::size_t> overlapping_segments(const std::vector<DiarizationSegment>& sorted) {
  std::vector<std::size_t> out;
  double until = -1;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i > 0 && sorted[i].start_s < until - kEps) out.push_back(i);
    until = std::max(until, sorted[i].end_s);
  }
  return out;
}

json to_json(const StimulusSpec& s) {
  json j = {{"episode_id", s.episode_id},
            {"start_s", s.start_s},
            {"end_s", s.end_s},
            {"kind", s.kind == StimulusKind::DialogueSegment ? "dialogue_segment" : "fml_concat"},
            {"output_path", s.output_path}};
  if (s.kind == StimulusKind::DialogueSegment) {
    j["speaker_changes"] = s.speaker_changes;
    j["max_speaker_share"] = s.max_speaker_share;
  }
  return j;
}

std::size_t count_speaker_changes(const std::vector<DiarizationSegment>& sorted, double start_s, double end_s) {
  std::size_t changes = 0;
  const DiarizationSegment* prev = nullptr;
  for (const auto& s : sorted) {
    if (s.start_s < start_s - kEps || s.start_s >= end_s - kEps) continue;
    if (prev && prev->speaker_id != s.speaker_id) ++changes;
    prev = &s;
  }
  return changes;
}

std::vector<StimulusSpec> extract_dialogue_segments(const std::vector<DiarizationSegment>& diarization,
                                                    double duration_s, const DialogueOptions& opt,
                                                    const std::string& episode_id) {
  if (!(opt.min_len_s > 0) || opt.max_len_s < opt.min_len_s)
    throw ValidationError("dialogue window bounds must satisfy 0 < min <= max");
  if (duration_s < opt.min_len_s)
    throw ValidationError("episode of " + std::to_string(duration_s) + " s is shorter than the minimum window");

  auto sorted = diarization;
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    return a.start_s < b.start_s || (a.start_s == b.start_s && a.end_s < b.end_s);
  });
  std::set<std::string> speakers;
  for (const auto& s : sorted) speakers.insert(s.speaker_id);
  if (speakers.size() < 2) throw ValidationError("dialogue extraction needs at least 2 speakers");

  const auto gaps = find_gaps(sorted, duration_s, opt.min_gap_s);
  // Moves a start boundary back into the pause that ends at it.
  auto snap_start = [&](double s) {
    for (const auto& g : gaps)
      if (g.start < s - kEps && s <= g.end + kEps) return std::max(g.centre(), s - opt.snap_reach_s);
    return s;
  };
  auto snap_end = [&](double e) {
    for (const auto& g : gaps)
      if (g.start - kEps <= e && e < g.end - kEps) return std::min(g.centre(), e + opt.snap_reach_s);
    return e;
  };

  std::vector<StimulusSpec> candidates;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double s = sorted[i].start_s;
    for (std::size_t j = i; j < sorted.size(); ++j) {
      const double e = std::min(sorted[j].end_s, duration_s);
      if (sorted[j].start_s - s > opt.max_len_s) break;
      const double len = e - s;
      if (len < opt.min_len_s - kEps || len > opt.max_len_s + kEps) continue;
      const std::size_t changes = count_speaker_changes(sorted, s, e);
      if (changes == 0) continue;

      double start = snap_start(s), end = snap_end(e);
      if (end - start > opt.max_len_s + kEps) {
        // Keep whichever single snap still fits, preferring the start.
        if (e - start <= opt.max_len_s + kEps) end = e;
        else if (end - s <= opt.max_len_s + kEps) start = s;
        else start = s, end = e;
      }
      StimulusSpec c;
      c.episode_id = episode_id;
      c.start_s = start;
      c.end_s = end;
      c.kind = StimulusKind::DialogueSegment;
      c.speaker_changes = changes;
      c.max_speaker_share = max_share(sorted, s, e);
      candidates.push_back(std::move(c));
    }
  }
  if (candidates.empty()) throw ValidationError("no window with a speaker change fits the length bounds");

  std::stable_sort(candidates.begin(), candidates.end(), [](const StimulusSpec& a, const StimulusSpec& b) {
    if (a.speaker_changes != b.speaker_changes) return a.speaker_changes > b.speaker_changes;
    if (std::fabs(a.max_speaker_share - b.max_speaker_share) > kEps) return a.max_speaker_share < b.max_speaker_share;
    if (std::fabs(a.start_s - b.start_s) > kEps) return a.start_s < b.start_s;
    return (a.end_s - a.start_s) > (b.end_s - b.start_s);
  });

  std::vector<StimulusSpec> chosen;
  for (const auto& c : candidates) {
    if (chosen.size() >= opt.count) break;
    const bool clashes = std::any_of(chosen.begin(), chosen.end(), [&](const StimulusSpec& o) {
      return c.start_s < o.end_s - kEps && o.start_s < c.end_s - kEps;
    });
    if (!clashes) chosen.push_back(c);
  }
  std::sort(chosen.begin(), chosen.end(), [](const auto& a, const auto& b) { return a.start_s < b.start_s; });
  return chosen;
}

std::vector<FrameWindow> fml_windows(std::size_t frames, int sample_rate) {
  const auto minute = static_cast<std::size_t>(sample_rate) * 60;
  if (frames < minute) throw ValidationError("episode shorter than 60 s; no minute window fits");
  std::vector<FrameWindow> w;
  w.push_back({0, minute});
  if (frames >= 3 * minute) {
    const std::size_t mid = (frames - minute) / 2;  // centred on T/2
    w.push_back({mid, mid + minute});
  }
  if (frames >= 2 * minute) w.push_back({frames - minute, frames});
  return w;
}

AudioBuffer extract_fml_minutes(const AudioBuffer& buffer, const AudioBuffer& separator) {
  if (separator.sample_rate() != buffer.sample_rate())
    throw ValidationError("separator sample rate differs from the episode");
  const AudioBuffer sep = separator.with_channels(buffer.channel_count());
  std::vector<AudioBuffer> parts;
  for (const auto& w : fml_windows(buffer.frames(), buffer.sample_rate())) {
    if (!parts.empty()) parts.push_back(sep);
    parts.push_back(slice_frames(buffer, w.begin, w.end));
  }
  return concat(parts);
}

}  // namespace castkit::segments
