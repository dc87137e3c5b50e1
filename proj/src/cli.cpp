#include "castkit/cli.hpp"

#include <atomic>
#include <exception>
#include <functional>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

#include "CLI11.hpp"
#include "castkit/audio.hpp"
#include "castkit/error.hpp"
#include "castkit/llm_judge.hpp"
#include "castkit/loudness.hpp"
#include "castkit/manifest.hpp"
#include "castkit/mix_metrics.hpp"
#include "castkit/report.hpp"
#include "castkit/segments.hpp"
#include "castkit/service.hpp"
#include "castkit/speech_metrics.hpp"
#include "castkit/stats.hpp"
#include "castkit/subjective.hpp"
#include "castkit/test_config.hpp"
#include "castkit/text_metrics.hpp"

namespace castkit {

namespace fs = std::filesystem;

namespace {

// Runs fn(i) for i in [0, n) on up to `jobs` threads; results keep input order.
std::vector<json> parallel_map(std::size_t n, int jobs, const std::function<json(std::size_t)>& fn) {
  std::vector<json> results(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next++) < n;) {
      try {
        results[i] = fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), n);
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

json one_or_many(std::vector<json> items) {
  if (items.size() == 1) return std::move(items.front());
  return json(std::move(items));
}

json loudness_json(const loudness::LoudnessReport& r) {
  return {{"idl", r.integrated_lufs}, {"tp", r.true_peak_dbtp}, {"lra", r.loudness_range_lu}, {"silent", r.silent}};
}

json score_row(const loudness::LoudnessReport& r, const loudness::LoudnessScores& s) {
  json j = loudness_json(r);
  j["s_idl"] = s.s_idl;
  j["s_tp"] = s.s_tp;
  j["s_lra"] = s.s_lra;
  j["silent_input"] = s.silent_input;
  return j;
}

// Non-finite values serialize as null; a sibling flag records which infinity.
json with_infinity_flags(json j) {
  if (!j.is_object()) return j;
  json flags = json::object();
  for (auto it = j.begin(); it != j.end(); ++it)
    if (it->is_number_float() && std::isinf(it->get<double>()))
      flags[it.key()] = it->get<double>() > 0 ? "+inf" : "-inf";
  if (!flags.empty()) j["non_finite"] = flags;
  return j;
}

std::vector<EmbeddingVector> group_file(const std::vector<EmbeddingVector>& all, const std::string& file_id) {
  std::vector<EmbeddingVector> out;
  for (const auto& e : all)
    if (e.file_id == file_id) out.push_back(e);
  return out;
}

std::vector<Interval> activity_from(const fs::path& path) {
  std::vector<Interval> out;
  for (const auto& s : segments::read_diarization(path)) out.push_back({s.start_s, s.end_s});
  return out;
}

std::vector<subjective::SubmissionRecord> load_submissions(const std::vector<std::string>& paths) {
  std::vector<subjective::SubmissionRecord> all;
  for (const auto& p : paths) {
    auto part = subjective::read_submissions(p);
    all.insert(all.end(), part.begin(), part.end());
  }
  return all;
}

// Filter thresholds are percentages in (0, 100].
const CLI::Validator kThreshold(
    [](std::string& v) -> std::string {
      try {
        const double x = std::stod(v);
        if (x > 0 && x <= 100) return {};
      } catch (const std::exception&) {
      }
      return "threshold must be in (0, 100], got " + v;
    },
    "(0, 100]");

const TestConfig& pick_test(const std::vector<TestConfig>& tests, const std::string& test_id) {
  if (test_id.empty()) {
    if (tests.size() != 1) throw ValidationError("config holds several tests; pass --test");
    return tests.front();
  }
  for (const auto& t : tests)
    if (t.test_id == test_id) return t;
  throw ValidationError("test '" + test_id + "' not in config");
}

json filter_json(const std::map<std::string, subjective::JudgerStats>& stats, double lq, double hq) {
  const auto r = subjective::filter_judgers(stats, lq, hq);
  json per = json::array();
  for (const auto& [_, s] : stats) per.push_back(subjective::to_json(s));
  return {{"lq_threshold", lq},    {"hq_threshold", hq},          {"kept", r.kept},
          {"excluded", r.excluded}, {"kept_count", r.kept.size()}, {"judgers", per}};
}

std::string id_string(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Podcast evaluation toolkit: objective metrics, listening tests and reports.", "castkit"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  std::string out_path;
  int jobs = 1;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out,-o", out_path, "Write JSON here instead of stdout");
    sub->add_option("--jobs,-j", jobs, "Parallel workers")->check(CLI::Range(1, 256));
  };

  std::function<json()> action;
  auto sub = [&](const char* name, const char* desc) {
    CLI::App* s = app.add_subcommand(name, desc);
    add_common(s);
    return s;
  };

  // manifest
  std::string manifest_path, category;
  bool topic_profile = false, skip_audio = false;
  std::size_t profile_categories = 17;
  {
    auto* s = sub("manifest", "Validate a dataset manifest");
    s->add_option("manifest", manifest_path, "Manifest JSON")->required()->check(CLI::ExistingFile);
    s->add_flag("--topic-profile", topic_profile, "Also check the 3-topics-per-category profile");
    s->add_option("--categories", profile_categories, "Category count for --topic-profile")->check(CLI::PositiveNumber);
    s->add_option("--category", category, "List only episodes of this category");
    s->add_flag("--no-audio-check", skip_audio, "Skip audio existence/decoding/hash checks");
    s->callback([&] {
      action = [&] {
        const auto m = load_manifest(manifest_path, {.check_audio = !skip_audio});
        if (topic_profile) check_topic_profile(m.taxonomy, profile_categories);
        json j = to_json(m, fs::path(manifest_path).parent_path());
        j["summary"] = {{"episodes", m.episodes.size()},
                        {"categories", m.taxonomy.categories.size()},
                        {"topics", m.taxonomy.topic_count()}};
        if (!category.empty()) {
          json ids = json::array();
          for (const auto& r : select_by_category(m.episodes, m.taxonomy, category)) ids.push_back(r.id);
          j["selected"] = {{"category", category}, {"ids", ids}};
        }
        return j;
      };
    });
  }

  // loudness / truepeak / lra / score-loudness
  std::vector<std::string> wavs;
  auto per_file = [&](const std::function<json(const AudioBuffer&)>& fn) {
    return one_or_many(parallel_map(wavs.size(), jobs, [&](std::size_t i) {
      json j = with_infinity_flags(fn(decode_wav(wavs[i])));
      j["file"] = wavs[i];
      return j;
    }));
  };
  {
    auto* s = sub("loudness", "Integrated loudness, true peak and loudness range");
    s->add_option("wav", wavs, "WAV files")->required()->check(CLI::ExistingFile);
    s->callback([&] {
      action = [&] { return per_file([](const AudioBuffer& b) { return loudness_json(loudness::measure(b)); }); };
    });
  }
  {
    auto* s = sub("truepeak", "True peak in dBTP");
    s->add_option("wav", wavs, "WAV files")->required()->check(CLI::ExistingFile);
    s->callback([&] {
      action = [&] {
        return per_file([](const AudioBuffer& b) {
          return json{{"tp", loudness::true_peak(resample(b, loudness::kMeterRate))}};
        });
      };
    });
  }
  {
    auto* s = sub("lra", "Loudness range in LU");
    s->add_option("wav", wavs, "WAV files")->required()->check(CLI::ExistingFile);
    s->callback([&] {
      action = [&] {
        return per_file([](const AudioBuffer& b) {
          return json{{"lra", loudness::loudness_range(resample(b, loudness::kMeterRate))}};
        });
      };
    });
  }
  std::optional<double> idl, tp, lra;
  loudness::ScoringConstants k;
  std::string histogram_path;
  std::vector<double> idl_edges, tp_edges, lra_edges;
  for (int e = -40; e <= 0; e += 2) idl_edges.push_back(e);
  for (int e = -20; e <= 2; ++e) tp_edges.push_back(e);
  for (int e = 0; e <= 30; e += 2) lra_edges.push_back(e);
  {
    auto* s = sub("score-loudness", "Map loudness measurements to [0, 1] scores");
    s->add_option("wav", wavs, "WAV files to measure and score")->check(CLI::ExistingFile);
    s->add_option("--idl", idl, "Integrated loudness in LUFS");
    s->add_option("--tp", tp, "True peak in dBTP");
    s->add_option("--lra", lra, "Loudness range in LU");
    s->add_option("--idl-low", k.idl_low);
    s->add_option("--idl-high", k.idl_high);
    s->add_option("--tp-max", k.tp_max);
    s->add_option("--lra-low", k.lra_low);
    s->add_option("--lra-high", k.lra_high);
    s->add_option("--histogram", histogram_path, "Write a density-histogram CSV of idl/tp/lra over the files");
    s->add_option("--idl-edges", idl_edges)->delimiter(',');
    s->add_option("--tp-edges", tp_edges)->delimiter(',');
    s->add_option("--lra-edges", lra_edges)->delimiter(',');
    s->callback([&] {
      action = [&]() -> json {
        if (k.idl_low > k.idl_high || k.lra_low > k.lra_high) throw ValidationError("reference band bounds reversed");
        if (wavs.empty()) {
          if (!idl || !tp || !lra) throw CLI::ValidationError("score-loudness", "give WAV files or all of --idl --tp --lra");
          const loudness::LoudnessReport r{*idl, *tp, *lra, std::isinf(*idl)};
          return with_infinity_flags(score_row(r, loudness::score(r, k)));
        }
        std::vector<loudness::LoudnessReport> reports(wavs.size());
        auto rows = parallel_map(wavs.size(), jobs, [&](std::size_t i) {
          reports[i] = loudness::measure(decode_wav(wavs[i]));
          const auto sc = loudness::score(reports[i], k);
          if (sc.silent_input) err << "warning: " << wavs[i] << " is silent; s_idl set to 0\n";
          json j = with_infinity_flags(score_row(reports[i], sc));
          j["file"] = wavs[i];
          return j;
        });
        if (!histogram_path.empty()) {
          std::vector<double> v_idl, v_tp, v_lra;
          for (const auto& r : reports) {
            v_idl.push_back(r.integrated_lufs);
            v_tp.push_back(r.true_peak_dbtp);
            v_lra.push_back(r.loudness_range_lu);
          }
          std::ostringstream csv;
          csv << "metric,bin_low,bin_high,density\n";
          for (const auto& [name, vals, edges] : {std::tuple{"idl", &v_idl, &idl_edges}, std::tuple{"tp", &v_tp, &tp_edges},
                                                 std::tuple{"lra", &v_lra, &lra_edges}}) {
            const auto d = loudness::density_histogram(*vals, *edges);
            for (std::size_t b = 0; b < d.size(); ++b)
              csv << name << ',' << (*edges)[b] << ',' << (*edges)[b + 1] << ',' << d[b] << '\n';
          }
          write_text_file(histogram_path, csv.str());
        }
        if (rows.size() == 1) return rows.front();
        json summary = json::object();
        for (const char* key : {"s_idl", "s_tp", "s_lra"}) {
          std::vector<double> xs;
          for (const auto& r : rows) xs.push_back(r[key].get<double>());
          summary[key] = {{"mean", stats::mean(xs)}, {"median", stats::median(xs)}};
        }
        return {{"files", rows}, {"summary", summary}};
      };
    });
  }

  // wer
  std::string ref_path, hyp_path;
  {
    auto* s = sub("wer", "Word error rate of a hypothesis transcript");
    s->add_option("reference", ref_path, "Reference transcript")->required()->check(CLI::ExistingFile);
    s->add_option("hypothesis", hyp_path, "Hypothesis transcript")->required()->check(CLI::ExistingFile);
    s->callback([&] {
      action = [&] {
        const auto r = align_words(read_transcript_tokens(ref_path), read_transcript_tokens(hyp_path));
        return json{{"wer", r.wer()},
                    {"substitutions", r.substitutions},
                    {"deletions", r.deletions},
                    {"insertions", r.insertions},
                    {"reference_length", r.reference_length}};
      };
    });
  }

  // sim
  std::string synth_path, voices_path, sim_mode = "per-utterance";
  {
    auto* s = sub("sim", "Speaker similarity against reference voices");
    s->add_option("--embeddings", synth_path, "Synthesized-speech embeddings JSONL")->required()->check(CLI::ExistingFile);
    s->add_option("--references", voices_path, "Reference-voice embeddings JSONL")->required()->check(CLI::ExistingFile);
    s->add_option("--mode", sim_mode, "per-utterance or pooled")->check(CLI::IsMember({"per-utterance", "pooled"}));
    s->callback([&] {
      action = [&] {
        const auto mode = sim_mode == "pooled" ? SimMode::Pooled : SimMode::PerUtterance;
        const auto r = speaker_similarity(read_embeddings(synth_path), read_embeddings(voices_path), mode);
        return json{{"mode", sim_mode}, {"per_speaker", r.per_speaker}, {"episode_mean", r.episode_mean}};
      };
    });
  }

  // sptd
  std::string emb_path;
  {
    auto* s = sub("sptd", "Speaker timbre difference per episode");
    s->add_option("--embeddings", emb_path, "Embeddings JSONL (speaker_id, file_id, vector)")->required()->check(CLI::ExistingFile);
    s->callback([&] {
      action = [&] {
        const auto all = read_embeddings(emb_path);
        std::vector<std::string> files;
        for (const auto& e : all)
          if (std::find(files.begin(), files.end(), e.file_id) == files.end()) files.push_back(e.file_id);
        auto per = parallel_map(files.size(), jobs, [&](std::size_t i) {
          const auto group = group_file(all, files[i]);
          return json{{"file_id", files[i]}, {"speakers", pool_by_speaker(group).size()}, {"sptd", sptd(group)}};
        });
        return one_or_many(std::move(per));
      };
    });
  }

  // smr
  std::string speech_path, mse_path, activity_path, pairs_path;
  {
    auto* s = sub("smr", "Speech-to-music ratio of separated stems");
    s->add_option("--speech", speech_path, "Speech stem WAV")->check(CLI::ExistingFile);
    s->add_option("--mse", mse_path, "Music/effects stem WAV")->check(CLI::ExistingFile);
    s->add_option("--activity", activity_path, "Speech activity (RTTM/JSONL) restricting the measurement")
        ->check(CLI::ExistingFile);
    s->add_option("--pairs", pairs_path, "CSV speech_path,mse_path[,activity_path] for a batch score")
        ->check(CLI::ExistingFile);
    s->callback([&] {
      action = [&]() -> json {
        struct Job {
          fs::path speech, mse;
          std::optional<fs::path> activity;
        };
        std::vector<Job> todo;
        if (!pairs_path.empty()) {
          const fs::path base = fs::path(pairs_path).parent_path();
          auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
          std::istringstream in(read_text_file(pairs_path));
          std::string line;
          std::size_t line_no = 0;
          while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            std::vector<std::string> cols;
            std::istringstream row(line);
            for (std::string c; std::getline(row, c, ',');) cols.push_back(c);
            if (line_no == 1) {
              if (cols.size() < 2 || cols[0] != "speech_path" || cols[1] != "mse_path")
                throw ParseError(pairs_path + ":1: header must be speech_path,mse_path[,activity_path]");
              continue;
            }
            if (cols.size() < 2 || cols.size() > 3)
              throw ParseError(pairs_path + ":" + std::to_string(line_no) + ": expected 2 or 3 columns");
            Job j{resolve(cols[0]), resolve(cols[1]), {}};
            if (cols.size() == 3 && !cols[2].empty()) j.activity = resolve(cols[2]);
            todo.push_back(std::move(j));
          }
          if (todo.empty()) throw ValidationError(pairs_path + ": no stem pairs");
        } else {
          if (speech_path.empty() || mse_path.empty()) throw CLI::ValidationError("smr", "need --speech and --mse, or --pairs");
          todo.push_back({speech_path, mse_path, activity_path.empty() ? std::nullopt : std::optional<fs::path>(activity_path)});
        }
        std::vector<SmrResult> results(todo.size());
        auto rows = parallel_map(todo.size(), jobs, [&](std::size_t i) {
          std::optional<std::vector<Interval>> act;
          if (todo[i].activity) act = activity_from(*todo[i].activity);
          results[i] = smr({decode_wav(todo[i].speech), decode_wav(todo[i].mse)}, act);
          return with_infinity_flags(json{{"speech", todo[i].speech.string()},
                                          {"smr_db", results[i].smr_db},
                                          {"no_mse", results[i].no_mse}});
        });
        if (todo.size() == 1 && pairs_path.empty()) return rows.front();
        const auto sc = smr_score(results);
        return {{"items", rows}, {"score", sc.score}, {"valid", sc.valid}, {"no_mse", sc.no_mse}};
      };
    });
  }

  // text-metrics
  std::vector<std::string> scripts;
  std::string turn_emb_path, csv_path;
  text_metrics::MetricOptions tm;
  {
    auto* s = sub("text-metrics", "Lexical and semantic diversity of scripts");
    s->add_option("scripts", scripts, "Script files (JSONL turns or SPEAKER: text)")->required()->check(CLI::ExistingFile);
    s->add_option("--orders", tm.distinct_orders, "Distinct-N orders")->delimiter(',');
    s->add_option("--window", tm.mattr_window, "MATTR window")->check(CLI::PositiveNumber);
    s->add_option("--turn-embeddings", turn_emb_path, "Per-turn embeddings JSONL; file_id = script file stem")
        ->check(CLI::ExistingFile);
    s->add_option("--csv", csv_path, "Also write a per-category table; category = script's parent directory");
    s->callback([&] {
      action = [&] {
        std::vector<EmbeddingVector> turn_embs;
        if (!turn_emb_path.empty()) turn_embs = read_embeddings(turn_emb_path);
        std::vector<text_metrics::ScoredScript> scored(scripts.size());
        auto rows = parallel_map(scripts.size(), jobs, [&](std::size_t i) {
          const fs::path p = scripts[i];
          const auto embs = group_file(turn_embs, p.stem().string());
          auto m = text_metrics::compute_all(read_script(p), embs.empty() ? nullptr : &embs, tm);
          json j = {{"file", scripts[i]}, {"info_dens", m.info_dens}};
          for (const auto& [n, v] : m.distinct) j["distinct_" + std::to_string(n)] = v;
          j["mattr"] = m.mattr ? json(*m.mattr) : json(nullptr);
          j["sem_div"] = m.sem_div ? json(*m.sem_div) : json(nullptr);
          scored[i] = {p.stem().string(), p.parent_path().filename().string(), std::move(m)};
          return j;
        });
        if (!csv_path.empty()) write_text_file(csv_path, text_metrics::category_table_csv(scored));
        return one_or_many(std::move(rows));
      };
    });
  }

  // judge
  std::string judge_pairs;
  judge::JudgeConfig jc;
  {
    auto* s = sub("judge", "Pairwise LLM comparison of scripts with order swapping");
    s->add_option("pairs", judge_pairs, "JSONL of {id, category, a, b} script paths")->required()->check(CLI::ExistingFile);
    s->add_option("--endpoint", jc.endpoint_url, "Chat-completions URL");
    s->add_option("--model", jc.model);
    s->add_option("--api-key-env", jc.api_key_env, "Environment variable holding the API key");
    s->add_option("--temperature", jc.temperature)->check(CLI::Range(0.0, 2.0));
    s->add_option("--retries", jc.max_retries)->check(CLI::Range(0, 10));
    s->add_option("--timeout", jc.timeout_s)->check(CLI::PositiveNumber);
    s->callback([&] {
      action = [&] {
        jc.parallelism = jobs;
        jc.validate();
        const fs::path base = fs::path(judge_pairs).parent_path();
        auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? fs::path(p) : base / p; };
        std::vector<judge::ScriptPair> pairs;
        for (const auto& line : read_jsonl(judge_pairs)) {
          const std::string ctx = judge_pairs + ":" + std::to_string(line.line);
          pairs.push_back({id_string(require_field(line.value, "id", ctx)),
                           line.value.value("category", std::string("uncategorized")),
                           read_script(resolve(require_string(line.value, "a", ctx))),
                           read_script(resolve(require_string(line.value, "b", ctx)))});
        }
        judge::HttpChatClient client(jc);
        const auto verdicts = judge::judge_batch(pairs, client, jc);
        json items = json::array();
        for (std::size_t i = 0; i < pairs.size(); ++i) {
          json j = judge::to_json(verdicts[i]);
          j["id"] = pairs[i].id;
          j["category"] = pairs[i].category;
          items.push_back(std::move(j));
        }
        return json{{"items", items}, {"aggregate", judge::aggregate_verdicts(pairs, verdicts)}};
      };
    });
  }

  // segments
  std::string diar_path, seg_audio, seg_dir, episode_id;
  std::optional<double> duration;
  segments::DialogueOptions dopt;
  {
    auto* s = sub("segments", "Pick dialogue windows rich in speaker changes");
    s->add_option("--diarization", diar_path, "RTTM or JSONL diarization")->required()->check(CLI::ExistingFile);
    s->add_option("--duration", duration, "Episode duration in seconds (else taken from --audio)");
    s->add_option("--audio", seg_audio, "Episode WAV; with --write-dir the windows are cut")->check(CLI::ExistingFile);
    s->add_option("--write-dir", seg_dir, "Directory for cut stimuli");
    s->add_option("--episode", episode_id, "Episode id for the specs");
    s->add_option("--min", dopt.min_len_s)->check(CLI::PositiveNumber);
    s->add_option("--max", dopt.max_len_s)->check(CLI::PositiveNumber);
    s->add_option("--count", dopt.count)->check(CLI::PositiveNumber);
    s->callback([&] {
      action = [&] {
        std::optional<AudioBuffer> audio;
        if (!seg_audio.empty()) audio = decode_wav(seg_audio);
        if (!duration && !audio) throw CLI::ValidationError("segments", "need --duration or --audio");
        if (!seg_dir.empty() && !audio) throw CLI::ValidationError("segments", "--write-dir needs --audio");
        const double d = duration ? *duration : audio->duration_s();
        const std::string ep = episode_id.empty() ? fs::path(diar_path).stem().string() : episode_id;
        auto specs = segments::extract_dialogue_segments(segments::read_diarization(diar_path), d, dopt, ep);
        json arr = json::array();
        for (std::size_t i = 0; i < specs.size(); ++i) {
          if (!seg_dir.empty()) {
            fs::create_directories(seg_dir);
            const auto p = fs::path(seg_dir) / (ep + "_dlg" + std::to_string(i) + ".wav");
            write_wav(p, slice(*audio, specs[i].start_s, specs[i].end_s));
            specs[i].output_path = p.string();
          }
          arr.push_back(segments::to_json(specs[i]));
        }
        return arr;
      };
    });
  }

  // fml
  std::string fml_in, fml_out;
  BeepSpec beep;
  {
    auto* s = sub("fml", "Concatenate first/middle/last minutes with beep separators");
    s->add_option("wav", fml_in, "Episode WAV")->required()->check(CLI::ExistingFile);
    s->add_option("--write", fml_out, "Output WAV")->required();
    s->add_option("--episode", episode_id);
    s->add_option("--beep-duration", beep.duration_s)->check(CLI::Range(0.01, 10.0));
    s->add_option("--beep-freq", beep.freq_hz)->check(CLI::Range(20.0, 20000.0));
    s->add_option("--beep-level", beep.level_dbfs)->check(CLI::Range(-96.0, 0.0));
    s->add_option("--beep-padding", beep.padding_s)->check(CLI::Range(0.0, 10.0));
    s->callback([&] {
      action = [&] {
        const auto in = decode_wav(fml_in);
        const auto sep = make_separator(beep, in.sample_rate(), in.channel_count());
        const auto outbuf = segments::extract_fml_minutes(in, sep);
        write_wav(fml_out, outbuf);
        segments::StimulusSpec spec;
        spec.episode_id = episode_id.empty() ? fs::path(fml_in).stem().string() : episode_id;
        spec.start_s = 0;
        spec.end_s = in.duration_s();
        spec.kind = segments::StimulusKind::FmlConcat;
        spec.output_path = fml_out;
        json j = segments::to_json(spec);
        j["output_duration_s"] = outbuf.duration_s();
        j["windows"] = segments::fml_windows(in.frames(), in.sample_rate()).size();
        return j;
      };
    });
  }

  // filter-judgers
  std::string judge_input, config_path, test_id;
  double lq_thr = 90.0, hq_thr = 50.0;
  {
    auto* s = sub("filter-judgers", "Exclude judgers who miss the anchors");
    s->add_option("input", judge_input, "Per-judger stats JSONL or submissions JSONL")->required()->check(CLI::ExistingFile);
    s->add_option("--config", config_path, "Test config (needed for submissions input)")->check(CLI::ExistingFile);
    s->add_option("--test", test_id, "Test id when the config holds several");
    s->add_option("--lq-threshold", lq_thr)->check(kThreshold);
    s->add_option("--hq-threshold", hq_thr)->check(kThreshold);
    s->callback([&] {
      action = [&] {
        const auto lines = read_jsonl(judge_input, true);
        std::map<std::string, subjective::JudgerStats> stats;
        if (!lines.empty() && lines.front().value.contains("lq_last_pct")) {
          for (const auto& l : lines) {
            const std::string ctx = judge_input + ":" + std::to_string(l.line);
            subjective::JudgerStats st;
            st.judger_id = id_string(require_field(l.value, "judger_id", ctx));
            st.lq_last_pct = require_number(l.value, "lq_last_pct", ctx);
            st.hq_top2_pct = require_number(l.value, "hq_top2_pct", ctx);
            st.pages = l.value.value("pages", std::size_t{0});
            if (!stats.emplace(st.judger_id, st).second) throw ValidationError(ctx + ": duplicate judger " + st.judger_id);
          }
        } else {
          if (config_path.empty()) throw CLI::ValidationError("filter-judgers", "submissions input needs --config");
          const auto tests = load_test_configs(config_path);
          const auto& cfg = pick_test(tests, test_id);
          const auto subs = subjective::read_submissions(judge_input);
          stats = subjective::compute_all_judger_stats(subs, subjective::anchors_from_config(cfg));
        }
        return filter_json(stats, lq_thr, hq_thr);
      };
    });
  }

  // aggregate
  std::vector<std::string> sub_paths;
  std::string attention = "exclude", justification_path;
  bool no_filter = false;
  {
    auto* s = sub("aggregate", "Aggregate listening-test submissions");
    s->add_option("submissions", sub_paths, "Submissions JSONL")->required()->check(CLI::ExistingFile);
    s->add_option("--config", config_path, "Test config")->required()->check(CLI::ExistingFile);
    s->add_option("--test", test_id);
    s->add_option("--lq-threshold", lq_thr)->check(kThreshold);
    s->add_option("--hq-threshold", hq_thr)->check(kThreshold);
    s->add_flag("--no-filter", no_filter, "Keep every MUSHRA judger");
    s->add_option("--attention", attention, "exclude or warn")->check(CLI::IsMember({"exclude", "warn"}));
    s->add_option("--justification-scores", justification_path,
                  "JSON {system: {question: score}} to average with direct MOS")->check(CLI::ExistingFile);
    s->callback([&] {
      action = [&]() -> json {
        const auto tests = load_test_configs(config_path);
        const auto& cfg = pick_test(tests, test_id);
        auto subs = load_submissions(sub_paths);
        std::erase_if(subs, [&](const auto& x) { return x.test_id != cfg.test_id; });
        if (cfg.kind == TestKind::Mushra) {
          const auto stats = subjective::compute_all_judger_stats(subs, subjective::anchors_from_config(cfg));
          json j;
          std::vector<std::string> kept;
          if (no_filter) {
            for (const auto& [id, _] : stats) kept.push_back(id);
          } else {
            j["filter"] = filter_json(stats, lq_thr, hq_thr);
            kept = j["filter"]["kept"].get<std::vector<std::string>>();
          }
          j["mushra"] = subjective::to_json(subjective::aggregate_mushra(subjective::keep_judgers(subs, kept), cfg));
          return j;
        }
        const auto policy = attention == "warn" ? subjective::AttentionPolicy::WarnOnly : subjective::AttentionPolicy::Exclude;
        const auto screen = subjective::apply_attention_policy(subs, cfg, policy);
        for (const auto& [key, qs] : screen.failed) {
          err << "warning: attention check failed for " << key << ":";
          for (const auto& q : qs) err << ' ' << q;
          err << '\n';
        }
        const auto direct = subjective::direct_mos(screen.kept, cfg);
        json cells = json::array();
        if (justification_path.empty()) {
          for (const auto& [cell, v] : direct)
            cells.push_back({{"system", cell.first}, {"question", cell.second}, {"direct", v}, {"final", v}});
        } else {
          subjective::MosGrid just;
          const json jj = read_json_file(justification_path);
          for (auto sys = jj.begin(); sys != jj.end(); ++sys)
            for (auto q = sys->begin(); q != sys->end(); ++q) just[{sys.key(), q.key()}] = q->get<double>();
          for (const auto& [cell, c] : subjective::combine_mos(direct, just)) {
            json row = {{"system", cell.first}, {"question", cell.second}, {"direct", direct.at(cell)},
                        {"final", c.value}, {"direct_only", c.direct_only}};
            if (!c.direct_only) row["justification"] = just.at(cell);
            cells.push_back(std::move(row));
          }
        }
        json failed = json::object();
        for (const auto& [key, qs] : screen.failed) failed[key] = qs;
        return {{"mos", cells}, {"attention_failures", failed}, {"attention_policy", attention}};
      };
    });
  }

  // report
  std::vector<std::string> metric_files;
  {
    auto* s = sub("report", "Per-system report with normalized values and radar payload");
    s->add_option("metrics", metric_files, "JSON files: one system object or an array of them")->required()->check(CLI::ExistingFile);
    s->callback([&] {
      action = [&] {
        std::vector<SystemMetrics> systems;
        for (const auto& f : metric_files) {
          const json doc = read_json_file(f);
          if (doc.is_array())
            for (const auto& x : doc) systems.push_back(parse_system_metrics(x));
          else
            systems.push_back(parse_system_metrics(doc));
        }
        return json(build_reports(systems));
      };
    });
  }

  // serve
  std::string serve_config, data_dir = "data", static_dir, host = "127.0.0.1";
  int port = 8080;
  std::size_t max_body = 1 << 20;
  {
    auto* s = sub("serve", "HTTP service for listening tests");
    s->add_option("--config", serve_config, "Test config JSON/YAML")->required()->check(CLI::ExistingFile);
    s->add_option("--data-dir", data_dir, "Directory for submissions.jsonl");
    s->add_option("--port", port)->check(CLI::Range(0, 65535));
    s->add_option("--host", host);
    s->add_option("--static", static_dir, "Built UI directory")->check(CLI::ExistingDirectory);
    s->add_option("--max-body", max_body, "Largest accepted request body in bytes")->check(CLI::PositiveNumber);
    s->callback([&] {
      action = [&]() -> json {
        ServiceOptions so{load_test_configs(serve_config), data_dir, std::nullopt, max_body};
        if (!static_dir.empty()) so.static_dir = static_dir;
        TestService svc(std::move(so));
        const int bound = svc.bind(host, port);
        err << "serving on http://" << host << ":" << bound << "\n";
        svc.run();
        return nullptr;
      };
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    json result = action();
    if (result.is_null()) return kExitOk;
    const std::string text = round_numbers(result).dump(2) + "\n";
    if (out_path.empty()) out << text;
    else write_text_file(out_path, text);
    return kExitOk;
  } catch (const CLI::ValidationError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitMetricError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitMetricError;
  }
}

}  // namespace castkit
