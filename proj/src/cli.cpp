// SPDX-License-Identifier: Apache-2.0
#include "reachrec/cli.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "reachrec/error.hpp"
#include "reachrec/log.hpp"

namespace reachrec::cli {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Helpers

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

const char* policy_name(events::PolicyMode mode) {
  switch (mode) {
    case events::PolicyMode::RulesOnly: return "rules_only";
    case events::PolicyMode::ScoresOnly: return "scores_only";
    case events::PolicyMode::Fused: return "fused";
  }
  return "?";
}

events::PolicyMode policy_from_name(const std::string& name) {
  if (name == "rules_only") return events::PolicyMode::RulesOnly;
  if (name == "scores_only") return events::PolicyMode::ScoresOnly;
  if (name == "fused") return events::PolicyMode::Fused;
  throw DataError("unknown policy '" + name + "'");
}

const char* offset_semantics_name(events::OffsetSemantics s) {
  return s == events::OffsetSemantics::Touch ? "touch" : "literal";
}

events::OffsetSemantics offset_semantics_from_name(const std::string& name) {
  if (name == "touch") return events::OffsetSemantics::Touch;
  if (name == "literal") return events::OffsetSemantics::Literal;
  throw DataError("unknown offset semantics '" + name + "'");
}

// ---------------------------------------------------------------------------
// Clips

std::vector<Clip> build_clips(const std::vector<data::VideoSequence>& seqs,
                              const std::vector<data::VideoAnnotations>& annotations,
                              features::Pairing pairing) {
  std::vector<Clip> clips;
  for (const auto& seq : seqs) {
    const std::vector<data::ReachEvent>* events = nullptr;
    for (const auto& va : annotations)
      if (va.video_id == seq.video_id) events = &va.events;
    if (events == nullptr) continue;

    for (const data::Hand hand : {data::Hand::Left, data::Hand::Right}) {
      // events of this hand in clip order, as sequence positions
      std::vector<std::pair<long, long>> positions;
      bool skip_hand = false;
      std::vector<const data::ReachEvent*> mine;
      for (const auto& ev : *events)
        if (ev.hand == hand) mine.push_back(&ev);
      if (mine.empty()) continue;
      std::sort(mine.begin(), mine.end(), [](const data::ReachEvent* a, const data::ReachEvent* b) {
        return a->onset_frame < b->onset_frame;
      });
      for (const auto* ev : mine) {
        const auto on = seq.position_of(ev->onset_frame);
        const auto off = seq.position_of(ev->offset_frame);
        if (!on || !off) {
          log::warn(seq.video_id + ": event at frame " + std::to_string(ev->onset_frame) +
                    " references missing frames; skipping this hand's clips");
          skip_hand = true;
          break;
        }
        positions.emplace_back(static_cast<long>(*on), static_cast<long>(*off));
      }
      if (skip_hand || positions.empty()) continue;

      const long n = static_cast<long>(seq.size());
      for (std::size_t k = 0; k < positions.size(); ++k) {
        const long lo =
            (k == 0) ? 0 : (positions[k - 1].second + 1 + positions[k].first) / 2;
        const long hi = (k + 1 == positions.size())
                            ? n - 1
                            : (positions[k].second + positions[k + 1].first) / 2;
        data::VideoSequence slice;
        slice.video_id = seq.video_id;
        slice.frames.assign(seq.frames.begin() + lo, seq.frames.begin() + hi + 1);

        Clip clip;
        clip.video_id = seq.video_id;
        clip.hand = hand;
        clip.stream = features::feature_stream(slice, hand, pairing);
        std::vector<data::ReachEvent> local;
        data::ReachEvent lev = *mine[k];
        lev.onset_frame = positions[k].first - lo;
        lev.offset_frame = positions[k].second - lo;
        local.push_back(lev);
        clip.labels = data::labels_from_events(local, hi - lo + 1, hand);
        clip.truth_events.emplace_back(lev.onset_frame, lev.offset_frame);
        clips.push_back(std::move(clip));
      }
    }
  }
  return clips;
}

std::vector<nn::LabeledStream> to_labeled_streams(const std::vector<Clip>& clips,
                                                  const std::vector<std::size_t>& indices) {
  std::vector<nn::LabeledStream> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back({clips[i].stream, clips[i].labels});
  return out;
}

std::vector<events::CalibrationSample> to_calibration_samples(
    const std::vector<Clip>& clips, const std::vector<std::size_t>& indices) {
  std::vector<events::CalibrationSample> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back({clips[i].stream, clips[i].truth_events});
  return out;
}

std::vector<metrics::EvalSample> to_eval_samples(const std::vector<Clip>& clips,
                                                 const std::vector<std::size_t>& indices) {
  std::vector<metrics::EvalSample> out;
  out.reserve(indices.size());
  for (std::size_t i : indices)
    out.push_back({clips[i].stream, clips[i].labels, clips[i].truth_events});
  return out;
}

// ---------------------------------------------------------------------------
// gen

namespace {

json synth_config_to_json(const synth::SynthConfig& cfg) {
  return json{{"frame_w", cfg.frame_w},
              {"frame_h", cfg.frame_h},
              {"n_pre_frames", {cfg.n_pre_frames.first, cfg.n_pre_frames.second}},
              {"n_post_frames", {cfg.n_post_frames.first, cfg.n_post_frames.second}},
              {"duration_min_frames", cfg.duration.min_frames},
              {"duration_weights", cfg.duration.weights},
              {"hand_box_size", {cfg.hand_box_size.first, cfg.hand_box_size.second}},
              {"object_box_size", {cfg.object_box_size.first, cfg.object_box_size.second}},
              {"jitter_std", cfg.jitter_std},
              {"abort_probability", cfg.abort_probability},
              {"n_objects", {cfg.n_objects.first, cfg.n_objects.second}},
              {"contact_iou", cfg.contact_iou},
              {"touch_level", cfg.touch_level}};
}

}  // namespace

int run_gen(const GenOptions& opt) {
  if (opt.n < 1) throw ConfigError("gen: --n must be >= 1");
  const auto samples = synth::generate_dataset(opt.config, opt.n, opt.seed);

  std::vector<data::VideoSequence> seqs;
  std::vector<data::VideoAnnotations> anns;
  for (const auto& s : samples) {
    seqs.push_back(s.sequence);
    anns.push_back({s.sequence.video_id, s.truth_events});
  }
  write_file(opt.out / "detections.jsonl", data::serialize_detections(seqs));
  write_file(opt.out / "annotations.csv", data::serialize_annotations(anns));

  json manifest;
  manifest["format_version"] = 1;
  manifest["command"] = "gen";
  manifest["n"] = opt.n;
  manifest["seed"] = opt.seed;
  manifest["config"] = synth_config_to_json(opt.config);
  write_file(opt.out / "synth-manifest.json", manifest.dump(2) + "\n");

  log::info("gen: wrote " + std::to_string(opt.n) + " clips to " + opt.out.string());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train

namespace {

struct LoadedData {
  std::vector<data::VideoSequence> seqs;
  std::vector<data::VideoAnnotations> anns;
};

LoadedData load_dataset(const fs::path& dir) {
  LoadedData d;
  d.seqs = data::parse_detections_string(read_file(dir / "detections.jsonl"));
  d.anns = data::parse_annotations_string(read_file(dir / "annotations.csv"));
  return d;
}

json history_to_json(const nn::TrainResult& result) {
  json epochs = json::array();
  for (const auto& st : result.history)
    epochs.push_back({{"epoch", st.epoch},
                      {"train_loss", st.train_loss},
                      {"train_accuracy", st.train_accuracy},
                      {"val_loss", st.val_loss},
                      {"val_accuracy", st.val_accuracy}});
  return json{{"format_version", 1}, {"best_epoch", result.best_epoch}, {"epochs", epochs}};
}

}  // namespace

int run_train(const TrainOptions& opt) {
  const LoadedData d = load_dataset(opt.data);
  auto clips = build_clips(d.seqs, d.anns);
  if (clips.size() < 3) throw DataError("train: need at least 3 reach clips, got " +
                                        std::to_string(clips.size()));

  const auto split = data::split_dataset(clips.size(), opt.split, opt.seed);
  if (split.train.empty()) throw DataError("train: empty training split");

  nn::TrainHyper hyper = opt.hyper;
  hyper.seed = opt.seed;

  const auto train_set = to_labeled_streams(clips, split.train);
  const auto val_set = to_labeled_streams(clips, split.val);

  nn::TrainResult result;
  if (opt.model == nn::ModelKind::BabynetLstm) {
    nn::LstmConfig cfg;
    if (opt.window) cfg.window = *opt.window;
    if (opt.hidden) cfg.hidden_dim = *opt.hidden;
    result = nn::train_lstm(cfg, train_set, val_set, hyper);
  } else {
    result = nn::train(nn::ModelKind::MlpBaseline, train_set, val_set, hyper);
  }

  const long n_params = result.model.n_params();
  std::printf("model %s: %ld trainable parameters\n", nn::model_kind_name(result.model.kind),
              n_params);

  events::CalibrationResult cal;
  if (opt.iou_threshold) {
    cal.theta = *opt.iou_threshold;
    cal.event_f1 = -1.0;
  } else {
    auto cal_set = to_calibration_samples(clips, split.val.empty() ? split.train : split.val);
    cal = events::calibrate_threshold(result.model, cal_set);
  }

  write_file(opt.out / "model.json", nn::save_model(result.model));
  write_file(opt.out / "history.json", history_to_json(result).dump(2) + "\n");
  json cal_json{{"format_version", 1},
                {"iou_threshold", cal.theta},
                {"event_f1", cal.event_f1},
                {"source", opt.iou_threshold ? "flag" : (split.val.empty() ? "train" : "validation")}};
  write_file(opt.out / "calibration.json", cal_json.dump(2) + "\n");

  json manifest;
  manifest["format_version"] = 1;
  manifest["command"] = "train";
  manifest["data"] = opt.data.string();
  manifest["model"] = nn::model_kind_name(result.model.kind);
  manifest["seed"] = opt.seed;
  manifest["learning_rate"] = hyper.learning_rate;
  manifest["epochs"] = hyper.epochs;
  manifest["split"] = {opt.split[0], opt.split[1], opt.split[2]};
  manifest["split_sizes"] = {{"train", split.train.size()},
                             {"val", split.val.size()},
                             {"test", split.test.size()}};
  manifest["policy"] = policy_name(opt.policy);
  manifest["offset_semantics"] = offset_semantics_name(opt.offset_semantics);
  manifest["n_params"] = n_params;
  manifest["best_epoch"] = result.best_epoch;
  std::vector<double> weights(result.class_weights.data(),
                              result.class_weights.data() + result.class_weights.size());
  manifest["class_weights"] = weights;
  if (result.model.kind == nn::ModelKind::BabynetLstm) {
    manifest["window"] = result.model.lstm_cfg.window;
    manifest["hidden"] = result.model.lstm_cfg.hidden_dim;
  }
  write_file(opt.out / "train-manifest.json", manifest.dump(2) + "\n");

  log::info("train: best epoch " + std::to_string(result.best_epoch) + ", theta " +
            std::to_string(cal.theta));
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

namespace {

struct ModelBundle {
  nn::Model model;
  double theta = 0.05;
  events::FusionPolicy policy;
  json manifest;  // train manifest, if present
};

ModelBundle load_model_bundle(const fs::path& dir, const std::optional<double>& theta_override,
                              const std::optional<events::PolicyMode>& policy_override,
                              const std::optional<events::OffsetSemantics>& sem_override) {
  ModelBundle b;
  b.model = nn::load_model(read_file(dir / "model.json"));
  if (theta_override) {
    b.theta = *theta_override;
  } else if (fs::exists(dir / "calibration.json")) {
    const json cal = json::parse(read_file(dir / "calibration.json"));
    b.theta = cal.at("iou_threshold").get<double>();
  }
  if (fs::exists(dir / "train-manifest.json")) {
    b.manifest = json::parse(read_file(dir / "train-manifest.json"));
    b.policy.mode = policy_from_name(b.manifest.value("policy", "fused"));
    b.policy.offset_semantics =
        offset_semantics_from_name(b.manifest.value("offset_semantics", "touch"));
  }
  if (policy_override) b.policy.mode = *policy_override;
  if (sem_override) b.policy.offset_semantics = *sem_override;
  return b;
}

}  // namespace

int run_eval(const EvalOptions& opt) {
  const ModelBundle b =
      load_model_bundle(opt.model_dir, opt.iou_threshold, opt.policy, opt.offset_semantics);
  const LoadedData d = load_dataset(opt.data);
  auto clips = build_clips(d.seqs, d.anns);
  if (clips.empty()) throw DataError("eval: no clips in dataset");

  // evaluate on the held-out test split recorded at train time
  std::vector<std::size_t> indices;
  if (!b.manifest.is_null() && b.manifest.contains("split")) {
    const auto ratios = b.manifest.at("split").get<std::array<double, 3>>();
    const auto seed = b.manifest.at("seed").get<std::uint64_t>();
    indices = data::split_dataset(clips.size(), ratios, seed).test;
  } else {
    indices.resize(clips.size());
    for (std::size_t i = 0; i < clips.size(); ++i) indices[i] = i;
  }
  if (indices.empty()) throw DataError("eval: empty test split");

  const auto samples = to_eval_samples(clips, indices);
  const metrics::EvalReport report = metrics::evaluate(b.model, b.theta, samples, b.policy);

  const std::string report_json = metrics::report_to_json(report);
  write_file(opt.out / "report.json", report_json);

  json manifest;
  manifest["format_version"] = 1;
  manifest["command"] = "eval";
  manifest["data"] = opt.data.string();
  manifest["model_dir"] = opt.model_dir.string();
  manifest["iou_threshold"] = b.theta;
  manifest["policy"] = policy_name(b.policy.mode);
  manifest["offset_semantics"] = offset_semantics_name(b.policy.offset_semantics);
  manifest["test_clips"] = indices.size();
  write_file(opt.out / "eval-manifest.json", manifest.dump(2) + "\n");

  std::fputs(metrics::report_table(nn::model_kind_name(b.model.kind), b.model.n_params(), report)
                 .c_str(),
             stdout);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// infer

int run_infer(const InferOptions& opt) {
  const ModelBundle b =
      load_model_bundle(opt.model_dir, opt.iou_threshold, opt.policy, opt.offset_semantics);
  const auto seqs = data::parse_detections_string(read_file(opt.detections));

  std::vector<data::VideoAnnotations> out_events;
  std::string events_jsonl;
  long total_events = 0;
  for (const auto& seq : seqs) {
    data::VideoAnnotations va;
    va.video_id = seq.video_id;
    for (const data::Hand hand : {data::Hand::Left, data::Hand::Right}) {
      const auto stream = features::feature_stream(seq, hand);
      if (stream.valid_count() == 0) {
        log::warn(seq.video_id + ": no usable " + data::hand_name(hand) +
                  "-hand frames (missing hand or object boxes)");
        continue;
      }
      const Eigen::MatrixXd scores = nn::predict(b.model, stream);
      const auto events = events::assemble_events(scores, stream, b.theta, b.policy);
      for (const auto& ev : events) {
        va.events.push_back(ev);
        json trace;
        trace["video_id"] = seq.video_id;
        trace["hand"] = data::hand_tag(ev.hand);
        trace["object_id"] = ev.object_id;
        trace["onset_frame"] = ev.onset_frame;
        trace["offset_frame"] = ev.offset_frame;
        json rows = json::array();
        for (long f = ev.onset_frame; f <= ev.offset_frame; ++f) {
          const auto pos = seq.position_of(f);
          if (!pos) continue;
          rows.push_back({scores(static_cast<long>(*pos), 0), scores(static_cast<long>(*pos), 1),
                          scores(static_cast<long>(*pos), 2), scores(static_cast<long>(*pos), 3)});
        }
        trace["scores"] = rows;
        events_jsonl += trace.dump();
        events_jsonl += '\n';
      }
    }
    std::sort(va.events.begin(), va.events.end(),
              [](const data::ReachEvent& a, const data::ReachEvent& b2) {
                if (a.onset_frame != b2.onset_frame) return a.onset_frame < b2.onset_frame;
                return a.hand < b2.hand;
              });
    total_events += static_cast<long>(va.events.size());
    out_events.push_back(std::move(va));
  }
  if (total_events == 0) log::warn("infer: no events detected");

  write_file(opt.out / "annotations.csv", data::serialize_annotations(out_events));
  write_file(opt.out / "events.jsonl", events_jsonl);

  json manifest;
  manifest["format_version"] = 1;
  manifest["command"] = "infer";
  manifest["detections"] = opt.detections.string();
  manifest["model_dir"] = opt.model_dir.string();
  manifest["iou_threshold"] = b.theta;
  manifest["policy"] = policy_name(b.policy.mode);
  manifest["offset_semantics"] = offset_semantics_name(b.policy.offset_semantics);
  write_file(opt.out / "infer-manifest.json", manifest.dump(2) + "\n");
  return kExitOk;
}

}  // namespace reachrec::cli
