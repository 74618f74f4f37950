// SPDX-License-Identifier: Apache-2.0
#include "reachrec/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "reachrec/error.hpp"
#include "reachrec/rng.hpp"

namespace reachrec::data {

using nlohmann::json;

const geometry::BoundingBox* FrameDetections::object(const std::string& id) const {
  for (const auto& o : objects)
    if (o.id == id) return &o.box;
  return nullptr;
}

std::optional<std::size_t> VideoSequence::position_of(long frame_index) const {
  auto it = std::lower_bound(frames.begin(), frames.end(), frame_index,
                             [](const FrameDetections& f, long idx) { return f.frame_index < idx; });
  if (it == frames.end() || it->frame_index != frame_index) return std::nullopt;
  return static_cast<std::size_t>(it - frames.begin());
}

// ---------------------------------------------------------------------------
// detections.jsonl

namespace {

geometry::BoundingBox parse_box(const json& j, long line_no) {
  geometry::BoundingBox b;
  try {
    b.x = j.at("x").get<double>();
    b.y = j.at("y").get<double>();
    b.w = j.at("w").get<double>();
    b.h = j.at("h").get<double>();
  } catch (const json::exception& e) {
    throw DataError("detections line " + std::to_string(line_no) + ": bad box: " + e.what());
  }
  if (!b.valid())
    throw DataError("detections line " + std::to_string(line_no) +
                    ": box with negative or non-finite extent (w=" + std::to_string(b.w) +
                    ", h=" + std::to_string(b.h) + ")");
  return b;
}

json box_to_json(const geometry::BoundingBox& b) {
  return json{{"x", b.x}, {"y", b.y}, {"w", b.w}, {"h", b.h}};
}

}  // namespace

std::vector<VideoSequence> parse_detections(std::istream& in) {
  std::map<std::string, VideoSequence> by_video;
  std::set<std::pair<std::string, long>> seen;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError("detections line " + std::to_string(line_no) + ": malformed JSON: " + e.what());
    }
    FrameDetections fd;
    std::string video_id;
    try {
      video_id = j.at("video_id").get<std::string>();
      fd.frame_index = j.at("frame").get<long>();
      fd.frame_w = j.at("frame_w").get<double>();
      fd.frame_h = j.at("frame_h").get<double>();
    } catch (const json::exception& e) {
      throw DataError("detections line " + std::to_string(line_no) + ": missing field: " + e.what());
    }
    if (fd.frame_index < 0)
      throw DataError("detections line " + std::to_string(line_no) + ": negative frame index");
    if (!(fd.frame_w > 0.0) || !(fd.frame_h > 0.0))
      throw DataError("detections line " + std::to_string(line_no) + ": non-positive frame size");
    if (!seen.insert({video_id, fd.frame_index}).second)
      throw DataError("detections line " + std::to_string(line_no) + ": duplicate frame " +
                      std::to_string(fd.frame_index) + " for video '" + video_id + "'");

    for (const auto& jb : j.value("boxes", json::array())) {
      std::string label = jb.value("label", "");
      geometry::BoundingBox box = parse_box(jb, line_no);
      if (label == "infant") {
        if (fd.infant) throw DataError("detections line " + std::to_string(line_no) + ": duplicate infant box");
        fd.infant = box;
      } else if (label == "left_hand") {
        if (fd.left_hand) throw DataError("detections line " + std::to_string(line_no) + ": duplicate left_hand box");
        fd.left_hand = box;
      } else if (label == "right_hand") {
        if (fd.right_hand) throw DataError("detections line " + std::to_string(line_no) + ": duplicate right_hand box");
        fd.right_hand = box;
      } else if (label == "object") {
        if (!jb.contains("id"))
          throw DataError("detections line " + std::to_string(line_no) + ": object box without id");
        ObjectBox ob{jb.at("id").get<std::string>(), box};
        for (const auto& prev : fd.objects)
          if (prev.id == ob.id)
            throw DataError("detections line " + std::to_string(line_no) + ": duplicate object id '" + ob.id + "'");
        fd.objects.push_back(std::move(ob));
      } else {
        throw DataError("detections line " + std::to_string(line_no) + ": unknown box label '" + label + "'");
      }
    }
    auto& seq = by_video[video_id];
    seq.video_id = video_id;
    seq.frames.push_back(std::move(fd));
  }

  std::vector<VideoSequence> out;
  out.reserve(by_video.size());
  for (auto& [id, seq] : by_video) {
    std::sort(seq.frames.begin(), seq.frames.end(),
              [](const FrameDetections& a, const FrameDetections& b) { return a.frame_index < b.frame_index; });
    out.push_back(std::move(seq));
  }
  return out;
}

std::vector<VideoSequence> parse_detections_string(const std::string& text) {
  std::istringstream in(text);
  return parse_detections(in);
}

std::string serialize_detections(const std::vector<VideoSequence>& seqs) {
  std::string out;
  for (const auto& seq : seqs) {
    for (const auto& fd : seq.frames) {
      json boxes = json::array();
      if (fd.infant) {
        json b = box_to_json(*fd.infant);
        b["label"] = "infant";
        boxes.push_back(b);
      }
      if (fd.left_hand) {
        json b = box_to_json(*fd.left_hand);
        b["label"] = "left_hand";
        boxes.push_back(b);
      }
      if (fd.right_hand) {
        json b = box_to_json(*fd.right_hand);
        b["label"] = "right_hand";
        boxes.push_back(b);
      }
      for (const auto& o : fd.objects) {
        json b = box_to_json(o.box);
        b["label"] = "object";
        b["id"] = o.id;
        boxes.push_back(b);
      }
      json j{{"video_id", seq.video_id}, {"frame", fd.frame_index},
             {"frame_w", fd.frame_w},   {"frame_h", fd.frame_h},
             {"boxes", boxes}};
      out += j.dump();
      out += '\n';
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// annotations.csv

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

long parse_long(const std::string& s, const std::string& what, long line_no) {
  try {
    std::size_t pos = 0;
    long v = std::stol(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError("annotations line " + std::to_string(line_no) + ": bad " + what + " '" + s + "'");
  }
}

}  // namespace

std::vector<VideoAnnotations> parse_annotations(std::istream& in) {
  static const std::string kHeader = "video_id,reach_id,hand,object_id,onset_frame,offset_frame";
  std::map<std::string, std::vector<ReachEvent>> by_video;
  std::vector<std::string> video_order;
  std::string line;
  long line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!saw_header) {
      if (line != kHeader)
        throw DataError("annotations line 1: expected header '" + kHeader + "'");
      saw_header = true;
      continue;
    }
    auto f = split_csv_line(line);
    if (f.size() != 6)
      throw DataError("annotations line " + std::to_string(line_no) + ": expected 6 fields, got " +
                      std::to_string(f.size()));
    ReachEvent ev;
    if (f[2] == "L")
      ev.hand = Hand::Left;
    else if (f[2] == "R")
      ev.hand = Hand::Right;
    else
      throw DataError("annotations line " + std::to_string(line_no) + ": unknown hand tag '" + f[2] + "'");
    ev.object_id = f[3];
    ev.onset_frame = parse_long(f[4], "onset_frame", line_no);
    ev.offset_frame = parse_long(f[5], "offset_frame", line_no);
    if (ev.onset_frame < 0)
      throw DataError("annotations line " + std::to_string(line_no) + ": negative onset frame");
    if (ev.onset_frame >= ev.offset_frame)
      throw DataError("annotations line " + std::to_string(line_no) + ": onset " +
                      std::to_string(ev.onset_frame) + " must precede offset " +
                      std::to_string(ev.offset_frame));
    if (by_video.find(f[0]) == by_video.end()) video_order.push_back(f[0]);
    by_video[f[0]].push_back(std::move(ev));
  }
  std::vector<VideoAnnotations> out;
  out.reserve(video_order.size());
  for (const auto& id : video_order) out.push_back({id, std::move(by_video[id])});
  return out;
}

std::vector<VideoAnnotations> parse_annotations_string(const std::string& text) {
  std::istringstream in(text);
  return parse_annotations(in);
}

std::string serialize_annotations(const std::vector<VideoAnnotations>& ann) {
  std::string out = "video_id,reach_id,hand,object_id,onset_frame,offset_frame\n";
  for (const auto& va : ann) {
    long reach_id = 0;
    for (const auto& ev : va.events) {
      out += va.video_id;
      out += ',';
      out += std::to_string(reach_id++);
      out += ',';
      out += hand_tag(ev.hand);
      out += ',';
      out += ev.object_id;
      out += ',';
      out += std::to_string(ev.onset_frame);
      out += ',';
      out += std::to_string(ev.offset_frame);
      out += '\n';
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Labels <-> events

std::vector<FrameLabel> labels_from_events(const std::vector<ReachEvent>& events,
                                           long n_frames, Hand hand) {
  if (n_frames < 0) throw DataError("labels_from_events: negative frame count");
  std::vector<FrameLabel> labels(static_cast<std::size_t>(n_frames), FrameLabel::NoR);
  std::vector<const ReachEvent*> mine;
  for (const auto& ev : events)
    if (ev.hand == hand) mine.push_back(&ev);
  std::sort(mine.begin(), mine.end(),
            [](const ReachEvent* a, const ReachEvent* b) { return a->onset_frame < b->onset_frame; });
  long prev_end = -1;
  for (const ReachEvent* ev : mine) {
    if (ev->onset_frame >= ev->offset_frame)
      throw DataError("labels_from_events: onset must precede offset");
    if (ev->onset_frame < 0 || ev->offset_frame >= n_frames)
      throw DataError("labels_from_events: event [" + std::to_string(ev->onset_frame) + ", " +
                      std::to_string(ev->offset_frame) + "] outside 0.." + std::to_string(n_frames - 1));
    if (ev->onset_frame <= prev_end)
      throw DataError("labels_from_events: overlapping events at frame " +
                      std::to_string(ev->onset_frame));
    labels[static_cast<std::size_t>(ev->onset_frame)] = FrameLabel::RN;
    for (long f = ev->onset_frame + 1; f < ev->offset_frame; ++f)
      labels[static_cast<std::size_t>(f)] = FrameLabel::R;
    labels[static_cast<std::size_t>(ev->offset_frame)] = FrameLabel::RF;
    prev_end = ev->offset_frame;
  }
  return labels;
}

DecodedEvents events_from_labels(const std::vector<FrameLabel>& labels) {
  DecodedEvents out;
  std::optional<long> onset;
  auto drop = [&](long at, const char* why) {
    out.warnings.push_back("dropped malformed run at frame " + std::to_string(at) + ": " + why);
  };
  for (long i = 0; i < static_cast<long>(labels.size()); ++i) {
    const FrameLabel l = labels[static_cast<std::size_t>(i)];
    if (!onset) {
      switch (l) {
        case FrameLabel::NoR: break;
        case FrameLabel::RN: onset = i; break;
        case FrameLabel::R: drop(i, "R without preceding RN"); break;
        case FrameLabel::RF: drop(i, "RF without preceding RN"); break;
      }
    } else {
      switch (l) {
        case FrameLabel::R: break;
        case FrameLabel::RF:
          out.events.emplace_back(*onset, i);
          onset.reset();
          break;
        case FrameLabel::NoR:
          drop(*onset, "RN with no later RF");
          onset.reset();
          break;
        case FrameLabel::RN:
          drop(*onset, "RN restarted before RF");
          onset = i;
          break;
      }
    }
  }
  if (onset) drop(*onset, "RN with no later RF");
  return out;
}

// ---------------------------------------------------------------------------
// Validation / merging

namespace {

void check_event_boxes(const VideoSequence& seq, const ReachEvent& ev,
                       std::vector<std::string>& flags) {
  for (long f : {ev.onset_frame, ev.offset_frame}) {
    auto pos = seq.position_of(f);
    const char* which = (f == ev.onset_frame) ? "onset" : "offset";
    if (!pos) {
      flags.push_back(seq.video_id + ": " + which + " frame " + std::to_string(f) +
                      " not present in sequence");
      continue;
    }
    const FrameDetections& fd = seq.frames[*pos];
    if (!fd.hand(ev.hand))
      flags.push_back(seq.video_id + ": missing " + hand_name(ev.hand) + " hand box at " + which +
                      " frame " + std::to_string(f));
    if (fd.object(ev.object_id) == nullptr)
      flags.push_back(seq.video_id + ": missing object '" + ev.object_id + "' box at " + which +
                      " frame " + std::to_string(f));
  }
}

}  // namespace

ValidationReport validate_annotations(const VideoSequence& seq,
                                      const std::vector<ReachEvent>& events,
                                      const std::vector<ReachEvent>* second_pass) {
  ValidationReport rep;
  if (seq.frames.empty()) {
    rep.flags.push_back(seq.video_id + ": empty sequence");
    return rep;
  }
  const long lo = seq.frames.front().frame_index;
  const long hi = seq.frames.back().frame_index;

  for (std::size_t i = 1; i < seq.frames.size(); ++i)
    if (seq.frames[i].frame_index != seq.frames[i - 1].frame_index + 1)
      rep.flags.push_back(seq.video_id + ": frame gap between " +
                          std::to_string(seq.frames[i - 1].frame_index) + " and " +
                          std::to_string(seq.frames[i].frame_index));

  auto sorted = events;
  std::stable_sort(sorted.begin(), sorted.end(), [](const ReachEvent& a, const ReachEvent& b) {
    if (a.hand != b.hand) return a.hand < b.hand;
    return a.onset_frame < b.onset_frame;
  });
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const ReachEvent& ev = sorted[i];
    if (ev.onset_frame < lo || ev.offset_frame > hi)
      rep.flags.push_back(seq.video_id + ": event [" + std::to_string(ev.onset_frame) + ", " +
                          std::to_string(ev.offset_frame) + "] out of sequence bounds [" +
                          std::to_string(lo) + ", " + std::to_string(hi) + "]");
    if (i > 0 && sorted[i - 1].hand == ev.hand && ev.onset_frame <= sorted[i - 1].offset_frame)
      rep.flags.push_back(seq.video_id + ": overlapping " + hand_name(ev.hand) +
                          "-hand events at frame " + std::to_string(ev.onset_frame));
    check_event_boxes(seq, ev, rep.flags);
  }

  if (second_pass == nullptr) {
    rep.merged = sorted;
    return rep;
  }

  // Pair the two annotators' events greedily by nearest onset, same hand.
  auto second = *second_pass;
  std::vector<bool> used(second.size(), false);
  for (const ReachEvent& ev : sorted) {
    long best = -1;
    long best_dist = std::numeric_limits<long>::max();
    for (std::size_t j = 0; j < second.size(); ++j) {
      if (used[j] || second[j].hand != ev.hand) continue;
      const long d = std::labs(second[j].onset_frame - ev.onset_frame);
      if (d < best_dist) {
        best_dist = d;
        best = static_cast<long>(j);
      }
    }
    if (best < 0) {
      rep.flags.push_back(seq.video_id + ": event at frame " + std::to_string(ev.onset_frame) +
                          " has no counterpart in second annotation");
      rep.merged.push_back(ev);
      continue;
    }
    used[static_cast<std::size_t>(best)] = true;
    const ReachEvent& other = second[static_cast<std::size_t>(best)];
    const long d_on = std::labs(other.onset_frame - ev.onset_frame);
    const long d_off = std::labs(other.offset_frame - ev.offset_frame);
    if (d_on > 3 || d_off > 3) {
      rep.flags.push_back(seq.video_id + ": annotator disagreement at event [" +
                          std::to_string(ev.onset_frame) + ", " + std::to_string(ev.offset_frame) +
                          "]: onset differs by " + std::to_string(d_on) + ", offset by " +
                          std::to_string(d_off) + " (tolerance 3)");
      rep.merged.push_back(ev);
      continue;
    }
    ReachEvent merged = ev;
    merged.onset_frame = static_cast<long>(
        std::floor((static_cast<double>(ev.onset_frame) + static_cast<double>(other.onset_frame)) / 2.0));
    merged.offset_frame = static_cast<long>(
        std::floor((static_cast<double>(ev.offset_frame) + static_cast<double>(other.offset_frame)) / 2.0));
    rep.merged.push_back(merged);
  }
  for (std::size_t j = 0; j < second.size(); ++j)
    if (!used[j])
      rep.flags.push_back(seq.video_id + ": second-annotator event at frame " +
                          std::to_string(second[j].onset_frame) + " has no counterpart");
  return rep;
}

// ---------------------------------------------------------------------------
// Splitting

SplitIndices split_dataset(std::size_t n_samples, const std::array<double, 3>& ratios,
                           std::uint64_t seed) {
  double sum = 0.0;
  for (double r : ratios) {
    if (!(r > 0.0)) throw ConfigError("split_dataset: ratios must be positive");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split_dataset: ratios must sum to 1");
  if (n_samples < 3) throw ConfigError("split_dataset: need at least 3 samples");

  std::vector<std::size_t> order(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  const auto n = static_cast<long>(n_samples);
  long n_train = std::clamp<long>(std::llround(static_cast<double>(n) * ratios[0]), 0, n);
  long n_val = std::clamp<long>(std::llround(static_cast<double>(n) * ratios[1]), 0, n - n_train);
  if (n_train + n_val >= n && n_val > 0) n_val = std::max<long>(0, n - n_train - 1);
  SplitIndices out;
  out.train.assign(order.begin(), order.begin() + n_train);
  out.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  out.test.assign(order.begin() + n_train + n_val, order.end());
  return out;
}

}  // namespace reachrec::data
