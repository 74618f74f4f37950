// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "reachrec/geometry.hpp"

namespace reachrec::data {

enum class Hand { Left, Right };

inline const char* hand_tag(Hand h) { return h == Hand::Left ? "L" : "R"; }
inline const char* hand_name(Hand h) { return h == Hand::Left ? "left" : "right"; }

/// Per-frame class label. NoR covers every frame before the onset and after
/// the offset; R the frames strictly between them.
enum class FrameLabel : int { NoR = 0, RN = 1, R = 2, RF = 3 };

inline const char* label_name(FrameLabel l) {
  switch (l) {
    case FrameLabel::NoR: return "NoR";
    case FrameLabel::RN: return "RN";
    case FrameLabel::R: return "R";
    case FrameLabel::RF: return "RF";
  }
  return "?";
}

struct ObjectBox {
  std::string id;
  geometry::BoundingBox box;
};

/// Labeled boxes observed in one video frame.
struct FrameDetections {
  long frame_index = 0;
  double frame_w = 0.0;
  double frame_h = 0.0;
  std::optional<geometry::BoundingBox> infant;
  std::optional<geometry::BoundingBox> left_hand;
  std::optional<geometry::BoundingBox> right_hand;
  std::vector<ObjectBox> objects;

  const std::optional<geometry::BoundingBox>& hand(Hand h) const {
    return h == Hand::Left ? left_hand : right_hand;
  }
  const geometry::BoundingBox* object(const std::string& id) const;
};

struct VideoSequence {
  std::string video_id;
  std::vector<FrameDetections> frames;  // sorted by frame_index, unique

  std::size_t size() const { return frames.size(); }
  /// Position of an absolute frame index within `frames`, if present.
  std::optional<std::size_t> position_of(long frame_index) const;
};

/// One annotated reach: onset = first frame the hand moves toward the
/// object, offset = first frame it touches the object.
struct ReachEvent {
  Hand hand = Hand::Left;
  std::string object_id;
  long onset_frame = 0;
  long offset_frame = 0;
};

// ---------------------------------------------------------------------------
// Parsing / serialization.
// detections.jsonl: one JSON object per line, see serialize_detections.
// annotations.csv: header video_id,reach_id,hand,object_id,onset_frame,offset_frame.

std::vector<VideoSequence> parse_detections(std::istream& in);
std::vector<VideoSequence> parse_detections_string(const std::string& text);
std::string serialize_detections(const std::vector<VideoSequence>& seqs);

struct VideoAnnotations {
  std::string video_id;
  std::vector<ReachEvent> events;
};

std::vector<VideoAnnotations> parse_annotations(std::istream& in);
std::vector<VideoAnnotations> parse_annotations_string(const std::string& text);
std::string serialize_annotations(const std::vector<VideoAnnotations>& ann);

// ---------------------------------------------------------------------------
// Label derivation.

/// Expand events for one hand-stream into per-frame labels over frames
/// 0..n_frames-1. Events must be non-overlapping over [onset, offset].
std::vector<FrameLabel> labels_from_events(const std::vector<ReachEvent>& events,
                                           long n_frames, Hand hand);

struct DecodedEvents {
  std::vector<std::pair<long, long>> events;  // (onset, offset)
  std::vector<std::string> warnings;          // malformed runs that were dropped
};

/// Inverse of labels_from_events on well-formed sequences; malformed runs
/// (RN with no later RF, R/RF with no RN, ...) are dropped with a warning.
DecodedEvents events_from_labels(const std::vector<FrameLabel>& labels);

// ---------------------------------------------------------------------------
// Annotation validation / merging.

struct ValidationReport {
  std::vector<std::string> flags;
  std::vector<ReachEvent> merged;  // = input events when no second pass given
};

/// Check events against the sequence (bounds, overlaps, boxes present at the
/// keyframes). With a second annotator's events, pair them up and flag pairs
/// whose onset or offset differ by more than 3 frames; agreeing pairs merge
/// by the floored average.
ValidationReport validate_annotations(const VideoSequence& seq,
                                      const std::vector<ReachEvent>& events,
                                      const std::vector<ReachEvent>* second_pass = nullptr);

// ---------------------------------------------------------------------------
// Dataset splitting.

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Deterministic shuffled partition of [0, n_samples). Train/val sizes are
/// the nearest-integer ratio counts, the remainder goes to test.
SplitIndices split_dataset(std::size_t n_samples, const std::array<double, 3>& ratios,
                           std::uint64_t seed);

}  // namespace reachrec::data
