// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "reachrec/data.hpp"

namespace reachrec::features {

/// Per-frame input triple for the classifier and the keyframe rules:
/// hand-object center distance normalized by the frame diagonal, its
/// frame-to-frame delta, and the hand/object box IOU.
struct FeatureVector {
  double d_norm = 0.0;
  double delta_d = 0.0;
  double iou = 0.0;
};

inline constexpr int kFeatureDim = 3;

enum class Pairing { Sticky, PerFrame };

/// Feature vectors for one hand across a sequence, aligned to the sequence's
/// frames. Frames lacking the hand box or any object carry the last valid
/// vector frozen (delta 0) and are flagged invalid; training masks them out.
struct FeatureStream {
  data::Hand hand = data::Hand::Left;
  std::string video_id;
  std::vector<long> frame_index;
  std::vector<FeatureVector> vecs;
  std::vector<bool> valid;
  std::vector<std::string> target_id;  // empty string when no target

  std::size_t size() const { return vecs.size(); }
  std::size_t valid_count() const;
  /// Target of the first locked/valid frame; the stream's nominal object.
  std::string primary_target() const;
};

/// Nearest object (by center distance) to the given hand in this frame.
/// Ties break toward the lexicographically smallest object id. Empty when
/// the hand box is missing or the frame has no objects.
std::optional<std::string> select_target(const data::FrameDetections& frame, data::Hand hand);

/// Build the per-frame feature stream for one hand. Under Sticky pairing the
/// target locks at the first distance decrease and unlocks after four
/// consecutive non-decreasing frames; under PerFrame the nearest object is
/// re-selected every frame.
FeatureStream feature_stream(const data::VideoSequence& seq, data::Hand hand,
                             Pairing pairing = Pairing::Sticky);

}  // namespace reachrec::features
