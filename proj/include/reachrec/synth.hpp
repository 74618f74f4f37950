// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "reachrec/data.hpp"

namespace reachrec::synth {

/// Discrete distribution over reach durations (frames).
/// weights[k] is the unnormalized mass of duration min_frames + k.
struct DurationHistogram {
  int min_frames = 2;
  std::vector<double> weights;

  int max_frames() const { return min_frames + static_cast<int>(weights.size()) - 1; }
};

/// Default duration distribution: discretized log-normal over [2, 40] with
/// its mode inside the 5-15 frame band where most observed reaches fall.
DurationHistogram default_duration_histogram();

struct SynthConfig {
  double frame_w = 640.0;
  double frame_h = 480.0;
  std::pair<int, int> n_pre_frames{6, 16};    // idle frames before the reach
  std::pair<int, int> n_post_frames{4, 12};   // idle frames after withdrawal
  DurationHistogram duration = default_duration_histogram();
  std::pair<double, double> hand_box_size{24.0, 36.0};
  std::pair<double, double> object_box_size{26.0, 42.0};
  double jitter_std = 0.8;       // positional noise, pixels
  double abort_probability = 0.15;  // chance of an inserted aborted approach
  std::pair<int, int> n_objects{1, 3};
  double contact_iou = 0.4;   // hand/object overlap aimed for at the touch frame
  double touch_level = 0.05;  // iou at/above this counts as touching
  std::uint64_t seed = 0;
};

/// One generated clip: detections, the ground-truth event, and per-hand
/// ground-truth labels (index 0 = left hand stream, 1 = right).
struct SynthSample {
  data::VideoSequence sequence;
  std::vector<data::ReachEvent> truth_events;
  std::array<std::vector<data::FrameLabel>, 2> truth_labels;
  data::Hand reach_hand = data::Hand::Left;
  std::string target_object;
};

const std::vector<data::FrameLabel>& labels_for(const SynthSample& s, data::Hand h);

/// Generate one labeled reach clip. The hand idles, approaches the target
/// along a smoothstep profile staying outside box overlap, makes contact
/// exactly at the offset frame, withdraws and idles; with probability
/// abort_probability an aborted approach (no touch, >= 4 consecutive
/// distance increases on the way back) precedes the reach.
SynthSample generate_sequence(const SynthConfig& cfg, std::uint64_t seed,
                              const std::string& video_id = "v0000");

/// n independent samples with per-sample seeds derived from master_seed.
std::vector<SynthSample> generate_dataset(const SynthConfig& cfg, int n,
                                          std::uint64_t master_seed);

}  // namespace reachrec::synth
