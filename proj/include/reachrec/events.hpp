// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "reachrec/data.hpp"
#include "reachrec/features.hpp"
#include "reachrec/nn.hpp"

namespace reachrec::events {

enum class Phase { Idle, Approaching, Touched };

/// Which frame becomes the offset keyframe at a threshold crossing:
/// Touch = the crossing frame itself (first touch), Literal = the last frame
/// before the crossing (the keyframe that was being updated until then).
enum class OffsetSemantics { Touch, Literal };

enum class PolicyMode { RulesOnly, ScoresOnly, Fused };

struct FusionPolicy {
  PolicyMode mode = PolicyMode::Fused;
  int min_duration = 2;       // emitted events satisfy offset - onset >= this
  double score_margin = 0.0;  // required winner-vs-runner-up probability gap
  OffsetSemantics offset_semantics = OffsetSemantics::Touch;
};

/// Keyframe tracker state. `t_rn` holds the candidate onset keyframe,
/// `t_rf` the detected offset; `consecutive_increases` counts non-decreasing
/// distance frames toward the four-frame onset invalidation.
struct TrackerState {
  long t_rn = 0;
  std::optional<long> t_rf;
  int consecutive_increases = 0;
  Phase phase = Phase::Idle;
  std::optional<double> last_d;
  long last_frame = -1;
  int rearm_low = 0;  // consecutive no-overlap frames since the touch
};

/// Distance rule for one frame: a decrease keeps the onset candidate valid;
/// four consecutive non-decreases invalidate it and move t_rn to the current
/// frame. Frames must arrive in increasing order.
TrackerState onset_step(TrackerState state, long frame, double d);

/// IOU rule for one frame: the first crossing of theta while Approaching
/// sets the offset keyframe and enters Touched; after Touched the tracker
/// re-arms to Idle once the overlap vanishes for two consecutive frames.
TrackerState offset_step(TrackerState state, long frame, double iou, double theta,
                         OffsetSemantics semantics = OffsetSemantics::Touch);

/// Streaming event assembler: push per-frame (features, scores) in order,
/// collect emitted events. Batch assemble_events is this, fed in a loop.
class EventAssembler {
public:
  EventAssembler(double theta, const FusionPolicy& policy) : theta_(theta), policy_(policy) {}

  /// scores may be empty in rules_only mode; otherwise 4 class probabilities.
  std::optional<std::pair<long, long>> push(long frame, const features::FeatureVector& fv,
                                            const Eigen::VectorXd& scores);
  const TrackerState& state() const { return state_; }

private:
  double theta_;
  FusionPolicy policy_;
  TrackerState state_;
  bool first_ = true;
};

/// Run the tracker over an aligned (scores, stream) pair and emit events.
/// scores rows align with stream frames; positions are stream-local frame
/// positions (0-based), mapped to stream.frame_index values in the output.
std::vector<data::ReachEvent> assemble_events(const Eigen::MatrixXd& scores,
                                              const features::FeatureStream& stream, double theta,
                                              const FusionPolicy& policy);

/// One validation stream with its ground-truth events in stream-local
/// positions, as consumed by threshold calibration.
struct CalibrationSample {
  features::FeatureStream stream;
  std::vector<std::pair<long, long>> truth;  // (onset, offset) positions
};

struct CalibrationResult {
  double theta = 0.0;
  double event_f1 = 0.0;
};

/// Grid search theta in {0.01, ..., 0.50}; pick the value maximizing
/// event-level F1 (events match when both keyframes are within 3 frames),
/// smallest theta on ties. Assembly runs in rules_only mode so the scan
/// isolates the threshold's effect; `model` supplies scores for policies
/// that need them.
CalibrationResult calibrate_threshold(const nn::Model& model,
                                      const std::vector<CalibrationSample>& validation,
                                      const FusionPolicy& policy = {PolicyMode::RulesOnly, 2, 0.0,
                                                                    OffsetSemantics::Touch});

/// Event-level F1 at tolerance 3 used by the calibration sweep (exposed for
/// the oracle tests).
double event_f1(const std::vector<std::pair<long, long>>& predicted,
                const std::vector<std::pair<long, long>>& truth, long tolerance = 3);

}  // namespace reachrec::events
