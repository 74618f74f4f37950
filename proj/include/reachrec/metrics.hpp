// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "reachrec/data.hpp"
#include "reachrec/events.hpp"
#include "reachrec/nn.hpp"

namespace reachrec::metrics {

/// 4x4 counts indexed (truth, predicted) over {NoR, RN, R, RF}, plus the
/// binarized 2x2 over {NoR, Reach} where RN/R/RF fold into Reach.
struct ConfusionMatrix {
  std::array<std::array<long, 4>, 4> counts{};

  long total() const;
  long trace() const;
  double accuracy() const;
  std::array<std::array<long, 2>, 2> binarized() const;
  double binarized_accuracy() const;
};

ConfusionMatrix confusion(const std::vector<data::FrameLabel>& predicted,
                          const std::vector<data::FrameLabel>& truth);

/// Precision/recall with empty denominators reported as undefined, not 0.
struct PrecisionRecall {
  std::optional<double> precision;
  std::optional<double> recall;
};

struct BinarizedScores {
  PrecisionRecall nor;
  PrecisionRecall reach;
};

BinarizedScores precision_recall(const ConfusionMatrix& m);

/// Greedy one-to-one matching of predicted to truth events by nearest onset
/// within `window` frames; delays are predicted - truth (positive = late).
struct EventMatch {
  std::size_t truth_index = 0;
  std::size_t pred_index = 0;
  long onset_delay = 0;
  long offset_delay = 0;
};

struct DelayReport {
  std::vector<EventMatch> matches;
  long missed = 0;    // truth events with no match
  long spurious = 0;  // predictions with no match
};

DelayReport keyframe_delay(const std::vector<std::pair<long, long>>& predicted,
                           const std::vector<std::pair<long, long>>& truth, long window = 10);

/// One evaluation stream: features, per-frame truth labels, truth events in
/// stream-local positions.
struct EvalSample {
  features::FeatureStream stream;
  std::vector<data::FrameLabel> labels;
  std::vector<std::pair<long, long>> truth_events;
};

struct EvalReport {
  double frame_accuracy = 0.0;
  long frames_evaluated = 0;
  ConfusionMatrix confusion;
  BinarizedScores binarized;
  long truth_events = 0;
  long predicted_events = 0;
  long matched_events = 0;
  long missed_events = 0;
  long spurious_events = 0;
  std::vector<long> onset_delays;
  std::vector<long> offset_delays;
  double mean_abs_onset_delay = 0.0;   // over matched events
  double mean_abs_offset_delay = 0.0;  // over matched events
  /// Fraction of truth events matched with |onset delay| <= 2 and
  /// |offset delay| <= 1.
  double well_timed_fraction = 0.0;
};

/// Full pipeline evaluation: predict + assemble_events per stream, then
/// aggregate frame- and event-level measures. Deterministic in input order.
EvalReport evaluate(const nn::Model& model, double theta, const std::vector<EvalSample>& samples,
                    const events::FusionPolicy& policy);

std::string report_to_json(const EvalReport& report);

/// Table row mirroring the comparative-results layout (parameters, accuracy,
/// NoR/R precision and recall).
std::string report_table(const std::string& model_name, long n_params, const EvalReport& report);

}  // namespace reachrec::metrics
