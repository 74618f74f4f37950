// SPDX-License-Identifier: Apache-2.0
#include "reachrec/events.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>

#include "reachrec/error.hpp"

namespace reachrec::events {

namespace {

constexpr double kRearmIou = 1e-9;  // overlap considered vanished below this
constexpr int kInvalidationRun = 4;
constexpr int kRearmFrames = 2;

int argmax4(const Eigen::VectorXd& scores) {
  int arg = 0;
  scores.maxCoeff(&arg);
  return arg;
}

double runner_up_gap(const Eigen::VectorXd& scores) {
  int arg = argmax4(scores);
  double second = -1.0;
  for (int i = 0; i < scores.size(); ++i)
    if (i != arg) second = std::max(second, scores(i));
  return scores(arg) - second;
}

}  // namespace

TrackerState onset_step(TrackerState state, long frame, double d) {
  if (!std::isfinite(d)) throw DataError("onset_step: non-finite distance");
  if (frame <= state.last_frame)
    throw DataError("onset_step: frame " + std::to_string(frame) + " out of order (last " +
                    std::to_string(state.last_frame) + ")");
  if (!state.last_d) {
    // keyframes initialize at the first observed frame
    state.t_rn = frame;
    state.last_d = d;
    state.last_frame = frame;
    return state;
  }
  const double diff = d - *state.last_d;
  if (diff < 0.0) {
    state.consecutive_increases = 0;
    if (state.phase == Phase::Idle) state.phase = Phase::Approaching;
  } else {
    if (++state.consecutive_increases >= kInvalidationRun) {
      state.t_rn = frame;
      state.consecutive_increases = 0;
      if (state.phase == Phase::Approaching) state.phase = Phase::Idle;
    }
  }
  state.last_d = d;
  state.last_frame = frame;
  return state;
}

TrackerState offset_step(TrackerState state, long frame, double iou, double theta,
                         OffsetSemantics semantics) {
  if (!(iou >= 0.0 && iou <= 1.0)) throw DataError("offset_step: iou outside [0, 1]");
  if (!(theta > 0.0 && theta < 1.0)) throw ConfigError("offset_step: theta outside (0, 1)");
  switch (state.phase) {
    case Phase::Approaching:
      if (iou >= theta) {
        state.t_rf = (semantics == OffsetSemantics::Touch) ? frame : frame - 1;
        state.phase = Phase::Touched;
        state.rearm_low = 0;
      }
      break;
    case Phase::Touched:
      if (iou < kRearmIou) {
        if (++state.rearm_low >= kRearmFrames) {
          state.phase = Phase::Idle;
          state.t_rn = frame;
          state.t_rf.reset();
          state.rearm_low = 0;
        }
      } else {
        state.rearm_low = 0;
      }
      break;
    case Phase::Idle:
      // touch without an approach is not an offset
      break;
  }
  return state;
}

std::optional<std::pair<long, long>> EventAssembler::push(long frame,
                                                          const features::FeatureVector& fv,
                                                          const Eigen::VectorXd& scores) {
  if (policy_.min_duration < 2) throw ConfigError("fusion policy: min_duration must be >= 2");
  const bool fused = policy_.mode == PolicyMode::Fused;
  bool reach_class = false, rf_class = false;
  if (fused && scores.size() == nn::kNumClasses) {
    const int arg = argmax4(scores);
    const bool margin_ok = runner_up_gap(scores) >= policy_.score_margin;
    reach_class = margin_ok && (arg == static_cast<int>(data::FrameLabel::RN) ||
                                arg == static_cast<int>(data::FrameLabel::R));
    rf_class = margin_ok && arg == static_cast<int>(data::FrameLabel::RF);
  }

  if (first_) {
    state_.t_rn = frame;
    state_.last_d = fv.d_norm;
    state_.last_frame = frame;
    first_ = false;
    return std::nullopt;
  }

  // Onset side. In fused mode entering Approaching is gated on the
  // classifier calling the frame RN or R, and the gated frame becomes the
  // onset anchor; the distance rule alone maintains or invalidates it after
  // that.
  const double diff = fv.d_norm - *state_.last_d;
  if (diff < 0.0) {
    state_.consecutive_increases = 0;
    if (state_.phase == Phase::Idle) {
      if (!fused) {
        state_.phase = Phase::Approaching;
      } else if (reach_class) {
        state_.phase = Phase::Approaching;
        state_.t_rn = frame;
      }
    }
  } else {
    if (++state_.consecutive_increases >= kInvalidationRun) {
      state_.t_rn = frame;
      state_.consecutive_increases = 0;
      if (state_.phase == Phase::Approaching) state_.phase = Phase::Idle;
    }
  }
  state_.last_d = fv.d_norm;
  state_.last_frame = frame;

  // Offset side.
  std::optional<std::pair<long, long>> emitted;
  if (state_.phase == Phase::Approaching) {
    const bool crossing = fv.iou >= theta_ || (fused && rf_class);
    if (crossing) {
      const long t_rf = (policy_.offset_semantics == OffsetSemantics::Touch) ? frame : frame - 1;
      if (t_rf - state_.t_rn >= policy_.min_duration) {
        state_.t_rf = t_rf;
        state_.phase = Phase::Touched;
        state_.rearm_low = 0;
        emitted = std::make_pair(state_.t_rn, t_rf);
      }
      // below min_duration: ignore the crossing, stay Approaching
    }
  } else if (state_.phase == Phase::Touched) {
    if (fv.iou < kRearmIou) {
      if (++state_.rearm_low >= kRearmFrames) {
        state_.phase = Phase::Idle;
        state_.t_rn = frame;
        state_.t_rf.reset();
        state_.rearm_low = 0;
      }
    } else {
      state_.rearm_low = 0;
    }
  }
  return emitted;
}

std::vector<data::ReachEvent> assemble_events(const Eigen::MatrixXd& scores,
                                              const features::FeatureStream& stream, double theta,
                                              const FusionPolicy& policy) {
  const long n = static_cast<long>(stream.size());
  if (policy.mode != PolicyMode::RulesOnly && scores.rows() != n)
    throw DataError("assemble_events: scores and stream lengths differ");
  if (!(theta > 0.0 && theta < 1.0)) throw ConfigError("assemble_events: theta outside (0, 1)");
  if (policy.min_duration < 2) throw ConfigError("fusion policy: min_duration must be >= 2");

  std::vector<data::ReachEvent> out;
  auto push_event = [&](long onset_pos, long offset_pos) {
    data::ReachEvent ev;
    ev.hand = stream.hand;
    const auto& tid = stream.target_id[static_cast<std::size_t>(offset_pos)];
    ev.object_id = tid.empty() ? stream.primary_target() : tid;
    ev.onset_frame = stream.frame_index[static_cast<std::size_t>(onset_pos)];
    ev.offset_frame = stream.frame_index[static_cast<std::size_t>(offset_pos)];
    out.push_back(std::move(ev));
  };

  if (policy.mode == PolicyMode::ScoresOnly) {
    std::vector<data::FrameLabel> argmax_labels;
    argmax_labels.reserve(static_cast<std::size_t>(n));
    for (long t = 0; t < n; ++t) {
      int arg = 0;
      scores.row(t).maxCoeff(&arg);
      argmax_labels.push_back(static_cast<data::FrameLabel>(arg));
    }
    for (const auto& [onset, offset] : data::events_from_labels(argmax_labels).events)
      if (offset - onset >= policy.min_duration) push_event(onset, offset);
    return out;
  }

  EventAssembler assembler(theta, policy);
  static const Eigen::VectorXd kNoScores;
  for (long t = 0; t < n; ++t) {
    const Eigen::VectorXd row =
        (policy.mode == PolicyMode::Fused && scores.rows() == n) ? scores.row(t).transpose()
                                                                 : kNoScores;
    if (auto ev = assembler.push(t, stream.vecs[static_cast<std::size_t>(t)], row))
      push_event(ev->first, ev->second);
  }
  return out;
}

double event_f1(const std::vector<std::pair<long, long>>& predicted,
                const std::vector<std::pair<long, long>>& truth, long tolerance) {
  if (predicted.empty() && truth.empty()) return 1.0;
  std::vector<bool> used(predicted.size(), false);
  long matched = 0;
  for (const auto& tv : truth) {
    long best = -1;
    long best_dist = std::numeric_limits<long>::max();
    for (std::size_t j = 0; j < predicted.size(); ++j) {
      if (used[j]) continue;
      if (std::labs(predicted[j].first - tv.first) > tolerance ||
          std::labs(predicted[j].second - tv.second) > tolerance)
        continue;
      const long d = std::labs(predicted[j].first - tv.first);
      if (d < best_dist) {
        best_dist = d;
        best = static_cast<long>(j);
      }
    }
    if (best >= 0) {
      used[static_cast<std::size_t>(best)] = true;
      ++matched;
    }
  }
  const double precision =
      predicted.empty() ? 0.0 : static_cast<double>(matched) / static_cast<double>(predicted.size());
  const double recall =
      truth.empty() ? 0.0 : static_cast<double>(matched) / static_cast<double>(truth.size());
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

CalibrationResult calibrate_threshold(const nn::Model& model,
                                      const std::vector<CalibrationSample>& validation,
                                      const FusionPolicy& policy) {
  if (validation.empty()) throw DataError("calibrate_threshold: empty validation set");
  long n_truth = 0;
  for (const auto& s : validation) n_truth += static_cast<long>(s.truth.size());
  if (n_truth == 0) throw DataError("calibrate_threshold: validation set has no events");

  // scores are theta-independent; compute them once if the policy needs them
  std::vector<Eigen::MatrixXd> scores(validation.size());
  if (policy.mode != PolicyMode::RulesOnly)
    for (std::size_t i = 0; i < validation.size(); ++i)
      scores[i] = nn::predict(model, validation[i].stream);

  CalibrationResult best;
  best.theta = 0.0;
  best.event_f1 = -1.0;
  for (int k = 1; k <= 50; ++k) {
    const double theta = static_cast<double>(k) / 100.0;
    double f1_sum = 0.0;
    std::vector<std::pair<long, long>> all_pred, all_truth;
    for (std::size_t i = 0; i < validation.size(); ++i) {
      const auto events = assemble_events(scores[i], validation[i].stream, theta, policy);
      for (const auto& ev : events) {
        // map back to stream-local positions for comparison with truth
        const auto& fidx = validation[i].stream.frame_index;
        const auto on = std::find(fidx.begin(), fidx.end(), ev.onset_frame) - fidx.begin();
        const auto off = std::find(fidx.begin(), fidx.end(), ev.offset_frame) - fidx.begin();
        all_pred.emplace_back(static_cast<long>(on) + static_cast<long>(i) * 1000000,
                              static_cast<long>(off) + static_cast<long>(i) * 1000000);
      }
      for (const auto& tv : validation[i].truth)
        all_truth.emplace_back(tv.first + static_cast<long>(i) * 1000000,
                               tv.second + static_cast<long>(i) * 1000000);
    }
    f1_sum = event_f1(all_pred, all_truth);
    if (f1_sum > best.event_f1 + 1e-12) {
      best.event_f1 = f1_sum;
      best.theta = theta;
    }
  }
  return best;
}

}  // namespace reachrec::events
