// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <map>

#include "reachrec/error.hpp"
#include "reachrec/features.hpp"
#include "reachrec/synth.hpp"

using namespace reachrec;
using namespace reachrec::synth;
using data::FrameLabel;
using data::Hand;

namespace {

// chi-square upper quantile via the Wilson-Hilferty approximation
double chi2_quantile(double k, double z_alpha) {
  const double a = 2.0 / (9.0 * k);
  const double t = 1.0 - a + z_alpha * std::sqrt(a);
  return k * t * t * t;
}

double hand_object_distance(const SynthSample& s, long frame, const std::string& object_id) {
  const auto& fd = s.sequence.frames[static_cast<std::size_t>(frame)];
  const auto& hand = fd.hand(s.reach_hand);
  REQUIRE(hand.has_value());
  const auto* obj = fd.object(object_id);
  REQUIRE(obj != nullptr);
  return geometry::distance(geometry::center(*hand), geometry::center(*obj));
}

double hand_object_iou(const SynthSample& s, long frame, const std::string& object_id) {
  const auto& fd = s.sequence.frames[static_cast<std::size_t>(frame)];
  return geometry::iou(*fd.hand(s.reach_hand), *fd.object(object_id));
}

}  // namespace

TEST_CASE("generate_sequence is deterministic") {
  SynthConfig cfg;
  const auto a = generate_sequence(cfg, 42);
  const auto b = generate_sequence(cfg, 42);
  CHECK(data::serialize_detections({a.sequence}) == data::serialize_detections({b.sequence}));
  CHECK(a.truth_events[0].onset_frame == b.truth_events[0].onset_frame);
  CHECK(a.truth_events[0].offset_frame == b.truth_events[0].offset_frame);
  const auto c = generate_sequence(cfg, 43);
  CHECK(data::serialize_detections({a.sequence}) != data::serialize_detections({c.sequence}));
}

TEST_CASE("fixed duration 10 without aborts") {
  SynthConfig cfg;
  cfg.abort_probability = 0.0;
  cfg.duration.min_frames = 10;
  cfg.duration.weights = {1.0};
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto s = generate_sequence(cfg, seed);
    REQUIRE(s.truth_events.size() == 1);
    const auto& ev = s.truth_events[0];
    CHECK(ev.offset_frame - ev.onset_frame == 10);

    // distance strictly decreasing over at least 80% of approach frames
    long strictly = 0;
    for (long f = ev.onset_frame; f < ev.offset_frame; ++f) {
      const double now = hand_object_distance(s, f, ev.object_id);
      const double before = hand_object_distance(s, f - 1, ev.object_id);
      if (now < before) ++strictly;
    }
    CHECK(static_cast<double>(strictly) >= 0.8 * 10.0);
    // net motion toward the object begins exactly at the onset
    CHECK(hand_object_distance(s, ev.onset_frame, ev.object_id) <
          hand_object_distance(s, ev.onset_frame - 1, ev.object_id));
  }
}

TEST_CASE("only the target object is touched") {
  SynthConfig cfg;
  cfg.n_objects = {3, 3};
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    const auto s = generate_sequence(cfg, seed);
    const auto& ev = s.truth_events[0];
    CHECK(hand_object_iou(s, ev.offset_frame, ev.object_id) >= cfg.touch_level);
    for (long f = 0; f < static_cast<long>(s.sequence.size()); ++f) {
      for (const auto& obj : s.sequence.frames[static_cast<std::size_t>(f)].objects) {
        if (f == ev.offset_frame && obj.id == ev.object_id) continue;
        CHECK(hand_object_iou(s, f, obj.id) < cfg.touch_level);
      }
    }
  }
}

TEST_CASE("truth labels equal labels_from_events of the truth events") {
  SynthConfig cfg;
  for (std::uint64_t seed = 7; seed < 27; ++seed) {
    const auto s = generate_sequence(cfg, seed);
    const long n = static_cast<long>(s.sequence.size());
    CHECK(s.truth_labels[0] == data::labels_from_events(s.truth_events, n, Hand::Left));
    CHECK(s.truth_labels[1] == data::labels_from_events(s.truth_events, n, Hand::Right));
    CHECK(labels_for(s, s.reach_hand)[static_cast<std::size_t>(s.truth_events[0].onset_frame)] ==
          FrameLabel::RN);
  }
}

TEST_CASE("aborted approaches produce four consecutive distance increases") {
  SynthConfig cfg;
  cfg.abort_probability = 1.0;
  cfg.n_objects = {1, 1};
  int with_pattern = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto s = generate_sequence(cfg, seed);
    const auto& ev = s.truth_events[0];
    // scan the pre-onset segment for >= 4 consecutive strict increases
    int run = 0, best = 0;
    bool saw_decrease_before = false;
    double prev = hand_object_distance(s, 0, ev.object_id);
    for (long f = 1; f < ev.onset_frame; ++f) {
      const double now = hand_object_distance(s, f, ev.object_id);
      if (now > prev) {
        run = saw_decrease_before ? run + 1 : 0;
        best = std::max(best, run);
      } else {
        if (now < prev - 1.0) saw_decrease_before = true;
        run = 0;
      }
      prev = now;
    }
    ++total;
    if (best >= 4) ++with_pattern;
    // aborts never touch: every pre-onset frame stays below touch level
    for (long f = 0; f < ev.onset_frame; ++f)
      CHECK(hand_object_iou(s, f, ev.object_id) < cfg.touch_level);
  }
  // the abort is skipped only when the scene is too cramped
  CHECK(with_pattern >= total / 2);
}

TEST_CASE("generate_dataset") {
  SynthConfig cfg;
  SUBCASE("n=1") { CHECK(generate_dataset(cfg, 1, 5).size() == 1); }
  SUBCASE("n=63 reproducible with distinct video ids") {
    const auto a = generate_dataset(cfg, 63, 9);
    const auto b = generate_dataset(cfg, 63, 9);
    REQUIRE(a.size() == 63);
    std::map<std::string, int> ids;
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(data::serialize_detections({a[i].sequence}) ==
            data::serialize_detections({b[i].sequence}));
      ids[a[i].sequence.video_id]++;
    }
    CHECK(ids.size() == 63);
    CHECK(a[0].sequence.video_id == "v0000");
  }
  SUBCASE("n=0 rejected") { CHECK_THROWS_AS(generate_dataset(cfg, 0, 1), ConfigError); }
}

TEST_CASE("durations follow the configured distribution") {
  SynthConfig cfg;
  const auto samples = generate_dataset(cfg, 500, 2026);

  std::map<int, int> observed;
  long in_band = 0;
  for (const auto& s : samples) {
    const int dur = static_cast<int>(s.truth_events[0].offset_frame - s.truth_events[0].onset_frame);
    observed[dur]++;
    if (dur >= 5 && dur <= 15) ++in_band;
  }
  // majority of reaches last between 5 and 15 frames
  CHECK(static_cast<double>(in_band) >= 0.5 * 500.0);

  // chi-square sanity check against the configured histogram
  double mass = 0.0;
  for (double w : cfg.duration.weights) mass += w;
  double chi2 = 0.0;
  int bins = 0;
  double pooled_expected = 0.0;
  long pooled_observed = 0;
  for (std::size_t k = 0; k < cfg.duration.weights.size(); ++k) {
    const int dur = cfg.duration.min_frames + static_cast<int>(k);
    const double expected = 500.0 * cfg.duration.weights[k] / mass;
    const long got = observed.count(dur) ? observed.at(dur) : 0;
    if (expected < 5.0) {
      pooled_expected += expected;
      pooled_observed += got;
      continue;
    }
    chi2 += (got - expected) * (got - expected) / expected;
    ++bins;
  }
  if (pooled_expected > 0.0) {
    chi2 += (pooled_observed - pooled_expected) * (pooled_observed - pooled_expected) /
            pooled_expected;
    ++bins;
  }
  // alpha = 0.001 (z = 3.09)
  CHECK(chi2 < chi2_quantile(static_cast<double>(bins - 1), 3.09));
}

TEST_CASE("feature streams of generated samples are fully valid") {
  SynthConfig cfg;
  const auto s = generate_sequence(cfg, 11);
  const auto fs = features::feature_stream(s.sequence, s.reach_hand);
  CHECK(fs.valid_count() == s.sequence.size());
  // the touch frame carries the iou spike
  const long offset = s.truth_events[0].offset_frame;
  CHECK(fs.vecs[static_cast<std::size_t>(offset)].iou >= cfg.touch_level);
  CHECK(fs.target_id[static_cast<std::size_t>(offset)] == s.truth_events[0].object_id);
}

TEST_CASE("impossible configs are rejected") {
  SUBCASE("boxes cannot overlap at touch level") {
    SynthConfig cfg;
    cfg.hand_box_size = {4.0, 4.0};
    cfg.object_box_size = {100.0, 100.0};
    CHECK_THROWS_AS(generate_sequence(cfg, 1), ConfigError);
  }
  SUBCASE("boxes larger than the frame") {
    SynthConfig cfg;
    cfg.object_box_size = {300.0, 400.0};
    CHECK_THROWS_AS(generate_sequence(cfg, 1), ConfigError);
  }
  SUBCASE("empty ranges and bad probabilities") {
    SynthConfig cfg;
    cfg.n_pre_frames = {6, 3};
    CHECK_THROWS_AS(generate_sequence(cfg, 1), ConfigError);
    SynthConfig cfg2;
    cfg2.abort_probability = 1.5;
    CHECK_THROWS_AS(generate_sequence(cfg2, 1), ConfigError);
    SynthConfig cfg3;
    cfg3.duration.min_frames = 1;
    CHECK_THROWS_AS(generate_sequence(cfg3, 1), ConfigError);
  }
}
