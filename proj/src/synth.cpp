// SPDX-License-Identifier: Apache-2.0
#include "reachrec/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <string>

#include "reachrec/error.hpp"
#include "reachrec/geometry.hpp"
#include "reachrec/rng.hpp"

namespace reachrec::synth {

using geometry::BoundingBox;
using geometry::Point2;

namespace {

constexpr int kPlacementRetries = 200;

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
Point2 operator*(double s, Point2 p) { return {s * p.x, s * p.y}; }

double norm(Point2 p) { return std::hypot(p.x, p.y); }

Point2 unit(Point2 p) {
  const double n = norm(p);
  if (n < 1e-12) return {1.0, 0.0};
  return {p.x / n, p.y / n};
}

BoundingBox box_at(Point2 c, double w, double h) {
  return BoundingBox{c.x - w / 2.0, c.y - h / 2.0, w, h};
}

/// Radius (along direction u from the object center) at which the boxes
/// stop overlapping: beyond it at least one axis is separated.
double overlap_radius(Point2 u, double hw, double hh, double ow, double oh) {
  const double wx = (hw + ow) / 2.0;
  const double wy = (hh + oh) / 2.0;
  double r = std::numeric_limits<double>::infinity();
  if (std::abs(u.x) > 1e-12) r = std::min(r, wx / std::abs(u.x));
  if (std::abs(u.y) > 1e-12) r = std::min(r, wy / std::abs(u.y));
  return r;
}

double iou_at_radius(Point2 obj_center, Point2 u, double r, double hw, double hh, double ow,
                     double oh) {
  const Point2 hc = obj_center + r * u;
  return geometry::iou(box_at(hc, hw, hh), box_at(obj_center, ow, oh));
}

void check_config(const SynthConfig& cfg) {
  auto check_range = [](auto range, const char* what) {
    if (range.second < range.first)
      throw ConfigError(std::string("synth config: empty ") + what + " range");
  };
  if (!(cfg.frame_w > 0.0) || !(cfg.frame_h > 0.0))
    throw ConfigError("synth config: frame size must be positive");
  check_range(cfg.n_pre_frames, "n_pre_frames");
  check_range(cfg.n_post_frames, "n_post_frames");
  check_range(cfg.hand_box_size, "hand_box_size");
  check_range(cfg.object_box_size, "object_box_size");
  check_range(cfg.n_objects, "n_objects");
  if (cfg.n_pre_frames.first < 1 || cfg.n_post_frames.first < 0 || cfg.n_objects.first < 1)
    throw ConfigError("synth config: frame/object counts out of range");
  if (!(cfg.hand_box_size.first > 0.0) || !(cfg.object_box_size.first > 0.0))
    throw ConfigError("synth config: box sizes must be positive");
  if (cfg.abort_probability < 0.0 || cfg.abort_probability > 1.0)
    throw ConfigError("synth config: abort_probability outside [0, 1]");
  if (!(cfg.touch_level > 0.0 && cfg.touch_level < 1.0))
    throw ConfigError("synth config: touch_level outside (0, 1)");
  if (cfg.jitter_std < 0.0) throw ConfigError("synth config: negative jitter_std");
  if (cfg.duration.min_frames < 2)
    throw ConfigError("synth config: duration support must start at >= 2 frames");
  if (cfg.duration.weights.empty())
    throw ConfigError("synth config: empty duration histogram");
  double mass = 0.0;
  for (double w : cfg.duration.weights) {
    if (w < 0.0) throw ConfigError("synth config: negative duration weight");
    mass += w;
  }
  if (mass <= 0.0) throw ConfigError("synth config: duration histogram has no mass");
  // touching must be geometrically possible for the worst-case size pairing
  const double small = std::min(cfg.hand_box_size.first, cfg.object_box_size.first);
  const double big = std::max(cfg.hand_box_size.second, cfg.object_box_size.second);
  const double worst_max_iou = (small * small) / (big * big);
  if (worst_max_iou < cfg.touch_level)
    throw ConfigError("synth config: box sizes cannot overlap at touch level " +
                      std::to_string(cfg.touch_level));
  const double span = std::max(cfg.hand_box_size.second, cfg.object_box_size.second);
  if (span * 3.0 > std::min(cfg.frame_w, cfg.frame_h))
    throw ConfigError("synth config: boxes too large for the frame");
}

struct Layout {
  double hand_w, hand_h, other_w, other_h;
  std::vector<Point2> object_centers;
  std::vector<std::pair<double, double>> object_sizes;
  std::size_t target = 0;
  Point2 hand_start;   // reaching hand idle point
  Point2 other_start;  // non-reaching hand idle point
  Point2 approach_dir;        // unit vector object -> hand start
  double overlap_r = 0.0;     // overlap radius along the approach ray
  double pre_touch_r = 0.0;   // radius of the last pre-contact frame
  double contact_r = 0.0;     // radius at the touch frame
};

double dist_point_segment(Point2 p, Point2 a, Point2 b) {
  const Point2 ab = b - a;
  const double len2 = ab.x * ab.x + ab.y * ab.y;
  if (len2 < 1e-12) return norm(p - a);
  double t = ((p.x - a.x) * ab.x + (p.y - a.y) * ab.y) / len2;
  t = std::clamp(t, 0.0, 1.0);
  return norm(p - (a + t * ab));
}

Layout place_scene(const SynthConfig& cfg, Rng& rng) {
  const double margin_jitter = 6.0 * cfg.jitter_std;
  for (int attempt = 0; attempt < kPlacementRetries; ++attempt) {
    Layout L;
    L.hand_w = rng.uniform(cfg.hand_box_size.first, cfg.hand_box_size.second);
    L.hand_h = rng.uniform(cfg.hand_box_size.first, cfg.hand_box_size.second);
    L.other_w = rng.uniform(cfg.hand_box_size.first, cfg.hand_box_size.second);
    L.other_h = rng.uniform(cfg.hand_box_size.first, cfg.hand_box_size.second);

    const long n_obj = rng.uniform_int(cfg.n_objects.first, cfg.n_objects.second);
    const double obj_span = cfg.object_box_size.second;
    bool ok = true;
    for (long i = 0; i < n_obj && ok; ++i) {
      const double w = rng.uniform(cfg.object_box_size.first, cfg.object_box_size.second);
      const double h = rng.uniform(cfg.object_box_size.first, cfg.object_box_size.second);
      Point2 c{rng.uniform(obj_span, cfg.frame_w - obj_span),
               rng.uniform(obj_span, cfg.frame_h - obj_span)};
      for (const auto& prev : L.object_centers)
        if (norm(c - prev) < 1.8 * obj_span) ok = false;
      L.object_centers.push_back(c);
      L.object_sizes.emplace_back(w, h);
    }
    if (!ok) continue;

    const double hand_span = std::max(L.hand_w, L.hand_h);
    const double clear = obj_span + hand_span + 20.0 + margin_jitter;
    L.hand_start = Point2{rng.uniform(hand_span, cfg.frame_w - hand_span),
                          rng.uniform(hand_span, cfg.frame_h - hand_span)};
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < L.object_centers.size(); ++i) {
      const double d = norm(L.hand_start - L.object_centers[i]);
      if (d < best) {
        best = d;
        L.target = i;
      }
    }
    // the reach goes to the nearest object, and it must stay the nearest
    // along the whole approach; other objects keep a wide berth
    if (best < clear + 40.0) continue;
    if (best > 0.75 * std::hypot(cfg.frame_w, cfg.frame_h)) continue;
    const Point2 tc = L.object_centers[L.target];
    bool clear_path = true;
    for (std::size_t i = 0; i < L.object_centers.size(); ++i) {
      if (i == L.target) continue;
      if (norm(L.hand_start - L.object_centers[i]) < best + 50.0) clear_path = false;
      if (dist_point_segment(L.object_centers[i], L.hand_start, tc) < clear) clear_path = false;
    }
    if (!clear_path) continue;

    L.approach_dir = unit(L.hand_start - tc);
    const auto [ow, oh] = L.object_sizes[L.target];
    L.overlap_r = overlap_radius(L.approach_dir, L.hand_w, L.hand_h, ow, oh);
    L.pre_touch_r = L.overlap_r + 2.0 + 3.0 * cfg.jitter_std;
    if (best < L.pre_touch_r + 40.0) continue;  // need travel distance

    // pick the contact radius by bisecting the iou profile along the ray
    const double max_iou = iou_at_radius(tc, L.approach_dir, 0.0, L.hand_w, L.hand_h, ow, oh);
    if (max_iou < cfg.touch_level) continue;
    const double want = std::min(cfg.contact_iou, 0.9 * max_iou);
    double lo = 0.0, hi = L.overlap_r;
    for (int it = 0; it < 60; ++it) {
      const double mid = (lo + hi) / 2.0;
      if (iou_at_radius(tc, L.approach_dir, mid, L.hand_w, L.hand_h, ow, oh) >= want)
        lo = mid;
      else
        hi = mid;
    }
    L.contact_r = lo;

    // non-reaching hand idles away from every object
    bool other_ok = false;
    for (int tries = 0; tries < 50 && !other_ok; ++tries) {
      L.other_start = Point2{rng.uniform(hand_span, cfg.frame_w - hand_span),
                             rng.uniform(hand_span, cfg.frame_h - hand_span)};
      other_ok = true;
      for (const auto& c : L.object_centers)
        if (norm(L.other_start - c) < clear) other_ok = false;
    }
    if (!other_ok) continue;
    return L;
  }
  throw ConfigError("synth config: could not place a reachable scene inside the frame");
}

}  // namespace

DurationHistogram default_duration_histogram() {
  DurationHistogram h;
  h.min_frames = 2;
  const double mu = std::log(9.5);
  const double sigma = 0.45;
  for (int k = 2; k <= 40; ++k) {
    const double x = static_cast<double>(k);
    const double z = (std::log(x) - mu) / sigma;
    h.weights.push_back(std::exp(-0.5 * z * z) / x);
  }
  return h;
}

const std::vector<data::FrameLabel>& labels_for(const SynthSample& s, data::Hand h) {
  return s.truth_labels[h == data::Hand::Left ? 0 : 1];
}

SynthSample generate_sequence(const SynthConfig& cfg, std::uint64_t seed,
                              const std::string& video_id) {
  check_config(cfg);
  Rng rng(seed);

  const Layout L = place_scene(cfg, rng);
  const Point2 tc = L.object_centers[L.target];
  const Point2 u = L.approach_dir;
  const Point2 tangent{-u.y, u.x};
  const double d0 = norm(L.hand_start - tc);

  const data::Hand hand = rng.bernoulli(0.5) ? data::Hand::Left : data::Hand::Right;
  const int duration = cfg.duration.min_frames + static_cast<int>(rng.discrete(cfg.duration.weights));
  const long n_pre = rng.uniform_int(cfg.n_pre_frames.first, cfg.n_pre_frames.second);
  const long n_post = rng.uniform_int(cfg.n_post_frames.first, cfg.n_post_frames.second);
  const bool with_abort = rng.bernoulli(cfg.abort_probability) && d0 > 2.2 * L.pre_touch_r + 60.0;

  // radial trajectory of the reaching hand: per frame (radius along u,
  // jitter mode). Jitter is tangential during motion so designed distance
  // trends hold exactly; idle frames jitter in both axes.
  enum class JitterMode { Full, Tangential, None };
  struct Step {
    double radius;
    JitterMode jitter;
  };
  std::vector<Step> path;
  auto idle = [&](long n) {
    for (long i = 0; i < n; ++i) path.push_back({d0, JitterMode::Full});
  };

  idle(n_pre - 1);
  path.push_back({d0, JitterMode::Tangential});  // anchor frame before the onset

  if (with_abort) {
    const double r_turn = std::max(2.0 * L.pre_touch_r, 0.45 * d0);
    const long da = rng.uniform_int(3, 6);
    const long dr = rng.uniform_int(5, 8);
    for (long k = 1; k <= da; ++k)
      path.push_back({d0 - smoothstep(static_cast<double>(k) / static_cast<double>(da)) * (d0 - r_turn),
                      JitterMode::Tangential});
    for (long k = 1; k <= dr; ++k)
      path.push_back({r_turn + smoothstep(static_cast<double>(k) / static_cast<double>(dr)) * (d0 - r_turn),
                      JitterMode::Tangential});
    const long gap = rng.uniform_int(3, 6);
    idle(gap - 1);
    path.push_back({d0, JitterMode::Tangential});
  }

  // frames onset..offset-1 ease toward the pre-touch point (still outside
  // overlap); the boxes first overlap exactly at the offset frame, so
  // offset - onset == duration
  const long onset = static_cast<long>(path.size());
  for (long k = 1; k <= duration; ++k)
    path.push_back({d0 - smoothstep(static_cast<double>(k) / static_cast<double>(duration)) *
                             (d0 - L.pre_touch_r),
                    JitterMode::Tangential});
  path.push_back({L.contact_r, JitterMode::None});  // the touch frame
  const long offset = static_cast<long>(path.size()) - 1;

  path.push_back({L.pre_touch_r, JitterMode::Tangential});  // leave the overlap at once
  const long dw = rng.uniform_int(4, 8);
  for (long k = 1; k <= dw; ++k)
    path.push_back({L.pre_touch_r + smoothstep(static_cast<double>(k) / static_cast<double>(dw)) *
                                        (d0 - L.pre_touch_r),
                    JitterMode::Tangential});
  idle(n_post);

  const long n_frames = static_cast<long>(path.size());

  // realize hand centers
  std::vector<Point2> hand_centers(static_cast<std::size_t>(n_frames));
  for (long f = 0; f < n_frames; ++f) {
    const auto& st = path[static_cast<std::size_t>(f)];
    Point2 base = tc + st.radius * u;
    switch (st.jitter) {
      case JitterMode::Full:
        base = base + Point2{rng.normal(0.0, cfg.jitter_std), rng.normal(0.0, cfg.jitter_std)};
        break;
      case JitterMode::Tangential:
        base = base + rng.normal(0.0, cfg.jitter_std) * tangent;
        break;
      case JitterMode::None:
        break;
    }
    hand_centers[static_cast<std::size_t>(f)] = base;
  }
  // the onset frame must move the hand strictly toward the object
  if (onset >= 1) {
    int guard = 0;
    while (norm(hand_centers[static_cast<std::size_t>(onset)] - tc) >=
               norm(hand_centers[static_cast<std::size_t>(onset - 1)] - tc) &&
           guard++ < 64) {
      const Point2 base = tc + path[static_cast<std::size_t>(onset)].radius * u;
      hand_centers[static_cast<std::size_t>(onset)] =
          base + 0.5 * (hand_centers[static_cast<std::size_t>(onset)] - base);
    }
  }

  // non-reaching hand: idle jitter the whole clip
  std::vector<Point2> other_centers(static_cast<std::size_t>(n_frames));
  for (long f = 0; f < n_frames; ++f)
    other_centers[static_cast<std::size_t>(f)] =
        L.other_start + Point2{rng.normal(0.0, cfg.jitter_std), rng.normal(0.0, cfg.jitter_std)};

  // assemble detections
  SynthSample sample;
  sample.reach_hand = hand;
  sample.target_object = "obj" + std::to_string(L.target);
  sample.sequence.video_id = video_id;
  const BoundingBox infant =
      box_at({cfg.frame_w / 2.0, cfg.frame_h / 2.0}, 0.62 * cfg.frame_w, 0.8 * cfg.frame_h);
  for (long f = 0; f < n_frames; ++f) {
    data::FrameDetections fd;
    fd.frame_index = f;
    fd.frame_w = cfg.frame_w;
    fd.frame_h = cfg.frame_h;
    fd.infant = infant;
    const BoundingBox reach_box =
        box_at(hand_centers[static_cast<std::size_t>(f)], L.hand_w, L.hand_h);
    const BoundingBox other_box =
        box_at(other_centers[static_cast<std::size_t>(f)], L.other_w, L.other_h);
    fd.left_hand = (hand == data::Hand::Left) ? reach_box : other_box;
    fd.right_hand = (hand == data::Hand::Right) ? reach_box : other_box;
    for (std::size_t i = 0; i < L.object_centers.size(); ++i)
      fd.objects.push_back({"obj" + std::to_string(i),
                            box_at(L.object_centers[i], L.object_sizes[i].first,
                                   L.object_sizes[i].second)});
    sample.sequence.frames.push_back(std::move(fd));
  }

  data::ReachEvent ev;
  ev.hand = hand;
  ev.object_id = sample.target_object;
  ev.onset_frame = onset;
  ev.offset_frame = offset;
  sample.truth_events.push_back(ev);
  sample.truth_labels[0] = data::labels_from_events(sample.truth_events, n_frames, data::Hand::Left);
  sample.truth_labels[1] = data::labels_from_events(sample.truth_events, n_frames, data::Hand::Right);

  // self-checks: the generated geometry must realize the announced truth
  const auto& target_box = sample.sequence.frames[static_cast<std::size_t>(offset)].objects[L.target].box;
  const BoundingBox hand_at_offset =
      box_at(hand_centers[static_cast<std::size_t>(offset)], L.hand_w, L.hand_h);
  if (geometry::iou(hand_at_offset, target_box) < cfg.touch_level)
    throw InternalError("synth: touch frame below touch level");
  for (long f = 0; f < n_frames; ++f) {
    if (f == offset) continue;
    const BoundingBox hb = box_at(hand_centers[static_cast<std::size_t>(f)], L.hand_w, L.hand_h);
    for (std::size_t i = 0; i < L.object_centers.size(); ++i) {
      const BoundingBox ob =
          box_at(L.object_centers[i], L.object_sizes[i].first, L.object_sizes[i].second);
      if (geometry::iou(hb, ob) >= cfg.touch_level)
        throw InternalError("synth: non-touch frame " + std::to_string(f) + " exceeds touch level");
    }
  }
  return sample;
}

std::vector<SynthSample> generate_dataset(const SynthConfig& cfg, int n,
                                          std::uint64_t master_seed) {
  if (n < 1) throw ConfigError("generate_dataset: n must be >= 1");
  std::vector<SynthSample> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "v%04d", i);
    out.push_back(generate_sequence(cfg, derive_seed(master_seed, static_cast<std::uint64_t>(i)), buf));
  }
  return out;
}

}  // namespace reachrec::synth
