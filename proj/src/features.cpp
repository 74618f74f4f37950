// SPDX-License-Identifier: Apache-2.0
#include "reachrec/features.hpp"

#include <cmath>

#include "reachrec/error.hpp"

namespace reachrec::features {

using geometry::BoundingBox;
using geometry::center;
using geometry::distance;

std::size_t FeatureStream::valid_count() const {
  std::size_t n = 0;
  for (bool v : valid) n += v ? 1 : 0;
  return n;
}

std::string FeatureStream::primary_target() const {
  for (std::size_t i = 0; i < size(); ++i)
    if (valid[i] && !target_id[i].empty()) return target_id[i];
  return {};
}

std::optional<std::string> select_target(const data::FrameDetections& frame, data::Hand hand) {
  const auto& hb = frame.hand(hand);
  if (!hb || frame.objects.empty()) return std::nullopt;
  const auto hc = center(*hb);
  const data::ObjectBox* best = nullptr;
  double best_d = 0.0;
  for (const auto& o : frame.objects) {
    const double d = distance(hc, center(o.box));
    if (best == nullptr || d < best_d || (d == best_d && o.id < best->id)) {
      best = &o;
      best_d = d;
    }
  }
  return best->id;
}

FeatureStream feature_stream(const data::VideoSequence& seq, data::Hand hand, Pairing pairing) {
  if (seq.frames.empty()) throw DataError("feature_stream: empty sequence");

  FeatureStream fs;
  fs.hand = hand;
  fs.video_id = seq.video_id;
  fs.frame_index.reserve(seq.size());
  fs.vecs.reserve(seq.size());
  fs.valid.reserve(seq.size());
  fs.target_id.reserve(seq.size());

  std::optional<std::string> locked;  // sticky target
  int non_decrease_run = 0;
  std::optional<double> last_d;  // last valid d_norm, for deltas across gaps

  for (const auto& fd : seq.frames) {
    fs.frame_index.push_back(fd.frame_index);
    const double diag = std::hypot(fd.frame_w, fd.frame_h);

    std::optional<std::string> target;
    if (pairing == Pairing::Sticky && locked && fd.object(*locked) != nullptr) {
      target = locked;
    } else {
      target = select_target(fd, hand);
      if (pairing == Pairing::Sticky) locked.reset();
    }

    const auto& hb = fd.hand(hand);
    const BoundingBox* ob = target ? fd.object(*target) : nullptr;
    if (!hb || ob == nullptr || diag <= 0.0) {
      // gap: freeze the previous vector, zero delta, mark invalid
      FeatureVector fv = fs.vecs.empty() ? FeatureVector{} : fs.vecs.back();
      fv.delta_d = 0.0;
      fs.vecs.push_back(fv);
      fs.valid.push_back(false);
      fs.target_id.emplace_back();
      continue;
    }

    FeatureVector fv;
    fv.d_norm = distance(center(*hb), center(*ob)) / diag;
    fv.delta_d = last_d ? fv.d_norm - *last_d : 0.0;
    fv.iou = geometry::iou(*hb, *ob);
    fs.vecs.push_back(fv);
    fs.valid.push_back(true);
    fs.target_id.push_back(*target);

    if (pairing == Pairing::Sticky) {
      if (last_d && fv.delta_d < 0.0) {
        if (!locked) locked = target;
        non_decrease_run = 0;
      } else if (last_d) {
        if (++non_decrease_run >= 4) {
          locked.reset();
          non_decrease_run = 0;
        }
      }
    }
    last_d = fv.d_norm;
  }
  return fs;
}

}  // namespace reachrec::features
