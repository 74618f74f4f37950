// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>

namespace reachrec::geometry {

/// Image-coordinate point (y grows downward), continuous pixel units.
struct Point2 {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Point2&) const = default;
};

/// Axis-aligned box stored as (left, top, width, height) in continuous
/// pixel units. Corner-format detector outputs are converted at ingestion.
struct BoundingBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  bool operator==(const BoundingBox&) const = default;

  double area() const { return w * h; }
  double right() const { return x + w; }
  double bottom() const { return y + h; }

  bool valid() const {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(w) &&
           std::isfinite(h) && w >= 0.0 && h >= 0.0;
  }
};

inline Point2 center(const BoundingBox& b) {
  return Point2{b.x + b.w / 2.0, b.y + b.h / 2.0};
}

inline double distance(const Point2& p, const Point2& q) {
  return std::hypot(p.x - q.x, p.y - q.y);
}

/// Intersection over union. Zero-area pairs yield 0 (no overlap evidence,
/// avoids 0/0); identical positive-area boxes yield 1.
inline double iou(const BoundingBox& a, const BoundingBox& b) {
  const double ix = std::max(0.0, std::min(a.right(), b.right()) - std::max(a.x, b.x));
  const double iy = std::max(0.0, std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

}  // namespace reachrec::geometry
