#include "svgen/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace svgen {

namespace {

Point lerp(Point a, Point b, double t) {
  // (1-t)a + tb is exact at both ends, unlike a + t(b-a).
  return {(1.0 - t) * a.x + t * b.x, (1.0 - t) * a.y + t * b.y};
}

}  // namespace

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

std::vector<Point> StrokePath::on_curve_points() const {
  std::vector<Point> pts;
  pts.reserve(segments.size() + 1);
  pts.push_back(start);
  for (const auto& s : segments) pts.push_back(s.end);
  return pts;
}

std::vector<Point> StrokePath::control_points() const {
  std::vector<Point> pts;
  pts.reserve(3 * segments.size() + 1);
  pts.push_back(start);
  for (const auto& s : segments) {
    pts.push_back(s.c1);
    pts.push_back(s.c2);
    pts.push_back(s.end);
  }
  return pts;
}

Point bezier_point(const CubicSegment& seg, Point start, double t) {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw std::invalid_argument("bezier_point: t must lie in [0,1], got " + std::to_string(t));
  }
  // de Casteljau
  const Point a = lerp(start, seg.c1, t);
  const Point b = lerp(seg.c1, seg.c2, t);
  const Point c = lerp(seg.c2, seg.end, t);
  const Point d = lerp(a, b, t);
  const Point e = lerp(b, c, t);
  return lerp(d, e, t);
}

Anchor discretize_anchor(Point normalized, int grid) {
  const double scale = grid - 1;
  auto cell = [&](double v) {
    const int c = static_cast<int>(std::floor(v * scale + 0.5));
    return std::clamp(c, 0, grid - 1);
  };
  return {cell(normalized.x), cell(normalized.y)};
}

Point anchor_position(Anchor a, int grid) {
  const double scale = grid - 1;
  return {a.x / scale, a.y / scale};
}

Point to_canvas(Point local, Anchor a, int grid) {
  const Point origin = anchor_position(a, grid);
  return {local.x - 0.5 + origin.x, local.y - 0.5 + origin.y};
}

Point to_local(Point canvas, Anchor a, int grid) {
  const Point origin = anchor_position(a, grid);
  return {canvas.x - origin.x + 0.5, canvas.y - origin.y + 0.5};
}

StrokePath to_canvas(const StrokePath& local, Anchor a, int grid) {
  return map_points(local, [&](Point p) { return to_canvas(p, a, grid); });
}

StrokePath to_local(const StrokePath& canvas, Anchor a, int grid) {
  return map_points(canvas, [&](Point p) { return to_local(p, a, grid); });
}

CubicSegment line_segment(Point a, Point b) {
  return {lerp(a, b, 1.0 / 3.0), lerp(a, b, 2.0 / 3.0), b};
}

StrokePath polyline_path(std::span<const Point> points, bool closed) {
  if (points.size() < 2) throw std::invalid_argument("polyline_path: need at least two points");
  StrokePath path;
  path.start = points.front();
  path.closed = closed;
  for (std::size_t i = 1; i < points.size(); ++i) {
    path.segments.push_back(line_segment(points[i - 1], points[i]));
  }
  if (closed && points.back() != points.front()) {
    path.segments.push_back(line_segment(points.back(), points.front()));
  }
  return path;
}

std::vector<Point> flatten(const StrokePath& path, int samples_per_segment) {
  std::vector<Point> out;
  out.reserve(path.segments.size() * samples_per_segment + 1);
  out.push_back(path.start);
  Point prev = path.start;
  for (const auto& seg : path.segments) {
    for (int k = 1; k <= samples_per_segment; ++k) {
      out.push_back(bezier_point(seg, prev, static_cast<double>(k) / samples_per_segment));
    }
    prev = seg.end;
  }
  return out;
}

BoundingBox bounding_box(std::span<const Point> points) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  BoundingBox box{{inf, inf}, {-inf, -inf}};
  for (const auto& p : points) {
    box.min.x = std::min(box.min.x, p.x);
    box.min.y = std::min(box.min.y, p.y);
    box.max.x = std::max(box.max.x, p.x);
    box.max.y = std::max(box.max.y, p.y);
  }
  return box;
}

}  // namespace svgen
