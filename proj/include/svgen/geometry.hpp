#pragma once

#include <optional>
#include <span>
#include <vector>

namespace svgen {

/// Normalized canvas coordinate. Patch-local and canvas coordinates both span
/// [0,1] across the full canvas edge; the two frames differ only by the
/// anchor translation.
struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double s, Point p) { return {s * p.x, s * p.y}; }

double distance(Point a, Point b);

struct CubicSegment {
  Point c1;
  Point c2;
  Point end;

  friend bool operator==(const CubicSegment&, const CubicSegment&) = default;
};

struct Rgb {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// A connected path of cubic Bezier segments. Open paths are strokes, closed
/// paths are filled shapes (the last segment end joins back to `start`).
struct StrokePath {
  Point start;
  std::vector<CubicSegment> segments;
  bool closed = false;
  std::optional<double> width;
  std::optional<Rgb> stroke_color;
  std::optional<Rgb> fill_color;

  friend bool operator==(const StrokePath&, const StrokePath&) = default;

  Point end_point() const { return segments.empty() ? start : segments.back().end; }

  /// Start point followed by the end of every segment (the on-curve points).
  std::vector<Point> on_curve_points() const;

  /// All control points in drawing order: start, then c1, c2, end per segment.
  std::vector<Point> control_points() const;
};

/// Anchor cell on the position grid, in [0, grid-1] on each axis.
struct Anchor {
  int x = 0;
  int y = 0;

  friend bool operator==(const Anchor&, const Anchor&) = default;
};

inline constexpr int kDefaultGrid = 256;

struct PlacedStroke {
  StrokePath path;
  Anchor anchor;

  friend bool operator==(const PlacedStroke&, const PlacedStroke&) = default;
};

struct VectorDocument {
  std::vector<PlacedStroke> strokes;
  int canvas_size = 256;
  int grid = kDefaultGrid;

  friend bool operator==(const VectorDocument&, const VectorDocument&) = default;
};

/// Cubic Bezier position at parameter t in [0,1]; throws std::invalid_argument
/// otherwise. t = 0 and t = 1 return the endpoints exactly.
Point bezier_point(const CubicSegment& seg, Point start, double t);

/// Round-half-up discretization of a normalized coordinate onto the anchor
/// grid, clamped into range.
Anchor discretize_anchor(Point normalized, int grid = kDefaultGrid);

/// Normalized canvas position of an anchor cell.
Point anchor_position(Anchor a, int grid = kDefaultGrid);

/// Maps a patch-local point to canvas coordinates: the patch center (0.5,0.5)
/// lands on the anchor position.
Point to_canvas(Point local, Anchor a, int grid = kDefaultGrid);
Point to_local(Point canvas, Anchor a, int grid = kDefaultGrid);

StrokePath to_canvas(const StrokePath& local, Anchor a, int grid = kDefaultGrid);
StrokePath to_local(const StrokePath& canvas, Anchor a, int grid = kDefaultGrid);

/// Applies `fn` to every control point of the path.
template <typename Fn>
StrokePath map_points(StrokePath path, Fn&& fn) {
  path.start = fn(path.start);
  for (auto& s : path.segments) {
    s.c1 = fn(s.c1);
    s.c2 = fn(s.c2);
    s.end = fn(s.end);
  }
  return path;
}

/// Exact degree elevation of the line a->b: handles at 1/3 and 2/3.
CubicSegment line_segment(Point a, Point b);

/// Polyline as a chain of degree-elevated line segments. Needs >= 2 points.
StrokePath polyline_path(std::span<const Point> points, bool closed = false);

/// Flattens the path to `samples` points per segment (plus the start point).
std::vector<Point> flatten(const StrokePath& path, int samples_per_segment);

struct BoundingBox {
  Point min;
  Point max;

  Point center() const { return {(min.x + max.x) / 2, (min.y + max.y) / 2}; }
  double width() const { return max.x - min.x; }
  double height() const { return max.y - min.y; }
};

BoundingBox bounding_box(std::span<const Point> points);

}  // namespace svgen
