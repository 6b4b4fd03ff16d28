#pragma once

#include <vector>

#include <torch/torch.h>

#include "svgen/geometry.hpp"

namespace svgen {

struct Polyline {
  std::vector<Point> points;
  /// Closed polylines repeat their first point at the end.
  bool closed = false;
};

double arc_length(std::span<const Point> points);

/// Marching squares at level 0.5 on the binarized image (foreground = values
/// below 0.5). `image` is [H, W] or [C, H, W] (channels averaged). Returns
/// closed outlines in normalized coordinates (pixel centers at (i+0.5)/S with
/// S = max(H, W)), outer contours before the holes they contain.
std::vector<Polyline> extract_contours(const torch::Tensor& image);

/// Splits a polyline into contiguous pieces of arc length <= max_length.
/// Splits happen at existing vertices; an edge longer than the budget gets
/// interpolated vertices inserted. Consecutive pieces share their joint vertex.
std::vector<Polyline> split_strokes(const Polyline& line, double max_length);

}  // namespace svgen
