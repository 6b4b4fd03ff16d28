#pragma once

#include <limits>

#include <torch/torch.h>

#include "svgen/geometry.hpp"

namespace svgen {

/// Soft rasterization settings. `antialias_band` is in pixels.
struct RenderConfig {
  int resolution = 128;
  double antialias_band = 1.0;
  int samples_per_segment = 24;

  void validate() const;
};

/// A raster patch is a float tensor [C, H, W] with values in [0, 1], white
/// background (1) and dark foreground.
using RasterPatch = torch::Tensor;

/// Smoothed squared distance from every pixel center of a resolution x
/// resolution grid to the polyline with vertices `points` [B, N, 2]
/// (normalized coordinates). Strokes: -tau log of a Gaussian integrated along
/// the polyline, which equals the squared distance for a straight line and
/// may dip slightly below zero where the polyline folds. With `fill`, a
/// power-mean minimum over edges, zero on the outline and signed by even-odd
/// containment: positive inside.
/// Polylines for `fill` must be explicitly closed (last vertex == first).
/// Stroke pixels farther than `far` from every edge get the plain squared
/// distance. Returns [B, H, W]; differentiable w.r.t. `points`.
torch::Tensor polyline_field(const torch::Tensor& points, int resolution, bool fill,
                             double far = std::numeric_limits<double>::infinity());

/// Constant matrix [segments*samples+1, 3*segments+1] mapping Bezier control
/// points to points sampled uniformly in t along every segment.
torch::Tensor bezier_sampling_matrix(int segments, int samples_per_segment, torch::ScalarType dtype = torch::kFloat);

/// Batched stroke render. `control` [B, 3*nu+1, 2], `width` [B] (normalized),
/// `color` [B, 3]. Returns [B, 3, H, W].
torch::Tensor render_strokes(const torch::Tensor& control, const torch::Tensor& width, const torch::Tensor& color,
                             const RenderConfig& cfg);

/// Batched filled-shape render. `control` [B, 3*nu, 2]: start, then c1, c2 per
/// segment with every segment except the last followed by its end point; the
/// final segment ends at the start point. `color` [B, 3].
torch::Tensor render_shapes(const torch::Tensor& control, const torch::Tensor& color, const RenderConfig& cfg);

/// Batched render of raw polylines [B, N, 2] as strokes (used by the data
/// pipeline, where strokes come from contours rather than Bezier fits).
torch::Tensor render_polylines(const torch::Tensor& points, const torch::Tensor& width, const torch::Tensor& color,
                               const RenderConfig& cfg);

/// Open path with width set -> [3, H, W]. Throws on closed paths or width <= 0.
RasterPatch render_stroke(const StrokePath& path, const RenderConfig& cfg);

/// Closed path with fill color set -> [3, H, W]. Throws on open paths.
RasterPatch render_filled(const StrokePath& path, const RenderConfig& cfg);

/// Composites every stroke at its anchor onto a white canvas by pixelwise
/// minimum. Strokes without width use `default_width`; missing colors are black.
RasterPatch render_document(const VectorDocument& doc, const RenderConfig& cfg, double default_width = 0.025);

/// Control points of a path as a [3*nu+1, 2] double tensor.
torch::Tensor control_tensor(const StrokePath& path);

}  // namespace svgen
