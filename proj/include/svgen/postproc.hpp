#pragma once

#include <string>
#include <string_view>

#include "svgen/geometry.hpp"

namespace svgen {

enum class PostprocMode { none, pc, pi };

PostprocMode parse_postproc_mode(std::string_view name);
std::string to_string(PostprocMode mode);

struct PostprocConfig {
  PostprocMode mode = PostprocMode::none;
  /// Normalized canvas units.
  double max_dist = 8.0 / 256.0;

  void validate() const;
};

/// Distances at or below this count as already connected.
inline constexpr double kCoincident = 1e-12;

enum class Endpoint { start, end };

struct EndpointMatch {
  Endpoint a_side = Endpoint::end;
  Endpoint b_side = Endpoint::start;
  Point a_point;  // canvas coordinates
  Point b_point;
  double distance = 0.0;
};

/// Closest of the four endpoint pairings of two open strokes in canvas
/// coordinates. Ties prefer (a.end, b.start), (a.end, b.end), (a.start,
/// b.start), (a.start, b.end) in that order. Throws std::invalid_argument for
/// closed paths.
EndpointMatch nearest_endpoints(const PlacedStroke& a, const PlacedStroke& b, int grid = kDefaultGrid);

/// Moves the matched endpoint of the later stroke of every consecutive pair
/// within (0, max_dist] onto the earlier stroke's endpoint, dragging the
/// adjacent handle along.
VectorDocument path_clip(const VectorDocument& doc, const PostprocConfig& cfg);

/// Inserts a straight connector after the earlier stroke of every
/// consecutive pair within (0, max_dist]. Pairs are matched on the input
/// order; connectors copy the earlier stroke's width and color.
VectorDocument path_interp(const VectorDocument& doc, const PostprocConfig& cfg);

VectorDocument postprocess(const VectorDocument& doc, const PostprocConfig& cfg);

}  // namespace svgen
