#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include "svgen/geometry.hpp"

namespace svgen {

/// Raised for SVG input outside the supported subset. `element_index` is the
/// zero-based index of the offending element among all elements in the file.
class SvgError : public std::runtime_error {
 public:
  SvgError(const std::string& what, int element_index)
      : std::runtime_error(what + " (element " + std::to_string(element_index) + ")"),
        element_index_(element_index) {}

  int element_index() const { return element_index_; }

 private:
  int element_index_;
};

/// Serializes a document: one <path> per stroke, absolute M/C commands plus Z
/// for closed paths, coordinates in canvas pixels with 6 decimals. The anchor
/// of every stroke is kept in a `data-anchor` attribute so the patch-local
/// geometry can be recovered.
std::string document_to_svg(const VectorDocument& doc);

/// Parses SVG produced by document_to_svg, or any SVG restricted to
/// M/L/H/V/C/Z path commands. Each subpath becomes one stroke. Paths without
/// `data-anchor` get the discretized bounding-box center as anchor. Throws
/// SvgError on unsupported elements or path commands.
VectorDocument parse_svg(std::string_view text, int grid = kDefaultGrid);

}  // namespace svgen
