#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "svgen/contour.hpp"
#include "svgen/geometry.hpp"
#include "svgen/raster.hpp"

namespace svgen {

enum class DatasetKind { mnist, fonts, figr8, synthetic };

DatasetKind parse_dataset_kind(std::string_view name);
std::string to_string(DatasetKind kind);

struct PatchRecord {
  RasterPatch patch;  // [3, 128, 128]
  Anchor anchor;
  std::string source_id;
  std::optional<StrokePath> geometry;  // patch-local ground truth, when known
};

struct SampleRecord {
  std::string source_id;
  std::string prompt;
  std::string label;
  int canvas_size = 128;
  std::vector<PatchRecord> patches;
  torch::Tensor source;  // full raster the patches were cut from; may be undefined
};

struct PatchOptions {
  int patch_size = 128;
  int grid = kDefaultGrid;
  double stroke_width = 0.025;
  /// Strokes whose bounding box exceeds this fraction of the patch are scaled down.
  double safe_area = 0.9;
  double max_len_fraction = 0.11;
  double antialias_band = 1.0;

  RenderConfig render_config() const { return {patch_size, antialias_band, 24}; }
};

struct PromptMetadata {
  std::optional<std::string> class_label;
  std::optional<std::string> glyph;
  std::optional<std::string> style;
};

/// Dataset prompt templates: "<digit> in black color", "[capital ]<g> in <s>
/// font", or the bare class name. Throws std::invalid_argument when a required
/// field is missing.
std::string build_prompt(DatasetKind kind, const PromptMetadata& meta);

/// Tiles `image` [C, H, W] into rows x cols tiles in row-major order, padding
/// the right/bottom with white up to a multiple of the grid. Each tile is
/// centered on a fresh white patch. Anchors are tile centers relative to the
/// padded image.
std::vector<PatchRecord> tile_grid(const torch::Tensor& image, int rows = 6, int cols = 6,
                                   const PatchOptions& opts = {});

struct CenteredStroke {
  StrokePath geometry;  // patch-local
  Anchor anchor;
};

/// Moves the bounding-box center of `points` to (0.5, 0.5), scaling down only
/// when the box exceeds the safe area, and records the discretized original
/// center as anchor. Returns nullopt for degenerate input (< 2 distinct points).
std::optional<CenteredStroke> center_stroke(std::span<const Point> points, const PatchOptions& opts);

/// center_stroke plus rasterization of the centered stroke.
std::optional<PatchRecord> center_patch(const Polyline& segment, const PatchOptions& opts);

/// Batched render of patch-local polylines of differing lengths, [B, 3, H, W].
torch::Tensor render_polyline_batch(const std::vector<std::vector<Point>>& lines, const std::vector<double>& widths,
                                    const std::vector<Rgb>& colors, const RenderConfig& cfg);

struct StrokeSource {
  std::string source_id;
  std::string prompt;
  std::string label;
  std::vector<Polyline> outlines;  // normalized canvas coordinates
  std::vector<double> widths;      // per outline; empty -> opts.stroke_width
  std::vector<Rgb> colors;         // per outline; empty -> black
};

struct PreprocessStats {
  std::size_t samples = 0;
  std::size_t patches = 0;
  std::size_t degenerate_dropped = 0;
};

/// Split -> center -> rasterize for every outline of a stroke-based sample.
SampleRecord strokes_to_sample(const StrokeSource& src, const PatchOptions& opts, PreprocessStats* stats = nullptr);

struct SyntheticOptions {
  PatchOptions patch;
  int canvas_size = 128;
  bool colored = false;
  bool variable_width = false;
  /// Appends the sample index to every prompt ("box 12"), making prompts unique.
  bool indexed_prompts = false;
};

inline const std::vector<std::string>& synthetic_classes() {
  static const std::vector<std::string> classes = {"box", "cross", "circle", "zigzag"};
  return classes;
}

/// Deterministic corpus of parametric glyphs, class-balanced round-robin.
std::vector<SampleRecord> generate_synthetic_corpus(int n, uint64_t seed, const SyntheticOptions& opts = {},
                                                    PreprocessStats* stats = nullptr);

/// MNIST from local IDX files: upscale to 128, polarity to dark-on-white, 6x6 tiling.
std::vector<SampleRecord> load_mnist(const std::filesystem::path& images, const std::filesystem::path& labels,
                                     std::size_t limit, const PatchOptions& opts, PreprocessStats* stats = nullptr);

/// FIGR-8 style folder: one sub-directory per class holding PNG icons. The
/// images are inverted before contour extraction when `invert` is set.
std::vector<SampleRecord> load_figr8(const std::filesystem::path& root, std::size_t limit, bool invert,
                                     const PatchOptions& opts, PreprocessStats* stats = nullptr);

/// Font glyphs from a JSONL manifest: {"svg": path, "glyph": "A", "style": "regular"}.
std::vector<SampleRecord> load_fonts(const std::filesystem::path& manifest, std::size_t limit,
                                     const PatchOptions& opts, PreprocessStats* stats = nullptr);

}  // namespace svgen
