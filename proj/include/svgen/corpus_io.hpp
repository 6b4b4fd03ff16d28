#pragma once

#include <filesystem>
#include <vector>

#include "svgen/dataprep.hpp"

namespace svgen {

/// On-disk corpus layout:
///   index.jsonl             one line per sample:
///     {"source_id", "prompt", "label", "canvas_size", "n_patches",
///      "anchors": [[x, y], ...], "codes": [null, ...],
///      "geometry": [{"points": [[x, y], ...], "closed", "width", "color"} | null, ...]}
///   <source_id>_<i>.png     patch i of the sample
///   sources/<source_id>.png full source raster (when known)
void write_corpus(const std::filesystem::path& dir, const std::vector<SampleRecord>& samples);

/// Reads a corpus written by write_corpus. Patch images are loaded only when
/// `load_patches` is set.
std::vector<SampleRecord> read_corpus(const std::filesystem::path& dir, bool load_patches = true);

/// Stacks every patch of every sample into [N, 3, H, W] uint8 (0..255).
torch::Tensor stack_patches_u8(const std::vector<SampleRecord>& samples);

}  // namespace svgen
