#pragma once

#include <filesystem>

#include <torch/torch.h>

namespace svgen {

/// Writes a [C, H, W] tensor in [0,1] as an 8-bit PNG (grayscale when all
/// channels are equal, RGB otherwise).
void write_png(const std::filesystem::path& path, const torch::Tensor& image);

/// Reads a PNG as a float [3, H, W] tensor in [0,1]; grayscale is replicated
/// across channels and alpha is composited over white.
torch::Tensor read_png(const std::filesystem::path& path);

}  // namespace svgen
