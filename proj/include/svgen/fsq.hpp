#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <torch/torch.h>

namespace svgen {

struct FsqConfig {
  std::vector<int> levels{7, 5, 5, 5, 5};

  int q() const { return static_cast<int>(levels.size()); }
  int64_t codebook_size() const;
  /// b_1 = 1, b_j = l_1 * ... * l_{j-1}.
  std::vector<int64_t> basis() const;
  void validate() const;
};

struct FsqCode {
  std::vector<int> levels;  // each in [0, l_j - 1]
  int64_t index = 0;

  friend bool operator==(const FsqCode&, const FsqCode&) = default;
};

/// v = sum_j zhat_j * b_j. Throws std::out_of_range for levels out of bounds.
int64_t code_index(std::span<const int> zhat, const FsqConfig& cfg);

/// Mixed-radix digits of v. Throws std::out_of_range unless 0 <= v < size.
std::vector<int> code_unindex(int64_t v, const FsqConfig& cfg);

FsqCode make_code(int64_t v, const FsqConfig& cfg);

/// Smooth squash of every dimension of z [..., q] into (0, l_j - 1). Odd
/// levels are centered on zero; even levels are shifted half a level so that
/// z = 0 still maps onto a level.
torch::Tensor fsq_bound(const torch::Tensor& z, const FsqConfig& cfg);

/// Rounds fsq_bound(z) to the nearest level. The rounding passes gradients
/// straight through.
torch::Tensor fsq_quantize(const torch::Tensor& z, const FsqConfig& cfg);

/// Integer levels [..., q] -> code indices [...] (int64).
torch::Tensor fsq_indices(const torch::Tensor& levels, const FsqConfig& cfg);

/// Code indices [...] -> float levels [..., q].
torch::Tensor fsq_levels(const torch::Tensor& indices, const FsqConfig& cfg);

}  // namespace svgen
