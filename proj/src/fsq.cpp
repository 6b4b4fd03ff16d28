#include "svgen/fsq.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace svgen {

namespace {

constexpr double kBoundEps = 1e-3;

torch::Tensor level_tensor(const FsqConfig& cfg, torch::ScalarType dtype) {
  std::vector<double> l(cfg.levels.begin(), cfg.levels.end());
  return torch::tensor(l, torch::kDouble).to(dtype);
}

}  // namespace

int64_t FsqConfig::codebook_size() const {
  int64_t n = 1;
  for (int l : levels) n *= l;
  return n;
}

std::vector<int64_t> FsqConfig::basis() const {
  std::vector<int64_t> b(levels.size(), 1);
  for (std::size_t j = 1; j < levels.size(); ++j) b[j] = b[j - 1] * levels[j - 1];
  return b;
}

void FsqConfig::validate() const {
  if (levels.empty()) throw std::invalid_argument("fsq: levels must be nonempty");
  for (int l : levels) {
    if (l < 2) throw std::invalid_argument("fsq: every level must be >= 2");
  }
}

int64_t code_index(std::span<const int> zhat, const FsqConfig& cfg) {
  if (zhat.size() != cfg.levels.size()) throw std::out_of_range("code_index: expected " + std::to_string(cfg.q()) + " levels");
  const auto b = cfg.basis();
  int64_t v = 0;
  for (std::size_t j = 0; j < zhat.size(); ++j) {
    if (zhat[j] < 0 || zhat[j] >= cfg.levels[j]) {
      throw std::out_of_range("code_index: level " + std::to_string(zhat[j]) + " out of range in dimension " +
                              std::to_string(j));
    }
    v += zhat[j] * b[j];
  }
  return v;
}

std::vector<int> code_unindex(int64_t v, const FsqConfig& cfg) {
  if (v < 0 || v >= cfg.codebook_size()) throw std::out_of_range("code_unindex: index " + std::to_string(v) + " out of range");
  std::vector<int> out(cfg.levels.size());
  for (std::size_t j = 0; j < cfg.levels.size(); ++j) {
    out[j] = static_cast<int>(v % cfg.levels[j]);
    v /= cfg.levels[j];
  }
  return out;
}

FsqCode make_code(int64_t v, const FsqConfig& cfg) { return {code_unindex(v, cfg), v}; }

torch::Tensor fsq_bound(const torch::Tensor& z, const FsqConfig& cfg) {
  TORCH_CHECK(z.size(-1) == cfg.q(), "fsq_bound: last dimension must be q");
  const auto dtype = z.scalar_type();
  std::vector<double> half(cfg.levels.size()), offset(cfg.levels.size()), shift(cfg.levels.size()),
      center(cfg.levels.size());
  for (std::size_t j = 0; j < cfg.levels.size(); ++j) {
    const int l = cfg.levels[j];
    half[j] = (l - 1) * (1.0 - kBoundEps) / 2.0;
    offset[j] = l % 2 == 0 ? 0.5 : 0.0;
    shift[j] = std::atanh(offset[j] / half[j]);
    center[j] = static_cast<double>(l / 2);
  }
  auto t = [&](const std::vector<double>& v) { return torch::tensor(v, torch::kDouble).to(dtype); };
  return torch::tanh(z + t(shift)) * t(half) - t(offset) + t(center);
}

torch::Tensor fsq_quantize(const torch::Tensor& z, const FsqConfig& cfg) {
  auto s = fsq_bound(z, cfg);
  return s + (torch::round(s) - s).detach();
}

torch::Tensor fsq_indices(const torch::Tensor& levels, const FsqConfig& cfg) {
  TORCH_CHECK(levels.size(-1) == cfg.q(), "fsq_indices: last dimension must be q");
  const auto b = cfg.basis();
  auto basis = torch::tensor(b, torch::kLong);
  return (torch::round(levels.detach()).to(torch::kLong) * basis).sum(-1);
}

torch::Tensor fsq_levels(const torch::Tensor& indices, const FsqConfig& cfg) {
  const auto b = cfg.basis();
  auto basis = torch::tensor(b, torch::kLong);
  auto l = level_tensor(cfg, torch::kLong);
  auto idx = indices.to(torch::kLong).unsqueeze(-1);
  return torch::remainder(torch::div(idx, basis, "floor"), l).to(torch::kFloat);
}

}  // namespace svgen
