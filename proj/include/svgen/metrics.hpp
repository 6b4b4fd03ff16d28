#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "svgen/codec.hpp"

namespace svgen {

/// Mean squared pixel difference. Throws std::invalid_argument on shape mismatch.
double mse(const torch::Tensor& a, const torch::Tensor& b);

/// Frechet distance between Gaussian fits of two feature sets (rows are
/// samples). Needs >= 2 rows per side, equal dims and finite values.
double fid(const Eigen::MatrixXd& real, const Eigen::MatrixXd& gen);

/// Mean over rows of 100 * max(cos(img_i, txt_i), 0).
double clip_score(const Eigen::MatrixXd& image_embs, const Eigen::MatrixXd& text_embs);

class EmbeddingAdapter {
 public:
  virtual ~EmbeddingAdapter() = default;
  /// Images [N, 3, H, W] in [0,1] -> [N, dim].
  virtual Eigen::MatrixXd embed_images(const torch::Tensor& images) = 0;
  virtual Eigen::MatrixXd embed_texts(const std::vector<std::string>& texts) = 0;
  virtual int dim() const = 0;
};

/// Deterministic offline embedding: images are average-pooled to 32x32 and
/// multiplied by a seeded Gaussian matrix; texts are sums of per-word seeded
/// Gaussian vectors.
class RandomProjectionEmbedding : public EmbeddingAdapter {
 public:
  explicit RandomProjectionEmbedding(int dim = 64, uint64_t seed = 0);
  Eigen::MatrixXd embed_images(const torch::Tensor& images) override;
  Eigen::MatrixXd embed_texts(const std::vector<std::string>& texts) override;
  int dim() const override { return dim_; }

 private:
  int dim_;
  uint64_t seed_;
  Eigen::MatrixXd projection_;  // [32*32*3, dim]
};

struct CodebookUsage {
  int64_t codebook_size = 0;
  int64_t total = 0;
  int64_t used = 0;
  std::vector<int64_t> counts;
  /// Cumulative share of the k most frequent codes.
  std::map<int, double> top_k_share;
  struct ClassTop {
    int64_t code = 0;
    double share = 0.0;
    int64_t total = 0;
  };
  /// Most frequent code per class label and its share within the class.
  std::map<std::string, ClassTop> per_class;

  double used_fraction() const { return codebook_size == 0 ? 0.0 : static_cast<double>(used) / static_cast<double>(codebook_size); }
  nlohmann::json to_json() const;
};

CodebookUsage codebook_usage(const std::vector<TokenizedSample>& corpus, int64_t codebook_size = 4375,
                             const std::vector<int>& top_k = {1, 10, 24, 102});

}  // namespace svgen
