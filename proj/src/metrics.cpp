#include "svgen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace svgen {

double mse(const torch::Tensor& a, const torch::Tensor& b) {
  if (a.sizes() != b.sizes()) throw std::invalid_argument("mse: shape mismatch");
  return (a.to(torch::kDouble) - b.to(torch::kDouble)).pow(2).mean().item<double>();
}

namespace {

Eigen::MatrixXd covariance(const Eigen::MatrixXd& x, const Eigen::RowVectorXd& mu) {
  const Eigen::MatrixXd c = x.rowwise() - mu;
  return (c.transpose() * c) / static_cast<double>(x.rows() - 1);
}

Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

double fid(const Eigen::MatrixXd& real, const Eigen::MatrixXd& gen) {
  if (real.rows() < 2 || gen.rows() < 2) throw std::invalid_argument("fid: need at least 2 samples per side");
  if (real.cols() != gen.cols()) throw std::invalid_argument("fid: feature dimensions differ");
  if (!real.allFinite() || !gen.allFinite()) throw std::invalid_argument("fid: non-finite features");
  const Eigen::RowVectorXd mu_r = real.colwise().mean();
  const Eigen::RowVectorXd mu_g = gen.colwise().mean();
  const Eigen::MatrixXd sr = covariance(real, mu_r);
  const Eigen::MatrixXd sg = covariance(gen, mu_g);
  const Eigen::MatrixXd root = sqrt_psd(sr);
  const Eigen::MatrixXd inner = root * sg * root;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (inner + inner.transpose()), Eigen::EigenvaluesOnly);
  double trace_sqrt = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double ev = es.eigenvalues()[i];
    if (ev > 0) trace_sqrt += std::sqrt(ev);
  }
  const double value = (mu_r - mu_g).squaredNorm() + sr.trace() + sg.trace() - 2.0 * trace_sqrt;
  return std::max(value, 0.0);
}

double clip_score(const Eigen::MatrixXd& image_embs, const Eigen::MatrixXd& text_embs) {
  if (image_embs.rows() != text_embs.rows() || image_embs.cols() != text_embs.cols()) {
    throw std::invalid_argument("clip_score: embedding shapes differ");
  }
  if (image_embs.rows() == 0) return 0.0;
  double total = 0.0;
  for (Eigen::Index i = 0; i < image_embs.rows(); ++i) {
    const double denom = image_embs.row(i).norm() * text_embs.row(i).norm();
    const double cos = denom > 0 ? image_embs.row(i).dot(text_embs.row(i)) / denom : 0.0;
    total += 100.0 * std::max(std::min(cos, 1.0), 0.0);
  }
  return total / static_cast<double>(image_embs.rows());
}

namespace {

constexpr int kPool = 32;

// Box-Muller on the portable uniform; std::normal_distribution is
// implementation defined.
double gaussian(std::mt19937_64& rng) {
  const double u1 = (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

RandomProjectionEmbedding::RandomProjectionEmbedding(int dim, uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim < 1) throw std::invalid_argument("embedding dim must be positive");
  std::mt19937_64 rng(seed);
  projection_.resize(kPool * kPool * 3, dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(projection_.rows()));
  for (Eigen::Index i = 0; i < projection_.rows(); ++i) {
    for (Eigen::Index j = 0; j < projection_.cols(); ++j) projection_(i, j) = gaussian(rng) * scale;
  }
}

Eigen::MatrixXd RandomProjectionEmbedding::embed_images(const torch::Tensor& images) {
  TORCH_CHECK(images.dim() == 4 && images.size(1) == 3, "embed_images: expected [N, 3, H, W]");
  auto pooled = torch::adaptive_avg_pool2d(images.to(torch::kDouble), {kPool, kPool}).reshape({images.size(0), -1}).contiguous();
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> x(
      pooled.data_ptr<double>(), pooled.size(0), pooled.size(1));
  return x * projection_;
}

Eigen::MatrixXd RandomProjectionEmbedding::embed_texts(const std::vector<std::string>& texts) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(texts.size()), dim_);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    std::istringstream in(texts[i]);
    std::string w;
    while (in >> w) {
      std::mt19937_64 rng(fnv1a(w) ^ seed_);
      for (int j = 0; j < dim_; ++j) out(static_cast<Eigen::Index>(i), j) += gaussian(rng);
    }
  }
  return out;
}

nlohmann::json CodebookUsage::to_json() const {
  std::vector<int64_t> order;
  for (int64_t c = 0; c < codebook_size; ++c) {
    if (counts[c] > 0) order.push_back(c);
  }
  std::stable_sort(order.begin(), order.end(), [&](int64_t a, int64_t b) { return counts[a] > counts[b]; });
  nlohmann::json codes = nlohmann::json::array();
  for (int64_t c : order) {
    codes.push_back({{"code", c}, {"count", counts[c]}, {"share", static_cast<double>(counts[c]) / static_cast<double>(total)}});
  }
  nlohmann::json top = nlohmann::json::object();
  for (const auto& [k, v] : top_k_share) top[std::to_string(k)] = v;
  nlohmann::json classes = nlohmann::json::object();
  for (const auto& [label, t] : per_class) classes[label] = {{"code", t.code}, {"share", t.share}, {"total", t.total}};
  return {{"codebook_size", codebook_size}, {"total_codes", total},  {"used_codes", used},
          {"used_fraction", used_fraction()}, {"unused_fraction", 1.0 - used_fraction()},
          {"top_k_share", top},           {"per_class_top", classes}, {"codes", codes}};
}

CodebookUsage codebook_usage(const std::vector<TokenizedSample>& corpus, int64_t codebook_size,
                             const std::vector<int>& top_k) {
  CodebookUsage u;
  u.codebook_size = codebook_size;
  u.counts.assign(static_cast<std::size_t>(codebook_size), 0);
  std::map<std::string, std::map<int64_t, int64_t>> by_class;
  for (const auto& s : corpus) {
    for (const auto& p : s.pairs) {
      if (p.code < 0 || p.code >= codebook_size) throw std::out_of_range("codebook_usage: code out of range");
      ++u.counts[static_cast<std::size_t>(p.code)];
      ++u.total;
      ++by_class[s.label][p.code];
    }
  }
  std::vector<int64_t> sorted = u.counts;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  u.used = std::count_if(u.counts.begin(), u.counts.end(), [](int64_t c) { return c > 0; });
  for (int k : top_k) {
    const auto n = std::min<std::size_t>(static_cast<std::size_t>(k), sorted.size());
    const int64_t sum = std::accumulate(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(n), int64_t{0});
    u.top_k_share[k] = u.total > 0 ? static_cast<double>(sum) / static_cast<double>(u.total) : 0.0;
  }
  for (const auto& [label, counts] : by_class) {
    CodebookUsage::ClassTop t;
    int64_t best = 0;
    for (const auto& [code, c] : counts) {
      t.total += c;
      if (c > best) {
        best = c;
        t.code = code;
      }
    }
    t.share = t.total > 0 ? static_cast<double>(best) / static_cast<double>(t.total) : 0.0;
    u.per_class[label] = t;
  }
  return u;
}

}  // namespace svgen
