#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "svgen/fsq.hpp"
#include "svgen/geometry.hpp"
#include "svgen/raster.hpp"

namespace svgen {

enum class HeadMode { stroke, shape };

HeadMode parse_head_mode(std::string_view name);
std::string to_string(HeadMode mode);

struct VsqConfig {
  int segments = 2;         // nu
  int codes_per_shape = 1;  // xi
  int latent_dim = 512;     // d
  HeadMode head_mode = HeadMode::stroke;
  bool enable_width = false;
  bool enable_color = false;
  double alpha = 0.4;
  /// Width head output is sigmoid(.) * width_scale.
  double width_scale = 0.1;
  /// Stroke width used for rendering when the width head is disabled.
  double default_width = 0.025;
  int encoder_channels = 16;
  FsqConfig fsq;
  RenderConfig render;

  void validate() const;
  /// Control points emitted by the points head: 3nu+1 (stroke) or 3nu (shape).
  int control_count() const { return head_mode == HeadMode::stroke ? 3 * segments + 1 : 3 * segments; }
  /// alpha, or 0 for shape mode where the constraint does not apply.
  double effective_alpha() const { return head_mode == HeadMode::stroke ? alpha : 0.0; }
};

void to_json(nlohmann::json& j, const VsqConfig& c);
void from_json(const nlohmann::json& j, VsqConfig& c);

struct VsqOutput {
  torch::Tensor control;  // [B, control_count, 2] in (0,1)
  torch::Tensor width;    // [B]
  torch::Tensor color;    // [B, 3]
  torch::Tensor levels;   // [B, xi, q] quantized levels (straight-through)
};

class VsqModelImpl : public torch::nn::Module {
 public:
  explicit VsqModelImpl(const VsqConfig& cfg);

  const VsqConfig& config() const { return cfg_; }

  /// Patches [B, 3, H, W] in [0,1] -> quantized levels [B, xi, q].
  torch::Tensor encode(const torch::Tensor& patches);
  /// Levels [B, xi, q] -> decoded geometry.
  VsqOutput decode(const torch::Tensor& levels);
  VsqOutput forward(const torch::Tensor& patches);
  /// Renders decoded geometry at the configured patch resolution, [B, 3, H, W].
  torch::Tensor render(const VsqOutput& out) const;

 private:
  VsqConfig cfg_;
  torch::nn::Sequential features_{nullptr};
  torch::nn::Sequential residual_{nullptr};
  torch::nn::ModuleList pool_heads_{nullptr};
  torch::nn::BatchNorm1d latent_norm_{nullptr};
  torch::nn::Linear proj_down_{nullptr};
  torch::nn::Linear proj_up_{nullptr};
  torch::nn::Sequential stroke_head_{nullptr};
  torch::nn::Linear shape_in_{nullptr};
  torch::nn::Sequential shape_conv_{nullptr};
  torch::nn::Linear width_head_{nullptr};
  torch::nn::Linear color_head_{nullptr};
  int shape_channels_ = 32;
};
TORCH_MODULE(VsqModel);

/// Start/end points [..., nu+1, 2] -> loss [...]. Differentiable.
torch::Tensor geometric_loss(const torch::Tensor& points);
/// Scalar version on plain points; throws for fewer than 2 points.
double geometric_loss(std::span<const Point> points);

/// On-curve points (every third control point) of decoded stroke geometry.
torch::Tensor endpoint_subset(const torch::Tensor& control);

struct VsqLoss {
  torch::Tensor total;
  torch::Tensor mse;
  torch::Tensor geom;
};

/// mean((s - render(decode(encode(s))))^2) + alpha * mean(L_geom).
VsqLoss vsq_loss(VsqModel& model, const torch::Tensor& patches);

/// Eval-mode encoding of a single patch [3, H, W] into xi codes.
std::vector<FsqCode> encode_patch(VsqModel& model, const torch::Tensor& patch);

/// Eval-mode decoding of xi codes into a patch-local path.
StrokePath decode_codes(VsqModel& model, std::span<const FsqCode> codes);

/// Batched eval-mode encoding, [N, 3, H, W] -> code indices [N, xi].
torch::Tensor encode_indices(VsqModel& model, const torch::Tensor& patches, int batch_size = 64);

/// Batched eval-mode decoding of code indices [N, xi] into paths.
std::vector<StrokePath> decode_indices(VsqModel& model, const torch::Tensor& indices);

struct VsqTrainOptions {
  int steps = 3000;
  int batch_size = 16;
  double lr = 1e-3;
  double weight_decay = 0.0;
  uint64_t seed = 0;
  int log_every = 50;
  /// Fraction of patches held out for evaluation (taken after a seeded shuffle).
  double held_out_fraction = 0.1;
  std::filesystem::path checkpoint;  // written at the end when non-empty
  std::filesystem::path metrics_log;  // JSONL, appended per logged step
  /// Continue from this checkpoint (model, optimizer and step counter).
  std::filesystem::path resume_from;
};

struct VsqStepLog {
  int step = 0;
  double loss = 0.0;
  double mse = 0.0;
  double geom = 0.0;
};

struct VsqEval {
  double mse = 0.0;
  double geom = 0.0;
  std::optional<double> color_mae;
};

struct VsqTrainResult {
  VsqModel model{nullptr};
  std::vector<VsqStepLog> log;
  VsqEval held_out;
  std::vector<int64_t> held_out_indices;
};

/// Trains on patches [N, 3, H, W] (uint8 0..255 or float 0..1). `colors`
/// [N, 3] enables the color error report on held-out patches.
VsqTrainResult train_vsq(const torch::Tensor& patches, const VsqConfig& cfg, const VsqTrainOptions& opts,
                         const torch::Tensor& colors = {});

VsqEval evaluate_vsq(VsqModel& model, const torch::Tensor& patches, const torch::Tensor& colors = {},
                     int batch_size = 64);

/// Checkpoint archive: the config as JSON, model parameters, and (when given)
/// the optimizer state and step counter.
void save_vsq(const std::filesystem::path& path, VsqModel& model, torch::optim::Optimizer* optimizer = nullptr,
              int step = 0);
VsqModel load_vsq(const std::filesystem::path& path);

}  // namespace svgen
