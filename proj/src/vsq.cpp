#include "svgen/vsq.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

namespace svgen {

using nlohmann::json;

HeadMode parse_head_mode(std::string_view name) {
  if (name == "stroke") return HeadMode::stroke;
  if (name == "shape") return HeadMode::shape;
  throw std::invalid_argument("unknown head mode: " + std::string(name));
}

std::string to_string(HeadMode mode) { return mode == HeadMode::stroke ? "stroke" : "shape"; }

void VsqConfig::validate() const {
  if (segments < 1) throw std::invalid_argument("vsq: segments must be >= 1");
  if (codes_per_shape < 1) throw std::invalid_argument("vsq: codes_per_shape must be >= 1");
  if (latent_dim < 1) throw std::invalid_argument("vsq: latent_dim must be > 0");
  if (encoder_channels < 8 || encoder_channels % 8 != 0) throw std::invalid_argument("vsq: encoder_channels must be a multiple of 8");
  if (alpha < 0) throw std::invalid_argument("vsq: alpha must be >= 0");
  if (!(width_scale > 0) || !(default_width > 0)) throw std::invalid_argument("vsq: widths must be positive");
  if (render.resolution % 16 != 0) throw std::invalid_argument("vsq: resolution must be a multiple of 16");
  fsq.validate();
  render.validate();
}

void to_json(json& j, const VsqConfig& c) {
  j = json{{"segments", c.segments},
           {"codes_per_shape", c.codes_per_shape},
           {"latent_dim", c.latent_dim},
           {"head_mode", to_string(c.head_mode)},
           {"enable_width", c.enable_width},
           {"enable_color", c.enable_color},
           {"alpha", c.alpha},
           {"width_scale", c.width_scale},
           {"default_width", c.default_width},
           {"encoder_channels", c.encoder_channels},
           {"levels", c.fsq.levels},
           {"resolution", c.render.resolution},
           {"antialias_band", c.render.antialias_band},
           {"samples_per_segment", c.render.samples_per_segment}};
}

void from_json(const json& j, VsqConfig& c) {
  const VsqConfig d;
  c.segments = j.value("segments", d.segments);
  c.codes_per_shape = j.value("codes_per_shape", d.codes_per_shape);
  c.latent_dim = j.value("latent_dim", d.latent_dim);
  c.head_mode = parse_head_mode(j.value("head_mode", std::string("stroke")));
  c.enable_width = j.value("enable_width", d.enable_width);
  c.enable_color = j.value("enable_color", d.enable_color);
  c.alpha = j.value("alpha", d.alpha);
  c.width_scale = j.value("width_scale", d.width_scale);
  c.default_width = j.value("default_width", d.default_width);
  c.encoder_channels = j.value("encoder_channels", d.encoder_channels);
  c.fsq.levels = j.value("levels", d.fsq.levels);
  c.render.resolution = j.value("resolution", d.render.resolution);
  c.render.antialias_band = j.value("antialias_band", d.render.antialias_band);
  c.render.samples_per_segment = j.value("samples_per_segment", d.render.samples_per_segment);
}

namespace {

namespace nn = torch::nn;

void add_down_block(nn::Sequential& seq, int in, int out) {
  seq->push_back(nn::Conv2d(nn::Conv2dOptions(in, out, 3).stride(2).padding(1)));
  seq->push_back(nn::GroupNorm(nn::GroupNormOptions(8, out)));
  seq->push_back(nn::ReLU());
}

}  // namespace

VsqModelImpl::VsqModelImpl(const VsqConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const int c = cfg_.encoder_channels;
  const int d = cfg_.latent_dim;
  const int xi = cfg_.codes_per_shape;
  nn::Sequential features;
  add_down_block(features, 3, c);
  add_down_block(features, c, 2 * c);
  add_down_block(features, 2 * c, 4 * c);
  add_down_block(features, 4 * c, 8 * c);
  features_ = register_module("features", features);
  residual_ = register_module(
      "residual", nn::Sequential(nn::Conv2d(nn::Conv2dOptions(8 * c, 8 * c, 3).padding(1)),
                                 nn::GroupNorm(nn::GroupNormOptions(8, 8 * c)), nn::ReLU(),
                                 nn::Conv2d(nn::Conv2dOptions(8 * c, 8 * c, 3).padding(1)),
                                 nn::GroupNorm(nn::GroupNormOptions(8, 8 * c))));
  const int side = cfg_.render.resolution / 16;
  const int flat = 8 * c * side * side;
  pool_heads_ = register_module("pool_heads", nn::ModuleList());
  for (int k = 0; k < xi; ++k) pool_heads_->push_back(nn::Linear(flat, d));
  latent_norm_ = register_module("latent_norm", nn::BatchNorm1d(d));
  proj_down_ = register_module("proj_down", nn::Linear(d, cfg_.fsq.q()));
  proj_up_ = register_module("proj_up", nn::Linear(cfg_.fsq.q(), d));

  const int joint = xi * d;
  if (cfg_.head_mode == HeadMode::stroke) {
    stroke_head_ = register_module(
        "stroke_head", nn::Sequential(nn::Linear(joint, 256), nn::ReLU(), nn::Linear(256, 2 * cfg_.control_count())));
  } else {
    shape_in_ = register_module("shape_in", nn::Linear(joint, shape_channels_ * cfg_.control_count()));
    auto circ = [](int in, int out) {
      return nn::Conv1d(nn::Conv1dOptions(in, out, 3).padding(1).padding_mode(torch::kCircular));
    };
    shape_conv_ = register_module("shape_conv", nn::Sequential(circ(shape_channels_, shape_channels_), nn::ReLU(),
                                                               circ(shape_channels_, 2)));
  }
  if (cfg_.enable_width) width_head_ = register_module("width_head", nn::Linear(joint, 1));
  if (cfg_.enable_color) color_head_ = register_module("color_head", nn::Linear(joint, 3));
}

torch::Tensor VsqModelImpl::encode(const torch::Tensor& patches) {
  const int r = cfg_.render.resolution;
  TORCH_CHECK(patches.dim() == 4 && patches.size(1) == 3 && patches.size(2) == r && patches.size(3) == r,
              "vsq encode: expected [B, 3, ", r, ", ", r, "]");
  auto x = 1.0 - patches.to(torch::kFloat);  // ink positive, background zero
  auto f = features_->forward(x);
  f = torch::relu(f + residual_->forward(f));
  f = f.flatten(1);
  std::vector<torch::Tensor> codes;
  for (const auto& head : *pool_heads_) {
    auto latent = head->as<nn::Linear>()->forward(f);
    codes.push_back(fsq_quantize(proj_down_->forward(latent_norm_->forward(latent)), cfg_.fsq));
  }
  return torch::stack(codes, 1);
}

VsqOutput VsqModelImpl::decode(const torch::Tensor& levels) {
  TORCH_CHECK(levels.dim() == 3 && levels.size(1) == cfg_.codes_per_shape && levels.size(2) == cfg_.fsq.q(),
              "vsq decode: expected [B, xi, q] levels");
  std::vector<double> span;
  for (int l : cfg_.fsq.levels) span.push_back(l - 1);
  auto scale = torch::tensor(span, torch::kDouble).to(levels.scalar_type());
  auto z = levels / scale * 2.0 - 1.0;
  auto up = torch::relu(proj_up_->forward(z));  // [B, xi, d]
  auto joint = up.flatten(1);
  const int64_t b = levels.size(0);

  VsqOutput out;
  out.levels = levels;
  if (cfg_.head_mode == HeadMode::stroke) {
    out.control = torch::sigmoid(stroke_head_->forward(joint)).view({b, cfg_.control_count(), 2});
  } else {
    auto h = torch::relu(shape_in_->forward(joint)).view({b, shape_channels_, cfg_.control_count()});
    out.control = torch::sigmoid(shape_conv_->forward(h)).transpose(1, 2).contiguous();
  }
  if (cfg_.enable_width) {
    out.width = torch::sigmoid(width_head_->forward(joint)).squeeze(1) * cfg_.width_scale;
  } else {
    out.width = torch::full({b}, cfg_.default_width, joint.options());
  }
  if (cfg_.enable_color) {
    out.color = torch::sigmoid(color_head_->forward(joint));
  } else {
    out.color = torch::zeros({b, 3}, joint.options());
  }
  return out;
}

VsqOutput VsqModelImpl::forward(const torch::Tensor& patches) { return decode(encode(patches)); }

torch::Tensor VsqModelImpl::render(const VsqOutput& out) const {
  if (cfg_.head_mode == HeadMode::stroke) return render_strokes(out.control, out.width, out.color, cfg_.render);
  return render_shapes(out.control, out.color, cfg_.render);
}

torch::Tensor geometric_loss(const torch::Tensor& points) {
  TORCH_CHECK(points.dim() >= 2 && points.size(-1) == 2 && points.size(-2) >= 2,
              "geometric_loss: expected [..., n >= 2, 2]");
  const int64_t n = points.size(-2);
  const double nu = static_cast<double>(n - 1);
  auto diff = points.unsqueeze(-2) - points.unsqueeze(-3);
  auto d2 = (diff * diff).sum(-1);
  // sqrt has an infinite derivative at zero; the diagonal is masked anyway.
  auto rho = torch::where(d2 > 0, torch::sqrt(torch::clamp_min(d2, 1e-30)), torch::zeros_like(d2));
  auto idx = torch::arange(n, points.options().dtype(torch::kDouble));
  auto gap = (idx.unsqueeze(0) - idx.unsqueeze(1)).abs();
  auto off = (gap > 0).to(points.scalar_type());
  auto scaled = rho / gap.clamp_min(1.0).to(points.scalar_type()) * off;
  auto mean = scaled.sum(-2, true) / nu;  // over i for each j
  auto delta = ((scaled - mean).pow(2) * off).sum(-2) / nu;
  return delta.mean(-1);
}

double geometric_loss(std::span<const Point> points) {
  if (points.size() < 2) throw std::invalid_argument("geometric_loss: need at least 2 points");
  auto t = torch::empty({static_cast<int64_t>(points.size()), 2}, torch::kDouble);
  for (std::size_t i = 0; i < points.size(); ++i) {
    t[i][0] = points[i].x;
    t[i][1] = points[i].y;
  }
  return geometric_loss(t).item<double>();
}

torch::Tensor endpoint_subset(const torch::Tensor& control) {
  return control.slice(-2, 0, control.size(-2), 3);
}

VsqLoss vsq_loss(VsqModel& model, const torch::Tensor& patches) {
  const auto& cfg = model->config();
  auto target = patches.to(torch::kFloat);
  auto out = model->forward(target);
  auto recon = model->render(out);
  VsqLoss loss;
  loss.mse = (recon - target).pow(2).mean();
  loss.geom = cfg.head_mode == HeadMode::stroke ? geometric_loss(endpoint_subset(out.control)).mean()
                                                : torch::zeros({}, target.options());
  loss.total = cfg.effective_alpha() > 0 ? loss.mse + cfg.effective_alpha() * loss.geom : loss.mse;
  return loss;
}

namespace {

torch::Tensor as_float_patches(const torch::Tensor& t) {
  if (t.scalar_type() == torch::kUInt8) return t.to(torch::kFloat) / 255.0;
  return t.to(torch::kFloat);
}

StrokePath path_from_control(const torch::Tensor& control, const VsqConfig& cfg, double width, const Rgb& color) {
  auto c = control.to(torch::kDouble).contiguous();
  auto acc = c.accessor<double, 2>();
  auto pt = [&](int64_t i) { return Point{acc[i][0], acc[i][1]}; };
  StrokePath p;
  p.start = pt(0);
  const int nu = cfg.segments;
  for (int k = 0; k < nu; ++k) {
    const int64_t base = 3 * k;
    const bool last = k == nu - 1;
    const Point end = cfg.head_mode == HeadMode::shape && last ? p.start : pt(base + 3);
    p.segments.push_back({pt(base + 1), pt(base + 2), end});
  }
  p.closed = cfg.head_mode == HeadMode::shape;
  if (cfg.enable_width) p.width = width;
  if (cfg.enable_color) (p.closed ? p.fill_color : p.stroke_color) = color;
  return p;
}

}  // namespace

std::vector<FsqCode> encode_patch(VsqModel& model, const torch::Tensor& patch) {
  const int r = model->config().render.resolution;
  if (patch.dim() != 3 || patch.size(0) != 3 || patch.size(1) != r || patch.size(2) != r) {
    throw std::invalid_argument("encode_patch: expected a [3, " + std::to_string(r) + ", " + std::to_string(r) + "] patch");
  }
  auto idx = encode_indices(model, patch.unsqueeze(0));
  std::vector<FsqCode> out;
  for (int64_t k = 0; k < idx.size(1); ++k) out.push_back(make_code(idx[0][k].item<int64_t>(), model->config().fsq));
  return out;
}

StrokePath decode_codes(VsqModel& model, std::span<const FsqCode> codes) {
  if (static_cast<int>(codes.size()) != model->config().codes_per_shape) {
    throw std::invalid_argument("decode_codes: expected " + std::to_string(model->config().codes_per_shape) + " codes");
  }
  auto idx = torch::empty({1, static_cast<int64_t>(codes.size())}, torch::kLong);
  for (std::size_t k = 0; k < codes.size(); ++k) idx[0][static_cast<int64_t>(k)] = code_index(codes[k].levels, model->config().fsq);
  return decode_indices(model, idx).front();
}

torch::Tensor encode_indices(VsqModel& model, const torch::Tensor& patches, int batch_size) {
  torch::NoGradGuard no_grad;
  model->eval();
  std::vector<torch::Tensor> parts;
  for (int64_t b = 0; b < patches.size(0); b += batch_size) {
    auto batch = as_float_patches(patches.slice(0, b, std::min<int64_t>(patches.size(0), b + batch_size)));
    parts.push_back(fsq_indices(model->encode(batch), model->config().fsq));
  }
  if (parts.empty()) return torch::empty({0, model->config().codes_per_shape}, torch::kLong);
  return torch::cat(parts);
}

std::vector<StrokePath> decode_indices(VsqModel& model, const torch::Tensor& indices) {
  torch::NoGradGuard no_grad;
  model->eval();
  const auto& cfg = model->config();
  TORCH_CHECK(indices.dim() == 2 && indices.size(1) == cfg.codes_per_shape, "decode_indices: expected [N, xi]");
  if ((indices < 0).any().item<bool>() || (indices >= cfg.fsq.codebook_size()).any().item<bool>()) {
    throw std::out_of_range("decode_indices: code index out of range");
  }
  auto out = model->decode(fsq_levels(indices, cfg.fsq));
  auto width = out.width.to(torch::kDouble);
  auto color = out.color.to(torch::kDouble);
  std::vector<StrokePath> paths;
  for (int64_t i = 0; i < indices.size(0); ++i) {
    const Rgb c{color[i][0].item<double>(), color[i][1].item<double>(), color[i][2].item<double>()};
    paths.push_back(path_from_control(out.control[i], cfg, width[i].item<double>(), c));
  }
  return paths;
}

VsqEval evaluate_vsq(VsqModel& model, const torch::Tensor& patches, const torch::Tensor& colors, int batch_size) {
  torch::NoGradGuard no_grad;
  model->eval();
  VsqEval ev;
  const int64_t n = patches.size(0);
  if (n == 0) return ev;
  double se = 0.0;
  double geom = 0.0;
  double color_err = 0.0;
  for (int64_t b = 0; b < n; b += batch_size) {
    const int64_t e = std::min(n, b + batch_size);
    auto batch = as_float_patches(patches.slice(0, b, e));
    auto out = model->forward(batch);
    se += (model->render(out) - batch).pow(2).mean({1, 2, 3}).sum().item<double>();
    if (model->config().head_mode == HeadMode::stroke) {
      geom += geometric_loss(endpoint_subset(out.control)).sum().item<double>();
    }
    if (colors.defined()) color_err += (out.color - colors.slice(0, b, e).to(torch::kFloat)).abs().mean(1).sum().item<double>();
  }
  ev.mse = se / static_cast<double>(n);
  ev.geom = geom / static_cast<double>(n);
  if (colors.defined()) ev.color_mae = color_err / static_cast<double>(n);
  return ev;
}

namespace {

// Indices for one training step depend only on (seed, step) so a resumed run
// draws the same batches as an uninterrupted one.
std::vector<int64_t> batch_indices(uint64_t seed, int step, int batch, const std::vector<int64_t>& pool) {
  std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + static_cast<uint64_t>(step) + 1);
  std::vector<int64_t> out(batch);
  for (auto& v : out) v = pool[rng() % pool.size()];
  return out;
}

int load_state(const std::filesystem::path& path, VsqModel& model, torch::optim::Optimizer* optimizer) {
  torch::serialize::InputArchive ar;
  ar.load_from(path.string());
  torch::serialize::InputArchive m;
  ar.read("model", m);
  model->load(m);
  if (optimizer) {
    torch::serialize::InputArchive o;
    if (ar.try_read("optimizer", o)) optimizer->load(o);
  }
  c10::IValue step;
  return ar.try_read("step", step) ? static_cast<int>(step.toInt()) : 0;
}

}  // namespace

VsqTrainResult train_vsq(const torch::Tensor& patches, const VsqConfig& cfg, const VsqTrainOptions& opts,
                         const torch::Tensor& colors) {
  cfg.validate();
  const int64_t n = patches.size(0);
  if (n == 0) throw std::invalid_argument("train_vsq: empty corpus");
  if (opts.batch_size < 1 || opts.steps < 0) throw std::invalid_argument("train_vsq: invalid batch size or step count");

  std::vector<int64_t> order(n);
  for (int64_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 shuffle_rng(opts.seed);
  for (int64_t i = n - 1; i > 0; --i) std::swap(order[i], order[shuffle_rng() % static_cast<uint64_t>(i + 1)]);
  int64_t n_held = static_cast<int64_t>(std::floor(opts.held_out_fraction * static_cast<double>(n)));
  if (n_held >= n) n_held = n - 1;
  VsqTrainResult result;
  result.held_out_indices.assign(order.begin(), order.begin() + n_held);
  const std::vector<int64_t> train_pool(order.begin() + n_held, order.end());

  torch::manual_seed(opts.seed);
  result.model = VsqModel(cfg);
  auto& model = result.model;
  torch::optim::AdamW optimizer(model->parameters(),
                                torch::optim::AdamWOptions(opts.lr).weight_decay(opts.weight_decay));
  int start = 0;
  if (!opts.resume_from.empty()) start = load_state(opts.resume_from, model, &optimizer);

  std::ofstream metrics;
  if (!opts.metrics_log.empty()) {
    metrics.open(opts.metrics_log, start > 0 ? std::ios::app : std::ios::trunc);
    if (!metrics) throw std::runtime_error("cannot write " + opts.metrics_log.string());
  }

  model->train();
  for (int step = start; step < opts.steps; ++step) {
    const auto idx = batch_indices(opts.seed, step, opts.batch_size, train_pool);
    auto batch = as_float_patches(patches.index_select(0, torch::tensor(idx, torch::kLong)));
    auto loss = vsq_loss(model, batch);
    optimizer.zero_grad();
    loss.total.backward();
    optimizer.step();
    const bool last = step + 1 == opts.steps;
    if (opts.log_every > 0 && ((step + 1) % opts.log_every == 0 || last || step == start)) {
      VsqStepLog entry{step + 1, loss.total.item<double>(), loss.mse.item<double>(), loss.geom.item<double>()};
      result.log.push_back(entry);
      if (metrics) {
        metrics << json{{"step", entry.step}, {"loss", entry.loss}, {"mse", entry.mse}, {"geom", entry.geom}}.dump()
                << '\n';
      }
    }
  }

  if (n_held > 0) {
    auto held_idx = torch::tensor(result.held_out_indices, torch::kLong);
    result.held_out = evaluate_vsq(model, patches.index_select(0, held_idx),
                                   colors.defined() ? colors.index_select(0, held_idx) : torch::Tensor());
  }
  if (!opts.checkpoint.empty()) save_vsq(opts.checkpoint, model, &optimizer, std::max(start, opts.steps));
  return result;
}

void save_vsq(const std::filesystem::path& path, VsqModel& model, torch::optim::Optimizer* optimizer, int step) {
  torch::serialize::OutputArchive ar;
  ar.write("config", c10::IValue(json(model->config()).dump()));
  torch::serialize::OutputArchive m;
  model->save(m);
  ar.write("model", m);
  if (optimizer) {
    torch::serialize::OutputArchive o;
    optimizer->save(o);
    ar.write("optimizer", o);
  }
  ar.write("step", c10::IValue(static_cast<int64_t>(step)));
  ar.save_to(path.string());
}

VsqModel load_vsq(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw std::runtime_error("missing VSQ checkpoint: " + path.string());
  torch::serialize::InputArchive ar;
  ar.load_from(path.string());
  c10::IValue cfg_json;
  ar.read("config", cfg_json);
  const VsqConfig cfg = json::parse(cfg_json.toStringRef()).get<VsqConfig>();
  VsqModel model(cfg);
  load_state(path, model, nullptr);
  model->eval();
  return model;
}

}  // namespace svgen
