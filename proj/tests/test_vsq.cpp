#include <filesystem>
#include <random>

#include "oracles.hpp"
#include "svgen/dataprep.hpp"
#include "svgen/corpus_io.hpp"
#include "svgen/fsq.hpp"
#include "svgen/vsq.hpp"

// torch defines its own CHECK
#undef CHECK
#include <doctest.h>

using namespace svgen;
namespace fs = std::filesystem;

namespace {

VsqConfig small_config() {
  VsqConfig c;
  c.latent_dim = 64;
  c.encoder_channels = 8;
  c.render.resolution = 64;
  c.render.samples_per_segment = 12;
  return c;
}

torch::Tensor small_patches(int n_samples, int res) {
  SyntheticOptions opts;
  opts.patch.patch_size = res;
  return stack_patches_u8(generate_synthetic_corpus(n_samples, 4, opts));
}

}  // namespace

TEST_SUITE("vsq") {

TEST_CASE("fsq index formula") {
  const FsqConfig cfg;
  CHECK(cfg.codebook_size() == 4375);
  CHECK((cfg.basis() == std::vector<int64_t>{1, 7, 35, 175, 875}));
  const std::vector<int> zero{0, 0, 0, 0, 0};
  const std::vector<int> ex{3, 2, 0, 4, 1};
  const std::vector<int> top{6, 4, 4, 4, 4};
  CHECK(code_index(zero, cfg) == 0);
  CHECK(code_index(ex, cfg) == 1592);
  CHECK(code_index(top, cfg) == 4374);
  CHECK(code_unindex(0, cfg) == zero);
  CHECK(code_unindex(1592, cfg) == ex);
  const std::vector<int> bad{7, 0, 0, 0, 0};
  CHECK_THROWS_AS(code_index(bad, cfg), std::out_of_range);
  CHECK_THROWS_AS(code_unindex(4375, cfg), std::out_of_range);
  CHECK_THROWS_AS(code_unindex(-1, cfg), std::out_of_range);
}

TEST_CASE("fsq bijection against enumeration") {
  const FsqConfig cfg;
  const auto all = oracle::enumerate_codes(cfg.levels);
  REQUIRE(all.size() == 4375);
  for (std::size_t k = 0; k < all.size(); ++k) {
    CHECK(code_index(all[k], cfg) == static_cast<int64_t>(k));
    CHECK(code_unindex(static_cast<int64_t>(k), cfg) == all[k]);
  }
  auto levels = torch::empty({4375, 5});
  for (std::size_t k = 0; k < all.size(); ++k) {
    for (int j = 0; j < 5; ++j) levels[static_cast<int64_t>(k)][j] = all[k][j];
  }
  const auto idx = fsq_indices(levels, cfg);
  CHECK(torch::equal(idx, torch::arange(4375, torch::kLong)));
  CHECK(torch::equal(fsq_levels(idx, cfg), levels));
}

TEST_CASE("fsq quantization") {
  const FsqConfig cfg;
  // very negative inputs squash to the lowest level
  CHECK(torch::equal(fsq_quantize(torch::full({1, 5}, -50.0), cfg), torch::zeros({1, 5})));
  const auto q = fsq_quantize(torch::randn({64, 5}) * 3, cfg);
  CHECK(torch::equal(q, torch::round(q)));
  CHECK(q.min().item<float>() >= 0);
  CHECK((q.select(1, 0) <= 6).all().item<bool>());
  CHECK((q.narrow(1, 1, 4) <= 4).all().item<bool>());

  auto z1 = torch::randn({8, 5}, torch::kDouble).requires_grad_(true);
  fsq_quantize(z1, cfg).sum().backward();
  auto z2 = z1.detach().clone().requires_grad_(true);
  fsq_bound(z2, cfg).sum().backward();
  CHECK(torch::allclose(z1.grad(), z2.grad()));
}

TEST_CASE("geometric loss oracle") {
  CHECK(geometric_loss(std::vector<Point>{{0, 0}, {1, 0}, {2, 0}}) == 0.0);
  const std::vector<Point> p{{0, 0}, {1, 0}, {3, 0}};
  CHECK(std::abs(geometric_loss(p) - 0.125) < 1e-9);
  CHECK(std::abs(oracle::geometric_loss(p) - 0.125) < 1e-12);

  std::mt19937_64 rng(8);
  for (int t = 0; t < 50; ++t) {
    std::vector<Point> pts;
    const int n = 2 + static_cast<int>(rng() % 6);
    for (int i = 0; i < n; ++i) pts.push_back({oracle::uniform(rng, -1, 1), oracle::uniform(rng, -1, 1)});
    const double ref = oracle::geometric_loss(pts);
    CHECK(geometric_loss(pts) == doctest::Approx(ref).epsilon(1e-9));
    CHECK(geometric_loss(pts) >= 0.0);
    auto tensor = torch::empty({n, 2}, torch::kDouble);
    for (int i = 0; i < n; ++i) {
      tensor[i][0] = pts[i].x;
      tensor[i][1] = pts[i].y;
    }
    CHECK(geometric_loss(tensor).item<double>() == doctest::Approx(ref).epsilon(1e-9));
    const double c = oracle::uniform(rng, 0.1, 5);
    std::vector<Point> scaled;
    for (auto q : pts) scaled.push_back(c * q);
    CHECK(geometric_loss(scaled) == doctest::Approx(c * c * ref).epsilon(1e-6));
  }
  // interior order matters
  const std::vector<Point> a{{0, 0}, {1, 0}, {3, 1}, {4, 4}};
  const std::vector<Point> b{{0, 0}, {3, 1}, {1, 0}, {4, 4}};
  CHECK(geometric_loss(a) != doctest::Approx(geometric_loss(b)));
  CHECK_THROWS(geometric_loss(std::vector<Point>{{0, 0}}));
}

TEST_CASE("decoder arity") {
  torch::manual_seed(0);
  VsqConfig c = small_config();
  VsqModel stroke(c);
  stroke->eval();
  const auto patches = torch::ones({2, 3, 64, 64});
  auto out = stroke->forward(patches);
  CHECK(out.control.sizes() == torch::IntArrayRef({2, 7, 2}));
  CHECK(out.control.numel() / 2 == 14);
  CHECK(out.levels.sizes() == torch::IntArrayRef({2, 1, 5}));

  VsqConfig s = small_config();
  s.head_mode = HeadMode::shape;
  s.segments = 15;
  s.enable_color = true;
  VsqModel shape(s);
  shape->eval();
  out = shape->forward(patches);
  CHECK(out.control.sizes() == torch::IntArrayRef({2, 45, 2}));
  CHECK(out.color.sizes() == torch::IntArrayRef({2, 3}));
  const auto path = decode_codes(shape, std::vector<FsqCode>{make_code(17, s.fsq)});
  CHECK(path.closed);
  CHECK(path.segments.size() == 15);
  CHECK(path.segments.back().end == path.start);
}

TEST_CASE("encoding and decoding contracts") {
  torch::manual_seed(1);
  VsqConfig c = small_config();
  c.codes_per_shape = 2;
  VsqModel model(c);
  model->eval();
  const auto patches = small_patches(2, 64);
  const auto patch = patches[0].to(torch::kFloat) / 255.0;
  const auto a = encode_patch(model, patch);
  const auto b = encode_patch(model, patch);
  REQUIRE(a.size() == 2);
  CHECK((a == b));
  for (const auto& code : a) {
    CHECK(code.index >= 0);
    CHECK(code.index < 4375);
  }
  CHECK(decode_codes(model, a) == decode_codes(model, b));
  CHECK_THROWS_AS(decode_codes(model, std::vector<FsqCode>{a[0]}), std::invalid_argument);
  CHECK_THROWS_AS(encode_patch(model, torch::ones({3, 32, 32})), std::invalid_argument);
  const auto idx = encode_indices(model, patches);
  CHECK(idx.sizes() == torch::IntArrayRef({patches.size(0), 2}));
}

TEST_CASE("loss terms and gradient flow") {
  torch::manual_seed(2);
  VsqConfig c = small_config();
  c.alpha = 0.0;
  VsqModel model(c);
  const auto patches = small_patches(2, 64).narrow(0, 0, 8).to(torch::kFloat) / 255.0;
  auto loss = vsq_loss(model, patches);
  CHECK(loss.total.item<double>() == doctest::Approx(loss.mse.item<double>()));
  loss.total.backward();
  double grad_norm = 0;
  for (const auto& p : model->parameters()) {
    if (p.grad().defined()) grad_norm += p.grad().norm().item<double>();
  }
  CHECK(grad_norm > 0);

  auto line = torch::tensor({{0.25, 0.5}, {0.5, 0.5}, {0.75, 0.5}}, torch::kDouble);
  CHECK(geometric_loss(line).item<double>() == 0.0);
}

TEST_CASE("single patch overfit") {
  VsqConfig c = small_config();
  VsqTrainOptions o;
  o.steps = 200;
  o.batch_size = 4;
  o.held_out_fraction = 0;
  o.log_every = 1;
  const auto patch = small_patches(1, 64).narrow(0, 0, 1);
  const auto r = train_vsq(patch, c, o);
  REQUIRE(r.log.size() == 200);
  CHECK(r.log.front().loss / r.log.back().loss >= 10.0);
}

TEST_CASE("resumed training follows the same trajectory") {
  const VsqConfig c = small_config();
  const auto patches = small_patches(3, 64);
  const auto dir = fs::temp_directory_path() / "svgen_test_resume";
  fs::remove_all(dir);
  fs::create_directories(dir);
  VsqTrainOptions o;
  o.batch_size = 4;
  o.log_every = 1;
  o.seed = 9;
  o.steps = 12;
  const auto full = train_vsq(patches, c, o);
  o.steps = 6;
  o.checkpoint = dir / "half.pt";
  train_vsq(patches, c, o);
  o.steps = 12;
  o.checkpoint.clear();
  o.resume_from = dir / "half.pt";
  const auto resumed = train_vsq(patches, c, o);
  REQUIRE(resumed.log.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(resumed.log[i].step == full.log[6 + i].step);
    CHECK(resumed.log[i].loss == doctest::Approx(full.log[6 + i].loss).epsilon(1e-5));
  }
  const auto loaded = load_vsq(dir / "half.pt");
  CHECK(loaded->config().latent_dim == c.latent_dim);
  fs::remove_all(dir);
}

TEST_CASE("config json round trip") {
  VsqConfig c = small_config();
  c.head_mode = HeadMode::shape;
  c.enable_width = true;
  c.fsq.levels = {8, 5, 5, 5};
  nlohmann::json j = c;
  const VsqConfig back = j.get<VsqConfig>();
  CHECK(nlohmann::json(back) == j);
  VsqConfig bad = c;
  bad.render.resolution = 50;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

}  // TEST_SUITE
