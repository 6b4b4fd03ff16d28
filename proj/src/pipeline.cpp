#include "svgen/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <Eigen/Core>
#include <torch/version.h>

#include "svgen/corpus_io.hpp"
#include "svgen/dataprep.hpp"
#include "svgen/image_io.hpp"
#include "svgen/metrics.hpp"
#include "svgen/svg_io.hpp"

namespace svgen {

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

std::vector<std::string> split_key(const std::string& dotted) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : dotted) {
    if (c == '.') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  for (const auto& p : parts) {
    if (p.empty()) throw ConfigError("malformed config key '" + dotted + "'");
  }
  return parts;
}

bool compatible(const Json& def, const Json& value) {
  if (def.is_boolean()) return value.is_boolean();
  if (def.is_number_integer()) return value.is_number_integer();
  if (def.is_number()) return value.is_number();
  if (def.is_string()) return value.is_string();
  if (def.is_array()) return value.is_array();
  if (def.is_object()) return value.is_object();
  return true;
}

void merge_checked(Json& base, const Json& update, const std::string& prefix) {
  if (!update.is_object()) throw ConfigError("config section '" + prefix + "' must be an object");
  for (const auto& [key, value] : update.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!base.contains(key)) throw ConfigError("unknown config key '" + path + "'");
    if (base[key].is_object()) {
      merge_checked(base[key], value, path);
    } else {
      if (!compatible(base[key], value)) throw ConfigError("config key '" + path + "' has the wrong type");
      base[key] = value;
    }
  }
}

template <typename Fn>
auto config_guard(Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
}

uint64_t fnv1a(const void* data, std::size_t n, uint64_t h = 1469598103934665603ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifact("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

Json versions() {
  return {{"svgen", kSvgenVersion},
          {"torch", TORCH_VERSION},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)}};
}

void write_manifest(const fs::path& dir, const std::string& stage, const std::string& hash, const PipelineConfig& cfg,
                    const Json& extra) {
  Json m{{"stage", stage}, {"config_hash", hash}, {"seed", cfg.seed()}, {"config", cfg.json()},
         {"versions", versions()}};
  for (const auto& [k, v] : extra.items()) m[k] = v;
  write_json(dir / "manifest.json", m);
}

fs::path fresh_dir(const fs::path& dir) {
  if (fs::exists(dir)) fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string path_setting(const PipelineConfig& cfg, const std::string& key) {
  return cfg.at("paths." + key).get<std::string>();
}

fs::path corpus_dir(const PipelineConfig& cfg) {
  const std::string p = path_setting(cfg, "corpus");
  const fs::path dir = p.empty() ? stage_dir(cfg, "preprocess") : fs::path(p);
  if (!fs::exists(dir / "index.jsonl")) throw MissingArtifact("corpus not found at " + dir.string() + " (run preprocess)");
  return dir;
}

fs::path vsq_checkpoint(const PipelineConfig& cfg) {
  const std::string p = path_setting(cfg, "vsq_checkpoint");
  const fs::path file = p.empty() ? stage_dir(cfg, "train-vsq") / "vsq.pt" : fs::path(p);
  if (!fs::exists(file)) throw MissingArtifact("VSQ checkpoint not found at " + file.string() + " (run train-vsq)");
  return file;
}

fs::path tokens_file(const PipelineConfig& cfg) {
  const std::string p = path_setting(cfg, "tokens");
  const fs::path file = p.empty() ? stage_dir(cfg, "tokenize") / "tokens.jsonl" : fs::path(p);
  if (!fs::exists(file)) throw MissingArtifact("tokenized corpus not found at " + file.string() + " (run tokenize)");
  return file;
}

fs::path art_checkpoint(const PipelineConfig& cfg) {
  const std::string p = path_setting(cfg, "art_checkpoint");
  const fs::path file = p.empty() ? stage_dir(cfg, "train-art") / "art.pt" : fs::path(p);
  if (!fs::exists(file)) throw MissingArtifact("ART checkpoint not found at " + file.string() + " (run train-art)");
  return file;
}

fs::path require_file(const std::string& p, const char* what) {
  if (p.empty()) throw ConfigError(std::string("dataset.") + what + " must be set");
  if (!fs::exists(p)) throw MissingArtifact(std::string("missing ") + what + ": " + p);
  return p;
}

}  // namespace

PipelineConfig::PipelineConfig() : data_(defaults()) {}

Json PipelineConfig::defaults() {
  Json vsq = VsqConfig{};
  vsq["steps"] = 3000;
  vsq["batch_size"] = 16;
  vsq["lr"] = 1e-3;
  vsq["weight_decay"] = 0.0;
  vsq["held_out_fraction"] = 0.1;
  vsq["log_every"] = 50;
  return {
      {"seed", 0},
      {"work_dir", "work"},
      {"dataset",
       {{"kind", "synthetic"},
        {"n", 200},
        {"limit", 0},
        {"max_len_fraction", 0.11},
        {"grid", kDefaultGrid},
        {"patch_size", 128},
        {"stroke_width", 0.025},
        {"safe_area", 0.9},
        {"antialias_band", 1.0},
        {"canvas_size", 128},
        {"colored", false},
        {"variable_width", false},
        {"indexed_prompts", false},
        {"mnist_images", ""},
        {"mnist_labels", ""},
        {"figr8_root", ""},
        {"figr8_invert", true},
        {"fonts_manifest", ""}}},
      {"vsq", vsq},
      {"tokenize", {{"min_codes", 10}}},
      {"art",
       {{"d_model", 128},
        {"n_heads", 8},
        {"n_blocks", 4},
        {"context_len", kContextLen},
        {"text_dim", 64},
        {"steps", 2000},
        {"batch_size", 8},
        {"lr", 1e-3},
        {"weight_decay", 0.0},
        {"warmup_steps", 100},
        {"log_every", 50}}},
      {"generate", {{"top_p", 0.9}, {"temperature", 1.0}, {"max_len", kContextLen}, {"grammar_mask", true}, {"n_samples", 4}}},
      {"postproc", {{"mode", "pc"}, {"max_dist", 8.0 / 256.0}}},
      {"eval", {{"embedding_dim", 64}, {"resolution", 128}}},
      {"paths", {{"corpus", ""}, {"vsq_checkpoint", ""}, {"tokens", ""}, {"art_checkpoint", ""}}},
  };
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  if (!fs::exists(path)) throw MissingArtifact("config file not found: " + path.string());
  PipelineConfig cfg;
  Json file;
  try {
    file = Json::parse(read_text(path));
  } catch (const Json::parse_error& e) {
    throw ConfigError("malformed config " + path.string() + ": " + e.what());
  }
  merge_checked(cfg.data_, file, "");
  return cfg;
}

void PipelineConfig::set(const std::string& dotted_key, const Json& value) {
  const auto parts = split_key(dotted_key);
  Json* node = &data_;
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object() || !node->contains(parts[i]) || !(*node)[parts[i]].is_object()) {
      throw ConfigError("unknown config key '" + dotted_key + "'");
    }
    node = &(*node)[parts[i]];
  }
  if (!node->contains(parts.back())) throw ConfigError("unknown config key '" + dotted_key + "'");
  Json& slot = (*node)[parts.back()];
  if (slot.is_object()) {
    merge_checked(slot, value, dotted_key);
    return;
  }
  if (!compatible(slot, value)) throw ConfigError("config key '" + dotted_key + "' has the wrong type");
  slot = value;
}

void PipelineConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key=value: " + assignment);
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  Json value = Json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  // Integers given where a float is expected are fine; the reverse is not.
  set(key, value);
}

const Json& PipelineConfig::at(const std::string& dotted_key) const {
  const Json* node = &data_;
  for (const auto& part : split_key(dotted_key)) {
    if (!node->is_object() || !node->contains(part)) throw ConfigError("unknown config key '" + dotted_key + "'");
    node = &(*node)[part];
  }
  return *node;
}

uint64_t PipelineConfig::seed() const {
  return config_guard([&] { return data_.at("seed").get<uint64_t>(); });
}

fs::path PipelineConfig::work_dir() const { return data_.at("work_dir").get<std::string>(); }

VsqConfig PipelineConfig::vsq() const {
  return config_guard([&] {
    VsqConfig c = data_.at("vsq").get<VsqConfig>();
    c.validate();
    return c;
  });
}

VsqTrainOptions PipelineConfig::vsq_train() const {
  return config_guard([&] {
    const auto& j = data_.at("vsq");
    VsqTrainOptions o;
    o.steps = j.at("steps").get<int>();
    o.batch_size = j.at("batch_size").get<int>();
    o.lr = j.at("lr").get<double>();
    o.weight_decay = j.at("weight_decay").get<double>();
    o.held_out_fraction = j.at("held_out_fraction").get<double>();
    o.log_every = j.at("log_every").get<int>();
    o.seed = seed();
    if (o.steps < 0 || o.batch_size < 1 || !(o.lr > 0)) throw std::invalid_argument("vsq training options out of range");
    return o;
  });
}

ArtConfig PipelineConfig::art() const {
  return config_guard([&] {
    const auto& j = data_.at("art");
    ArtConfig c;
    c.d_model = j.at("d_model").get<int>();
    c.n_heads = j.at("n_heads").get<int>();
    c.n_blocks = j.at("n_blocks").get<int>();
    c.context_len = j.at("context_len").get<int>();
    c.text_dim = j.at("text_dim").get<int>();
    c.vocab.grid = data_.at("dataset").at("grid").get<int>();
    c.vocab.n_codes = vsq().fsq.codebook_size();
    c.validate();
    return c;
  });
}

ArtTrainOptions PipelineConfig::art_train() const {
  return config_guard([&] {
    const auto& j = data_.at("art");
    ArtTrainOptions o;
    o.steps = j.at("steps").get<int>();
    o.batch_size = j.at("batch_size").get<int>();
    o.lr = j.at("lr").get<double>();
    o.weight_decay = j.at("weight_decay").get<double>();
    o.warmup_steps = j.at("warmup_steps").get<int>();
    o.log_every = j.at("log_every").get<int>();
    o.seed = seed();
    if (o.steps < 0 || o.batch_size < 1 || !(o.lr > 0)) throw std::invalid_argument("art training options out of range");
    return o;
  });
}

GenerateOptions PipelineConfig::generate() const {
  return config_guard([&] {
    const auto& j = data_.at("generate");
    GenerateOptions o;
    o.top_p = j.at("top_p").get<double>();
    o.temperature = j.at("temperature").get<double>();
    o.max_len = j.at("max_len").get<int>();
    o.grammar_mask = j.at("grammar_mask").get<bool>();
    o.seed = seed();
    if (o.top_p > 1.0 || o.max_len < 4) throw std::invalid_argument("generate options out of range");
    return o;
  });
}

PostprocConfig PipelineConfig::postproc() const {
  return config_guard([&] {
    PostprocConfig c;
    c.mode = parse_postproc_mode(data_.at("postproc").at("mode").get<std::string>());
    c.max_dist = data_.at("postproc").at("max_dist").get<double>();
    c.validate();
    return c;
  });
}

std::string content_hash(const Json& value) {
  const std::string s = value.dump();
  return hex(fnv1a(s.data(), s.size()));
}

std::string stage_hash(const PipelineConfig& cfg, const std::string& stage) {
  const auto& j = cfg.json();
  Json key{{"stage", stage}};
  auto corpus_key = [&]() -> Json {
    const std::string p = j["paths"]["corpus"];
    return p.empty() ? Json(stage_hash(cfg, "preprocess")) : Json(p);
  };
  if (stage == "preprocess") {
    key["dataset"] = j["dataset"];
    key["seed"] = j["seed"];
  } else if (stage == "train-vsq") {
    key["vsq"] = j["vsq"];
    key["seed"] = j["seed"];
    key["corpus"] = corpus_key();
  } else if (stage == "tokenize") {
    key["tokenize"] = j["tokenize"];
    const std::string p = j["paths"]["vsq_checkpoint"];
    key["vsq"] = p.empty() ? Json(stage_hash(cfg, "train-vsq")) : Json(p);
    key["corpus"] = corpus_key();
  } else if (stage == "train-art") {
    key["art"] = j["art"];
    key["seed"] = j["seed"];
    const std::string p = j["paths"]["tokens"];
    key["tokens"] = p.empty() ? Json(stage_hash(cfg, "tokenize")) : Json(p);
  } else {
    throw std::invalid_argument("unknown stage " + stage);
  }
  return content_hash(key);
}

fs::path stage_dir(const PipelineConfig& cfg, const std::string& stage) {
  static const std::map<std::string, std::string> names = {
      {"preprocess", "preprocess"}, {"train-vsq", "vsq"}, {"tokenize", "tokenize"}, {"train-art", "art"}};
  return cfg.work_dir() / (names.at(stage) + "-" + stage_hash(cfg, stage).substr(0, 12));
}

std::string directory_hash(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), dir);
    if (rel == "manifest.json") continue;
    files.push_back(rel);
  }
  std::sort(files.begin(), files.end());
  uint64_t h = 1469598103934665603ULL;
  for (const auto& rel : files) {
    const std::string name = rel.generic_string();
    h = fnv1a(name.data(), name.size() + 1, h);
    const std::string content = read_text(dir / rel);
    h = fnv1a(content.data(), content.size(), h);
  }
  return hex(h);
}

fs::path run_preprocess(const PipelineConfig& cfg, const std::optional<fs::path>& out) {
  const auto& d = cfg.at("dataset");
  PatchOptions patch;
  DatasetKind kind{};
  config_guard([&] {
    kind = parse_dataset_kind(d.at("kind").get<std::string>());
    patch.patch_size = d.at("patch_size").get<int>();
    patch.grid = d.at("grid").get<int>();
    patch.stroke_width = d.at("stroke_width").get<double>();
    patch.safe_area = d.at("safe_area").get<double>();
    patch.max_len_fraction = d.at("max_len_fraction").get<double>();
    patch.antialias_band = d.at("antialias_band").get<double>();
    if (!(patch.max_len_fraction > 0)) throw std::invalid_argument("max_len_fraction must be positive");
    if (patch.grid < 2) throw std::invalid_argument("grid must be >= 2");
    patch.render_config().validate();
    return 0;
  });
  const auto limit = static_cast<std::size_t>(d.at("limit").get<int64_t>());

  PreprocessStats stats;
  std::vector<SampleRecord> samples;
  switch (kind) {
    case DatasetKind::synthetic: {
      SyntheticOptions so;
      so.patch = patch;
      so.canvas_size = d.at("canvas_size").get<int>();
      so.colored = d.at("colored").get<bool>();
      so.variable_width = d.at("variable_width").get<bool>();
      so.indexed_prompts = d.at("indexed_prompts").get<bool>();
      const int n = d.at("n").get<int>();
      if (n < 1) throw ConfigError("dataset.n must be >= 1");
      samples = generate_synthetic_corpus(n, cfg.seed(), so, &stats);
      break;
    }
    case DatasetKind::mnist:
      samples = load_mnist(require_file(d.at("mnist_images").get<std::string>(), "mnist_images"),
                           require_file(d.at("mnist_labels").get<std::string>(), "mnist_labels"), limit, patch, &stats);
      break;
    case DatasetKind::figr8:
      samples = load_figr8(require_file(d.at("figr8_root").get<std::string>(), "figr8_root"), limit,
                           d.at("figr8_invert").get<bool>(), patch, &stats);
      break;
    case DatasetKind::fonts:
      samples = load_fonts(require_file(d.at("fonts_manifest").get<std::string>(), "fonts_manifest"), limit, patch,
                           &stats);
      break;
  }

  const fs::path dir = out ? *out : fresh_dir(stage_dir(cfg, "preprocess"));
  fs::create_directories(dir);
  write_corpus(dir, samples);
  const Json info{{"samples", stats.samples}, {"patches", stats.patches}, {"degenerate_dropped", stats.degenerate_dropped}};
  write_json(dir / "stats.json", info);
  write_manifest(dir, "preprocess", stage_hash(cfg, "preprocess"), cfg,
                 {{"stats", info}, {"corpus_hash", directory_hash(dir)}});
  std::cout << "preprocess: " << stats.samples << " samples, " << stats.patches << " patches, "
            << stats.degenerate_dropped << " degenerate segments dropped -> " << dir.string() << "\n";
  return dir;
}

namespace {

torch::Tensor patch_colors(const std::vector<SampleRecord>& samples) {
  std::vector<float> values;
  for (const auto& s : samples) {
    for (const auto& p : s.patches) {
      Rgb c;
      if (p.geometry) {
        const auto& col = p.geometry->closed ? p.geometry->fill_color : p.geometry->stroke_color;
        if (col) c = *col;
      }
      values.insert(values.end(), {static_cast<float>(c.r), static_cast<float>(c.g), static_cast<float>(c.b)});
    }
  }
  return torch::tensor(values).view({-1, 3});
}

}  // namespace

fs::path run_train_vsq(const PipelineConfig& cfg) {
  const VsqConfig vcfg = cfg.vsq();
  VsqTrainOptions opts = cfg.vsq_train();
  const fs::path corpus = corpus_dir(cfg);
  const auto samples = read_corpus(corpus);
  const auto patches = stack_patches_u8(samples);
  if (patches.size(0) == 0) throw ConfigError("train-vsq: the corpus has no patches");
  if (patches.size(2) != vcfg.render.resolution) throw ConfigError("train-vsq: patch size differs from vsq.resolution");

  const fs::path dir = fresh_dir(stage_dir(cfg, "train-vsq"));
  opts.checkpoint = dir / "vsq.pt";
  opts.metrics_log = dir / "metrics.jsonl";
  auto result = train_vsq(patches, vcfg, opts, vcfg.enable_color ? patch_colors(samples) : torch::Tensor());
  Json ev{{"held_out_mse", result.held_out.mse}, {"held_out_geom", result.held_out.geom},
          {"held_out_patches", result.held_out_indices.size()}};
  if (result.held_out.color_mae) ev["held_out_color_mae"] = *result.held_out.color_mae;
  write_json(dir / "eval.json", ev);
  write_manifest(dir, "train-vsq", stage_hash(cfg, "train-vsq"), cfg, {{"corpus", corpus.string()}, {"eval", ev}});
  std::cout << "train-vsq: held-out MSE " << result.held_out.mse << " -> " << dir.string() << "\n";
  return dir;
}

fs::path run_tokenize(const PipelineConfig& cfg) {
  const fs::path corpus = corpus_dir(cfg);
  const fs::path ckpt = vsq_checkpoint(cfg);
  const int min_codes = config_guard([&] { return cfg.at("tokenize.min_codes").get<int>(); });
  auto model = load_vsq(ckpt);
  const auto samples = read_corpus(corpus);
  const auto patches = stack_patches_u8(samples);
  const auto codes = patches.size(0) > 0 ? encode_indices(model, patches) : torch::empty({0, 1}, torch::kLong);
  const int xi = model->config().codes_per_shape;

  std::vector<TokenizedSample> all;
  int64_t row = 0;
  for (const auto& s : samples) {
    TokenizedSample t{s.source_id, s.prompt, s.label, xi, {}};
    for (const auto& p : s.patches) {
      for (int k = 0; k < xi; ++k) t.pairs.push_back({p.anchor, codes[row][k].item<int64_t>()});
      ++row;
    }
    all.push_back(std::move(t));
  }
  FilterReport report;
  const auto kept = filter_by_length(all, &report, count_words, min_codes, cfg.art().context_len);

  const fs::path dir = fresh_dir(stage_dir(cfg, "tokenize"));
  write_tokenized(dir / "tokens.jsonl", kept);
  write_tokenized(dir / "tokens_all.jsonl", all);
  const Json rep{{"total", report.total},
                 {"kept", report.kept},
                 {"too_few_codes", report.too_few_codes},
                 {"too_long", report.too_long},
                 {"dropped_fraction", report.dropped_fraction()},
                 {"dropped_percent", 100.0 * report.dropped_fraction()}};
  write_json(dir / "filter_report.json", rep);
  write_manifest(dir, "tokenize", stage_hash(cfg, "tokenize"), cfg,
                 {{"corpus", corpus.string()}, {"vsq_checkpoint", ckpt.string()}, {"filter", rep}});
  std::printf("tokenize: kept %zu of %zu samples (%.2f%% dropped) -> %s\n", report.kept, report.total,
              100.0 * report.dropped_fraction(), dir.string().c_str());
  return dir;
}

fs::path run_train_art(const PipelineConfig& cfg) {
  const ArtConfig acfg = cfg.art();
  ArtTrainOptions opts = cfg.art_train();
  const fs::path tokens = tokens_file(cfg);
  const auto corpus = read_tokenized(tokens);
  if (corpus.empty()) throw ConfigError("train-art: the tokenized corpus is empty");
  const fs::path dir = fresh_dir(stage_dir(cfg, "train-art"));
  opts.checkpoint = dir / "art.pt";
  opts.metrics_log = dir / "metrics.jsonl";
  auto result = train_art(corpus, acfg, opts);
  const Json summary{{"initial_loss", result.initial_loss}, {"final_loss", result.final_loss}, {"samples", corpus.size()}};
  write_json(dir / "summary.json", summary);
  write_manifest(dir, "train-art", stage_hash(cfg, "train-art"), cfg, {{"tokens", tokens.string()}, {"summary", summary}});
  std::cout << "train-art: loss " << result.initial_loss << " -> " << result.final_loss << " -> " << dir.string() << "\n";
  return dir;
}

namespace {

/// Renders a patch-local path at the VSQ resolution for encoding.
torch::Tensor context_patch(const StrokePath& path, const VsqConfig& vcfg) {
  StrokePath p = path;
  if (p.closed) {
    if (!p.fill_color) p.fill_color = Rgb{};
    return render_filled(p, vcfg.render);
  }
  if (!p.width) p.width = vcfg.default_width;
  return render_stroke(p, vcfg.render);
}

}  // namespace

fs::path run_generate(const PipelineConfig& cfg, const GenerateRequest& req) {
  const fs::path art_ckpt = art_checkpoint(cfg);
  const fs::path vsq_ckpt = vsq_checkpoint(cfg);
  GenerateOptions gopts = cfg.generate();
  if (req.n_samples < 1) throw ConfigError("n_samples must be >= 1");
  auto art = load_art(art_ckpt);
  auto vsq = load_vsq(vsq_ckpt);
  const auto& vcfg = vsq->config();
  const int xi = vcfg.codes_per_shape;
  const int grid = art->config().vocab.grid;
  const int canvas = config_guard([&] { return cfg.at("dataset.canvas_size").get<int>(); });

  VectorDocument context_doc;
  std::vector<CodePair> context;
  std::string context_text;
  if (req.context_svg) {
    if (!fs::exists(*req.context_svg)) throw MissingArtifact("context SVG not found: " + req.context_svg->string());
    context_text = read_text(*req.context_svg);
    context_doc = parse_svg(context_text, grid);
    if (context_doc.grid != grid) throw ConfigError("context SVG grid differs from the model grid");
    for (const auto& s : context_doc.strokes) {
      const auto codes = encode_patch(vsq, context_patch(s.path, vcfg));
      for (const auto& c : codes) context.push_back({s.anchor, c.index});
    }
  }

  Json key{{"art", art_ckpt.string()}, {"vsq", vsq_ckpt.string()}, {"generate", cfg.at("generate")},
           {"seed", cfg.seed()}, {"prompt", req.prompt}, {"n", req.n_samples}, {"context", context_text}};
  key["art_hash"] = stage_hash(cfg, "train-art");
  const std::string hash = content_hash(key);
  const std::string stage = req.context_svg ? "complete" : "generate";
  const fs::path dir = req.out ? *req.out : fresh_dir(cfg.work_dir() / (stage + "-" + hash.substr(0, 12)));
  fs::create_directories(dir);

  std::ofstream tokens(dir / "tokens.jsonl");
  std::ofstream prompts(dir / "prompts.txt");
  int strict_ok = 0;
  for (int i = 0; i < req.n_samples; ++i) {
    gopts.seed = cfg.seed() * 1000003ULL + static_cast<uint64_t>(i);
    const TokenSequence seq = generate(art, req.prompt, context, gopts);
    bool strict = true;
    try {
      parse_sequence(seq, ParseMode::strict, art->config().vocab);
    } catch (const SequenceError&) {
      strict = false;
    }
    strict_ok += strict ? 1 : 0;
    const ParsedSequence parsed = parse_sequence(seq, ParseMode::tolerant, art->config().vocab);

    VectorDocument doc = context_doc;
    doc.canvas_size = canvas;
    doc.grid = grid;
    std::vector<int64_t> flat;
    std::vector<Anchor> anchors;
    for (std::size_t k = context.size(); k + xi <= parsed.pairs.size(); k += static_cast<std::size_t>(xi)) {
      anchors.push_back(parsed.pairs[k].theta);
      for (int m = 0; m < xi; ++m) flat.push_back(parsed.pairs[k + m].code);
    }
    if (!anchors.empty()) {
      const auto idx = torch::tensor(flat, torch::kLong).view({static_cast<int64_t>(anchors.size()), xi});
      const auto paths = decode_indices(vsq, idx);
      for (std::size_t k = 0; k < paths.size(); ++k) doc.strokes.push_back({paths[k], anchors[k]});
    }
    char name[32];
    std::snprintf(name, sizeof name, "sample_%03d", i);
    write_text(dir / (std::string(name) + ".svg"), document_to_svg(doc));
    const RenderConfig rc{canvas, vcfg.render.antialias_band, vcfg.render.samples_per_segment};
    write_png(dir / (std::string(name) + ".png"), render_document(doc, rc, vcfg.default_width));

    Json pairs = Json::array();
    for (const auto& p : parsed.pairs) pairs.push_back({p.theta.x, p.theta.y, p.code});
    tokens << Json{{"sample", i}, {"prompt", req.prompt}, {"ids", seq.ids}, {"strict", strict},
                   {"terminated", parsed.terminated}, {"pairs", pairs}}
                  .dump()
           << '\n';
    prompts << req.prompt << '\n';
  }
  write_manifest(dir, stage, hash, cfg,
                 {{"art_checkpoint", art_ckpt.string()},
                  {"vsq_checkpoint", vsq_ckpt.string()},
                  {"prompt", req.prompt},
                  {"context_pairs", context.size()},
                  {"n_samples", req.n_samples},
                  {"strict_parse", strict_ok}});
  std::cout << stage << ": " << req.n_samples << " samples (" << strict_ok << " strict) -> " << dir.string() << "\n";
  return dir;
}

void run_postproc(const PostprocConfig& cfg, const fs::path& in, const fs::path& out) {
  cfg.validate();
  if (!fs::exists(in)) throw MissingArtifact("input not found: " + in.string());
  auto one = [&](const fs::path& src, const fs::path& dst) {
    const VectorDocument doc = parse_svg(read_text(src));
    write_text(dst, document_to_svg(postprocess(doc, cfg)));
  };
  if (fs::is_directory(in)) {
    fs::create_directories(out);
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(in)) {
      if (e.is_regular_file() && e.path().extension() == ".svg") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) one(f, out / f.filename());
    std::cout << "postproc (" << to_string(cfg.mode) << "): " << files.size() << " files -> " << out.string() << "\n";
  } else {
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    one(in, out);
  }
}

std::vector<torch::Tensor> load_image_dir(const fs::path& dir, int resolution) {
  if (!fs::is_directory(dir)) throw MissingArtifact("image directory not found: " + dir.string());
  // one image per stem; an SVG wins over its PNG preview
  std::map<std::string, fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto ext = e.path().extension();
    if (!e.is_regular_file() || (ext != ".png" && ext != ".svg")) continue;
    auto [it, fresh] = files.emplace(e.path().stem().string(), e.path());
    if (!fresh && ext == ".svg") it->second = e.path();
  }
  std::vector<torch::Tensor> out;
  for (const auto& [stem, f] : files) {
    torch::Tensor img;
    if (f.extension() == ".svg") {
      const RenderConfig rc{resolution, 1.0, 24};
      img = render_document(parse_svg(read_text(f)), rc);
    } else {
      img = read_png(f);
      if (img.size(1) != resolution || img.size(2) != resolution) {
        namespace F = torch::nn::functional;
        img = F::interpolate(img.unsqueeze(0), F::InterpolateFuncOptions()
                                                   .size(std::vector<int64_t>{resolution, resolution})
                                                   .mode(torch::kBilinear)
                                                   .align_corners(false))
                  .squeeze(0);
      }
    }
    out.push_back(img.to(torch::kFloat));
  }
  return out;
}

Json run_evaluate(const PipelineConfig& cfg, const EvaluateRequest& req) {
  const auto real = load_image_dir(req.real, req.resolution);
  const auto gen = load_image_dir(req.gen, req.resolution);
  const int dim = config_guard([&] { return cfg.at("eval.embedding_dim").get<int>(); });
  RandomProjectionEmbedding embed(dim, cfg.seed());
  Json report{{"n_real", real.size()}, {"n_gen", gen.size()}, {"embedding", "random-projection"}};

  if (!real.empty() && real.size() == gen.size()) {
    double total = 0.0;
    for (std::size_t i = 0; i < real.size(); ++i) total += mse(real[i], gen[i]);
    report["mse"] = total / static_cast<double>(real.size());
  }
  const auto embed_all = [&](const std::vector<torch::Tensor>& imgs) {
    return imgs.empty() ? Eigen::MatrixXd(0, dim) : embed.embed_images(torch::stack(imgs));
  };
  const Eigen::MatrixXd fr = embed_all(real);
  const Eigen::MatrixXd fg = embed_all(gen);
  report["fid"] = fr.rows() >= 2 && fg.rows() >= 2 ? Json(fid(fr, fg)) : Json(nullptr);

  if (req.prompts) {
    std::istringstream in(read_text(*req.prompts));
    std::vector<std::string> prompts;
    std::string line;
    while (std::getline(in, line)) prompts.push_back(line);
    if (prompts.size() != gen.size()) throw ConfigError("evaluate: prompt count differs from generated image count");
    report["clip_score"] = clip_score(fg, embed.embed_texts(prompts));
  }
  if (req.tokens) {
    if (!fs::exists(*req.tokens)) throw MissingArtifact("tokenized corpus not found: " + req.tokens->string());
    report["codebook"] = codebook_usage(read_tokenized(*req.tokens), cfg.vsq().fsq.codebook_size()).to_json();
  }
  if (req.out) {
    if (req.out->has_parent_path()) fs::create_directories(req.out->parent_path());
    write_json(*req.out, report);
  }
  return report;
}

Json run_codebook_stats(const PipelineConfig& cfg, const std::optional<fs::path>& tokens,
                        const std::optional<fs::path>& out, int dump_top) {
  const fs::path file = tokens ? *tokens : tokens_file(cfg);
  if (!fs::exists(file)) throw MissingArtifact("tokenized corpus not found: " + file.string());
  const auto corpus = read_tokenized(file);
  const auto usage = codebook_usage(corpus, cfg.vsq().fsq.codebook_size());
  Json report = usage.to_json();
  const fs::path dest = out ? *out : file.parent_path() / "codebook.json";
  if (dest.has_parent_path()) fs::create_directories(dest.parent_path());
  write_json(dest, report);

  if (dump_top > 0) {
    auto vsq = load_vsq(vsq_checkpoint(cfg));
    if (vsq->config().codes_per_shape != 1) throw ConfigError("code dumps need one code per shape");
    const fs::path dump = dest.parent_path() / "codes";
    fs::create_directories(dump);
    const auto& codes = report["codes"];
    const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(dump_top), codes.size());
    for (std::size_t i = 0; i < n; ++i) {
      const int64_t code = codes[i]["code"].get<int64_t>();
      const auto paths = decode_indices(vsq, torch::tensor({code}, torch::kLong).view({1, 1}));
      VectorDocument doc;
      doc.canvas_size = vsq->config().render.resolution;
      doc.strokes.push_back({paths.front(), discretize_anchor({0.5, 0.5}, doc.grid)});
      write_text(dump / ("code_" + std::to_string(code) + ".svg"), document_to_svg(doc));
    }
  }
  std::printf("codebook: %lld of %lld codes used (%.2f%%), top-10 share %.2f%% -> %s\n",
              static_cast<long long>(usage.used), static_cast<long long>(usage.codebook_size),
              100.0 * usage.used_fraction(), 100.0 * usage.top_k_share.at(10), dest.string().c_str());
  return report;
}

}  // namespace svgen
