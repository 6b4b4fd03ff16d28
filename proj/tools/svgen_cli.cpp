#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "svgen/pipeline.hpp"
#include "svgen/svg_io.hpp"

namespace fs = std::filesystem;
using namespace svgen;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "Pipeline config file (JSON)");
  sub->add_option("--set", c.overrides, "Override a config field, e.g. --set vsq.steps=500");
}

PipelineConfig load_config(const Common& c) {
  PipelineConfig cfg = c.config.empty() ? PipelineConfig() : PipelineConfig::load(c.config);
  for (const auto& o : c.overrides) cfg.apply_override(o);
  return cfg;
}

std::optional<fs::path> opt_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return fs::path(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vector graphics generation with stroke tokens"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kSvgenVersion));

  Common common;

  auto* pre = app.add_subcommand("preprocess", "Build a patch corpus");
  add_common(pre, common);
  std::string dataset, out_dir;
  std::optional<int> n, grid;
  std::optional<uint64_t> seed;
  std::optional<double> max_len_fraction;
  pre->add_option("--dataset", dataset, "mnist, figr8, fonts or synthetic");
  pre->add_option("--n", n, "Synthetic sample count");
  pre->add_option("--seed", seed, "Seed");
  pre->add_option("--max-len-fraction", max_len_fraction, "Maximum stroke length as a fraction of the canvas");
  pre->add_option("--grid", grid, "Anchor grid size");
  pre->add_option("--out", out_dir, "Output directory (default: content-addressed under work_dir)");

  auto* tv = app.add_subcommand("train-vsq", "Train the stroke autoencoder");
  add_common(tv, common);
  auto* tok = app.add_subcommand("tokenize", "Encode the corpus into token sequences");
  add_common(tok, common);
  auto* ta = app.add_subcommand("train-art", "Train the autoregressive transformer");
  add_common(ta, common);

  std::string prompt, context_svg;
  std::optional<double> top_p;
  std::optional<int> n_samples;
  bool no_mask = false;
  auto add_gen = [&](CLI::App* sub, bool context) {
    add_common(sub, common);
    sub->add_option("--prompt", prompt, "Text prompt");
    if (context) sub->add_option("--context-svg", context_svg, "SVG whose strokes condition the generation")->required();
    sub->add_option("--top-p", top_p, "Nucleus sampling threshold");
    sub->add_option("--n-samples", n_samples, "Number of samples");
    sub->add_flag("--no-grammar-mask", no_mask, "Sample without the alternation mask");
    sub->add_option("--out", out_dir, "Output directory");
  };
  auto* gen = app.add_subcommand("generate", "Sample new documents from a prompt");
  add_gen(gen, false);
  auto* comp = app.add_subcommand("complete", "Continue the strokes of an SVG");
  add_gen(comp, true);

  auto* pp = app.add_subcommand("postproc", "Connect neighbouring stroke endpoints");
  add_common(pp, common);
  std::string pp_mode, pp_in, pp_out;
  std::optional<double> max_dist;
  pp->add_option("--mode", pp_mode, "pc, pi or none");
  pp->add_option("--max-dist", max_dist, "Maximum endpoint distance (normalized)");
  pp->add_option("input", pp_in, "SVG file or directory")->required();
  pp->add_option("output", pp_out, "SVG file or directory")->required();

  auto* ev = app.add_subcommand("evaluate", "MSE, FID, CLIP score and codebook statistics");
  add_common(ev, common);
  std::string real, gen_dir, prompts, tokens, out_file;
  std::optional<int> resolution;
  ev->add_option("--real", real, "Directory of reference PNG/SVG")->required();
  ev->add_option("--gen", gen_dir, "Directory of generated PNG/SVG")->required();
  ev->add_option("--prompts", prompts, "One prompt per generated image");
  ev->add_option("--tokens", tokens, "Tokenized corpus for codebook statistics");
  ev->add_option("--resolution", resolution, "Evaluation resolution");
  ev->add_option("--out", out_file, "JSON report path");

  auto* cs = app.add_subcommand("codebook-stats", "Codebook usage of a tokenized corpus");
  add_common(cs, common);
  int dump_top = 0;
  cs->add_option("--tokens", tokens, "Tokenized corpus (default: tokenize stage output)");
  cs->add_option("--out", out_file, "JSON report path");
  cs->add_option("--dump-top", dump_top, "Decode the most used codes to SVG");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    PipelineConfig cfg = load_config(common);
    if (pre->parsed()) {
      if (!dataset.empty()) cfg.set("dataset.kind", dataset);
      if (n) cfg.set("dataset.n", *n);
      if (seed) cfg.set("seed", *seed);
      if (max_len_fraction) cfg.set("dataset.max_len_fraction", *max_len_fraction);
      if (grid) cfg.set("dataset.grid", *grid);
      run_preprocess(cfg, opt_path(out_dir));
    } else if (tv->parsed()) {
      run_train_vsq(cfg);
    } else if (tok->parsed()) {
      run_tokenize(cfg);
    } else if (ta->parsed()) {
      run_train_art(cfg);
    } else if (gen->parsed() || comp->parsed()) {
      if (top_p) cfg.set("generate.top_p", *top_p);
      if (no_mask) cfg.set("generate.grammar_mask", false);
      GenerateRequest req;
      req.prompt = prompt;
      req.context_svg = opt_path(context_svg);
      req.n_samples = n_samples ? *n_samples : cfg.at("generate.n_samples").get<int>();
      req.out = opt_path(out_dir);
      run_generate(cfg, req);
    } else if (pp->parsed()) {
      if (!pp_mode.empty()) cfg.set("postproc.mode", pp_mode);
      if (max_dist) cfg.set("postproc.max_dist", *max_dist);
      run_postproc(cfg.postproc(), pp_in, pp_out);
    } else if (ev->parsed()) {
      EvaluateRequest req;
      req.real = real;
      req.gen = gen_dir;
      req.prompts = opt_path(prompts);
      req.tokens = opt_path(tokens);
      req.out = opt_path(out_file);
      req.resolution = resolution ? *resolution : cfg.at("eval.resolution").get<int>();
      std::cout << run_evaluate(cfg, req).dump(2) << "\n";
    } else if (cs->parsed()) {
      run_codebook_stats(cfg, opt_path(tokens), opt_path(out_file), dump_top);
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const MissingArtifact& e) {
    std::fprintf(stderr, "missing artifact: %s\n", e.what());
    return 3;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
