#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "svgen/art.hpp"
#include "svgen/postproc.hpp"
#include "svgen/vsq.hpp"

namespace svgen {

/// Malformed config file, unknown override key or invalid value (exit 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An input file or upstream stage output does not exist (exit 3).
class MissingArtifact : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kSvgenVersion = "0.1.0";

/// The whole pipeline configuration as one JSON document with per-stage
/// sections. Keys are validated against the defaults, so a typo in a config
/// file or override is reported instead of ignored.
class PipelineConfig {
 public:
  PipelineConfig();

  static nlohmann::json defaults();
  /// Defaults merged with the file's content.
  static PipelineConfig load(const std::filesystem::path& path);

  /// "a.b.c=value"; the value is parsed as JSON when possible, else taken as
  /// a string.
  void apply_override(const std::string& assignment);
  void set(const std::string& dotted_key, const nlohmann::json& value);

  const nlohmann::json& json() const { return data_; }
  const nlohmann::json& at(const std::string& dotted_key) const;

  uint64_t seed() const;
  std::filesystem::path work_dir() const;
  VsqConfig vsq() const;
  VsqTrainOptions vsq_train() const;
  ArtConfig art() const;
  ArtTrainOptions art_train() const;
  GenerateOptions generate() const;
  PostprocConfig postproc() const;

 private:
  nlohmann::json data_;
};

/// 16 hex digits of FNV-1a over the canonical JSON dump.
std::string content_hash(const nlohmann::json& value);

/// Directory of a stage, work/<stage>-<hash>, where the hash covers the
/// stage's config sections and all upstream stages.
std::filesystem::path stage_dir(const PipelineConfig& cfg, const std::string& stage);
std::string stage_hash(const PipelineConfig& cfg, const std::string& stage);

/// FNV-1a digest over every regular file below `dir` (sorted relative paths
/// and contents).
std::string directory_hash(const std::filesystem::path& dir);

/// Each stage returns the directory it wrote.
std::filesystem::path run_preprocess(const PipelineConfig& cfg, const std::optional<std::filesystem::path>& out = {});
std::filesystem::path run_train_vsq(const PipelineConfig& cfg);
std::filesystem::path run_tokenize(const PipelineConfig& cfg);
std::filesystem::path run_train_art(const PipelineConfig& cfg);

struct GenerateRequest {
  std::string prompt;
  std::optional<std::filesystem::path> context_svg;
  int n_samples = 4;
  std::optional<std::filesystem::path> out;
};

std::filesystem::path run_generate(const PipelineConfig& cfg, const GenerateRequest& req);

/// File to file, or every *.svg of a directory into an output directory.
void run_postproc(const PostprocConfig& cfg, const std::filesystem::path& in, const std::filesystem::path& out);

struct EvaluateRequest {
  std::filesystem::path real;  // directory of PNG/SVG
  std::filesystem::path gen;   // directory of PNG/SVG
  std::optional<std::filesystem::path> prompts;  // one prompt per generated image
  std::optional<std::filesystem::path> tokens;   // tokenized corpus for codebook statistics
  std::optional<std::filesystem::path> out;      // JSON report
  int resolution = 128;
};

nlohmann::json run_evaluate(const PipelineConfig& cfg, const EvaluateRequest& req);

/// Codebook usage of a tokenized corpus (default: the tokenize stage output).
/// With dump_top > 0 the most used codes are decoded to SVG files.
nlohmann::json run_codebook_stats(const PipelineConfig& cfg, const std::optional<std::filesystem::path>& tokens,
                                  const std::optional<std::filesystem::path>& out, int dump_top = 0);

/// Loads every PNG (or rendered SVG) of a directory in sorted name order, [3, R, R] each.
std::vector<torch::Tensor> load_image_dir(const std::filesystem::path& dir, int resolution);

}  // namespace svgen
