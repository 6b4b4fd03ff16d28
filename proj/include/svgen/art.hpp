#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "svgen/codec.hpp"

namespace svgen {

struct ArtConfig {
  int d_model = 512;
  int n_heads = 8;
  int n_blocks = 4;
  int context_len = kContextLen;
  int text_dim = 64;
  Vocabulary vocab;
  /// Word table of the built-in text encoder; index 0 is reserved for
  /// unknown words.
  std::vector<std::string> words;

  void validate() const;
};

void to_json(nlohmann::json& j, const ArtConfig& c);
void from_json(const nlohmann::json& j, ArtConfig& c);

/// Produces one embedding row per text slot, [t, dim()].
class TextEncoderAdapter {
 public:
  virtual ~TextEncoderAdapter() = default;
  virtual torch::Tensor encode(const std::string& text) = 0;
  virtual int dim() const = 0;
};

class ArtBlockImpl : public torch::nn::Module {
 public:
  ArtBlockImpl(int d_model, int n_heads);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  int n_heads_;
  torch::nn::LayerNorm ln1_{nullptr};
  torch::nn::LayerNorm ln2_{nullptr};
  torch::nn::Linear qkv_{nullptr};
  torch::nn::Linear out_{nullptr};
  torch::nn::Linear fc1_{nullptr};
  torch::nn::Linear fc2_{nullptr};
};
TORCH_MODULE(ArtBlock);

class ArtModelImpl : public torch::nn::Module {
 public:
  explicit ArtModelImpl(const ArtConfig& cfg);

  const ArtConfig& config() const { return cfg_; }

  /// Replaces the built-in word table. The adapter's dim() must equal text_dim.
  void set_text_encoder(std::shared_ptr<TextEncoderAdapter> encoder);

  /// Raw text embeddings for a prompt, [t, text_dim].
  torch::Tensor text_embeddings(const std::string& prompt);
  /// Number of text slots the prompt occupies.
  int text_length(const std::string& prompt);

  /// Vocabulary ids embedded through the token table, text slots filled with
  /// projected text embeddings, plus learned sequence-position embeddings.
  /// Returns [T, d_model].
  torch::Tensor embed_sequence(const TokenSequence& seq, const torch::Tensor& text_embs);

  /// Final hidden states for a right-padded batch, [B, T_max, d_model].
  torch::Tensor hidden(const std::vector<TokenSequence>& seqs, const std::vector<std::string>& prompts);

  /// Output head on selected hidden rows.
  torch::Tensor logits(const torch::Tensor& rows) { return head_->forward(rows); }

 private:
  ArtConfig cfg_;
  std::shared_ptr<TextEncoderAdapter> external_text_;
  torch::nn::Embedding word_embed_{nullptr};
  torch::nn::Linear text_proj_{nullptr};
  torch::nn::Embedding tok_embed_{nullptr};
  torch::nn::Embedding pos_embed_{nullptr};
  torch::nn::ModuleList blocks_{nullptr};
  torch::nn::LayerNorm ln_f_{nullptr};
  torch::nn::Linear head_{nullptr};
};
TORCH_MODULE(ArtModel);

/// Sorted unique whitespace-separated words of all prompts.
std::vector<std::string> build_word_table(const std::vector<TokenizedSample>& corpus);

/// Mean next-token cross-entropy over the targets after <BOS> (including <EOS>).
torch::Tensor causal_loss(ArtModel& model, std::span<const TokenizedSample> batch);

/// Eval-mode mean per-token loss over the whole corpus.
double corpus_loss(ArtModel& model, const std::vector<TokenizedSample>& corpus, int batch_size = 16);

struct ArtTrainOptions {
  int steps = 2000;
  int batch_size = 8;
  double lr = 1e-3;
  double weight_decay = 0.0;
  int warmup_steps = 100;
  uint64_t seed = 0;
  int log_every = 50;
  std::filesystem::path checkpoint;
  std::filesystem::path metrics_log;
};

struct ArtStepLog {
  int step = 0;
  double loss = 0.0;
};

struct ArtTrainResult {
  ArtModel model{nullptr};
  std::vector<ArtStepLog> log;
  double initial_loss = 0.0;  // corpus loss before the first update
  double final_loss = 0.0;    // corpus loss after training
};

/// Builds the word table from the corpus when cfg.words is empty.
ArtTrainResult train_art(const std::vector<TokenizedSample>& corpus, ArtConfig cfg, const ArtTrainOptions& opts);

void save_art(const std::filesystem::path& path, ArtModel& model, torch::optim::Optimizer* optimizer = nullptr,
              int step = 0);
ArtModel load_art(const std::filesystem::path& path);

enum class SlotKind { position, code, position_or_eos };

/// Slot kind of the next token of a sequence that already contains <BOS>:
/// after <BOS> or a code -> position_or_eos, after a position -> code.
SlotKind next_slot(const TokenSequence& seq, const Vocabulary& vocab);

/// Sets every logit outside the legal class of `slot` to -inf. `logits` [V].
torch::Tensor constrain_logits(const torch::Tensor& logits, SlotKind slot, const Vocabulary& vocab);

struct GenerateOptions {
  double top_p = 0.9;
  double temperature = 1.0;
  int max_len = kContextLen;
  uint64_t seed = 0;
  bool grammar_mask = true;
};

/// Nucleus sampling of one id from logits [V]; top_p <= 0 selects the argmax.
int64_t sample_top_p(const torch::Tensor& logits, double top_p, double temperature, std::mt19937_64& rng);

/// <SOS>, text, <BOS>, the context pairs verbatim, then sampled tokens until
/// <EOS> or max_len. With the grammar mask, <EOS> is forced once no complete
/// pair fits before max_len.
TokenSequence generate(ArtModel& model, const std::string& prompt, std::span<const CodePair> context,
                       const GenerateOptions& opts);

}  // namespace svgen
