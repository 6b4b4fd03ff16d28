#include "svgen/art.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

namespace svgen {

using nlohmann::json;
namespace nn = torch::nn;

void ArtConfig::validate() const {
  if (d_model < 1 || n_heads < 1 || d_model % n_heads != 0) throw std::invalid_argument("art: d_model must be divisible by n_heads");
  if (n_blocks < 1) throw std::invalid_argument("art: n_blocks must be >= 1");
  if (context_len < 4) throw std::invalid_argument("art: context_len too small");
  if (text_dim < 1) throw std::invalid_argument("art: text_dim must be positive");
}

void to_json(json& j, const ArtConfig& c) {
  j = json{{"d_model", c.d_model},       {"n_heads", c.n_heads},   {"n_blocks", c.n_blocks},
           {"context_len", c.context_len}, {"text_dim", c.text_dim}, {"n_codes", c.vocab.n_codes},
           {"grid", c.vocab.grid},         {"words", c.words}};
}

void from_json(const json& j, ArtConfig& c) {
  const ArtConfig d;
  c.d_model = j.value("d_model", d.d_model);
  c.n_heads = j.value("n_heads", d.n_heads);
  c.n_blocks = j.value("n_blocks", d.n_blocks);
  c.context_len = j.value("context_len", d.context_len);
  c.text_dim = j.value("text_dim", d.text_dim);
  c.vocab.n_codes = j.value("n_codes", d.vocab.n_codes);
  c.vocab.grid = j.value("grid", d.vocab.grid);
  c.words = j.value("words", std::vector<std::string>{});
}

ArtBlockImpl::ArtBlockImpl(int d_model, int n_heads) : n_heads_(n_heads) {
  ln1_ = register_module("ln1", nn::LayerNorm(nn::LayerNormOptions({d_model})));
  ln2_ = register_module("ln2", nn::LayerNorm(nn::LayerNormOptions({d_model})));
  qkv_ = register_module("qkv", nn::Linear(d_model, 3 * d_model));
  out_ = register_module("out", nn::Linear(d_model, d_model));
  fc1_ = register_module("fc1", nn::Linear(d_model, 4 * d_model));
  fc2_ = register_module("fc2", nn::Linear(4 * d_model, d_model));
}

torch::Tensor ArtBlockImpl::forward(const torch::Tensor& x) {
  const int64_t b = x.size(0);
  const int64_t t = x.size(1);
  const int64_t d = x.size(2);
  auto qkv = qkv_->forward(ln1_->forward(x)).view({b, t, 3, n_heads_, d / n_heads_}).permute({2, 0, 3, 1, 4});
  auto a = at::scaled_dot_product_attention(qkv[0], qkv[1], qkv[2], {}, 0.0, /*is_causal=*/true);
  auto h = x + out_->forward(a.transpose(1, 2).reshape({b, t, d}));
  return h + fc2_->forward(torch::gelu(fc1_->forward(ln2_->forward(h))));
}

ArtModelImpl::ArtModelImpl(const ArtConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const int d = cfg_.d_model;
  word_embed_ = register_module("word_embed", nn::Embedding(static_cast<int64_t>(cfg_.words.size()) + 1, cfg_.text_dim));
  text_proj_ = register_module("text_proj", nn::Linear(cfg_.text_dim, d));
  tok_embed_ = register_module("tok_embed", nn::Embedding(cfg_.vocab.size(), d));
  pos_embed_ = register_module("pos_embed", nn::Embedding(cfg_.context_len, d));
  blocks_ = register_module("blocks", nn::ModuleList());
  for (int i = 0; i < cfg_.n_blocks; ++i) blocks_->push_back(ArtBlock(d, cfg_.n_heads));
  ln_f_ = register_module("ln_f", nn::LayerNorm(nn::LayerNormOptions({d})));
  head_ = register_module("head", nn::Linear(d, cfg_.vocab.size()));

  torch::NoGradGuard no_grad;
  for (auto& p : named_parameters()) {
    const auto& name = p.key();
    auto& v = p.value();
    if (name.ends_with("bias")) {
      v.zero_();
    } else if (v.dim() >= 2) {
      v.normal_(0.0, 0.02);
    }
  }
}

void ArtModelImpl::set_text_encoder(std::shared_ptr<TextEncoderAdapter> encoder) {
  if (encoder && encoder->dim() != cfg_.text_dim) throw std::invalid_argument("text encoder dim does not match text_dim");
  external_text_ = std::move(encoder);
}

torch::Tensor ArtModelImpl::text_embeddings(const std::string& prompt) {
  if (external_text_) return external_text_->encode(prompt).to(torch::kFloat);
  std::istringstream in(prompt);
  std::vector<int64_t> idx;
  std::string w;
  while (in >> w) {
    auto it = std::lower_bound(cfg_.words.begin(), cfg_.words.end(), w);
    idx.push_back(it != cfg_.words.end() && *it == w ? (it - cfg_.words.begin()) + 1 : 0);
  }
  if (idx.empty()) return torch::zeros({0, cfg_.text_dim});
  return word_embed_->forward(torch::tensor(idx, torch::kLong));
}

int ArtModelImpl::text_length(const std::string& prompt) {
  if (external_text_) return static_cast<int>(external_text_->encode(prompt).size(0));
  return count_words(prompt);
}

torch::Tensor ArtModelImpl::embed_sequence(const TokenSequence& seq, const torch::Tensor& text_embs) {
  const int64_t t = text_embs.size(0);
  if (t != seq.text_len) throw std::invalid_argument("embed_sequence: text embedding count does not match text slots");
  const int64_t n = static_cast<int64_t>(seq.ids.size());
  if (n > cfg_.context_len) throw std::invalid_argument("embed_sequence: sequence longer than the context");
  auto ids = torch::tensor(seq.ids, torch::kLong).clamp_min(0);
  auto tok = tok_embed_->forward(ids);
  if (t > 0) tok = torch::cat({tok.slice(0, 0, 1), text_proj_->forward(text_embs), tok.slice(0, 1 + t)});
  return tok + pos_embed_->forward(torch::arange(n, torch::kLong));
}

torch::Tensor ArtModelImpl::hidden(const std::vector<TokenSequence>& seqs, const std::vector<std::string>& prompts) {
  TORCH_CHECK(seqs.size() == prompts.size() && !seqs.empty(), "hidden: need one prompt per sequence");
  int64_t longest = 0;
  for (const auto& s : seqs) longest = std::max<int64_t>(longest, static_cast<int64_t>(s.ids.size()));
  std::vector<torch::Tensor> rows;
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    auto e = embed_sequence(seqs[i], text_embeddings(prompts[i]));
    const int64_t pad = longest - e.size(0);
    if (pad > 0) e = torch::cat({e, torch::zeros({pad, e.size(1)}, e.options())});
    rows.push_back(e);
  }
  auto x = torch::stack(rows);
  for (const auto& block : *blocks_) x = block->as<ArtBlock>()->forward(x);
  return ln_f_->forward(x);
}

std::vector<std::string> build_word_table(const std::vector<TokenizedSample>& corpus) {
  std::set<std::string> words;
  for (const auto& s : corpus) {
    std::istringstream in(s.prompt);
    std::string w;
    while (in >> w) words.insert(w);
  }
  return {words.begin(), words.end()};
}

torch::Tensor causal_loss(ArtModel& model, std::span<const TokenizedSample> batch) {
  const auto& cfg = model->config();
  std::vector<TokenSequence> seqs;
  std::vector<std::string> prompts;
  for (const auto& s : batch) {
    seqs.push_back(build_sequence(model->text_length(s.prompt), s.pairs, cfg.vocab, cfg.context_len));
    prompts.push_back(s.prompt);
  }
  auto h = model->hidden(seqs, prompts);
  const int64_t t_max = h.size(1);
  std::vector<int64_t> rows;
  std::vector<int64_t> targets;
  for (std::size_t b = 0; b < seqs.size(); ++b) {
    const auto& ids = seqs[b].ids;
    const std::size_t bos = static_cast<std::size_t>(seqs[b].text_len) + 1;
    for (std::size_t i = bos; i + 1 < ids.size(); ++i) {
      rows.push_back(static_cast<int64_t>(b) * t_max + static_cast<int64_t>(i));
      targets.push_back(ids[i + 1]);
    }
  }
  auto selected = h.reshape({-1, h.size(2)}).index_select(0, torch::tensor(rows, torch::kLong));
  return torch::nn::functional::cross_entropy(model->logits(selected), torch::tensor(targets, torch::kLong));
}

double corpus_loss(ArtModel& model, const std::vector<TokenizedSample>& corpus, int batch_size) {
  torch::NoGradGuard no_grad;
  model->eval();
  double total = 0.0;
  double count = 0.0;
  for (std::size_t b = 0; b < corpus.size(); b += static_cast<std::size_t>(batch_size)) {
    const std::size_t e = std::min(corpus.size(), b + static_cast<std::size_t>(batch_size));
    std::span<const TokenizedSample> batch(corpus.data() + b, e - b);
    double n = 0.0;
    for (const auto& s : batch) n += 2.0 * static_cast<double>(s.pairs.size()) + 1.0;
    total += causal_loss(model, batch).item<double>() * n;
    count += n;
  }
  return count > 0 ? total / count : 0.0;
}

namespace {

int load_state(const std::filesystem::path& path, ArtModel& model, torch::optim::Optimizer* optimizer) {
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

ArtTrainResult train_art(const std::vector<TokenizedSample>& corpus, ArtConfig cfg, const ArtTrainOptions& opts) {
  if (corpus.empty()) throw std::invalid_argument("train_art: empty corpus");
  if (cfg.words.empty()) cfg.words = build_word_table(corpus);
  cfg.validate();
  for (const auto& s : corpus) {
    const std::size_t len = static_cast<std::size_t>(count_words(s.prompt)) + 2 * s.pairs.size() + 3;
    if (len > static_cast<std::size_t>(cfg.context_len)) {
      throw std::invalid_argument("train_art: sample " + s.source_id + " exceeds the context length");
    }
  }

  torch::manual_seed(opts.seed);
  ArtTrainResult result;
  result.model = ArtModel(cfg);
  auto& model = result.model;
  result.initial_loss = corpus_loss(model, corpus);

  torch::optim::AdamW optimizer(model->parameters(),
                                torch::optim::AdamWOptions(opts.lr).weight_decay(opts.weight_decay));
  std::ofstream metrics;
  if (!opts.metrics_log.empty()) {
    metrics.open(opts.metrics_log);
    if (!metrics) throw std::runtime_error("cannot write " + opts.metrics_log.string());
  }

  model->train();
  std::vector<TokenizedSample> batch;
  for (int step = 0; step < opts.steps; ++step) {
    const double warm = opts.warmup_steps > 0 ? std::min(1.0, (step + 1.0) / opts.warmup_steps) : 1.0;
    for (auto& group : optimizer.param_groups()) {
      static_cast<torch::optim::AdamWOptions&>(group.options()).lr(opts.lr * warm);
    }
    std::mt19937_64 rng(opts.seed * 0x9E3779B97F4A7C15ULL + static_cast<uint64_t>(step) + 1);
    batch.clear();
    for (int i = 0; i < opts.batch_size; ++i) batch.push_back(corpus[rng() % corpus.size()]);
    auto loss = causal_loss(model, batch);
    optimizer.zero_grad();
    loss.backward();
    torch::nn::utils::clip_grad_norm_(model->parameters(), 1.0);
    optimizer.step();
    if (opts.log_every > 0 && ((step + 1) % opts.log_every == 0 || step + 1 == opts.steps || step == 0)) {
      ArtStepLog entry{step + 1, loss.item<double>()};
      result.log.push_back(entry);
      if (metrics) metrics << json{{"step", entry.step}, {"loss", entry.loss}}.dump() << '\n';
    }
  }
  result.final_loss = corpus_loss(model, corpus);
  if (!opts.checkpoint.empty()) save_art(opts.checkpoint, model, &optimizer, opts.steps);
  return result;
}

void save_art(const std::filesystem::path& path, ArtModel& model, torch::optim::Optimizer* optimizer, int step) {
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

ArtModel load_art(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw std::runtime_error("missing ART checkpoint: " + path.string());
  torch::serialize::InputArchive ar;
  ar.load_from(path.string());
  c10::IValue cfg_json;
  ar.read("config", cfg_json);
  const ArtConfig cfg = json::parse(cfg_json.toStringRef()).get<ArtConfig>();
  ArtModel model(cfg);
  load_state(path, model, nullptr);
  model->eval();
  return model;
}

SlotKind next_slot(const TokenSequence& seq, const Vocabulary& vocab) {
  if (seq.ids.empty()) throw SequenceError("next_slot: empty sequence");
  return vocab.is_position(seq.ids.back()) ? SlotKind::code : SlotKind::position_or_eos;
}

torch::Tensor constrain_logits(const torch::Tensor& logits, SlotKind slot, const Vocabulary& vocab) {
  TORCH_CHECK(logits.dim() == 1 && logits.size(0) == vocab.size(), "constrain_logits: expected [V] logits");
  auto allowed = torch::zeros({vocab.size()}, torch::kBool);
  if (slot == SlotKind::code) {
    allowed.slice(0, 0, vocab.n_codes).fill_(true);
  } else {
    allowed.slice(0, vocab.position_base(), vocab.sos()).fill_(true);
    if (slot == SlotKind::position_or_eos) allowed[vocab.eos()] = true;
  }
  return logits.masked_fill(allowed.logical_not(), -std::numeric_limits<float>::infinity());
}

int64_t sample_top_p(const torch::Tensor& logits, double top_p, double temperature, std::mt19937_64& rng) {
  if (top_p <= 0.0 || temperature <= 0.0) return logits.argmax().item<int64_t>();
  auto probs = torch::softmax(logits.to(torch::kDouble) / temperature, 0);
  auto sorted = probs.sort(0, /*descending=*/true);
  auto p = std::get<0>(sorted).contiguous();
  auto idx = std::get<1>(sorted).contiguous();
  const double* pp = p.data_ptr<double>();
  const int64_t n = p.size(0);
  int64_t keep = 0;
  double mass = 0.0;
  while (keep < n && (keep == 0 || mass < top_p)) mass += pp[keep++];
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53 * mass;
  double acc = 0.0;
  for (int64_t i = 0; i < keep; ++i) {
    acc += pp[i];
    if (u < acc) return idx[i].item<int64_t>();
  }
  return idx[keep - 1].item<int64_t>();
}

TokenSequence generate(ArtModel& model, const std::string& prompt, std::span<const CodePair> context,
                       const GenerateOptions& opts) {
  torch::NoGradGuard no_grad;
  model->eval();
  const auto& cfg = model->config();
  const int max_len = std::min(opts.max_len, cfg.context_len);
  TokenSequence seq = build_sequence(model->text_length(prompt), context, cfg.vocab, cfg.context_len);
  seq.ids.pop_back();  // drop <EOS>; generation continues after the context
  std::mt19937_64 rng(opts.seed);
  const std::vector<std::string> prompts{prompt};
  while (static_cast<int>(seq.ids.size()) < max_len) {
    const SlotKind slot = next_slot(seq, cfg.vocab);
    // A new pair needs two tokens plus the closing <EOS>.
    if (opts.grammar_mask && slot == SlotKind::position_or_eos && max_len - static_cast<int>(seq.ids.size()) < 3) {
      seq.ids.push_back(cfg.vocab.eos());
      break;
    }
    auto h = model->hidden({seq}, prompts);
    auto logits = model->logits(h[0][h.size(1) - 1]);
    if (opts.grammar_mask) logits = constrain_logits(logits, slot, cfg.vocab);
    const int64_t id = sample_top_p(logits, opts.top_p, opts.temperature, rng);
    seq.ids.push_back(id);
    if (id == cfg.vocab.eos()) break;
  }
  return seq;
}

}  // namespace svgen
