#include <cmath>
#include <random>

#include "svgen/art.hpp"

// torch defines its own CHECK
#undef CHECK
#include <doctest.h>

using namespace svgen;

namespace {

ArtConfig tiny_config() {
  ArtConfig c;
  c.d_model = 64;
  c.n_heads = 4;
  c.n_blocks = 2;
  c.text_dim = 16;
  c.words = {"box", "circle"};
  return c;
}

std::vector<TokenizedSample> toy_corpus(int n, int pairs, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<TokenizedSample> out;
  for (int i = 0; i < n; ++i) {
    TokenizedSample s{"s" + std::to_string(i), (i % 2 ? "box " : "circle ") + std::to_string(i), "", 1, {}};
    for (int k = 0; k < pairs; ++k) {
      s.pairs.push_back({{static_cast<int>(rng() % 256), static_cast<int>(rng() % 256)}, static_cast<int64_t>(rng() % 4375)});
    }
    out.push_back(s);
  }
  return out;
}

class FixedText : public TextEncoderAdapter {
 public:
  torch::Tensor encode(const std::string& text) override {
    return torch::ones({static_cast<int64_t>(text.size() % 3 + 1), 16});
  }
  int dim() const override { return 16; }
};

}  // namespace

TEST_SUITE("art") {

TEST_CASE("initial loss is close to uniform") {
  torch::manual_seed(0);
  ArtModel model(tiny_config());
  const auto corpus = toy_corpus(8, 12, 1);
  const double loss = causal_loss(model, corpus).item<double>();
  const double ref = std::log(69914.0);
  CHECK(std::abs(loss - ref) / ref < 0.05);
}

TEST_CASE("embedding rows and determinism") {
  torch::manual_seed(1);
  ArtModel model(tiny_config());
  model->eval();
  const std::vector<CodePair> pairs{{{3, 4}, 5}, {{6, 7}, 8}};
  const auto seq0 = build_sequence(0, pairs);
  const auto e0 = model->embed_sequence(seq0, model->text_embeddings(""));
  CHECK(e0.size(0) == static_cast<int64_t>(seq0.ids.size()));
  CHECK(e0.size(1) == 64);
  const auto seq2 = build_sequence(2, pairs);
  const auto e2 = model->embed_sequence(seq2, model->text_embeddings("box unknownword"));
  CHECK(e2.size(0) == static_cast<int64_t>(seq2.ids.size()));
  CHECK(torch::equal(e2, model->embed_sequence(seq2, model->text_embeddings("box unknownword"))));
  CHECK_THROWS_AS(model->embed_sequence(seq2, model->text_embeddings("box")), std::invalid_argument);

  model->set_text_encoder(std::make_shared<FixedText>());
  CHECK(model->text_length("ab") == 3);
  const auto seq3 = build_sequence(model->text_length("ab"), pairs);
  CHECK(model->embed_sequence(seq3, model->text_embeddings("ab")).size(0) == static_cast<int64_t>(seq3.ids.size()));
}

TEST_CASE("grammar mask") {
  const Vocabulary v;
  TokenSequence seq = build_sequence(1, std::vector<CodePair>{{{1, 1}, 1}});
  seq.ids.pop_back();
  CHECK(next_slot(seq, v) == SlotKind::position_or_eos);
  seq.ids.push_back(position_token({2, 2}));
  CHECK(next_slot(seq, v) == SlotKind::code);

  const auto logits = torch::zeros({v.size()});
  const auto code_only = constrain_logits(logits, SlotKind::code, v);
  CHECK(std::isinf(code_only[v.eos()].item<float>()));
  CHECK(std::isinf(code_only[position_token({0, 0})].item<float>()));
  CHECK(code_only[17].item<float>() == 0.0f);
  const auto pos = constrain_logits(logits, SlotKind::position_or_eos, v);
  CHECK(std::isinf(pos[0].item<float>()));
  CHECK(std::isinf(pos[4374].item<float>()));
  CHECK(pos[v.eos()].item<float>() == 0.0f);
  CHECK(std::isinf(pos[v.bos()].item<float>()));
  CHECK(std::isinf(pos[v.sos()].item<float>()));
}

TEST_CASE("nucleus sampling") {
  std::mt19937_64 rng(3);
  auto logits = torch::randn({500});
  const int64_t best = logits.argmax().item<int64_t>();
  CHECK(sample_top_p(logits, 0.0, 1.0, rng) == best);
  CHECK(sample_top_p(logits, 1e-9, 1.0, rng) == best);
  logits = torch::full({4}, -1e9);
  logits[2] = 0;
  for (int i = 0; i < 20; ++i) CHECK(sample_top_p(logits, 0.9, 1.0, rng) == 2);
}

TEST_CASE("generation keeps context and grammar") {
  torch::manual_seed(4);
  ArtModel model(tiny_config());
  const std::vector<CodePair> context{{{10, 20}, 30}, {{40, 50}, 60}};
  GenerateOptions o;
  o.max_len = 24;
  for (int i = 0; i < 10; ++i) {
    o.seed = static_cast<uint64_t>(i);
    const auto seq = generate(model, "box", context, o);
    CHECK(seq.ids.size() <= 24);
    const auto parsed = parse_sequence(seq, ParseMode::strict);
    REQUIRE(parsed.pairs.size() >= 2);
    CHECK(parsed.pairs[0] == context[0]);
    CHECK(parsed.pairs[1] == context[1]);
    CHECK(generate(model, "box", context, o).ids == seq.ids);
  }
}

TEST_CASE("training is deterministic and reduces loss") {
  const auto corpus = toy_corpus(4, 10, 7);
  ArtConfig c = tiny_config();
  c.words.clear();
  ArtTrainOptions o;
  o.steps = 150;
  o.batch_size = 4;
  o.warmup_steps = 10;
  o.log_every = 50;
  o.seed = 5;
  const auto a = train_art(corpus, c, o);
  const auto b = train_art(corpus, c, o);
  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t i = 0; i < a.log.size(); ++i) CHECK(a.log[i].loss == b.log[i].loss);
  CHECK(a.final_loss < 0.5 * a.initial_loss);
  CHECK(a.model->config().words == build_word_table(corpus));
}

}  // TEST_SUITE
