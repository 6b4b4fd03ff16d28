#include <filesystem>
#include <random>

#include "svgen/codec.hpp"

// torch defines its own CHECK
#undef CHECK
#include <doctest.h>

using namespace svgen;

namespace {

std::vector<CodePair> random_pairs(std::mt19937_64& rng, int n) {
  std::vector<CodePair> out;
  for (int i = 0; i < n; ++i) {
    out.push_back({{static_cast<int>(rng() % 256), static_cast<int>(rng() % 256)}, static_cast<int64_t>(rng() % 4375)});
  }
  return out;
}

TokenizedSample sample_with(int n_pairs, const std::string& prompt) {
  std::mt19937_64 rng(static_cast<uint64_t>(n_pairs));
  return {"s", prompt, "x", 1, random_pairs(rng, n_pairs)};
}

}  // namespace

TEST_SUITE("codec") {

TEST_CASE("vocabulary arithmetic") {
  const Vocabulary v;
  CHECK(v.size() == 69914);
  CHECK(v.sos() == 69911);
  CHECK(v.bos() == 69912);
  CHECK(v.eos() == 69913);
  CHECK(position_token({0, 0}) == 4375);
  CHECK(position_token({255, 255}) == 69910);
  CHECK(position_token({10, 2}) == 4897);
  for (int y = 0; y < 256; ++y) {
    for (int x = 0; x < 256; ++x) {
      const int64_t id = position_token({x, y});
      CHECK(v.is_position(id));
      CHECK(position_from_token(id) == Anchor{x, y});
    }
  }
  int64_t codes = 0, positions = 0, special = 0;
  for (int64_t id = 0; id < v.size(); ++id) {
    const bool c = v.is_code(id);
    const bool p = v.is_position(id);
    const auto kind = v.classify(id);
    CHECK((c ? 1 : 0) + (p ? 1 : 0) <= 1);
    if (kind == TokenKind::code) ++codes;
    if (kind == TokenKind::position) ++positions;
    if (kind == TokenKind::special) ++special;
  }
  CHECK(codes == 4375);
  CHECK(positions == 65536);
  CHECK(special == 3);
  CHECK_THROWS_AS(v.classify(69914), SequenceError);
  CHECK_THROWS_AS(v.classify(-1), SequenceError);
  CHECK_THROWS_AS(position_from_token(12), SequenceError);
}

TEST_CASE("minimal sequence") {
  const std::vector<CodePair> pairs{{{0, 0}, 0}};
  const auto seq = build_sequence(0, pairs);
  CHECK(seq.ids == std::vector<int64_t>{69911, 69912, 4375, 0, 69913});
  CHECK(seq.text_len == 0);
  const auto with_text = build_sequence(3, pairs);
  CHECK(with_text.ids == std::vector<int64_t>{69911, kTextSlot, kTextSlot, kTextSlot, 69912, 4375, 0, 69913});
}

TEST_CASE("build and parse round trip") {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 300; ++t) {
    const int text = static_cast<int>(rng() % 8);
    const int n = static_cast<int>(rng() % 60);
    const auto pairs = random_pairs(rng, n);
    const auto seq = build_sequence(text, pairs);
    CHECK(seq.ids.size() == static_cast<std::size_t>(text + 2 * n + 3));
    const auto parsed = parse_sequence(seq);
    CHECK(parsed.terminated);
    CHECK(parsed.pairs == pairs);
  }
  std::vector<CodePair> too_many(300, CodePair{{1, 1}, 1});
  CHECK_THROWS_AS(build_sequence(0, too_many), SequenceError);
}

TEST_CASE("strict and tolerant parsing") {
  const std::vector<CodePair> pairs{{{1, 2}, 3}, {{4, 5}, 6}};
  auto seq = build_sequence(1, pairs);

  auto cut = seq;
  cut.ids.pop_back();
  CHECK_THROWS_AS(parse_sequence(cut, ParseMode::strict), SequenceError);
  auto tol = parse_sequence(cut, ParseMode::tolerant);
  CHECK_FALSE(tol.terminated);
  CHECK(tol.pairs == pairs);

  cut.ids.pop_back();  // now ends on a position token
  tol = parse_sequence(cut, ParseMode::tolerant);
  CHECK(tol.pairs == std::vector<CodePair>{pairs[0]});
  CHECK(tol.dropped_trailing);

  auto swapped = seq;
  std::swap(swapped.ids[3], swapped.ids[4]);  // code where a position belongs
  CHECK_THROWS_AS(parse_sequence(swapped, ParseMode::strict), SequenceError);
  CHECK_THROWS_AS(parse_sequence(swapped, ParseMode::tolerant), SequenceError);

  auto eos_after_pos = seq;
  eos_after_pos.ids.erase(eos_after_pos.ids.end() - 2);
  CHECK_THROWS_AS(parse_sequence(eos_after_pos, ParseMode::strict), SequenceError);

  auto code_code = seq;
  code_code.ids[5] = 7;
  CHECK_THROWS_AS(parse_sequence(code_code, ParseMode::strict), SequenceError);
}

TEST_CASE("length filter") {
  std::vector<TokenizedSample> corpus;
  corpus.push_back(sample_with(9, "box"));
  corpus.push_back(sample_with(10, "box"));
  corpus.push_back(sample_with(254, "box"));      // 1 + 2*254 + 3 = 512
  corpus.push_back(sample_with(254, "big box"));  // 513
  FilterReport rep;
  const auto kept = filter_by_length(corpus, &rep);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].pairs.size() == 10);
  CHECK(kept[1].pairs.size() == 254);
  CHECK(rep.total == 4);
  CHECK(rep.kept == 2);
  CHECK(rep.too_few_codes == 1);
  CHECK(rep.too_long == 1);
  CHECK(rep.dropped_fraction() == doctest::Approx(0.5));
  CHECK(count_words("  capital a  in regular font ") == 5);
}

TEST_CASE("tokenized files round trip") {
  const auto path = std::filesystem::temp_directory_path() / "svgen_test_tokens.jsonl";
  std::vector<TokenizedSample> corpus{sample_with(12, "box"), sample_with(20, "circle 3")};
  corpus[1].codes_per_shape = 2;
  write_tokenized(path, corpus);
  const auto back = read_tokenized(path);
  REQUIRE(back.size() == 2);
  CHECK(back[0].pairs == corpus[0].pairs);
  CHECK(back[1].prompt == "circle 3");
  CHECK(back[1].codes_per_shape == 2);
  std::filesystem::remove(path);
}

}  // TEST_SUITE
