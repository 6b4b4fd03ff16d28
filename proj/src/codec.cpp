#include "svgen/codec.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace svgen {

TokenKind Vocabulary::classify(int64_t id) const {
  if (is_code(id)) return TokenKind::code;
  if (is_position(id)) return TokenKind::position;
  if (id >= sos() && id < size()) return TokenKind::special;
  throw SequenceError("token id " + std::to_string(id) + " outside the vocabulary");
}

int64_t position_token(Anchor theta, const Vocabulary& vocab) {
  if (theta.x < 0 || theta.y < 0 || theta.x >= vocab.grid || theta.y >= vocab.grid) {
    throw SequenceError("position (" + std::to_string(theta.x) + "," + std::to_string(theta.y) + ") outside the grid");
  }
  return vocab.position_base() + static_cast<int64_t>(theta.y) * vocab.grid + theta.x;
}

Anchor position_from_token(int64_t id, const Vocabulary& vocab) {
  if (!vocab.is_position(id)) throw SequenceError("token " + std::to_string(id) + " is not a position");
  const int64_t off = id - vocab.position_base();
  return {static_cast<int>(off % vocab.grid), static_cast<int>(off / vocab.grid)};
}

TokenSequence build_sequence(int text_slots, std::span<const CodePair> pairs, const Vocabulary& vocab,
                             int context_len) {
  if (text_slots < 0) throw SequenceError("negative text length");
  TokenSequence seq;
  seq.text_len = text_slots;
  const std::size_t len = static_cast<std::size_t>(text_slots) + 2 * pairs.size() + 3;
  if (len > static_cast<std::size_t>(context_len)) {
    throw SequenceError("sequence length " + std::to_string(len) + " exceeds context " + std::to_string(context_len));
  }
  seq.ids.reserve(len);
  seq.ids.push_back(vocab.sos());
  seq.ids.insert(seq.ids.end(), static_cast<std::size_t>(text_slots), kTextSlot);
  seq.ids.push_back(vocab.bos());
  for (const auto& p : pairs) {
    if (!vocab.is_code(p.code)) throw SequenceError("code " + std::to_string(p.code) + " outside the codebook");
    seq.ids.push_back(position_token(p.theta, vocab));
    seq.ids.push_back(p.code);
  }
  seq.ids.push_back(vocab.eos());
  return seq;
}

ParsedSequence parse_sequence(const TokenSequence& seq, ParseMode mode, const Vocabulary& vocab) {
  const auto& ids = seq.ids;
  if (ids.empty() || ids.front() != vocab.sos()) throw SequenceError("sequence must begin with <SOS>");
  std::size_t i = 1;
  while (i < ids.size() && ids[i] != vocab.bos()) {
    if (ids[i] != kTextSlot) throw SequenceError("unexpected token " + std::to_string(ids[i]) + " before <BOS>");
    ++i;
  }
  if (i == ids.size()) throw SequenceError("missing <BOS>");
  if (static_cast<int>(i - 1) != seq.text_len) throw SequenceError("text slot count does not match text_len");
  ++i;

  ParsedSequence out;
  bool have_pos = false;
  Anchor pending;
  for (; i < ids.size(); ++i) {
    const int64_t id = ids[i];
    const TokenKind kind = vocab.classify(id);
    if (id == vocab.eos()) {
      if (have_pos) throw SequenceError("<EOS> after an unpaired position token");
      out.terminated = true;
      if (i + 1 != ids.size()) throw SequenceError("tokens after <EOS>");
      break;
    }
    if (kind == TokenKind::special) throw SequenceError("unexpected special token after <BOS>");
    if (!have_pos) {
      if (kind != TokenKind::position) throw SequenceError("alternation violated: expected a position token at " + std::to_string(i));
      pending = position_from_token(id, vocab);
      have_pos = true;
    } else {
      if (kind != TokenKind::code) throw SequenceError("alternation violated: expected a code token at " + std::to_string(i));
      out.pairs.push_back({pending, id});
      have_pos = false;
    }
  }
  if (!out.terminated) {
    if (mode == ParseMode::strict) throw SequenceError("missing <EOS>");
    out.dropped_trailing = have_pos;
  }
  return out;
}

int count_words(const std::string& text) {
  std::istringstream in(text);
  std::string w;
  int n = 0;
  while (in >> w) ++n;
  return n;
}

std::vector<TokenizedSample> filter_by_length(const std::vector<TokenizedSample>& corpus, FilterReport* report,
                                              const TextLength& text_len, int min_codes, int context_len) {
  FilterReport r;
  std::vector<TokenizedSample> out;
  for (const auto& s : corpus) {
    ++r.total;
    const std::size_t len = static_cast<std::size_t>(text_len(s.prompt)) + 2 * s.pairs.size() + 3;
    if (s.pairs.size() < static_cast<std::size_t>(min_codes)) {
      ++r.too_few_codes;
    } else if (len > static_cast<std::size_t>(context_len)) {
      ++r.too_long;
    } else {
      out.push_back(s);
    }
  }
  r.kept = out.size();
  if (report) *report = r;
  return out;
}

void write_tokenized(const std::filesystem::path& path, const std::vector<TokenizedSample>& corpus) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& s : corpus) {
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& p : s.pairs) pairs.push_back({p.theta.x, p.theta.y, p.code});
    out << nlohmann::json{{"source_id", s.source_id},
                          {"prompt", s.prompt},
                          {"label", s.label},
                          {"codes_per_shape", s.codes_per_shape},
                          {"pairs", pairs}}
               .dump()
        << '\n';
  }
}

std::vector<TokenizedSample> read_tokenized(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<TokenizedSample> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    TokenizedSample s;
    s.source_id = j.at("source_id").get<std::string>();
    s.prompt = j.at("prompt").get<std::string>();
    s.label = j.value("label", std::string{});
    s.codes_per_shape = j.value("codes_per_shape", 1);
    for (const auto& p : j.at("pairs")) s.pairs.push_back({{p[0].get<int>(), p[1].get<int>()}, p[2].get<int64_t>()});
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace svgen
