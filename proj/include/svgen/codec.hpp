#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "svgen/geometry.hpp"

namespace svgen {

inline constexpr int kContextLen = 512;
/// Id stored in text slots; text is injected as embeddings, not vocabulary ids.
inline constexpr int64_t kTextSlot = -1;

enum class TokenKind { code, position, special };

/// Wire format: code ids [0, n_codes), then positions row-major
/// (n_codes + y*grid + x), then <SOS>, <BOS>, <EOS>.
struct Vocabulary {
  int64_t n_codes = 4375;
  int grid = kDefaultGrid;

  int64_t n_positions() const { return static_cast<int64_t>(grid) * grid; }
  int64_t position_base() const { return n_codes; }
  int64_t sos() const { return n_codes + n_positions(); }
  int64_t bos() const { return sos() + 1; }
  int64_t eos() const { return sos() + 2; }
  int64_t size() const { return sos() + 3; }

  bool is_code(int64_t id) const { return id >= 0 && id < n_codes; }
  bool is_position(int64_t id) const { return id >= n_codes && id < sos(); }
  /// Throws SequenceError for ids outside [0, size()).
  TokenKind classify(int64_t id) const;
};

class SequenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CodePair {
  Anchor theta;
  int64_t code = 0;

  friend bool operator==(const CodePair&, const CodePair&) = default;
};

struct TokenSequence {
  std::vector<int64_t> ids;
  int text_len = 0;
};

int64_t position_token(Anchor theta, const Vocabulary& vocab = {});
Anchor position_from_token(int64_t id, const Vocabulary& vocab = {});

/// <SOS>, text_slots placeholders, <BOS>, (position, code)..., <EOS>.
/// Throws SequenceError when the result exceeds context_len or a pair is out
/// of range.
TokenSequence build_sequence(int text_slots, std::span<const CodePair> pairs, const Vocabulary& vocab = {},
                             int context_len = kContextLen);

enum class ParseMode { strict, tolerant };

struct ParsedSequence {
  std::vector<CodePair> pairs;
  bool terminated = false;         // saw <EOS>
  bool dropped_trailing = false;   // tolerant mode dropped an unpaired position
};

/// Inverse of build_sequence. Strict mode requires the full grammar; tolerant
/// mode also accepts a sequence cut off anywhere after <BOS>.
ParsedSequence parse_sequence(const TokenSequence& seq, ParseMode mode = ParseMode::strict,
                              const Vocabulary& vocab = {});

/// One tokenized sample. With several codes per shape every code is stored as
/// its own pair sharing the shape's anchor.
struct TokenizedSample {
  std::string source_id;
  std::string prompt;
  std::string label;
  int codes_per_shape = 1;
  std::vector<CodePair> pairs;
};

/// Whitespace word count, the number of text slots used by the built-in
/// text encoder.
int count_words(const std::string& text);

using TextLength = std::function<int(const std::string&)>;

struct FilterReport {
  std::size_t total = 0;
  std::size_t kept = 0;
  std::size_t too_few_codes = 0;
  std::size_t too_long = 0;

  double dropped_fraction() const { return total == 0 ? 0.0 : static_cast<double>(total - kept) / static_cast<double>(total); }
};

/// Keeps samples with at least `min_codes` code tokens and total sequence
/// length <= context_len.
std::vector<TokenizedSample> filter_by_length(const std::vector<TokenizedSample>& corpus, FilterReport* report = nullptr,
                                              const TextLength& text_len = count_words, int min_codes = 10,
                                              int context_len = kContextLen);

/// JSONL, one sample per line: {"source_id", "prompt", "label",
/// "codes_per_shape", "pairs": [[x, y, v], ...]}.
void write_tokenized(const std::filesystem::path& path, const std::vector<TokenizedSample>& corpus);
std::vector<TokenizedSample> read_tokenized(const std::filesystem::path& path);

}  // namespace svgen
