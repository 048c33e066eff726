#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dialv {

using TokenId = std::int32_t;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kUnk = 1;
inline constexpr TokenId kBos = 2;
inline constexpr TokenId kEos = 3;
inline constexpr TokenId kNumReserved = 4;

inline constexpr std::size_t kDefaultMaxLen = 50;

/// Lowercases ASCII letters, splits on whitespace, and emits each ASCII
/// punctuation character as its own token. An apostrophe starts a new token
/// that keeps the letters after it, so "he's" becomes [he, 's]. Bytes >= 0x80
/// are treated as word characters.
std::vector<std::string> tokenize(std::string_view text);

/// Token <-> id map. Ids 0..3 are PAD, UNK, BOS, EOS; every other token has
/// id >= 4, ordered by descending count and then lexicographically.
class Vocabulary {
 public:
  Vocabulary();

  /// Keeps the tokens whose count is at least `min_count`.
  static Vocabulary from_counts(const std::map<std::string, std::uint64_t>& counts,
                                std::uint64_t min_count);

  static Vocabulary load(const std::filesystem::path& path);
  static Vocabulary parse(std::string_view text, const std::string& source = "<vocab>");
  void save(const std::filesystem::path& path) const;
  /// `token<TAB>count` per line in id order; the first four lines are the
  /// reserved tokens.
  std::string to_text() const;

  std::size_t size() const { return tokens_.size(); }
  bool contains(std::string_view token) const;
  /// Id of `token`, or UNK.
  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const;
  std::uint64_t count(TokenId id) const;
  std::uint64_t min_count() const { return min_count_; }

  static bool is_reserved(TokenId id) { return id >= 0 && id < kNumReserved; }

 private:
  std::vector<std::string> tokens_;
  std::vector<std::uint64_t> counts_;
  std::map<std::string, TokenId, std::less<>> index_;
  std::uint64_t min_count_ = 1;
};

/// Token frequencies over every line of every file.
std::map<std::string, std::uint64_t> count_tokens(std::span<const std::filesystem::path> files);

Vocabulary build_vocab(std::span<const std::filesystem::path> files, std::uint64_t min_count);

/// [BOS, ids..., EOS] with OOV tokens mapped to UNK and the interior
/// truncated to `max_len`.
std::vector<TokenId> encode(std::span<const std::string> tokens, const Vocabulary& vocab,
                            std::size_t max_len = kDefaultMaxLen);

/// Inverse of encode: skips PAD and BOS, stops at the first EOS. Throws
/// DataError on ids outside the vocabulary.
std::vector<std::string> decode(std::span<const TokenId> ids, const Vocabulary& vocab);

std::string join_tokens(std::span<const std::string> tokens);

/// Prompt X and response Y, both BOS/EOS-wrapped.
struct DialoguePair {
  std::vector<TokenId> x;
  std::vector<TokenId> y;

  friend auto operator<=>(const DialoguePair&, const DialoguePair&) = default;
};

using RawPair = std::pair<std::string, std::string>;

/// (line_i, line_i+1) for consecutive non-blank lines.
std::vector<RawPair> pair_adjacent(std::span<const std::string> lines);
std::vector<RawPair> pair_adjacent(const std::filesystem::path& file);

/// Pairs from every file; never pairs across a file boundary.
std::vector<RawPair> pair_files(std::span<const std::filesystem::path> files);

/// Encodes raw pairs, dropping any whose prompt or response has no tokens.
std::vector<DialoguePair> encode_pairs(std::span<const RawPair> raw, const Vocabulary& vocab,
                                       std::size_t max_len = kDefaultMaxLen);

/// Manifest: one corpus path per line; blank lines and `#` comments are
/// skipped; relative paths resolve against the manifest's directory.
std::vector<std::filesystem::path> read_manifest(const std::filesystem::path& manifest);

/// Prompt file: one prompt per line; blank lines are skipped. Throws if no
/// prompt remains.
std::vector<std::string> read_prompts(const std::filesystem::path& path);

std::vector<std::string> read_lines(const std::filesystem::path& path);

/// Pair cache: `x ids<TAB>y ids`, ids space separated, one pair per line.
std::string pairs_to_text(std::span<const DialoguePair> pairs);
std::vector<DialoguePair> parse_pairs(std::string_view text, const std::string& source = "<pairs>");
void save_pairs(const std::filesystem::path& path, std::span<const DialoguePair> pairs);
std::vector<DialoguePair> load_pairs(const std::filesystem::path& path);

/// Writes `contents` to a sibling temp file, then renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace dialv
