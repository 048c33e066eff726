#include "dialv/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "dialv/error.hpp"

namespace dialv {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kReservedTokens[] = {"<pad>", "<unk>", "<bos>", "<eos>"};

bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_word_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && is_space(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.emplace_back(line);
    start = end + 1;
  }
  return lines;
}

std::vector<TokenId> parse_ids(std::string_view field, const std::string& source, std::size_t line) {
  std::vector<TokenId> ids;
  std::size_t pos = 0;
  while (pos < field.size()) {
    while (pos < field.size() && field[pos] == ' ') ++pos;
    if (pos >= field.size()) break;
    TokenId v = 0;
    auto [ptr, ec] = std::from_chars(field.data() + pos, field.data() + field.size(), v);
    if (ec != std::errc() || (ptr != field.data() + field.size() && *ptr != ' ')) {
      throw ParseError(source, line, "malformed token id list");
    }
    ids.push_back(v);
    pos = static_cast<std::size_t>(ptr - field.data());
  }
  return ids;
}

std::string ids_to_text(std::span<const TokenId> ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(ids[i]);
  }
  return out;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const unsigned char c = static_cast<unsigned char>(text[i]);
    if (is_space(c)) {
      flush();
    } else if (is_word_byte(c)) {
      current += static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c);
    } else if (c == '\'' && i + 1 < text.size() &&
               is_word_byte(static_cast<unsigned char>(text[i + 1]))) {
      flush();
      current += '\'';
    } else {
      flush();
      tokens.emplace_back(1, static_cast<char>(c));
    }
  }
  flush();
  return tokens;
}

Vocabulary::Vocabulary() {
  for (std::string_view t : kReservedTokens) {
    index_.emplace(std::string(t), static_cast<TokenId>(tokens_.size()));
    tokens_.emplace_back(t);
    counts_.push_back(0);
  }
}

Vocabulary Vocabulary::from_counts(const std::map<std::string, std::uint64_t>& counts,
                                   std::uint64_t min_count) {
  if (min_count < 1) throw UsageError("min_count must be at least 1");
  std::vector<std::pair<std::string, std::uint64_t>> kept;
  for (const auto& [token, count] : counts) {
    if (count >= min_count && !token.empty()) kept.emplace_back(token, count);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocabulary v;
  v.min_count_ = min_count;
  for (auto& [token, count] : kept) {
    if (v.index_.count(token)) continue;  // a corpus token spelled like a reserved one
    v.index_.emplace(token, static_cast<TokenId>(v.tokens_.size()));
    v.tokens_.push_back(std::move(token));
    v.counts_.push_back(count);
  }
  return v;
}

bool Vocabulary::contains(std::string_view token) const { return index_.find(token) != index_.end(); }

TokenId Vocabulary::id(std::string_view token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw DataError("token id " + std::to_string(id) + " outside vocabulary of size " +
                    std::to_string(tokens_.size()));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::uint64_t Vocabulary::count(TokenId id) const {
  token(id);
  return counts_[static_cast<std::size_t>(id)];
}

std::string Vocabulary::to_text() const {
  std::string out;
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    out += tokens_[i];
    out += '\t';
    out += std::to_string(counts_[i]);
    out += '\n';
  }
  return out;
}

Vocabulary Vocabulary::parse(std::string_view text, const std::string& source) {
  const auto lines = split_lines(text);
  if (lines.size() < kNumReserved) throw ParseError(source, lines.size(), "missing reserved-token header");
  Vocabulary v;
  v.min_count_ = ~std::uint64_t{0};
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) throw ParseError(source, i + 1, "expected token<TAB>count");
    const std::string token = line.substr(0, tab);
    std::uint64_t count = 0;
    auto [ptr, ec] = std::from_chars(line.data() + tab + 1, line.data() + line.size(), count);
    if (ec != std::errc() || ptr != line.data() + line.size()) {
      throw ParseError(source, i + 1, "malformed count");
    }
    if (i < kNumReserved) {
      if (token != kReservedTokens[i]) {
        throw ParseError(source, i + 1, "expected reserved token " + std::string(kReservedTokens[i]));
      }
      continue;
    }
    if (v.index_.count(token)) throw ParseError(source, i + 1, "duplicate token '" + token + "'");
    v.index_.emplace(token, static_cast<TokenId>(v.tokens_.size()));
    v.tokens_.push_back(token);
    v.counts_.push_back(count);
    v.min_count_ = std::min(v.min_count_, count);
  }
  if (v.tokens_.size() == kNumReserved) v.min_count_ = 1;
  return v;
}

Vocabulary Vocabulary::load(const fs::path& path) { return parse(read_file(path), path.string()); }

void Vocabulary::save(const fs::path& path) const { write_file_atomic(path, to_text()); }

std::map<std::string, std::uint64_t> count_tokens(std::span<const fs::path> files) {
  std::map<std::string, std::uint64_t> counts;
  for (const auto& file : files) {
    for (const auto& line : read_lines(file)) {
      for (auto& tok : tokenize(line)) ++counts[tok];
    }
  }
  return counts;
}

Vocabulary build_vocab(std::span<const fs::path> files, std::uint64_t min_count) {
  return Vocabulary::from_counts(count_tokens(files), min_count);
}

std::vector<TokenId> encode(std::span<const std::string> tokens, const Vocabulary& vocab,
                            std::size_t max_len) {
  const std::size_t n = std::min(tokens.size(), max_len);
  std::vector<TokenId> ids;
  ids.reserve(n + 2);
  ids.push_back(kBos);
  for (std::size_t i = 0; i < n; ++i) ids.push_back(vocab.id(tokens[i]));
  ids.push_back(kEos);
  return ids;
}

std::vector<std::string> decode(std::span<const TokenId> ids, const Vocabulary& vocab) {
  std::vector<std::string> tokens;
  for (TokenId id : ids) {
    const std::string& tok = vocab.token(id);
    if (id == kEos) break;
    if (id == kPad || id == kBos) continue;
    tokens.push_back(tok);
  }
  return tokens;
}

std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::vector<RawPair> pair_adjacent(std::span<const std::string> lines) {
  std::vector<RawPair> pairs;
  const std::string* prev = nullptr;
  for (const auto& line : lines) {
    if (trim(line).empty()) continue;
    if (prev) pairs.emplace_back(*prev, line);
    prev = &line;
  }
  return pairs;
}

std::vector<RawPair> pair_adjacent(const fs::path& file) {
  const auto lines = read_lines(file);
  return pair_adjacent(std::span<const std::string>(lines));
}

std::vector<RawPair> pair_files(std::span<const fs::path> files) {
  std::vector<RawPair> all;
  for (const auto& f : files) {
    auto pairs = pair_adjacent(f);
    all.insert(all.end(), std::make_move_iterator(pairs.begin()), std::make_move_iterator(pairs.end()));
  }
  return all;
}

std::vector<DialoguePair> encode_pairs(std::span<const RawPair> raw, const Vocabulary& vocab,
                                       std::size_t max_len) {
  std::vector<DialoguePair> out;
  out.reserve(raw.size());
  for (const auto& [x, y] : raw) {
    const auto xt = tokenize(x);
    const auto yt = tokenize(y);
    if (xt.empty() || yt.empty()) continue;
    out.push_back({encode(xt, vocab, max_len), encode(yt, vocab, max_len)});
  }
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error while reading " + path.string());
  return ss.str();
}

std::vector<std::string> read_lines(const fs::path& path) { return split_lines(read_file(path)); }

void write_file_atomic(const fs::path& path, std::string_view contents) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw IoError("error while writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::vector<fs::path> read_manifest(const fs::path& manifest) {
  std::vector<fs::path> files;
  const fs::path base = manifest.parent_path();
  for (const auto& raw : read_lines(manifest)) {
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    fs::path p{std::string(line)};
    if (p.is_relative()) p = base / p;
    if (!fs::is_regular_file(p)) throw IoError("corpus file listed in manifest not found: " + p.string());
    files.push_back(p);
  }
  return files;
}

std::vector<std::string> read_prompts(const fs::path& path) {
  std::vector<std::string> prompts;
  for (auto& line : read_lines(path)) {
    if (!trim(line).empty()) prompts.push_back(std::move(line));
  }
  if (prompts.empty()) throw DataError("prompt file " + path.string() + " contains no prompts");
  return prompts;
}

std::string pairs_to_text(std::span<const DialoguePair> pairs) {
  std::string out;
  for (const auto& p : pairs) {
    out += ids_to_text(p.x);
    out += '\t';
    out += ids_to_text(p.y);
    out += '\n';
  }
  return out;
}

std::vector<DialoguePair> parse_pairs(std::string_view text, const std::string& source) {
  std::vector<DialoguePair> pairs;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw ParseError(source, i + 1, "expected x ids<TAB>y ids");
    DialoguePair p{parse_ids(std::string_view(line).substr(0, tab), source, i + 1),
                   parse_ids(std::string_view(line).substr(tab + 1), source, i + 1)};
    if (p.x.size() < 3 || p.y.size() < 3) throw ParseError(source, i + 1, "empty prompt or response");
    pairs.push_back(std::move(p));
  }
  return pairs;
}

void save_pairs(const fs::path& path, std::span<const DialoguePair> pairs) {
  write_file_atomic(path, pairs_to_text(pairs));
}

std::vector<DialoguePair> load_pairs(const fs::path& path) {
  return parse_pairs(read_file(path), path.string());
}

}  // namespace dialv
