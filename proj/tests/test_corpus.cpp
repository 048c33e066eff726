#include <map>
#include <string>
#include <vector>

#include "doctest.h"
#include "dialv/corpus.hpp"
#include "dialv/error.hpp"
#include "dialv/random.hpp"
#include "support.hpp"

using namespace dialv;
using Tokens = std::vector<std::string>;

namespace {

Vocabulary vocab_from(const std::vector<std::string>& lines, std::uint64_t min_count) {
  std::map<std::string, std::uint64_t> counts;
  for (const auto& l : lines) {
    for (auto& t : tokenize(l)) ++counts[t];
  }
  return Vocabulary::from_counts(counts, min_count);
}

}  // namespace

TEST_CASE("tokenize") {
  CHECK(tokenize("").empty());
  CHECK(tokenize("He's dead.") == Tokens{"he", "'s", "dead", "."});
  CHECK(tokenize("I know?") == Tokens{"i", "know", "?"});
  CHECK(tokenize("  Hello,   WORLD!! ") == Tokens{"hello", ",", "world", "!", "!"});
  CHECK(tokenize("don't") == Tokens{"don", "'t"});
  CHECK(tokenize("caf\xc3\xa9 ok") == Tokens{"caf\xc3\xa9", "ok"});
}

TEST_CASE("vocabulary threshold and ordering") {
  const auto two = vocab_from({"a a b"}, 2);
  CHECK(two.size() == kNumReserved + 1);
  CHECK(two.contains("a"));
  CHECK_FALSE(two.contains("b"));

  const auto one = vocab_from({"a a b"}, 1);
  CHECK(one.size() == kNumReserved + 2);
  CHECK(one.id("a") == kNumReserved);
  CHECK(one.id("b") == kNumReserved + 1);

  // equal counts fall back to lexicographic order
  const auto tie = vocab_from({"z y x"}, 1);
  CHECK(tie.token(kNumReserved) == "x");
  CHECK(tie.token(kNumReserved + 2) == "z");

  for (TokenId r = 0; r < kNumReserved; ++r) CHECK(Vocabulary::is_reserved(r));
  CHECK(one.token(kPad) == "<pad>");
  CHECK(one.token(kUnk) == "<unk>");
  CHECK(one.token(kBos) == "<bos>");
  CHECK(one.token(kEos) == "<eos>");
}

TEST_CASE("vocabulary size is non-increasing in min_count") {
  Rng rng(4);
  std::vector<std::string> lines;
  for (int i = 0; i < 200; ++i) {
    std::string line;
    for (int k = 0; k < 6; ++k) line += "w" + std::to_string(rng.below(40) * rng.below(3)) + " ";
    lines.push_back(line);
  }
  std::size_t prev = vocab_from(lines, 1).size();
  for (std::uint64_t m = 2; m < 60; ++m) {
    const std::size_t cur = vocab_from(lines, m).size();
    CHECK(cur <= prev);
    prev = cur;
  }
}

TEST_CASE("vocabulary text round trip") {
  const auto v = vocab_from({"the cat sat on the mat ."}, 1);
  const auto back = Vocabulary::parse(v.to_text());
  CHECK(back.to_text() == v.to_text());
  CHECK(back.size() == v.size());
  CHECK(back.id("the") == v.id("the"));
  CHECK(back.count(back.id("the")) == 2);

  CHECK_THROWS_AS(Vocabulary::parse("<pad>\t0\n"), ParseError);
  CHECK_THROWS_AS(Vocabulary::parse(v.to_text() + "broken line\n"), ParseError);
}

TEST_CASE("encode and decode") {
  const auto v = vocab_from({"a b c"}, 1);
  CHECK(encode(Tokens{"a"}, v) == std::vector<TokenId>{kBos, v.id("a"), kEos});
  CHECK(encode(Tokens{"q"}, v) == std::vector<TokenId>{kBos, kUnk, kEos});
  CHECK(v.id("q") == kUnk);

  Tokens long_line(60, "a");
  const auto ids = encode(long_line, v, 50);
  CHECK(ids.size() == 52);
  CHECK(ids.front() == kBos);
  CHECK(ids.back() == kEos);

  CHECK(decode(std::vector<TokenId>{kBos, v.id("b"), kPad, v.id("c"), kEos, v.id("a")}, v) == Tokens{"b", "c"});
  CHECK_THROWS_AS(decode(std::vector<TokenId>{999}, v), DataError);
  CHECK_THROWS_AS(v.token(-1), DataError);
}

TEST_CASE("decode inverts encode with min_count 1") {
  const std::vector<std::string> lines = {"He's dead.", "What's that?", "I don't know, maybe... later!"};
  const auto v = vocab_from(lines, 1);
  for (const auto& l : lines) {
    const auto toks = tokenize(l);
    CHECK(decode(encode(toks, v), v) == toks);
  }
  // id-level: encode(decode(ids)) == ids for clean sequences
  const std::vector<TokenId> ids = {kBos, v.id("i"), v.id("know"), kEos};
  CHECK(encode(decode(ids, v), v) == ids);
}

TEST_CASE("pair_adjacent") {
  CHECK(pair_adjacent(std::vector<std::string>{"A"}).empty());
  CHECK(pair_adjacent(std::vector<std::string>{}).empty());
  CHECK(pair_adjacent(std::vector<std::string>{"A", "B", "C"}) ==
        std::vector<RawPair>{{"A", "B"}, {"B", "C"}});

  const auto dir = testing::temp_dir("pairs");
  testing::write_text(dir / "one.txt", "A\nB\n");
  testing::write_text(dir / "two.txt", "C\nD\n");
  testing::write_text(dir / "empty.txt", "");
  const std::vector<std::filesystem::path> files = {dir / "one.txt", dir / "empty.txt", dir / "two.txt"};
  CHECK(pair_files(files) == std::vector<RawPair>{{"A", "B"}, {"C", "D"}});
  CHECK_THROWS_AS(pair_adjacent(dir / "missing.txt"), IoError);
}

TEST_CASE("pair count is the sum of (lines - 1)") {
  Rng rng(8);
  const auto dir = testing::temp_dir("pair-count");
  std::vector<std::filesystem::path> files;
  std::size_t expected = 0;
  for (int f = 0; f < 12; ++f) {
    const std::size_t n = rng.below(6);
    std::string text;
    for (std::size_t i = 0; i < n; ++i) text += "line " + std::to_string(i) + "\n";
    const auto p = dir / ("f" + std::to_string(f) + ".txt");
    testing::write_text(p, text);
    files.push_back(p);
    expected += n > 0 ? n - 1 : 0;
  }
  CHECK(pair_files(files).size() == expected);
}

TEST_CASE("encode_pairs caps both sides") {
  std::string sixty;
  for (int i = 0; i < 60; ++i) sixty += "w ";
  const std::vector<RawPair> raw = {{sixty, sixty}, {"hi", "..."}, {"hi", ""}};
  const auto v = vocab_from({sixty, "hi", "..."}, 1);
  const auto pairs = encode_pairs(raw, v, 50);
  REQUIRE(pairs.size() == 2);
  CHECK(pairs[0].x.size() == 52);
  CHECK(pairs[0].y.size() == 52);
}

TEST_CASE("manifest and prompts") {
  const auto dir = testing::temp_dir("manifest");
  std::filesystem::create_directories(dir / "data");
  testing::write_text(dir / "data" / "a.txt", "x\ny\n");
  testing::write_text(dir / "list.txt", "data/a.txt\n\n");
  const auto files = read_manifest(dir / "list.txt");
  REQUIRE(files.size() == 1);
  CHECK(std::filesystem::equivalent(files[0], dir / "data" / "a.txt"));

  testing::write_text(dir / "bad.txt", "data/a.txt\ndata/nope.txt\n");
  try {
    read_manifest(dir / "bad.txt");
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("nope.txt") != std::string::npos);
  }

  testing::write_text(dir / "prompts.txt", "how are you?\n\nwhere ?\n");
  CHECK(read_prompts(dir / "prompts.txt") == std::vector<std::string>{"how are you?", "where ?"});
}

TEST_CASE("pair cache round trip") {
  const std::vector<DialoguePair> pairs = {{{kBos, 5, kEos}, {kBos, 6, 7, kEos}}, {{kBos, 9, kEos}, {kBos, kUnk, kEos}}};
  CHECK(parse_pairs(pairs_to_text(pairs)) == pairs);
  CHECK_THROWS_AS(parse_pairs("2 5 3\n"), ParseError);

  const auto dir = testing::temp_dir("pair-cache");
  save_pairs(dir / "p.tsv", pairs);
  CHECK(load_pairs(dir / "p.tsv") == pairs);
}
