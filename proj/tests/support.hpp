#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dialv/corpus.hpp"
#include "dialv/random.hpp"

namespace dialv::testing {

/// Prompts with several equally frequent replies each. Reply k of every
/// prompt opens with the same two words, so the reply choice is a factor the
/// prompt does not determine.
struct MultiReplyCorpus {
  std::vector<std::string> prompts;
  std::vector<RawPair> pairs;
};

inline MultiReplyCorpus multi_reply_corpus(int n_prompts, int n_replies, int repeats) {
  static const char* const openers[][2] = {{"well", "sure"},   {"no", "way"},     {"maybe", "later"},
                                           {"i", "think"},     {"oh", "really"},  {"never", "again"}};
  MultiReplyCorpus c;
  for (int i = 0; i < n_prompts; ++i) {
    c.prompts.push_back("what about t" + std::to_string(i) + " and u" + std::to_string(i % 5) + " ?");
  }
  for (int rep = 0; rep < repeats; ++rep) {
    for (int i = 0; i < n_prompts; ++i) {
      for (int k = 0; k < n_replies; ++k) {
        const auto& o = openers[k % 6];
        c.pairs.emplace_back(c.prompts[static_cast<std::size_t>(i)],
                             std::string(o[0]) + " " + o[1] + " t" + std::to_string(i) + " .");
      }
    }
  }
  return c;
}

inline Vocabulary vocab_of(const std::vector<RawPair>& pairs, std::uint64_t min_count = 1) {
  std::map<std::string, std::uint64_t> counts;
  for (const auto& [x, y] : pairs) {
    for (auto& t : tokenize(x)) ++counts[t];
    for (auto& t : tokenize(y)) ++counts[t];
  }
  return Vocabulary::from_counts(counts, min_count);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("dialv-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

}  // namespace dialv::testing
