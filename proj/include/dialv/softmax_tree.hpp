#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dialv/corpus.hpp"
#include "dialv/math.hpp"

namespace dialv {

/// Two-level word clustering for the hierarchical softmax:
/// P(w | h) = P(class(w) | h) * P(w | class(w), h).
class SoftmaxTree {
 public:
  /// Seeded random partition of the non-reserved words into `n_classes`
  /// groups whose sizes differ by at most one. Reserved tokens sit in class 0.
  static SoftmaxTree assign(std::size_t vocab_size, std::size_t n_classes, std::uint64_t seed);

  /// Tree from an explicit word -> class map. Every class must be non-empty.
  static SoftmaxTree from_classes(std::vector<int> class_of, std::size_t n_classes);

  std::size_t vocab_size() const { return class_of_.size(); }
  std::size_t n_classes() const { return members_.size(); }
  int class_of(TokenId w) const { return class_of_[static_cast<std::size_t>(w)]; }
  Index index_in_class(TokenId w) const { return index_in_class_[static_cast<std::size_t>(w)]; }
  std::span<const TokenId> members(int c) const { return members_[static_cast<std::size_t>(c)]; }
  const std::vector<int>& class_map() const { return class_of_; }

 private:
  std::vector<int> class_of_;
  std::vector<Index> index_in_class_;
  std::vector<std::vector<TokenId>> members_;
};

/// Default class count: ceil(sqrt(|V|)), clamped so no class is empty.
std::size_t default_class_count(std::size_t vocab_size);

/// Log-probabilities over the whole vocabulary from class logits and one
/// logit vector per class (ordered like `tree.members(c)`).
template <typename Derived>
VectorXd hierarchical_log_probs(const Eigen::MatrixBase<Derived>& class_logits,
                                std::span<const VectorXd> word_logits, const SoftmaxTree& tree) {
  const VectorXd class_lp = log_softmax(class_logits);
  VectorXd out(static_cast<Index>(tree.vocab_size()));
  for (std::size_t c = 0; c < tree.n_classes(); ++c) {
    const auto members = tree.members(static_cast<int>(c));
    const VectorXd word_lp = log_softmax(word_logits[c]);
    for (std::size_t k = 0; k < members.size(); ++k) {
      out[members[k]] = class_lp[static_cast<Index>(c)] + word_lp[static_cast<Index>(k)];
    }
  }
  return out;
}

}  // namespace dialv
