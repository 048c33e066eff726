#include "dialv/softmax_tree.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "dialv/error.hpp"
#include "dialv/random.hpp"

namespace dialv {

SoftmaxTree SoftmaxTree::from_classes(std::vector<int> class_of, std::size_t n_classes) {
  if (n_classes == 0) throw UsageError("softmax tree needs at least one class");
  SoftmaxTree t;
  t.members_.assign(n_classes, {});
  t.index_in_class_.resize(class_of.size());
  for (std::size_t w = 0; w < class_of.size(); ++w) {
    const int c = class_of[w];
    if (c < 0 || static_cast<std::size_t>(c) >= n_classes) {
      throw UsageError("word " + std::to_string(w) + " assigned to invalid class " + std::to_string(c));
    }
    t.index_in_class_[w] = static_cast<Index>(t.members_[static_cast<std::size_t>(c)].size());
    t.members_[static_cast<std::size_t>(c)].push_back(static_cast<TokenId>(w));
  }
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (t.members_[c].empty()) throw UsageError("softmax class " + std::to_string(c) + " is empty");
  }
  t.class_of_ = std::move(class_of);
  return t;
}

SoftmaxTree SoftmaxTree::assign(std::size_t vocab_size, std::size_t n_classes, std::uint64_t seed) {
  if (n_classes == 0) throw UsageError("assign_classes: n_classes must be positive");
  if (vocab_size < static_cast<std::size_t>(kNumReserved)) {
    throw UsageError("assign_classes: vocabulary smaller than the reserved tokens");
  }
  const std::size_t words = vocab_size - static_cast<std::size_t>(kNumReserved);
  if (n_classes > std::max<std::size_t>(1, words)) {
    throw UsageError("assign_classes: " + std::to_string(n_classes) + " classes for " +
                     std::to_string(words) + " non-reserved words");
  }
  std::vector<TokenId> order(words);
  std::iota(order.begin(), order.end(), kNumReserved);
  Rng rng(derive_seed(seed, "softmax-classes"));
  rng.shuffle(order);

  std::vector<int> class_of(vocab_size, 0);
  for (std::size_t i = 0; i < order.size(); ++i) {
    class_of[static_cast<std::size_t>(order[i])] = static_cast<int>(i % n_classes);
  }
  return from_classes(std::move(class_of), n_classes);
}

std::size_t default_class_count(std::size_t vocab_size) {
  const auto c = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(vocab_size))));
  const std::size_t words = vocab_size > 4 ? vocab_size - 4 : 0;
  return std::max<std::size_t>(1, std::min(c, words));
}

}  // namespace dialv
