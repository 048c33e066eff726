#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "dialv/model.hpp"

namespace dialv {

/// Everything needed to rebuild a model and resume its training.
///
/// Text container: a magic line, `config`/`meta` key-value lines, the
/// vocabulary reference, then each tensor as a `tensor name rank dims...`
/// header followed by one line of hex-float values, and a closing `end`
/// line. Tensors are written in name order, so equal states serialize to
/// equal bytes.
struct Checkpoint {
  ModelConfig config;
  std::string vocab_path;
  std::uint64_t vocab_hash = 0;
  ParamMap params;
  /// Training progress and settings (step, seed, ...).
  std::map<std::string, std::string> meta;
  /// Optimizer accumulators keyed by name.
  std::map<std::string, Tensor> optimizer;
};

std::string checkpoint_to_text(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(std::string_view text, const std::string& source = "<checkpoint>");

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

DialogueModel model_from_checkpoint(const Checkpoint& ckpt);

/// FNV-1a of the file contents.
std::uint64_t content_hash(std::string_view bytes);
std::string hex64(std::uint64_t v);

}  // namespace dialv
