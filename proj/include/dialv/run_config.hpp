#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "dialv/decoding.hpp"
#include "dialv/model.hpp"
#include "dialv/training.hpp"

namespace dialv {

/// Every setting of a pipeline run.
struct RunConfig {
  std::filesystem::path corpus_manifest;
  std::filesystem::path prompt_file;
  std::filesystem::path checkpoint_dir = "checkpoints";
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 1;

  std::uint64_t min_count = 2;
  ModelConfig model;
  TrainConfig train;
  DecodeConfig decode;
  ModelVariant train_variant = ModelVariant::Latent;
  bool resume = false;

  std::size_t samples = 1;
  std::vector<double> radii = {0, 4, 8, 12, 16};
  std::filesystem::path replies_file;  // empty: <output_dir>/replies-<strategy>.tsv
  std::filesystem::path report_file;   // empty: <output_dir>/report.tsv
};

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string help;
};

/// All recognised keys, in documentation order.
const std::vector<ConfigKey>& config_keys();

/// Assigns one key; throws ConfigError for unknown keys or bad values.
/// Relative paths are resolved against `base_dir`.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value,
                      const std::filesystem::path& base_dir = {});

/// Applies `key = value` lines (`#` starts a comment) on top of `cfg`.
void apply_config_text(RunConfig& cfg, std::string_view text, const std::string& source,
                       const std::filesystem::path& base_dir = {});

/// Defaults, then the file (if given), then overrides in order.
RunConfig load_run_config(const std::filesystem::path& file,
                          const std::vector<std::pair<std::string, std::string>>& overrides = {});

/// Seeds of the named substreams of the global seed.
std::uint64_t stream_seed(const RunConfig& cfg, std::string_view name);

}  // namespace dialv
