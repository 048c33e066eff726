#pragma once

#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "dialv/checkpoint.hpp"
#include "dialv/eval.hpp"
#include "dialv/run_config.hpp"

namespace dialv {

// Artifact locations derived from a RunConfig.
std::filesystem::path vocab_path(const RunConfig& cfg);
std::filesystem::path pairs_path(const RunConfig& cfg);
std::filesystem::path checkpoint_path(const RunConfig& cfg, ModelVariant variant);
std::filesystem::path epoch_checkpoint_path(const RunConfig& cfg, ModelVariant variant, int epoch);
std::filesystem::path train_log_path(const RunConfig& cfg, ModelVariant variant);

struct PrepareStats {
  std::size_t files = 0;
  std::size_t pairs = 0;
  std::size_t tokens = 0;
  std::size_t vocab_size = 0;
};

/// Reads the manifest, writes the vocabulary and the encoded pair cache to
/// output_dir, and prints corpus statistics.
PrepareStats cmd_prepare(const RunConfig& cfg, std::ostream& out);

/// Trains `cfg.train_variant` on the prepared pairs; writes per-epoch
/// checkpoints and the training log into checkpoint_dir.
TrainState cmd_train(const RunConfig& cfg, std::ostream& out);

/// Writes `cfg.samples` replies per prompt with `cfg.decode.strategy`.
/// Returns the replies file path.
std::filesystem::path cmd_generate(const RunConfig& cfg, std::ostream& out);

/// One statistics row per replies file; prints the table and writes the TSV
/// report.
std::vector<ReplyStats> cmd_eval(const RunConfig& cfg, std::span<const std::filesystem::path> replies,
                                 std::ostream& out);

/// Latent-shell sweep over cfg.radii; prints the table (flagging unique %
/// inversions) and writes the TSV report and the generated replies.
ShellSweep cmd_shell_sweep(const RunConfig& cfg, std::ostream& out);

/// Loads a checkpoint and checks it against the prepared vocabulary.
DialogueModel load_model(const RunConfig& cfg, ModelVariant variant, const Vocabulary& vocab);

}  // namespace dialv
