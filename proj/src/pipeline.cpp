#include "dialv/pipeline.hpp"

#include <fstream>
#include <memory>
#include <optional>

#include "dialv/error.hpp"

namespace dialv {

namespace fs = std::filesystem;

namespace {

void ensure_dir(const fs::path& dir) {
  if (fs::is_directory(dir)) return;
  const fs::path parent = dir.parent_path();
  if (!parent.empty() && !fs::is_directory(parent)) {
    throw ConfigError("cannot create " + dir.string() + ": parent directory does not exist");
  }
  fs::create_directory(dir);
}

void require_file(const fs::path& p, const std::string& what, const std::string& hint = "") {
  if (p.empty()) throw ConfigError(what + " is not set" + hint);
  if (!fs::is_regular_file(p)) throw ConfigError(what + " not found: " + p.string() + hint);
}

ModelConfig model_config(const RunConfig& cfg, ModelVariant variant, const Vocabulary& vocab) {
  ModelConfig mc = cfg.model;
  mc.variant = variant;
  mc.vocab_size = static_cast<Index>(vocab.size());
  mc.class_seed = stream_seed(cfg, "classes");
  return mc;
}

std::string variant_stream(std::string_view prefix, ModelVariant v) {
  return std::string(prefix) + "-" + to_string(v);
}

Vocabulary load_prepared_vocab(const RunConfig& cfg) {
  require_file(vocab_path(cfg), "vocabulary", "; run `dialv prepare` first");
  return Vocabulary::load(vocab_path(cfg));
}

std::string row_label(std::span<const Reply> replies, const fs::path& file) {
  if (replies.empty()) return file.stem().string();
  for (const auto& r : replies) {
    if (r.strategy != replies.front().strategy || r.setting != replies.front().setting) {
      return file.stem().string();
    }
  }
  const Reply& r = replies.front();
  return r.setting == "-" ? r.strategy : r.strategy + "@" + r.setting;
}

std::string replies_text(std::span<const Reply> replies) {
  std::string text;
  for (const auto& r : replies) text += format_reply(r) + '\n';
  return text;
}

}  // namespace

fs::path vocab_path(const RunConfig& cfg) { return cfg.output_dir / "vocab.tsv"; }
fs::path pairs_path(const RunConfig& cfg) { return cfg.output_dir / "pairs.tsv"; }

fs::path checkpoint_path(const RunConfig& cfg, ModelVariant variant) {
  return cfg.checkpoint_dir / (to_string(variant) + ".ckpt");
}

fs::path epoch_checkpoint_path(const RunConfig& cfg, ModelVariant variant, int epoch) {
  return cfg.checkpoint_dir / (to_string(variant) + "-epoch" + std::to_string(epoch) + ".ckpt");
}

fs::path train_log_path(const RunConfig& cfg, ModelVariant variant) {
  return cfg.checkpoint_dir / (to_string(variant) + "-train.log");
}

PrepareStats cmd_prepare(const RunConfig& cfg, std::ostream& out) {
  require_file(cfg.corpus_manifest, "corpus manifest");
  const auto files = read_manifest(cfg.corpus_manifest);
  if (files.empty()) throw DataError("corpus manifest " + cfg.corpus_manifest.string() + " lists no files");
  ensure_dir(cfg.output_dir);

  const auto counts = count_tokens(files);
  const Vocabulary vocab = Vocabulary::from_counts(counts, cfg.min_count);
  const auto raw = pair_files(files);
  const auto pairs = encode_pairs(raw, vocab, cfg.model.max_len);
  if (pairs.empty()) throw DataError("corpus yields no prompt/response pairs");

  vocab.save(vocab_path(cfg));
  save_pairs(pairs_path(cfg), pairs);

  PrepareStats s;
  s.files = files.size();
  s.pairs = pairs.size();
  for (const auto& [tok, c] : counts) s.tokens += c;
  s.vocab_size = vocab.size();
  out << "files\t" << s.files << "\npairs\t" << s.pairs << "\ntokens\t" << s.tokens << "\nvocab_size\t"
      << s.vocab_size << "\n";
  return s;
}

DialogueModel load_model(const RunConfig& cfg, ModelVariant variant, const Vocabulary& vocab) {
  const fs::path path = checkpoint_path(cfg, variant);
  require_file(path, to_string(variant) + " checkpoint", "; run `dialv train --model " + to_string(variant) + "`");
  const Checkpoint ck = load_checkpoint(path);
  if (ck.config.variant != variant) {
    throw ConfigError(path.string() + " holds a " + to_string(ck.config.variant) + " model");
  }
  if (ck.config.vocab_size != static_cast<Index>(vocab.size()) ||
      ck.vocab_hash != content_hash(vocab.to_text())) {
    throw ConfigError(path.string() + " was trained with a different vocabulary than " +
                      vocab_path(cfg).string());
  }
  return model_from_checkpoint(ck);
}

TrainState cmd_train(const RunConfig& cfg, std::ostream& out) {
  const Vocabulary vocab = load_prepared_vocab(cfg);
  require_file(pairs_path(cfg), "pair cache", "; run `dialv prepare` first");
  const auto pairs = load_pairs(pairs_path(cfg));
  ensure_dir(cfg.checkpoint_dir);

  const ModelVariant variant = cfg.train_variant;
  const std::uint64_t vocab_hash = content_hash(vocab.to_text());
  TrainConfig tc = cfg.train;
  tc.seed = stream_seed(cfg, variant_stream("train", variant));

  std::optional<DialogueModel> model;
  TrainState state;
  const fs::path latest = checkpoint_path(cfg, variant);
  const bool resuming = cfg.resume && fs::is_regular_file(latest);
  if (resuming) {
    model.emplace(load_model(cfg, variant, vocab));
    const Checkpoint ck = load_checkpoint(latest);
    state.step = std::stol(ck.meta.at("step"));
    state.optimizer.restore(ck.optimizer);
    out << "resuming from " << latest.string() << " at step " << state.step << "\n";
  } else {
    model.emplace(DialogueModel::initialize(model_config(cfg, variant, vocab),
                                            stream_seed(cfg, variant_stream("init", variant))));
  }

  const fs::path log_file = train_log_path(cfg, variant);
  if (!resuming) {
    std::ofstream log(log_file, std::ios::trunc);
    if (!log) throw IoError("cannot write " + log_file.string());
    log << "# step\tmean_recon_nll\tmean_kl\tanneal_weight\n";
  }

  const long per_epoch = steps_per_epoch(pairs.size(), tc.batch_size);
  TrainHooks hooks;
  hooks.on_log = [&](const LogRow& row) {
    std::ofstream log(log_file, std::ios::app);
    log << format_log_row(row) << "\n";
    if (!log) throw IoError("cannot append to " + log_file.string());
  };
  hooks.on_checkpoint = [&](const DialogueModel& m, const TrainState& st, int epochs_done) {
    Checkpoint ck;
    ck.config = m.config();
    ck.vocab_path = vocab_path(cfg).string();
    ck.vocab_hash = vocab_hash;
    ck.params = m.params();
    ck.meta["step"] = std::to_string(st.step);
    ck.meta["epochs_done"] = std::to_string(epochs_done);
    ck.optimizer = st.optimizer.state();
    save_checkpoint(latest, ck);
    if (st.step == static_cast<long>(epochs_done) * per_epoch) {
      save_checkpoint(epoch_checkpoint_path(cfg, variant, epochs_done), ck);
      out << "epoch " << epochs_done << " done (step " << st.step << ")\n";
    }
  };
  state = train(*model, pairs, tc, std::move(state), hooks);
  out << "trained " << to_string(variant) << " model: " << state.step << " steps, checkpoint "
      << latest.string() << "\n";
  return state;
}

fs::path cmd_generate(const RunConfig& cfg, std::ostream& out) {
  if (cfg.samples == 0) throw UsageError("number of replies per prompt (--n) must be positive");
  cfg.decode.validate();
  require_file(cfg.prompt_file, "prompt file");
  const auto prompts = read_prompts(cfg.prompt_file);
  const Vocabulary vocab = load_prepared_vocab(cfg);

  std::optional<DialogueModel> latent;
  std::optional<DialogueModel> baseline;
  DecodeModels models;
  if (cfg.decode.strategy == Strategy::LatentShell) {
    latent.emplace(load_model(cfg, ModelVariant::Latent, vocab));
    models.latent = &*latent;
  } else {
    baseline.emplace(load_model(cfg, ModelVariant::Baseline, vocab));
    models.baseline = &*baseline;
  }
  const auto replies =
      generate_replies(prompts, vocab, models, cfg.decode, cfg.samples, stream_seed(cfg, "generate"));

  ensure_dir(cfg.output_dir);
  const fs::path path = cfg.replies_file.empty()
                            ? cfg.output_dir / ("replies-" + to_string(cfg.decode.strategy) + ".tsv")
                            : cfg.replies_file;
  write_file_atomic(path, replies_text(replies));
  out << "wrote " << replies.size() << " replies to " << path.string() << "\n";
  return path;
}

std::vector<ReplyStats> cmd_eval(const RunConfig& cfg, std::span<const fs::path> files, std::ostream& out) {
  if (files.empty()) throw UsageError("eval needs at least one replies file");
  require_file(cfg.prompt_file, "prompt file");
  const auto prompts = read_prompts(cfg.prompt_file);
  const Vocabulary vocab = load_prepared_vocab(cfg);
  const DialogueModel baseline = load_model(cfg, ModelVariant::Baseline, vocab);

  std::vector<ReplyStats> rows;
  for (const auto& f : files) {
    const auto replies = load_replies(f);
    if (replies.empty()) throw DataError("replies file " + f.string() + " is empty");
    rows.push_back(reply_stats(row_label(replies, f), replies, prompts, baseline, vocab));
  }
  out << render_table(rows);
  ensure_dir(cfg.output_dir);
  const fs::path report = cfg.report_file.empty() ? cfg.output_dir / "report.tsv" : cfg.report_file;
  write_file_atomic(report, render_tsv(rows));
  return rows;
}

ShellSweep cmd_shell_sweep(const RunConfig& cfg, std::ostream& out) {
  if (cfg.samples == 0) throw UsageError("number of samples per radius must be positive");
  require_file(cfg.prompt_file, "prompt file");
  const auto prompts = read_prompts(cfg.prompt_file);
  const Vocabulary vocab = load_prepared_vocab(cfg);
  const DialogueModel latent = load_model(cfg, ModelVariant::Latent, vocab);
  const DialogueModel baseline = load_model(cfg, ModelVariant::Baseline, vocab);

  ShellSweep sweep = shell_sweep_report(latent, baseline, vocab, prompts, cfg.radii, cfg.samples, cfg.decode,
                                        stream_seed(cfg, "shell-sweep"));
  out << render_table(sweep.rows);
  for (std::size_t i : sweep.unique_inversions) {
    out << "# unique % decreases from radius " << sweep.rows[i].label << " to " << sweep.rows[i + 1].label
        << "\n";
  }
  ensure_dir(cfg.output_dir);
  const fs::path report = cfg.report_file.empty() ? cfg.output_dir / "shell-sweep.tsv" : cfg.report_file;
  write_file_atomic(report, render_tsv(sweep.rows));
  std::string all;
  for (const auto& r : sweep.replies) all += replies_text(r);
  write_file_atomic(cfg.output_dir / "replies-shell-sweep.tsv", all);
  return sweep;
}

}  // namespace dialv
