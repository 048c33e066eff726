#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dialv/decoding.hpp"
#include "dialv/model.hpp"

namespace dialv {

/// One generated reply as stored in a replies file:
/// `prompt_index<TAB>sample_index<TAB>strategy<TAB>radius_or_tau<TAB>reply_text`.
struct Reply {
  std::size_t prompt_index = 0;
  std::size_t sample_index = 0;
  std::string strategy;
  std::string setting;  // radius, tau, or "-"
  std::string text;
};

std::string format_reply(const Reply& r);
std::vector<Reply> parse_replies(std::string_view text, const std::string& source = "<replies>");
std::vector<Reply> load_replies(const std::filesystem::path& path);

/// Result of a Zipf fit. `exponent` is empty when the frequency table cannot
/// support a fit; `reason` then says why.
struct ZipfFit {
  std::optional<double> exponent;
  std::string reason;

  bool ok() const { return exponent.has_value(); }
};

/// Maximum-likelihood exponent s of P(k) = k^-s / H_N(s) over frequency
/// ranks k = 1..N (N = observed types, x_min = 1). The likelihood is
/// maximised by golden-section search over s in [1.001, 4]. Needs at least
/// two distinct frequencies.
ZipfFit fit_zipf_counts(std::vector<std::uint64_t> counts);
ZipfFit fit_zipf(std::span<const std::string> replies);

/// Negated least-squares slope of log frequency against log rank. A
/// diagnostic only; the MLE above is the reported figure.
std::optional<double> zipf_loglog_slope(std::vector<std::uint64_t> counts);

/// Word frequencies pooled over space-separated replies.
std::vector<std::uint64_t> word_counts(std::span<const std::string> replies);

/// 100 * distinct reply strings / replies.
double unique_pct(std::span<const std::string> replies);

/// Distinct word types / word tokens over all replies. Length-sensitive:
/// longer replies lower it even at equal diversity. NaN with no tokens.
double ttr(std::span<const std::string> replies);

struct NllScore {
  double mean_nll = 0.0;
  std::size_t unk_tokens = 0;
};

/// Mean total NLL (nats, EOS included) of each reply given its prompt under
/// the deterministic baseline. Out-of-vocabulary words score as UNK and are
/// counted.
NllScore score_nll(std::span<const Reply> replies, std::span<const std::string> prompts,
                   const DialogueModel& baseline, const Vocabulary& vocab);

struct ReplyStats {
  std::string label;
  ZipfFit zipf;
  double mean_nll = 0.0;
  double unique_pct = 0.0;
  double ttr = 0.0;
  std::size_t n_replies = 0;
  std::size_t unk_tokens = 0;
};

ReplyStats reply_stats(const std::string& label, std::span<const Reply> replies,
                       std::span<const std::string> prompts, const DialogueModel& baseline,
                       const Vocabulary& vocab);

/// Generates replies for every prompt with `cfg`. Sample j of prompt i uses
/// the substream (seed, "generate", i, j).
std::vector<Reply> generate_replies(std::span<const std::string> prompts, const Vocabulary& vocab,
                                    const DecodeModels& models, const DecodeConfig& cfg, std::size_t n,
                                    std::uint64_t seed);

struct ShellSweep {
  std::vector<ReplyStats> rows;
  std::vector<std::vector<Reply>> replies;  // per radius
  /// Adjacent radius pairs (i, i+1) where unique_pct drops.
  std::vector<std::size_t> unique_inversions;
};

/// Latent-shell decoding at every radius, `samples` replies per prompt, then
/// reply statistics scored under the baseline. Sample j of prompt i draws
/// its direction from the same substream at every radius.
ShellSweep shell_sweep_report(const DialogueModel& latent, const DialogueModel& baseline,
                              const Vocabulary& vocab, std::span<const std::string> prompts,
                              std::span<const double> radii, std::size_t samples,
                              const DecodeConfig& cfg, std::uint64_t seed);

/// Aligned plain-text table.
std::string render_table(std::span<const ReplyStats> rows);
/// `strategy_or_radius<TAB>zipf<TAB>mean_nll<TAB>unique_pct<TAB>ttr`.
std::string render_tsv(std::span<const ReplyStats> rows);

}  // namespace dialv
