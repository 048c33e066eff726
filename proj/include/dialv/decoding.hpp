#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dialv/math.hpp"
#include "dialv/model.hpp"
#include "dialv/random.hpp"

namespace dialv {

enum class Strategy { MlBeam, MmiBeam, TempSample, LatentShell };

std::string to_string(Strategy s);
Strategy parse_strategy(const std::string& s);

struct DecodeConfig {
  Strategy strategy = Strategy::MlBeam;
  int beam_width = 2;
  double tau = 0.35;
  double mmi_lambda = 0.45;
  int mmi_window = 6;
  double radius = 0.0;
  std::size_t max_len = kDefaultMaxLen;

  void validate() const;
};

/// A partial or finished output. Per-position log-probs are kept so scores
/// with a positional window (MMI) can be recomputed exactly.
struct Hypothesis {
  std::vector<TokenId> tokens;
  std::vector<double> cond_logps;
  std::vector<double> lm_logps;
  bool finished = false;

  double cond_logp() const;
  double lm_logp() const;
};

/// Sum of conditional log-probs; no length normalization.
double ml_score(const Hypothesis& hyp);

/// sum_t log P(y_t | y_<t, X) - lambda * sum_{t <= window} log P_LM(y_t | y_<t).
double mmi_score(const Hypothesis& hyp, double lambda, int window);

/// Log-probabilities for the next token. `lm` is empty unless the step
/// function also runs a language model.
struct StepLogProbs {
  VectorXd cond;
  VectorXd lm;
};

struct BeamOptions {
  int width = 2;
  std::size_t max_len = kDefaultMaxLen;
  TokenId eos = kEos;
  TokenId start = kBos;
  /// Never emitted.
  std::vector<TokenId> banned = {kPad, kBos};
};

/// True when (score_a, a) ranks before (score_b, b): higher score first,
/// then the lexicographically smaller token sequence.
inline bool ranks_before(double score_a, const Hypothesis& a, double score_b, const Hypothesis& b) {
  if (score_a != score_b) return score_a > score_b;
  return a.tokens < b.tokens;
}

/// Beam search without length normalization. `step_fn(state, last_token)`
/// returns {next_state, StepLogProbs}. Each round expands every live
/// hypothesis over the whole vocabulary and keeps the best `width`
/// candidates; candidates that end in EOS or reach max_len retire to the
/// finished pool. Returns the pool's best hypothesis under `score_fn`.
template <typename State, typename StepFn, typename ScoreFn>
Hypothesis beam_search(StepFn&& step_fn, State init, const BeamOptions& opts, ScoreFn&& score_fn) {
  if (opts.width < 1) throw UsageError("beam_search: width must be at least 1");
  if (opts.max_len < 1) throw UsageError("beam_search: max_len must be at least 1");

  struct Live {
    Hypothesis hyp;
    State state;
    double score;
  };
  struct Candidate {
    std::size_t parent;
    TokenId token;
    Hypothesis hyp;
    double score;
  };

  std::vector<Live> live;
  live.push_back({Hypothesis{}, std::move(init), 0.0});
  std::vector<std::pair<Hypothesis, double>> pool;

  while (!live.empty()) {
    std::vector<Candidate> candidates;
    std::vector<State> next_states;
    next_states.reserve(live.size());
    for (std::size_t i = 0; i < live.size(); ++i) {
      const Live& l = live[i];
      const TokenId last = l.hyp.tokens.empty() ? opts.start : l.hyp.tokens.back();
      auto [next_state, lp] = step_fn(l.state, last);
      next_states.push_back(std::move(next_state));
      for (Index v = 0; v < lp.cond.size(); ++v) {
        const auto token = static_cast<TokenId>(v);
        if (std::find(opts.banned.begin(), opts.banned.end(), token) != opts.banned.end()) continue;
        if (!std::isfinite(lp.cond[v])) continue;
        Hypothesis h = l.hyp;
        h.tokens.push_back(token);
        h.cond_logps.push_back(lp.cond[v]);
        if (lp.lm.size() > 0) h.lm_logps.push_back(lp.lm[v]);
        h.finished = token == opts.eos || h.tokens.size() >= opts.max_len;
        const double s = score_fn(h);
        candidates.push_back({i, token, std::move(h), s});
      }
    }
    const std::size_t keep = std::min(candidates.size(), static_cast<std::size_t>(opts.width));
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                      candidates.end(), [](const Candidate& a, const Candidate& b) {
                        return ranks_before(a.score, a.hyp, b.score, b.hyp);
                      });
    std::vector<Live> next;
    for (std::size_t k = 0; k < keep; ++k) {
      Candidate& c = candidates[k];
      if (c.hyp.finished) {
        pool.emplace_back(std::move(c.hyp), c.score);
      } else {
        next.push_back({std::move(c.hyp), next_states[c.parent], c.score});
      }
    }
    live = std::move(next);
  }
  if (pool.empty()) throw UsageError("beam_search: no token can be emitted");
  auto best = std::min_element(pool.begin(), pool.end(), [](const auto& a, const auto& b) {
    return ranks_before(a.second, a.first, b.second, b.first);
  });
  return best->first;
}

/// q_w = p_w^(1/tau) / sum_v p_v^(1/tau), evaluated in log space.
template <typename Derived>
VectorXd temperature_scale(const Eigen::MatrixBase<Derived>& p, double tau) {
  if (!(tau > 0.0 && tau <= 1.0)) throw UsageError("temperature: tau must lie in (0, 1]");
  const double total = p.sum();
  if (std::abs(total - 1.0) > 1e-6) {
    throw UsageError("temperature: distribution sums to " + std::to_string(total));
  }
  if ((p.array() < 0.0).any()) throw UsageError("temperature: negative probability");
  if (tau == 1.0) return p;
  const VectorXd scaled = p.array().log() / tau;
  return softmax(scaled);
}

/// Inverse-CDF draw from a normalized distribution.
TokenId sample_index(const VectorXd& q, Rng& rng);

/// One draw from the temperature-scaled distribution.
TokenId temperature_sample(const VectorXd& p, double tau, Rng& rng);

/// z ~ N(0, I_d) rescaled to norm `radius`; radius 0 gives the zero vector.
/// A draw is consumed even at radius 0, so a fixed rng state maps every
/// radius onto the same direction.
VectorXd shell_sample(Index d, double radius, Rng& rng);

/// Checkpoints available to the strategies. ml-beam, mmi-beam and
/// temp-sample run on the baseline; latent-shell needs the latent model.
struct DecodeModels {
  const DialogueModel* latent = nullptr;
  const DialogueModel* baseline = nullptr;
};

/// Beam search over `model` conditioned on [h_x z]. Returns the best
/// hypothesis; its tokens end with EOS unless max_len cut it off.
Hypothesis beam_decode(const DialogueModel& model, std::span<const TokenId> prompt,
                       const VectorXd& z, int width, std::size_t max_len);

/// Anti-LM beam search: the LM is the same decoder started from the zero
/// state, i.e. with an all-zero prompt encoding.
Hypothesis mmi_decode(const DialogueModel& model, std::span<const TokenId> prompt, int width,
                      std::size_t max_len, double lambda, int window);

/// Ancestral sampling with temperature until EOS or max_len. PAD and BOS are
/// masked out before scaling.
std::vector<TokenId> sample_decode(const DialogueModel& model, std::span<const TokenId> prompt,
                                   double tau, std::size_t max_len, Rng& rng);

/// One reply for `prompt` (BOS/EOS-wrapped ids). The result excludes BOS,
/// EOS and PAD.
std::vector<TokenId> generate(std::span<const TokenId> prompt, const DecodeModels& models,
                              const DecodeConfig& cfg, Rng& rng);

/// Strips a trailing EOS.
std::vector<TokenId> reply_ids(const Hypothesis& hyp);

}  // namespace dialv
