#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dialv/model.hpp"
#include "dialv/random.hpp"

namespace dialv {

struct TrainConfig {
  int epochs = 3;
  /// Steps over which the KL weight ramps from 0 to 1; negative means one epoch.
  long kl_anneal_steps = -1;
  double word_dropout_rate = 0.5;
  double adadelta_rho = 0.95;
  double adadelta_eps = 1e-6;
  std::uint64_t seed = 1;
  int batch_size = 1;
  long log_interval = 100;
  /// Extra checkpoint every N steps; 0 checkpoints only at epoch ends.
  long checkpoint_every = 0;

  void validate() const;
};

/// KL(N(mu, diag(exp(log_sigma))) || N(0, I)) in nats.
double kl_gaussian(const GaussianParams& g);
Var kl_gaussian(const GaussianVars& g);

/// min(1, step / kl_anneal_steps); 1 when kl_anneal_steps is 0.
double anneal_weight(long step, long kl_anneal_steps);

/// Replaces each non-reserved token by UNK with probability `rate`.
std::vector<TokenId> word_dropout(std::span<const TokenId> ids, double rate, Rng& rng);

struct ElboTerms {
  Var recon_nll;
  Var kl;
  Var total;
};

/// Single-sample ELBO estimate for one pair: encodes X (and Y), draws z by
/// reparametrization, and scores Y with word-dropped decoder inputs.
/// total = recon_nll + kl_weight * kl. The baseline variant uses z = 0, kl = 0.
ElboTerms elbo_loss(ModelGraph& graph, const DialoguePair& pair, double kl_weight,
                    double dropout_rate, Rng& rng);

/// Adadelta with per-parameter running averages of g^2 and dx^2.
class Adadelta {
 public:
  Adadelta(double rho = 0.95, double eps = 1e-6) : rho_(rho), eps_(eps) {}

  /// Updates every parameter; names absent from `grads` get a zero gradient.
  void step(ParamMap& params, const std::map<std::string, Tensor>& grads);

  /// Accumulators as `eg2.<name>` and `edx2.<name>`.
  std::map<std::string, Tensor> state() const;
  void restore(const std::map<std::string, Tensor>& state);

 private:
  struct Slot {
    VectorXd eg2;
    VectorXd edx2;
  };
  double rho_;
  double eps_;
  std::map<std::string, Slot> slots_;
};

struct LogRow {
  long step = 0;
  double mean_recon_nll = 0.0;
  double mean_kl = 0.0;
  double anneal_weight = 0.0;
};

/// `step<TAB>mean_recon_nll<TAB>mean_kl<TAB>anneal_weight`.
std::string format_log_row(const LogRow& row);

struct TrainState {
  long step = 0;
  Adadelta optimizer;
};

struct TrainHooks {
  std::function<void(const LogRow&)> on_log;
  /// Called after each epoch (and every checkpoint_every steps) with the
  /// number of completed epochs.
  std::function<void(const DialogueModel&, const TrainState&, int epochs_done)> on_checkpoint;
};

long steps_per_epoch(std::size_t n_pairs, int batch_size);

/// Trains `model` in place, continuing from `state.step`. Pair order is a
/// seeded shuffle of the sorted pair list, so the result does not depend on
/// input order. Every random draw derives from (seed, step), which makes a
/// resumed run follow the same trajectory as an uninterrupted one.
TrainState train(DialogueModel& model, std::span<const DialoguePair> pairs, const TrainConfig& cfg,
                 TrainState state, const TrainHooks& hooks = {});

}  // namespace dialv
