#include "dialv/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "dialv/error.hpp"

namespace dialv {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (!(word_dropout_rate >= 0.0 && word_dropout_rate <= 1.0)) {
    throw ConfigError("word_dropout_rate must lie in [0, 1]");
  }
  if (!(adadelta_rho > 0.0 && adadelta_rho < 1.0)) throw ConfigError("adadelta_rho must lie in (0, 1)");
  if (!(adadelta_eps > 0.0)) throw ConfigError("adadelta_eps must be positive");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (log_interval < 1) throw ConfigError("log_interval must be at least 1");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be nonnegative");
}

double kl_gaussian(const GaussianParams& g) {
  if (g.mu.size() != g.log_sigma_diag.size()) throw ShapeError("kl_gaussian: mu and log_sigma differ in length");
  const auto ls = g.log_sigma_diag.array();
  return 0.5 * (g.mu.array().square() + ls.exp() - ls - 1.0).sum();
}

Var kl_gaussian(const GaussianVars& g) {
  const double d = static_cast<double>(g.mu.value().size());
  Var terms = mul(g.mu, g.mu) + exp(g.log_sigma_diag) - g.log_sigma_diag;
  return scale(shift(sum(terms), -d), 0.5);
}

double anneal_weight(long step, long kl_anneal_steps) {
  if (kl_anneal_steps <= 0) return 1.0;
  if (step <= 0) return 0.0;
  return std::min(1.0, static_cast<double>(step) / static_cast<double>(kl_anneal_steps));
}

std::vector<TokenId> word_dropout(std::span<const TokenId> ids, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw UsageError("word_dropout: rate must lie in [0, 1]");
  std::vector<TokenId> out(ids.begin(), ids.end());
  for (TokenId& id : out) {
    if (Vocabulary::is_reserved(id)) continue;
    if (rng.bernoulli(rate)) id = kUnk;
  }
  return out;
}

ElboTerms elbo_loss(ModelGraph& g, const DialoguePair& pair, double kl_weight, double dropout_rate,
                    Rng& rng) {
  Var h_x = g.encode_prompt(pair.x);
  Var z;
  Var kl;
  if (g.model().has_latent()) {
    Var h_y = g.encode_response(pair.y);
    GaussianVars q = g.recognize(h_x, h_y);
    Var eps = g.constant(rng.normal_vector(g.model().config().latent_dim));
    z = sample_latent(q, eps);
    kl = kl_gaussian(q);
  } else {
    z = g.zero_latent();
    kl = g.tape().constant(Tensor::scalar(0.0));
  }
  const std::vector<TokenId> inputs = word_dropout(pair.y, dropout_rate, rng);
  Var recon = g.sequence_nll(pair.y, g.init_state(h_x, z), inputs);
  Var total = kl_weight == 0.0 ? recon : recon + scale(kl, kl_weight);
  return {recon, kl, total};
}

void Adadelta::step(ParamMap& params, const std::map<std::string, Tensor>& grads) {
  for (auto& [name, value] : params) {
    Slot& s = slots_[name];
    if (s.eg2.size() != value.size()) {
      s.eg2 = VectorXd::Zero(value.size());
      s.edx2 = VectorXd::Zero(value.size());
    }
    auto it = grads.find(name);
    if (it == grads.end()) {
      s.eg2 *= rho_;
      s.edx2 *= rho_;
      continue;
    }
    const VectorXd& g = it->second.data();
    s.eg2 = rho_ * s.eg2 + (1.0 - rho_) * g.cwiseAbs2();
    const VectorXd dx =
        -((s.edx2.array() + eps_).sqrt() / (s.eg2.array() + eps_).sqrt() * g.array()).matrix();
    s.edx2 = rho_ * s.edx2 + (1.0 - rho_) * dx.cwiseAbs2();
    value.data() += dx;
  }
}

std::map<std::string, Tensor> Adadelta::state() const {
  std::map<std::string, Tensor> out;
  for (const auto& [name, s] : slots_) {
    out.emplace("eg2." + name, Tensor::from_vector(s.eg2));
    out.emplace("edx2." + name, Tensor::from_vector(s.edx2));
  }
  return out;
}

void Adadelta::restore(const std::map<std::string, Tensor>& state) {
  slots_.clear();
  for (const auto& [key, t] : state) {
    if (key.rfind("eg2.", 0) == 0) {
      slots_[key.substr(4)].eg2 = t.data();
    } else if (key.rfind("edx2.", 0) == 0) {
      slots_[key.substr(5)].edx2 = t.data();
    } else {
      throw DataError("unknown optimizer state '" + key + "'");
    }
  }
}

std::string format_log_row(const LogRow& row) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "%ld\t%.6f\t%.6f\t%.6f", row.step, row.mean_recon_nll, row.mean_kl,
                row.anneal_weight);
  return buf;
}

long steps_per_epoch(std::size_t n_pairs, int batch_size) {
  return static_cast<long>((n_pairs + static_cast<std::size_t>(batch_size) - 1) /
                           static_cast<std::size_t>(batch_size));
}

TrainState train(DialogueModel& model, std::span<const DialoguePair> pairs, const TrainConfig& cfg,
                 TrainState state, const TrainHooks& hooks) {
  cfg.validate();
  if (pairs.empty()) throw UsageError("train: no training pairs");
  for (const auto& p : pairs) {
    for (TokenId id : p.x) if (id < 0 || id >= model.config().vocab_size) throw DataError("pair token id outside vocabulary");
    for (TokenId id : p.y) if (id < 0 || id >= model.config().vocab_size) throw DataError("pair token id outside vocabulary");
  }

  std::vector<DialoguePair> sorted(pairs.begin(), pairs.end());
  std::sort(sorted.begin(), sorted.end());

  const long per_epoch = steps_per_epoch(sorted.size(), cfg.batch_size);
  const long anneal_steps = cfg.kl_anneal_steps < 0 ? per_epoch : cfg.kl_anneal_steps;
  const long total_steps = per_epoch * cfg.epochs;

  Adadelta optimizer(cfg.adadelta_rho, cfg.adadelta_eps);
  optimizer.restore(state.optimizer.state());
  long step = state.step;

  double acc_recon = 0.0;
  double acc_kl = 0.0;
  long acc_n = 0;
  double last_weight = 0.0;
  auto flush_log = [&] {
    if (acc_n == 0) return;
    if (hooks.on_log) hooks.on_log({step, acc_recon / acc_n, acc_kl / acc_n, last_weight});
    acc_recon = acc_kl = 0.0;
    acc_n = 0;
  };

  std::vector<std::size_t> order;
  long order_epoch = -1;
  while (step < total_steps) {
    const long epoch = step / per_epoch;
    if (epoch != order_epoch) {
      order.resize(sorted.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      Rng shuffler(derive_seed(cfg.seed, "shuffle", {static_cast<std::uint64_t>(epoch)}));
      shuffler.shuffle(order);
      order_epoch = epoch;
    }
    const std::size_t begin = static_cast<std::size_t>((step % per_epoch) * cfg.batch_size);
    const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
    const double weight = anneal_weight(step, anneal_steps);

    std::map<std::string, Tensor> grads;
    for (std::size_t i = begin; i < end; ++i) {
      const DialoguePair& pair = sorted[order[i]];
      Rng rng(derive_seed(cfg.seed, "train", {static_cast<std::uint64_t>(step), i - begin}));
      Tape tape;
      ModelGraph g(tape, model);
      ElboTerms terms = elbo_loss(g, pair, weight, cfg.word_dropout_rate, rng);
      const double loss = terms.total.value().item();
      if (!std::isfinite(loss)) {
        throw DivergenceError("non-finite loss at step " + std::to_string(step) + " (recon " +
                              std::to_string(terms.recon_nll.value().item()) + ", kl " +
                              std::to_string(terms.kl.value().item()) + ")");
      }
      tape.backward(terms.total);
      for (const auto& [name, v] : g.bound()) {
        auto [it, fresh] = grads.try_emplace(name, v.grad());
        if (!fresh) it->second.data() += v.grad().data();
      }
      acc_recon += terms.recon_nll.value().item();
      acc_kl += terms.kl.value().item();
      ++acc_n;
    }
    optimizer.step(model.params(), grads);
    last_weight = weight;
    ++step;

    const bool epoch_end = step % per_epoch == 0;
    if (step % cfg.log_interval == 0 || epoch_end) flush_log();
    if (hooks.on_checkpoint &&
        (epoch_end || (cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0))) {
      state.step = step;
      state.optimizer = optimizer;
      hooks.on_checkpoint(model, state, static_cast<int>(step / per_epoch));
    }
  }
  flush_log();
  state.step = step;
  state.optimizer = optimizer;
  return state;
}

}  // namespace dialv
