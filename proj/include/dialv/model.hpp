#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dialv/corpus.hpp"
#include "dialv/softmax_tree.hpp"
#include "dialv/tape.hpp"

namespace dialv {

/// Latent: conditional VAE with a recognition network over (X, Y).
/// Baseline: the same encoder-decoder with z fixed to zero and no Y side, so
/// the decoder keeps the latent model's hidden width.
enum class ModelVariant { Latent, Baseline };

std::string to_string(ModelVariant v);
ModelVariant parse_variant(const std::string& s);

struct ModelConfig {
  ModelVariant variant = ModelVariant::Latent;
  Index embed_dim = 32;
  Index enc_hidden = 32;
  Index latent_dim = 8;
  Index vocab_size = 0;
  Index n_softmax_classes = 0;  // 0 picks ceil(sqrt(|V|))
  std::size_t max_len = kDefaultMaxLen;
  double init_scale = 0.1;
  std::uint64_t class_seed = 0;

  /// The decoder state is initialised with [h_x z].
  Index dec_hidden() const { return enc_hidden + latent_dim; }
  Index resolved_classes() const;
  void validate() const;
};

using ParamMap = std::map<std::string, Tensor>;

/// Diagonal Gaussian; `log_sigma_diag` holds per-coordinate log-variances.
struct GaussianParams {
  VectorXd mu;
  VectorXd log_sigma_diag;
};

/// Configuration, learned weights, and word clustering.
class DialogueModel {
 public:
  DialogueModel(ModelConfig config, ParamMap params);

  /// Fresh model with weights drawn uniformly from +-init_scale, zero biases.
  static DialogueModel initialize(const ModelConfig& config, std::uint64_t seed);

  /// Names and shapes of every parameter `config` requires.
  static std::map<std::string, Shape> parameter_shapes(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  const ParamMap& params() const { return params_; }
  ParamMap& params() { return params_; }
  const SoftmaxTree& tree() const { return tree_; }
  bool has_latent() const { return config_.variant == ModelVariant::Latent; }

 private:
  ModelConfig config_;
  ParamMap params_;
  SoftmaxTree tree_;
};

struct GruVars {
  Var W_r, U_r, b_r;
  Var W_u, U_u, b_u;
  Var W_h, U_h, b_h;
};

/// r = sig(W_r x + U_r h + b_r), u = sig(W_u x + U_u h + b_u),
/// c = tanh(W_h x + U_h (r*h) + b_h), h' = u*h + (1-u)*c.
Var gru_step(const GruVars& w, Var x, Var h_prev);

/// [final forward state, final backward state] over the embedded ids.
Var encode_bidir(std::span<const TokenId> ids, Var embedding, const GruVars& fw, const GruVars& bw);

/// tanh(W enc_out + b).
Var represent(Var enc_out, Var weight, Var bias);

struct GaussianVars {
  Var mu;
  Var log_sigma_diag;
};

struct RecognitionVars {
  Var W_mu, b_mu, W_sigma, b_sigma;
};

GaussianVars recognize(Var h_x, Var h_y, const RecognitionVars& w);

/// z = mu + exp(0.5 log_sigma) * eps.
Var sample_latent(const GaussianVars& g, Var eps);

Var decoder_init(Var h_x, Var z);

/// Binds a DialogueModel's parameters onto a tape and evaluates the network.
/// Parameters are read in place, so the model must outlive the graph.
class ModelGraph {
 public:
  ModelGraph(Tape& tape, const DialogueModel& model);

  Tape& tape() { return tape_; }
  const DialogueModel& model() const { return model_; }

  Var param(const std::string& name);
  /// Parameters bound so far; unbound ones did not take part in the graph.
  const std::map<std::string, Var>& bound() const { return bound_; }
  const GruVars& gru(const std::string& prefix);

  /// h_x from the prompt encoder.
  Var encode_prompt(std::span<const TokenId> x);
  /// h_y from the response encoder (latent variant only).
  Var encode_response(std::span<const TokenId> y);
  GaussianVars recognize(Var h_x, Var h_y);
  Var zero_latent();
  Var constant(VectorXd v);
  Var init_state(Var h_x, Var z);

  /// One decoder GRU step on the embedding of `prev`.
  Var step(TokenId prev, Var h_prev);
  /// log P(w | h) through the hierarchical softmax. Only w's class is evaluated.
  Var word_log_prob(Var h, TokenId w);
  /// log P(. | h) over the whole vocabulary (values only).
  VectorXd log_distribution(Var h);

  /// -sum_t log P(y_t | y_<t, h0), teacher forced. `inputs` replaces the
  /// teacher-forced decoder inputs (same length as y); targets stay y.
  Var sequence_nll(std::span<const TokenId> y, Var h0, std::span<const TokenId> inputs = {});

 private:
  Tape& tape_;
  const DialogueModel& model_;
  std::map<std::string, Var> bound_;
  std::map<std::string, GruVars> grus_;
};

/// Total response NLL for a pair given z (nats). Evaluated without recording
/// gradients that outlive the call.
double sequence_nll(const DialogueModel& model, const DialoguePair& pair, const VectorXd& z);

}  // namespace dialv
