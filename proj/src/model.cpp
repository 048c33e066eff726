#include "dialv/model.hpp"

#include <string>

#include "dialv/error.hpp"
#include "dialv/random.hpp"

namespace dialv {

namespace {

const char* const kGateNames[] = {"W_r", "U_r", "b_r", "W_u", "U_u", "b_u", "W_h", "U_h", "b_h"};

void add_gru_shapes(std::map<std::string, Shape>& shapes, const std::string& prefix, Index input,
                    Index hidden) {
  for (const char* gate : {"r", "u", "h"}) {
    shapes[prefix + ".W_" + gate] = Shape::matrix(hidden, input);
    shapes[prefix + ".U_" + gate] = Shape::matrix(hidden, hidden);
    shapes[prefix + ".b_" + gate] = Shape::vector(hidden);
  }
}

std::string word_layer(std::size_t c) { return "softmax.word." + std::to_string(c); }

SoftmaxTree tree_for(const ModelConfig& config) {
  return SoftmaxTree::assign(static_cast<std::size_t>(config.vocab_size),
                             static_cast<std::size_t>(config.resolved_classes()), config.class_seed);
}

}  // namespace

std::string to_string(ModelVariant v) { return v == ModelVariant::Latent ? "latent" : "baseline"; }

ModelVariant parse_variant(const std::string& s) {
  if (s == "latent") return ModelVariant::Latent;
  if (s == "baseline") return ModelVariant::Baseline;
  throw ConfigError("unknown model variant '" + s + "' (expected latent or baseline)");
}

Index ModelConfig::resolved_classes() const {
  if (n_softmax_classes > 0) return n_softmax_classes;
  return static_cast<Index>(default_class_count(static_cast<std::size_t>(vocab_size)));
}

void ModelConfig::validate() const {
  if (embed_dim < 1 || enc_hidden < 1) throw ConfigError("embed_dim and enc_hidden must be positive");
  if (latent_dim < 0) throw ConfigError("latent_dim must be nonnegative");
  if (variant == ModelVariant::Latent && latent_dim < 1) {
    throw ConfigError("the latent model needs latent_dim >= 1");
  }
  if (vocab_size < kNumReserved) throw ConfigError("vocab_size smaller than the reserved tokens");
  const Index c = resolved_classes();
  if (c < 1 || c > vocab_size) throw ConfigError("n_softmax_classes must lie in [1, vocab_size]");
  if (max_len < 1) throw ConfigError("max_len must be positive");
  if (!(init_scale > 0.0)) throw ConfigError("init_scale must be positive");
}

std::map<std::string, Shape> DialogueModel::parameter_shapes(const ModelConfig& config) {
  config.validate();
  const Index e = config.embed_dim;
  const Index h = config.enc_hidden;
  const Index d = config.latent_dim;
  const Index hd = config.dec_hidden();
  std::map<std::string, Shape> shapes;
  shapes["embedding"] = Shape::matrix(config.vocab_size, e);
  add_gru_shapes(shapes, "enc_x.fw", e, h);
  add_gru_shapes(shapes, "enc_x.bw", e, h);
  shapes["rep_x.W"] = Shape::matrix(h, 2 * h);
  shapes["rep_x.b"] = Shape::vector(h);
  if (config.variant == ModelVariant::Latent) {
    add_gru_shapes(shapes, "enc_y.fw", e, h);
    add_gru_shapes(shapes, "enc_y.bw", e, h);
    shapes["rep_y.W"] = Shape::matrix(h, 2 * h);
    shapes["rep_y.b"] = Shape::vector(h);
    shapes["recog.W_mu"] = Shape::matrix(d, 2 * h);
    shapes["recog.b_mu"] = Shape::vector(d);
    shapes["recog.W_sigma"] = Shape::matrix(d, 2 * h);
    shapes["recog.b_sigma"] = Shape::vector(d);
  }
  add_gru_shapes(shapes, "dec", e, hd);
  const SoftmaxTree tree = tree_for(config);
  shapes["softmax.class.W"] = Shape::matrix(static_cast<Index>(tree.n_classes()), hd);
  shapes["softmax.class.b"] = Shape::vector(static_cast<Index>(tree.n_classes()));
  for (std::size_t c = 0; c < tree.n_classes(); ++c) {
    const auto n = static_cast<Index>(tree.members(static_cast<int>(c)).size());
    shapes[word_layer(c) + ".W"] = Shape::matrix(n, hd);
    shapes[word_layer(c) + ".b"] = Shape::vector(n);
  }
  return shapes;
}

DialogueModel::DialogueModel(ModelConfig config, ParamMap params)
    : config_(config), params_(std::move(params)), tree_(tree_for(config)) {
  const auto shapes = parameter_shapes(config_);
  if (shapes.size() != params_.size()) {
    throw DataError("model expects " + std::to_string(shapes.size()) + " parameter tensors, got " +
                    std::to_string(params_.size()));
  }
  for (const auto& [name, shape] : shapes) {
    auto it = params_.find(name);
    if (it == params_.end()) throw DataError("missing parameter " + name);
    if (!(it->second.shape() == shape)) {
      throw DataError("parameter " + name + " has shape " + it->second.shape().str() + ", expected " +
                      shape.str());
    }
  }
}

DialogueModel DialogueModel::initialize(const ModelConfig& config, std::uint64_t seed) {
  ParamMap params;
  Rng rng(derive_seed(seed, "init"));
  for (const auto& [name, shape] : parameter_shapes(config)) {
    Tensor t(shape);
    const bool bias = name.size() >= 2 && name.compare(name.size() - 2, 2, ".b") == 0;
    const bool bias_gate = name.find(".b_") != std::string::npos;
    if (!bias && !bias_gate) {
      for (Index i = 0; i < t.size(); ++i) t[i] = config.init_scale * (2.0 * rng.uniform() - 1.0);
    }
    params.emplace(name, std::move(t));
  }
  return DialogueModel(config, std::move(params));
}

Var gru_step(const GruVars& w, Var x, Var h_prev) {
  Var r = sigmoid(matmul(w.W_r, x) + matmul(w.U_r, h_prev) + w.b_r);
  Var u = sigmoid(matmul(w.W_u, x) + matmul(w.U_u, h_prev) + w.b_u);
  Var cand = tanh(matmul(w.W_h, x) + matmul(w.U_h, mul(r, h_prev)) + w.b_h);
  return mul(u, h_prev) + mul(shift(-u, 1.0), cand);
}

Var encode_bidir(std::span<const TokenId> ids, Var embedding_table, const GruVars& fw,
                 const GruVars& bw) {
  if (ids.empty()) throw UsageError("encode_bidir: empty sequence");
  Tape& t = *embedding_table.tape;
  const Index hidden = fw.b_r.value().size();
  std::vector<Var> embedded;
  embedded.reserve(ids.size());
  for (TokenId id : ids) embedded.push_back(embedding(embedding_table, id));

  Var h_fw = t.constant(Tensor(Shape::vector(hidden)));
  for (const Var& x : embedded) h_fw = gru_step(fw, x, h_fw);
  Var h_bw = t.constant(Tensor(Shape::vector(bw.b_r.value().size())));
  for (auto it = embedded.rbegin(); it != embedded.rend(); ++it) h_bw = gru_step(bw, *it, h_bw);
  return concat(h_fw, h_bw);
}

Var represent(Var enc_out, Var weight, Var bias) { return tanh(affine(weight, enc_out, bias)); }

GaussianVars recognize(Var h_x, Var h_y, const RecognitionVars& w) {
  Var joint = concat(h_x, h_y);
  return {affine(w.W_mu, joint, w.b_mu), affine(w.W_sigma, joint, w.b_sigma)};
}

Var sample_latent(const GaussianVars& g, Var eps) {
  if (!(eps.shape() == g.mu.shape())) {
    throw ShapeError("sample_latent: eps of shape " + eps.shape().str() + " for latent " +
                     g.mu.shape().str());
  }
  return g.mu + mul(exp(scale(g.log_sigma_diag, 0.5)), eps);
}

Var decoder_init(Var h_x, Var z) { return concat(h_x, z); }

ModelGraph::ModelGraph(Tape& tape, const DialogueModel& model) : tape_(tape), model_(model) {}

Var ModelGraph::param(const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  auto p = model_.params().find(name);
  if (p == model_.params().end()) throw UsageError("model has no parameter " + name);
  Var v = tape_.parameter(p->second);
  bound_.emplace(name, v);
  return v;
}

const GruVars& ModelGraph::gru(const std::string& prefix) {
  auto it = grus_.find(prefix);
  if (it != grus_.end()) return it->second;
  Var v[9];
  for (int i = 0; i < 9; ++i) v[i] = param(prefix + "." + kGateNames[i]);
  return grus_.emplace(prefix, GruVars{v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]})
      .first->second;
}

Var ModelGraph::encode_prompt(std::span<const TokenId> x) {
  Var enc = encode_bidir(x, param("embedding"), gru("enc_x.fw"), gru("enc_x.bw"));
  return represent(enc, param("rep_x.W"), param("rep_x.b"));
}

Var ModelGraph::encode_response(std::span<const TokenId> y) {
  if (!model_.has_latent()) throw UsageError("the baseline model has no response encoder");
  Var enc = encode_bidir(y, param("embedding"), gru("enc_y.fw"), gru("enc_y.bw"));
  return represent(enc, param("rep_y.W"), param("rep_y.b"));
}

GaussianVars ModelGraph::recognize(Var h_x, Var h_y) {
  return dialv::recognize(h_x, h_y,
                          {param("recog.W_mu"), param("recog.b_mu"), param("recog.W_sigma"),
                           param("recog.b_sigma")});
}

Var ModelGraph::zero_latent() { return tape_.constant(Tensor(Shape::vector(model_.config().latent_dim))); }

Var ModelGraph::constant(VectorXd v) { return tape_.constant(Tensor::from_vector(v)); }

Var ModelGraph::init_state(Var h_x, Var z) {
  if (z.value().size() != model_.config().latent_dim) {
    throw ShapeError("decoder_init: latent of length " + std::to_string(z.value().size()) +
                     ", expected " + std::to_string(model_.config().latent_dim));
  }
  return decoder_init(h_x, z);
}

Var ModelGraph::step(TokenId prev, Var h_prev) {
  if (prev < 0 || prev >= model_.config().vocab_size) {
    throw UsageError("decoder_step: invalid token id " + std::to_string(prev));
  }
  return gru_step(gru("dec"), embedding(param("embedding"), prev), h_prev);
}

Var ModelGraph::word_log_prob(Var h, TokenId w) {
  const SoftmaxTree& tree = model_.tree();
  const int c = tree.class_of(w);
  Var class_lp = pick(log_softmax(affine(param("softmax.class.W"), h, param("softmax.class.b"))), c);
  const std::string layer = word_layer(static_cast<std::size_t>(c));
  Var word_lp = pick(log_softmax(affine(param(layer + ".W"), h, param(layer + ".b"))),
                     tree.index_in_class(w));
  return class_lp + word_lp;
}

VectorXd ModelGraph::log_distribution(Var h) {
  const SoftmaxTree& tree = model_.tree();
  const VectorXd& state = h.value().data();
  const auto& params = model_.params();
  const VectorXd class_logits =
      params.at("softmax.class.W").matrix() * state + params.at("softmax.class.b").data();
  std::vector<VectorXd> word_logits(tree.n_classes());
  for (std::size_t c = 0; c < tree.n_classes(); ++c) {
    const std::string layer = word_layer(c);
    word_logits[c] = params.at(layer + ".W").matrix() * state + params.at(layer + ".b").data();
  }
  return hierarchical_log_probs(class_logits, std::span<const VectorXd>(word_logits), tree);
}

Var ModelGraph::sequence_nll(std::span<const TokenId> y, Var h0, std::span<const TokenId> inputs) {
  if (y.size() < 2) throw UsageError("sequence_nll: empty response");
  if (!inputs.empty() && inputs.size() != y.size()) {
    throw UsageError("sequence_nll: decoder inputs and response differ in length");
  }
  const std::span<const TokenId> feed = inputs.empty() ? y : inputs;
  Var h = h0;
  Var total;
  for (std::size_t t = 1; t < y.size(); ++t) {
    h = step(feed[t - 1], h);
    Var lp = word_log_prob(h, y[t]);
    total = total.valid() ? total + lp : lp;
  }
  return -total;
}

double sequence_nll(const DialogueModel& model, const DialoguePair& pair, const VectorXd& z) {
  Tape tape;
  ModelGraph g(tape, model);
  Var h0 = g.init_state(g.encode_prompt(pair.x), g.constant(z));
  return g.sequence_nll(pair.y, h0).value().item();
}

}  // namespace dialv
