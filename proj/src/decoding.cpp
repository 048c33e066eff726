#include "dialv/decoding.hpp"

#include "dialv/error.hpp"

namespace dialv {

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::MlBeam: return "ml-beam";
    case Strategy::MmiBeam: return "mmi-beam";
    case Strategy::TempSample: return "temp-sample";
    case Strategy::LatentShell: return "latent-shell";
  }
  return "unknown";
}

Strategy parse_strategy(const std::string& s) {
  if (s == "ml-beam") return Strategy::MlBeam;
  if (s == "mmi-beam") return Strategy::MmiBeam;
  if (s == "temp-sample") return Strategy::TempSample;
  if (s == "latent-shell") return Strategy::LatentShell;
  throw ConfigError("unknown strategy '" + s + "' (ml-beam, mmi-beam, temp-sample, latent-shell)");
}

void DecodeConfig::validate() const {
  if (beam_width < 1) throw ConfigError("beam_width must be at least 1");
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("tau must lie in (0, 1]");
  if (!(mmi_lambda >= 0.0)) throw ConfigError("mmi_lambda must be nonnegative");
  if (mmi_window < 0) throw ConfigError("mmi_window must be nonnegative");
  if (!(radius >= 0.0)) throw ConfigError("radius must be nonnegative");
  if (max_len < 1) throw ConfigError("max_len must be positive");
}

double Hypothesis::cond_logp() const {
  double s = 0.0;
  for (double v : cond_logps) s += v;
  return s;
}

double Hypothesis::lm_logp() const {
  double s = 0.0;
  for (double v : lm_logps) s += v;
  return s;
}

double ml_score(const Hypothesis& hyp) { return hyp.cond_logp(); }

double mmi_score(const Hypothesis& hyp, double lambda, int window) {
  double penalty = 0.0;
  const std::size_t n = std::min(hyp.lm_logps.size(), static_cast<std::size_t>(std::max(window, 0)));
  for (std::size_t t = 0; t < n; ++t) penalty += hyp.lm_logps[t];
  return hyp.cond_logp() - lambda * penalty;
}

TokenId sample_index(const VectorXd& q, Rng& rng) {
  const double u = rng.uniform();
  double cumulative = 0.0;
  Index last_positive = -1;
  for (Index i = 0; i < q.size(); ++i) {
    if (q[i] <= 0.0) continue;
    last_positive = i;
    cumulative += q[i];
    if (u < cumulative) return static_cast<TokenId>(i);
  }
  if (last_positive < 0) throw UsageError("sample_index: distribution has no mass");
  return static_cast<TokenId>(last_positive);  // rounding left u above the total
}

TokenId temperature_sample(const VectorXd& p, double tau, Rng& rng) {
  return sample_index(temperature_scale(p, tau), rng);
}

VectorXd shell_sample(Index d, double radius, Rng& rng) {
  if (!(radius >= 0.0)) throw UsageError("shell_sample: radius must be nonnegative");
  if (d == 0) return VectorXd(0);
  VectorXd z = rng.normal_vector(d);
  double norm = z.norm();
  while (norm == 0.0) {
    z = rng.normal_vector(d);
    norm = z.norm();
  }
  if (radius == 0.0) return VectorXd::Zero(d);
  return z * (radius / norm);
}

std::vector<TokenId> reply_ids(const Hypothesis& hyp) {
  std::vector<TokenId> out;
  for (TokenId t : hyp.tokens) {
    if (t == kEos) break;
    if (t == kPad || t == kBos) continue;
    out.push_back(t);
  }
  return out;
}

Hypothesis beam_decode(const DialogueModel& model, std::span<const TokenId> prompt, const VectorXd& z,
                       int width, std::size_t max_len) {
  Tape tape;
  ModelGraph g(tape, model);
  Var h0 = g.init_state(g.encode_prompt(prompt), g.constant(z));
  auto step = [&g](const Var& h, TokenId last) {
    Var next = g.step(last, h);
    return std::pair{next, StepLogProbs{g.log_distribution(next), {}}};
  };
  BeamOptions opts;
  opts.width = width;
  opts.max_len = max_len;
  return beam_search(step, h0, opts, [](const Hypothesis& h) { return ml_score(h); });
}

Hypothesis mmi_decode(const DialogueModel& model, std::span<const TokenId> prompt, int width,
                      std::size_t max_len, double lambda, int window) {
  Tape tape;
  ModelGraph g(tape, model);
  Var h0 = g.init_state(g.encode_prompt(prompt), g.zero_latent());
  Var lm0 = g.constant(VectorXd::Zero(model.config().dec_hidden()));
  using State = std::pair<Var, Var>;
  auto step = [&g](const State& s, TokenId last) {
    Var cond = g.step(last, s.first);
    Var lm = g.step(last, s.second);
    return std::pair{State{cond, lm}, StepLogProbs{g.log_distribution(cond), g.log_distribution(lm)}};
  };
  BeamOptions opts;
  opts.width = width;
  opts.max_len = max_len;
  return beam_search(step, State{h0, lm0}, opts,
                     [&](const Hypothesis& h) { return mmi_score(h, lambda, window); });
}

std::vector<TokenId> sample_decode(const DialogueModel& model, std::span<const TokenId> prompt, double tau,
                                   std::size_t max_len, Rng& rng) {
  Tape tape;
  ModelGraph g(tape, model);
  Var h = g.init_state(g.encode_prompt(prompt), g.zero_latent());
  std::vector<TokenId> out;
  TokenId last = kBos;
  for (std::size_t t = 0; t < max_len; ++t) {
    h = g.step(last, h);
    VectorXd p = g.log_distribution(h).array().exp();
    p[kPad] = 0.0;
    p[kBos] = 0.0;
    p /= p.sum();
    last = temperature_sample(p, tau, rng);
    if (last == kEos) break;
    out.push_back(last);
  }
  return out;
}

std::vector<TokenId> generate(std::span<const TokenId> prompt, const DecodeModels& models,
                              const DecodeConfig& cfg, Rng& rng) {
  cfg.validate();
  if (cfg.strategy == Strategy::LatentShell) {
    if (!models.latent) throw ConfigError("latent-shell decoding needs a latent-variable checkpoint");
    if (!models.latent->has_latent()) throw ConfigError("latent-shell decoding needs the latent model variant");
    const VectorXd z = shell_sample(models.latent->config().latent_dim, cfg.radius, rng);
    return reply_ids(beam_decode(*models.latent, prompt, z, cfg.beam_width, cfg.max_len));
  }
  if (!models.baseline) {
    throw ConfigError(to_string(cfg.strategy) + " decoding needs the baseline checkpoint");
  }
  const DialogueModel& base = *models.baseline;
  switch (cfg.strategy) {
    case Strategy::MlBeam:
      return reply_ids(beam_decode(base, prompt, VectorXd::Zero(base.config().latent_dim), cfg.beam_width,
                                   cfg.max_len));
    case Strategy::MmiBeam:
      return reply_ids(
          mmi_decode(base, prompt, cfg.beam_width, cfg.max_len, cfg.mmi_lambda, cfg.mmi_window));
    case Strategy::TempSample:
      return sample_decode(base, prompt, cfg.tau, cfg.max_len, rng);
    case Strategy::LatentShell: break;
  }
  throw UsageError("unreachable strategy");
}

}  // namespace dialv
