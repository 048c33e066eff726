#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "dialv/decoding.hpp"
#include "dialv/error.hpp"
#include "oracles.hpp"

using namespace dialv;

namespace {

ModelConfig tiny_config(ModelVariant variant) {
  ModelConfig c;
  c.variant = variant;
  c.embed_dim = 4;
  c.enc_hidden = 4;
  c.latent_dim = 3;
  c.vocab_size = 7;
  c.n_softmax_classes = 2;
  c.init_scale = 1.5;
  c.class_seed = 1;
  return c;
}

// Log-probabilities of every next token after feeding `tokens` to the decoder
// started from `h0`.
VectorXd next_log_probs(const DialogueModel& m, const VectorXd& h0, const std::vector<TokenId>& tokens) {
  Tape tape;
  ModelGraph g(tape, m);
  Var h = g.constant(h0);
  TokenId last = kBos;
  for (TokenId t : tokens) {
    h = g.step(last, h);
    last = t;
  }
  return g.log_distribution(g.step(last, h));
}

VectorXd prompt_state(const DialogueModel& m, const std::vector<TokenId>& prompt, const VectorXd& z) {
  Tape tape;
  ModelGraph g(tape, m);
  return g.init_state(g.encode_prompt(prompt), g.constant(z)).value().data();
}

}  // namespace

TEST_CASE("beam search equals exhaustive search when the beam holds everything") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const oracle::TableModel m{7, seed, 3.0};
    BeamOptions opts;
    opts.width = 9;
    opts.max_len = 2;
    const Hypothesis got = beam_search(m.step_fn(), std::vector<TokenId>{}, opts, ml_score);
    const auto [best_seq, best] = oracle::exhaustive_best(m, 2);
    CAPTURE(seed);
    CHECK(got.tokens == best_seq);
    CHECK(got.cond_logp() == doctest::Approx(best).epsilon(1e-12));
  }
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const oracle::TableModel m{6, seed + 100, 2.0};
    BeamOptions opts;
    opts.width = 100;
    opts.max_len = 4;
    CHECK(beam_search(m.step_fn(), std::vector<TokenId>{}, opts, ml_score).tokens ==
          oracle::exhaustive_best(m, 4).first);
  }
}

TEST_CASE("width one is greedy") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const oracle::TableModel m{8, seed + 7, 2.5};
    BeamOptions opts;
    opts.width = 1;
    opts.max_len = 6;
    CAPTURE(seed);
    CHECK(beam_search(m.step_fn(), std::vector<TokenId>{}, opts, ml_score).tokens == oracle::greedy(m, 6));
  }
}

TEST_CASE("beam search contracts") {
  const oracle::TableModel m{7, 3, 3.0};
  BeamOptions opts;
  opts.width = 3;
  opts.max_len = 5;
  const Hypothesis h = beam_search(m.step_fn(), std::vector<TokenId>{}, opts, ml_score);
  CHECK(h.finished);
  CHECK((h.tokens.back() == kEos || h.tokens.size() == 5));
  for (TokenId t : h.tokens) CHECK_FALSE(oracle::banned(t));
  for (double lp : h.cond_logps) CHECK(lp <= 0.0);

  opts.width = 0;
  CHECK_THROWS_AS(beam_search(m.step_fn(), std::vector<TokenId>{}, opts, ml_score), UsageError);

  // equal scores: the lexicographically smaller sequence wins
  auto flat = [](const int& s, TokenId) { return std::pair{s, StepLogProbs{VectorXd::Constant(6, -std::log(4.0)), {}}}; };
  BeamOptions two;
  two.width = 4;
  two.max_len = 1;
  CHECK(beam_search(flat, 0, two, ml_score).tokens == std::vector<TokenId>{kUnk});
}

TEST_CASE("mmi_score") {
  Hypothesis h;
  h.tokens = {5, kEos};
  h.cond_logps = {-1.0, -2.0};
  h.lm_logps = {-0.5, -0.4};
  CHECK(mmi_score(h, 0.45, 6) == doctest::Approx(-2.595).epsilon(1e-15));
  CHECK(mmi_score(h, 0.0, 6) == ml_score(h));
  CHECK(mmi_score(h, 0.45, 1) == doctest::Approx(-3.0 + 0.45 * 0.5).epsilon(1e-15));
  CHECK(mmi_score(h, 0.45, 0) == ml_score(h));

  Hypothesis long_h;
  for (int t = 0; t < 10; ++t) {
    long_h.tokens.push_back(5);
    long_h.cond_logps.push_back(-0.1 * (t + 1));
    long_h.lm_logps.push_back(-0.2 * (t + 1));
  }
  // LM terms of positions 1..6 only: 0.2 * (1 + ... + 6) = 4.2
  CHECK(mmi_score(long_h, 0.45, 6) == doctest::Approx(long_h.cond_logp() + 0.45 * 4.2).epsilon(1e-14));
  // a negative LM log-prob is subtracted, so the score grows with lambda
  double prev = -INFINITY;
  for (double lambda = 0.0; lambda <= 2.0; lambda += 0.25) {
    const double s = mmi_score(long_h, lambda, 6);
    CHECK(s > prev);
    prev = s;
  }
}

TEST_CASE("temperature scaling") {
  const VectorXd p = (VectorXd(2) << 0.8, 0.2).finished();
  CHECK(temperature_scale(p, 1.0) == p);
  const VectorXd q = temperature_scale(p, 0.5);
  CHECK(std::abs(q[0] - 16.0 / 17.0) <= 1e-12);
  CHECK(std::abs(q[1] - 1.0 / 17.0) <= 1e-12);
  CHECK(temperature_scale((VectorXd(2) << 0.6, 0.4).finished(), 0.01)[0] > 1.0 - 1e-15);

  CHECK_THROWS_AS(temperature_scale((VectorXd(2) << 0.6, 0.3).finished(), 0.5), UsageError);
  CHECK_THROWS_AS(temperature_scale(p, 0.0), UsageError);
  CHECK_THROWS_AS(temperature_scale(p, 1.5), UsageError);

  // relabeling the vocabulary relabels the result
  const VectorXd r = (VectorXd(4) << 0.1, 0.4, 0.3, 0.2).finished();
  const std::vector<Index> perm = {2, 0, 3, 1};
  VectorXd rp(4);
  for (Index i = 0; i < 4; ++i) rp[i] = r[perm[static_cast<std::size_t>(i)]];
  const VectorXd a = temperature_scale(r, 0.35);
  const VectorXd b = temperature_scale(rp, 0.35);
  for (Index i = 0; i < 4; ++i) CHECK(b[i] == doctest::Approx(a[perm[static_cast<std::size_t>(i)]]).epsilon(1e-14));
}

TEST_CASE("temperature_sample frequencies") {
  Rng rng(4);
  const VectorXd p = (VectorXd(3) << 0.5, 0.3, 0.2).finished();
  const VectorXd q = temperature_scale(p, 0.5);
  std::vector<int> hits(3, 0);
  const int n = 200000;
  for (int i = 0; i < n; ++i) ++hits[static_cast<std::size_t>(temperature_sample(p, 0.5, rng))];
  for (Index i = 0; i < 3; ++i) CHECK(std::abs(hits[static_cast<std::size_t>(i)] / double(n) - q[i]) < 0.005);

  Rng a(9), b(9);
  for (int i = 0; i < 50; ++i) CHECK(temperature_sample(p, 0.35, a) == temperature_sample(p, 0.35, b));
}

TEST_CASE("shell sampling") {
  Rng rng(5);
  CHECK(shell_sample(8, 0.0, rng) == VectorXd::Zero(8));
  for (double r : {1e-3, 0.5, 1.0, 4.0, 8.0, 16.0, 1e3}) {
    for (int i = 0; i < 20; ++i) CHECK(std::abs(shell_sample(16, r, rng).norm() - r) <= 1e-12 * std::max(1.0, r));
  }
  Rng x(6), y(6);
  for (int i = 0; i < 20; ++i) {
    const VectorXd unit = shell_sample(5, 1.0, x);
    const VectorXd scaled = shell_sample(5, 3.5, y);
    CHECK((scaled - 3.5 * unit).norm() <= 1e-12);
  }
  // radius 0 consumes a draw so later samples do not depend on radii
  Rng c(7), d(7);
  shell_sample(4, 0.0, c);
  shell_sample(4, 2.0, d);
  CHECK(shell_sample(4, 1.0, c) == shell_sample(4, 1.0, d));

  Rng m(8);
  double total = 0.0;
  for (int i = 0; i < 10000; ++i) total += m.normal_vector(64).norm();
  CHECK(std::abs(total / 10000 - 8.0) <= 0.05 * 8.0);
  CHECK_THROWS_AS(shell_sample(4, -1.0, rng), UsageError);
}

TEST_CASE("ml beam on a model matches exhaustive enumeration") {
  const DialogueModel base = DialogueModel::initialize(tiny_config(ModelVariant::Baseline), 3);
  const std::vector<TokenId> prompt = {kBos, 5, 6, kEos};
  const VectorXd h0 = prompt_state(base, prompt, VectorXd::Zero(3));

  std::vector<TokenId> best_seq;
  double best = -INFINITY;
  const VectorXd first = next_log_probs(base, h0, {});
  for (TokenId a = 0; a < 7; ++a) {
    if (oracle::banned(a)) continue;
    if (a == kEos) {
      if (first[a] > best) best = first[a], best_seq = {a};
      continue;
    }
    const VectorXd second = next_log_probs(base, h0, {a});
    for (TokenId b = 0; b < 7; ++b) {
      if (oracle::banned(b)) continue;
      const double s = first[a] + second[b];
      if (s > best) best = s, best_seq = {a, b};
    }
  }
  const Hypothesis h = beam_decode(base, prompt, VectorXd::Zero(3), 9, 2);
  CHECK(h.tokens == best_seq);
  CHECK(h.cond_logp() == doctest::Approx(best).epsilon(1e-12));
}

TEST_CASE("mmi decoding scores follow the anti-LM arithmetic") {
  const DialogueModel base = DialogueModel::initialize(tiny_config(ModelVariant::Baseline), 4);
  const std::vector<TokenId> prompt = {kBos, 4, kEos};
  const int window = 2;
  const Hypothesis h = mmi_decode(base, prompt, 2, 5, 0.45, window);
  REQUIRE(h.tokens.size() == h.lm_logps.size());

  const VectorXd h0 = prompt_state(base, prompt, VectorXd::Zero(3));
  const VectorXd lm0 = VectorXd::Zero(base.config().dec_hidden());
  double cond = 0.0, penalty = 0.0;
  for (std::size_t t = 0; t < h.tokens.size(); ++t) {
    const std::vector<TokenId> prefix(h.tokens.begin(), h.tokens.begin() + static_cast<std::ptrdiff_t>(t));
    const double c = next_log_probs(base, h0, prefix)[h.tokens[t]];
    const double l = next_log_probs(base, lm0, prefix)[h.tokens[t]];
    CHECK(h.cond_logps[t] == doctest::Approx(c).epsilon(1e-12));
    CHECK(h.lm_logps[t] == doctest::Approx(l).epsilon(1e-12));
    cond += c;
    if (static_cast<int>(t) < window) penalty += l;
  }
  CHECK(mmi_score(h, 0.45, window) == doctest::Approx(cond - 0.45 * penalty).epsilon(1e-12));

  // lambda 0 reduces to ML beam search
  CHECK(mmi_decode(base, prompt, 2, 5, 0.0, 6).tokens == beam_decode(base, prompt, VectorXd::Zero(3), 2, 5).tokens);
}

TEST_CASE("generate") {
  const DialogueModel latent = DialogueModel::initialize(tiny_config(ModelVariant::Latent), 5);
  const DialogueModel base = DialogueModel::initialize(tiny_config(ModelVariant::Baseline), 6);
  const DecodeModels both{&latent, &base};
  const std::vector<TokenId> prompt = {kBos, 5, kEos};

  DecodeConfig cfg;
  cfg.max_len = 8;
  for (Strategy s : {Strategy::MlBeam, Strategy::MmiBeam, Strategy::TempSample, Strategy::LatentShell}) {
    CAPTURE(to_string(s));
    cfg.strategy = s;
    cfg.radius = 2.0;
    cfg.tau = 0.7;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng a(seed), b(seed);
      const auto out = generate(prompt, both, cfg, a);
      CHECK(out == generate(prompt, both, cfg, b));
      CHECK(out.size() <= cfg.max_len);
      for (TokenId t : out) {
        CHECK(t != kPad);
        CHECK(t != kBos);
        CHECK(t != kEos);
      }
    }
    CHECK(parse_strategy(to_string(s)) == s);
  }

  cfg.strategy = Strategy::LatentShell;
  cfg.radius = 0.0;
  Rng r1(1), r2(2);
  CHECK(generate(prompt, both, cfg, r1) == generate(prompt, both, cfg, r2));
  CHECK_THROWS_AS(generate(prompt, DecodeModels{nullptr, &base}, cfg, r1), ConfigError);
  CHECK_THROWS_AS(generate(prompt, DecodeModels{&base, &base}, cfg, r1), ConfigError);
  cfg.strategy = Strategy::MmiBeam;
  CHECK_THROWS_AS(generate(prompt, DecodeModels{&latent, nullptr}, cfg, r1), ConfigError);
  cfg.beam_width = 0;
  CHECK_THROWS_AS(generate(prompt, both, cfg, r1), ConfigError);
  CHECK_THROWS_AS(parse_strategy("nucleus"), ConfigError);
}
