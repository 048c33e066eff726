#include "dialv/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "dialv/error.hpp"

namespace dialv {

namespace {

std::vector<std::string> split_spaces(std::string_view s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    while (pos < s.size() && s[pos] == ' ') ++pos;
    const std::size_t start = pos;
    while (pos < s.size() && s[pos] != ' ') ++pos;
    if (pos > start) out.emplace_back(s.substr(start, pos - start));
  }
  return out;
}

std::size_t parse_index(const std::string& field, const std::string& source, std::size_t line) {
  if (field.empty() || field.find_first_not_of("0123456789") != std::string::npos) {
    throw ParseError(source, line, "expected a nonnegative index, got '" + field + "'");
  }
  return static_cast<std::size_t>(std::stoull(field));
}

std::string fmt(double v, int precision) {
  if (std::isnan(v)) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

std::string zipf_text(const ZipfFit& z) { return z.ok() ? fmt(*z.exponent, 4) : "n/a"; }

std::vector<std::string> texts(std::span<const Reply> replies) {
  std::vector<std::string> out;
  out.reserve(replies.size());
  for (const auto& r : replies) out.push_back(r.text);
  return out;
}

}  // namespace

std::string format_reply(const Reply& r) {
  return std::to_string(r.prompt_index) + '\t' + std::to_string(r.sample_index) + '\t' + r.strategy + '\t' +
         r.setting + '\t' + r.text;
}

std::vector<Reply> parse_replies(std::string_view text, const std::string& source) {
  std::vector<Reply> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (int k = 0; k < 4; ++k) {
      const auto tab = line.find('\t', start);
      if (tab == std::string::npos) throw ParseError(source, lineno, "expected 5 tab-separated fields");
      fields.push_back(line.substr(start, tab - start));
      start = tab + 1;
    }
    fields.push_back(line.substr(start));
    out.push_back({parse_index(fields[0], source, lineno), parse_index(fields[1], source, lineno),
                   fields[2], fields[3], fields[4]});
  }
  return out;
}

std::vector<Reply> load_replies(const std::filesystem::path& path) {
  return parse_replies(read_file(path), path.string());
}

std::vector<std::uint64_t> word_counts(std::span<const std::string> replies) {
  std::map<std::string, std::uint64_t> counts;
  for (const auto& r : replies) {
    for (auto& w : split_spaces(r)) ++counts[w];
  }
  std::vector<std::uint64_t> out;
  out.reserve(counts.size());
  for (const auto& [w, c] : counts) out.push_back(c);
  return out;
}

ZipfFit fit_zipf_counts(std::vector<std::uint64_t> counts) {
  counts.erase(std::remove(counts.begin(), counts.end(), 0), counts.end());
  std::sort(counts.begin(), counts.end(), std::greater<>());
  if (counts.empty()) return {std::nullopt, "no words"};
  if (counts.front() == counts.back()) return {std::nullopt, "fewer than two distinct word frequencies"};

  const std::size_t n_types = counts.size();
  double n_tokens = 0.0;
  double weighted_log_rank = 0.0;
  std::vector<double> log_rank(n_types);
  for (std::size_t k = 0; k < n_types; ++k) {
    log_rank[k] = std::log(static_cast<double>(k + 1));
    n_tokens += static_cast<double>(counts[k]);
    weighted_log_rank += static_cast<double>(counts[k]) * log_rank[k];
  }
  auto log_likelihood = [&](double s) {
    double h = 0.0;
    for (double lr : log_rank) h += std::exp(-s * lr);
    return -s * weighted_log_rank - n_tokens * std::log(h);
  };

  constexpr double lo_bound = 1.001;
  constexpr double hi_bound = 4.0;
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo_bound;
  double b = hi_bound;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = log_likelihood(c);
  double fd = log_likelihood(d);
  while (b - a > 1e-10) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = log_likelihood(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = log_likelihood(d);
    }
  }
  return {0.5 * (a + b), ""};
}

ZipfFit fit_zipf(std::span<const std::string> replies) { return fit_zipf_counts(word_counts(replies)); }

std::optional<double> zipf_loglog_slope(std::vector<std::uint64_t> counts) {
  counts.erase(std::remove(counts.begin(), counts.end(), 0), counts.end());
  std::sort(counts.begin(), counts.end(), std::greater<>());
  if (counts.size() < 2 || counts.front() == counts.back()) return std::nullopt;
  const auto n = static_cast<Index>(counts.size());
  VectorXd x(n);
  VectorXd y(n);
  for (Index k = 0; k < n; ++k) {
    x[k] = std::log(static_cast<double>(k + 1));
    y[k] = std::log(static_cast<double>(counts[static_cast<std::size_t>(k)]));
  }
  const double xm = x.mean();
  const double ym = y.mean();
  const double slope = ((x.array() - xm) * (y.array() - ym)).sum() / (x.array() - xm).square().sum();
  return -slope;
}

double unique_pct(std::span<const std::string> replies) {
  if (replies.empty()) throw UsageError("unique_pct: no replies");
  const std::set<std::string> distinct(replies.begin(), replies.end());
  return 100.0 * static_cast<double>(distinct.size()) / static_cast<double>(replies.size());
}

double ttr(std::span<const std::string> replies) {
  if (replies.empty()) throw UsageError("ttr: no replies");
  std::set<std::string> types;
  std::size_t tokens = 0;
  for (const auto& r : replies) {
    for (auto& w : split_spaces(r)) {
      types.insert(std::move(w));
      ++tokens;
    }
  }
  if (tokens == 0) return std::nan("");
  return static_cast<double>(types.size()) / static_cast<double>(tokens);
}

NllScore score_nll(std::span<const Reply> replies, std::span<const std::string> prompts,
                   const DialogueModel& baseline, const Vocabulary& vocab) {
  if (replies.empty()) throw UsageError("score_nll: no replies");
  if (baseline.config().vocab_size != static_cast<Index>(vocab.size())) {
    throw ConfigError("baseline checkpoint and vocabulary disagree on size");
  }
  const std::size_t max_len = baseline.config().max_len;
  const VectorXd z = VectorXd::Zero(baseline.config().latent_dim);
  std::map<std::size_t, std::vector<TokenId>> encoded_prompts;
  NllScore score;
  double total = 0.0;
  for (const auto& r : replies) {
    if (r.prompt_index >= prompts.size()) {
      throw DataError("reply refers to prompt " + std::to_string(r.prompt_index) + " but only " +
                      std::to_string(prompts.size()) + " prompts are loaded");
    }
    auto it = encoded_prompts.find(r.prompt_index);
    if (it == encoded_prompts.end()) {
      it = encoded_prompts.emplace(r.prompt_index, encode(tokenize(prompts[r.prompt_index]), vocab, max_len)).first;
    }
    const auto words = split_spaces(r.text);
    for (const auto& w : words) score.unk_tokens += vocab.contains(w) ? 0 : 1;
    const DialoguePair pair{it->second, encode(words, vocab, max_len)};
    total += sequence_nll(baseline, pair, z);
  }
  score.mean_nll = total / static_cast<double>(replies.size());
  return score;
}

ReplyStats reply_stats(const std::string& label, std::span<const Reply> replies,
                       std::span<const std::string> prompts, const DialogueModel& baseline,
                       const Vocabulary& vocab) {
  const auto t = texts(replies);
  ReplyStats s;
  s.label = label;
  s.zipf = fit_zipf(t);
  const NllScore nll = score_nll(replies, prompts, baseline, vocab);
  s.mean_nll = nll.mean_nll;
  s.unk_tokens = nll.unk_tokens;
  s.unique_pct = unique_pct(t);
  s.ttr = ttr(t);
  s.n_replies = replies.size();
  return s;
}

std::vector<Reply> generate_replies(std::span<const std::string> prompts, const Vocabulary& vocab,
                                    const DecodeModels& models, const DecodeConfig& cfg, std::size_t n,
                                    std::uint64_t seed) {
  if (n == 0) throw UsageError("generate: number of replies per prompt must be positive");
  std::string setting = "-";
  if (cfg.strategy == Strategy::TempSample) setting = fmt(cfg.tau, 4);
  if (cfg.strategy == Strategy::LatentShell) setting = fmt(cfg.radius, 4);
  std::vector<Reply> out;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    const auto prompt = encode(tokenize(prompts[i]), vocab, cfg.max_len);
    for (std::size_t j = 0; j < n; ++j) {
      Rng rng(derive_seed(seed, "generate", {i, j}));
      const auto ids = generate(prompt, models, cfg, rng);
      out.push_back({i, j, to_string(cfg.strategy), setting, join_tokens(decode(ids, vocab))});
    }
  }
  return out;
}

ShellSweep shell_sweep_report(const DialogueModel& latent, const DialogueModel& baseline,
                              const Vocabulary& vocab, std::span<const std::string> prompts,
                              std::span<const double> radii, std::size_t samples,
                              const DecodeConfig& cfg, std::uint64_t seed) {
  if (radii.empty()) throw UsageError("shell sweep: no radii");
  ShellSweep sweep;
  for (double r : radii) {
    DecodeConfig c = cfg;
    c.strategy = Strategy::LatentShell;
    c.radius = r;
    auto replies = generate_replies(prompts, vocab, {&latent, &baseline}, c, samples, seed);
    sweep.rows.push_back(reply_stats(fmt(r, 4), replies, prompts, baseline, vocab));
    sweep.replies.push_back(std::move(replies));
  }
  for (std::size_t i = 0; i + 1 < sweep.rows.size(); ++i) {
    if (sweep.rows[i + 1].unique_pct < sweep.rows[i].unique_pct) sweep.unique_inversions.push_back(i);
  }
  return sweep;
}

std::string render_table(std::span<const ReplyStats> rows) {
  std::size_t width = 8;
  for (const auto& r : rows) width = std::max(width, r.label.size());
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-*s  %8s  %9s  %9s  %7s\n", static_cast<int>(width), "model", "Zipf",
                "NLL", "Unique %", "TTR");
  out += buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-*s  %8s  %9s  %9s  %7s\n", static_cast<int>(width), r.label.c_str(),
                  zipf_text(r.zipf).c_str(), fmt(r.mean_nll, 3).c_str(), fmt(r.unique_pct, 1).c_str(),
                  fmt(r.ttr, 3).c_str());
    out += buf;
  }
  return out;
}

std::string render_tsv(std::span<const ReplyStats> rows) {
  std::string out;
  for (const auto& r : rows) {
    out += r.label + '\t' + zipf_text(r.zipf) + '\t' + fmt(r.mean_nll, 6) + '\t' + fmt(r.unique_pct, 4) +
           '\t' + fmt(r.ttr, 6) + '\n';
  }
  return out;
}

}  // namespace dialv
