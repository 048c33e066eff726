#include "dialv/run_config.hpp"

#include <charconv>
#include <cstdlib>
#include <functional>

#include "dialv/corpus.hpp"
#include "dialv/error.hpp"
#include "dialv/random.hpp"

namespace dialv {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_integer(const std::string& key, const std::string& v) {
  T out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'");
  }
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0') throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("key '" + key + "': expected true or false, got '" + v + "'");
}

std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= v.size()) {
    auto comma = v.find(',', start);
    if (comma == std::string::npos) comma = v.size();
    out.push_back(parse_real(key, trim(std::string_view(v).substr(start, comma - start))));
    start = comma + 1;
  }
  return out;
}

fs::path parse_path(const std::string& v, const fs::path& base) {
  fs::path p(v);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p.lexically_normal();
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& v, const fs::path& base)>;

struct KeyEntry {
  ConfigKey doc;
  Setter set;
};

const std::vector<KeyEntry>& registry() {
  static const std::vector<KeyEntry> entries = [] {
    std::vector<KeyEntry> e;
    auto add = [&](std::string name, std::string def, std::string help, Setter s) {
      e.push_back({{std::move(name), std::move(def), std::move(help)}, std::move(s)});
    };
    // paths
    add("corpus_manifest", "", "file listing corpus files, one path per line",
        [](RunConfig& c, auto&, auto& v, auto& b) { c.corpus_manifest = parse_path(v, b); });
    add("prompt_file", "", "prompts for generation and evaluation, one per line",
        [](RunConfig& c, auto&, auto& v, auto& b) { c.prompt_file = parse_path(v, b); });
    add("checkpoint_dir", "checkpoints", "directory for checkpoints and training logs",
        [](RunConfig& c, auto&, auto& v, auto& b) { c.checkpoint_dir = parse_path(v, b); });
    add("output_dir", "out", "directory for the vocabulary, pair cache, replies and reports",
        [](RunConfig& c, auto&, auto& v, auto& b) { c.output_dir = parse_path(v, b); });
    add("replies_file", "", "generate: output path (default <output_dir>/replies-<strategy>.tsv)",
        [](RunConfig& c, auto&, auto& v, auto& b) { c.replies_file = parse_path(v, b); });
    add("report_file", "", "eval: TSV report path (default <output_dir>/report.tsv)",
        [](RunConfig& c, auto&, auto& v, auto& b) { c.report_file = parse_path(v, b); });
    add("seed", "1", "global seed; every random stream derives from it",
        [](RunConfig& c, auto& k, auto& v, auto&) { c.seed = parse_integer<std::uint64_t>(k, v); });
    // corpus
    add("min_count", "2", "minimum corpus frequency for a vocabulary word",
        [](RunConfig& c, auto& k, auto& v, auto&) { c.min_count = parse_integer<std::uint64_t>(k, v); });
    add("max_len", "50", "sentence length cap for training and generation",
        [](RunConfig& c, auto& k, auto& v, auto&) {
          c.model.max_len = parse_integer<std::size_t>(k, v);
          c.decode.max_len = c.model.max_len;
        });
    // model
    add("embed_dim", "32", "word embedding width",
        [](RunConfig& c, auto& k, auto& v, auto&) { c.model.embed_dim = parse_integer<Index>(k, v); });
    add("enc_hidden", "32", "encoder GRU width (also the width of h_x, h_y)",
        [](RunConfig& c, auto& k, auto& v, auto&) { c.model.enc_hidden = parse_integer<Index>(k, v); });
    add("latent_dim", "8", "latent width d; decoder width is enc_hidden + latent_dim",
        [](RunConfig& c, auto& k, auto& v, auto&) { c.model.latent_dim = parse_integer<Index>(k, v); });
    add("n_softmax_classes", "0", "hierarchical softmax classes (0 = ceil(sqrt(|V|)))",
        [](RunConfig& c, auto& k, auto& v, auto&) { c.model.n_softmax_classes = parse_integer<Index>(k, v); });
    add("init_scale", "0.1", "weights start uniform in [-init_scale, init_scale]",
        [](RunConfig& c, auto& k, auto& v, auto&) { c.model.init_scale = parse_real(k, v); });
    // training
    add("model", "latent", "train: model variant, latent or baseline",
        [](RunConfig& c, auto&, auto& v, auto&) { c.train_variant = parse_variant(v); });
    add("epochs", "3", "training epochs",
        [](RunConfig& c, auto& k, auto& v, auto&) { c.train.epochs = parse_integer<int>(k, v); });
    add("kl_anneal_steps", "-1", "steps of the linear KL-weight ramp (-1 = one epoch)",
        [](RunConfig& c, auto& k, auto& v, auto&) { c.train.kl_anneal_steps = parse_integer<long>(k, v); });
    add("word_dropout_rate", "0.5", "probability of replacing a decoder input word by UNK",
        [](RunConfig& c, auto& k, auto& v, auto&) { c.train.word_dropout_rate = parse_real(k, v); });
    add("adadelta_rho", "0.95", "Adadelta decay",
        [](RunConfig& c, auto& k, auto& v, auto&) { c.train.adadelta_rho = parse_real(k, v); });
    add("adadelta_eps", "1e-6", "Adadelta epsilon",
        [](RunConfig& c, auto& k, auto& v, auto&) { c.train.adadelta_eps = parse_real(k, v); });
    add("batch_size", "1", "pairs per optimizer step",
        [](RunConfig& c, auto& k, auto& v, auto&) { c.train.batch_size = parse_integer<int>(k, v); });
    add("log_interval", "100", "steps per training-log line",
        [](RunConfig& c, auto& k, auto& v, auto&) { c.train.log_interval = parse_integer<long>(k, v); });
    add("checkpoint_every", "0", "extra checkpoint every N steps (0 = per epoch only)",
        [](RunConfig& c, auto& k, auto& v, auto&) { c.train.checkpoint_every = parse_integer<long>(k, v); });
    add("resume", "false", "train: continue from <checkpoint_dir>/<model>.ckpt if present",
        [](RunConfig& c, auto& k, auto& v, auto&) { c.resume = parse_bool(k, v); });
    // decoding
    add("strategy", "ml-beam", "generate: ml-beam, mmi-beam, temp-sample or latent-shell",
        [](RunConfig& c, auto&, auto& v, auto&) { c.decode.strategy = parse_strategy(v); });
    add("beam_width", "2", "beam width",
        [](RunConfig& c, auto& k, auto& v, auto&) { c.decode.beam_width = parse_integer<int>(k, v); });
    add("tau", "0.35", "sampling temperature in (0, 1]",
        [](RunConfig& c, auto& k, auto& v, auto&) { c.decode.tau = parse_real(k, v); });
    add("mmi_lambda", "0.45", "anti-LM penalty weight",
        [](RunConfig& c, auto& k, auto& v, auto&) { c.decode.mmi_lambda = parse_real(k, v); });
    add("mmi_window", "6", "number of leading generated positions the anti-LM penalty covers",
        [](RunConfig& c, auto& k, auto& v, auto&) { c.decode.mmi_window = parse_integer<int>(k, v); });
    add("radius", "0", "latent-shell: norm of the latent sample",
        [](RunConfig& c, auto& k, auto& v, auto&) { c.decode.radius = parse_real(k, v); });
    add("samples", "1", "replies per prompt (generate) or per prompt and radius (shell-sweep)",
        [](RunConfig& c, auto& k, auto& v, auto&) { c.samples = parse_integer<std::size_t>(k, v); });
    add("radii", "0,4,8,12,16", "shell-sweep: comma-separated radii",
        [](RunConfig& c, auto& k, auto& v, auto&) { c.radii = parse_list(k, v); });
    return e;
  }();
  return entries;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& e : registry()) out.push_back(e.doc);
    return out;
  }();
  return keys;
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value,
                      const fs::path& base_dir) {
  for (const auto& e : registry()) {
    if (e.doc.name == key) {
      e.set(cfg, key, value, base_dir);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void apply_config_text(RunConfig& cfg, std::string_view text, const std::string& source,
                       const fs::path& base_dir) {
  std::size_t lineno = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string line(text.substr(start, end - start));
    start = end + 1;
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(source, lineno, "expected key = value");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    try {
      set_config_value(cfg, key, value, base_dir);
    } catch (const ConfigError& e) {
      throw ParseError(source, lineno, e.what());
    }
  }
}

RunConfig load_run_config(const fs::path& file,
                          const std::vector<std::pair<std::string, std::string>>& overrides) {
  RunConfig cfg;
  if (!file.empty()) apply_config_text(cfg, read_file(file), file.string(), file.parent_path());
  for (const auto& [k, v] : overrides) set_config_value(cfg, k, v);
  return cfg;
}

std::uint64_t stream_seed(const RunConfig& cfg, std::string_view name) { return derive_seed(cfg.seed, name); }

}  // namespace dialv
