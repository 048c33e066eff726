#include "dialv/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <vector>

#include "dialv/error.hpp"
#include "dialv/random.hpp"

namespace dialv {

namespace {

constexpr std::string_view kMagic = "dialv-checkpoint 1";

std::string hexfloat(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

void write_tensor(std::string& out, const std::string& name, const Tensor& t) {
  const Shape& s = t.shape();
  out += "tensor " + name + " " + std::to_string(s.rank) + " " + std::to_string(s.rows());
  if (s.rank == 2) out += " " + std::to_string(s.cols());
  out += '\n';
  for (Index i = 0; i < t.size(); ++i) {
    if (i) out += ' ';
    out += hexfloat(t[i]);
  }
  out += '\n';
}

std::vector<std::string> split_words(const std::string& line) {
  std::vector<std::string> words;
  std::istringstream ss(line);
  std::string w;
  while (ss >> w) words.push_back(w);
  return words;
}

long long to_int(const std::string& s, const std::string& source, std::size_t line) {
  char* end = nullptr;
  const long long v = std::strtoll(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0') throw ParseError(source, line, "expected integer, got '" + s + "'");
  return v;
}

double to_double(const std::string& s, const std::string& source, std::size_t line) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw ParseError(source, line, "expected number, got '" + s + "'");
  return v;
}

}  // namespace

std::uint64_t content_hash(std::string_view bytes) { return fnv1a(bytes); }

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string checkpoint_to_text(const Checkpoint& ckpt) {
  const ModelConfig& c = ckpt.config;
  std::string out(kMagic);
  out += '\n';
  out += "config variant " + to_string(c.variant) + '\n';
  out += "config embed_dim " + std::to_string(c.embed_dim) + '\n';
  out += "config enc_hidden " + std::to_string(c.enc_hidden) + '\n';
  out += "config latent_dim " + std::to_string(c.latent_dim) + '\n';
  out += "config vocab_size " + std::to_string(c.vocab_size) + '\n';
  out += "config n_softmax_classes " + std::to_string(c.resolved_classes()) + '\n';
  out += "config max_len " + std::to_string(c.max_len) + '\n';
  out += "config init_scale " + hexfloat(c.init_scale) + '\n';
  out += "config class_seed " + std::to_string(c.class_seed) + '\n';
  out += "vocab " + hex64(ckpt.vocab_hash) + " " + ckpt.vocab_path + '\n';
  for (const auto& [k, v] : ckpt.meta) out += "meta " + k + " " + v + '\n';
  for (const auto& [name, t] : ckpt.params) write_tensor(out, "param:" + name, t);
  for (const auto& [name, t] : ckpt.optimizer) write_tensor(out, "optim:" + name, t);
  out += "end\n";
  return out;
}

Checkpoint parse_checkpoint(std::string_view text, const std::string& source) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  auto next = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++lineno;
    return true;
  };
  if (!next() || line != kMagic) throw ParseError(source, 1, "not a dialv checkpoint");

  Checkpoint ck;
  bool have_vocab = false;
  bool ended = false;
  while (next()) {
    if (line.empty()) continue;
    if (ended) throw ParseError(source, lineno, "content after end record");
    if (line == "end") {
      ended = true;
      continue;
    }
    const auto words = split_words(line);
    const std::string& kind = words[0];
    if (kind == "config") {
      if (words.size() != 3) throw ParseError(source, lineno, "expected config <key> <value>");
      const std::string& key = words[1];
      const std::string& val = words[2];
      if (key == "variant") ck.config.variant = parse_variant(val);
      else if (key == "embed_dim") ck.config.embed_dim = to_int(val, source, lineno);
      else if (key == "enc_hidden") ck.config.enc_hidden = to_int(val, source, lineno);
      else if (key == "latent_dim") ck.config.latent_dim = to_int(val, source, lineno);
      else if (key == "vocab_size") ck.config.vocab_size = to_int(val, source, lineno);
      else if (key == "n_softmax_classes") ck.config.n_softmax_classes = to_int(val, source, lineno);
      else if (key == "max_len") ck.config.max_len = static_cast<std::size_t>(to_int(val, source, lineno));
      else if (key == "init_scale") ck.config.init_scale = to_double(val, source, lineno);
      else if (key == "class_seed") ck.config.class_seed = std::strtoull(val.c_str(), nullptr, 10);
      else throw ParseError(source, lineno, "unknown config key '" + key + "'");
    } else if (kind == "vocab") {
      if (words.size() < 2) throw ParseError(source, lineno, "expected vocab <hash> <path>");
      ck.vocab_hash = std::strtoull(words[1].c_str(), nullptr, 16);
      const auto pos = line.find(' ', 6);
      ck.vocab_path = pos == std::string::npos ? "" : line.substr(pos + 1);
      have_vocab = true;
    } else if (kind == "meta") {
      if (words.size() < 2) throw ParseError(source, lineno, "expected meta <key> <value>");
      const auto pos = line.find(' ', 5 + words[1].size());
      ck.meta[words[1]] = pos == std::string::npos ? "" : line.substr(pos + 1);
    } else if (kind == "tensor") {
      if (words.size() < 4) throw ParseError(source, lineno, "malformed tensor header");
      const int rank = static_cast<int>(to_int(words[2], source, lineno));
      Shape shape;
      if (rank == 1 && words.size() == 4) {
        shape = Shape::vector(to_int(words[3], source, lineno));
      } else if (rank == 2 && words.size() == 5) {
        shape = Shape::matrix(to_int(words[3], source, lineno), to_int(words[4], source, lineno));
      } else {
        throw ParseError(source, lineno, "malformed tensor header");
      }
      const std::size_t header_line = lineno;
      if (!next()) throw ParseError(source, header_line, "missing tensor values");
      const auto values = split_words(line);
      if (static_cast<Index>(values.size()) != shape.size()) {
        throw ParseError(source, lineno, "tensor " + words[1] + " has " + std::to_string(values.size()) +
                                             " values, shape " + shape.str());
      }
      Tensor t(shape);
      for (std::size_t i = 0; i < values.size(); ++i) t[static_cast<Index>(i)] = to_double(values[i], source, lineno);
      const std::string& name = words[1];
      if (name.rfind("param:", 0) == 0) ck.params.emplace(name.substr(6), std::move(t));
      else if (name.rfind("optim:", 0) == 0) ck.optimizer.emplace(name.substr(6), std::move(t));
      else throw ParseError(source, header_line, "unknown tensor namespace in '" + name + "'");
    } else {
      throw ParseError(source, lineno, "unknown record '" + kind + "'");
    }
  }
  if (!ended) throw ParseError(source, lineno, "truncated checkpoint (no end record)");
  if (!have_vocab) throw ParseError(source, lineno, "missing vocabulary reference");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file_atomic(path, checkpoint_to_text(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(read_file(path), path.string());
}

DialogueModel model_from_checkpoint(const Checkpoint& ckpt) { return DialogueModel(ckpt.config, ckpt.params); }

}  // namespace dialv
