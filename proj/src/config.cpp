#include "qgrace/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace qgrace::config {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) {
    throw ConfigError("bad value '" + std::string(text) + "' for key '" + std::string(key) + "'");
  }
  return value;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("bad value '" + std::string(text) + "' for key '" + std::string(key) + "'");
}

template <typename T>
std::vector<T> parse_list(std::string_view key, std::string_view text) {
  std::vector<T> out;
  while (!text.empty()) {
    const auto comma = text.find(',');
    out.push_back(parse_number<T>(key, trim(text.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  if (out.empty()) throw ConfigError("empty list for key '" + std::string(key) + "'");
  return out;
}

/// Wraps enum parsers so their invalid_argument becomes a ConfigError.
template <typename F>
auto parse_enum(std::string_view key, std::string_view text, F parse) {
  try {
    return parse(text);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string(key) + ": " + e.what());
  }
}

template <typename T>
std::string join(const std::vector<T>& values) {
  std::ostringstream out;
  out.precision(17);
  for (std::size_t i = 0; i < values.size(); ++i) out << (i ? "," : "") << values[i];
  return out.str();
}

using Setter = std::function<void(RunConfig&, std::string_view key, std::string_view value)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Entry {
  std::string key;
  Setter set;
  Getter get;
};

template <typename T>
std::string show(T v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

#define QGRACE_NUMBER(name, field, type)                                                       \
  Entry {                                                                                     \
    name, [](RunConfig& c, std::string_view k, std::string_view v) {                          \
      c.field = parse_number<type>(k, v);                                                     \
    },                                                                                        \
        [](const RunConfig& c) { return show(c.field); }                                      \
  }

const std::vector<Entry>& entries() {
  using namespace matcher;
  static const std::vector<Entry> table = {
      QGRACE_NUMBER("alpha", train.alpha, double),
      QGRACE_NUMBER("lr", train.lr, double),
      QGRACE_NUMBER("outer_lr", train.outer_lr, double),
      QGRACE_NUMBER("iter_in", train.iter_in, std::size_t),
      QGRACE_NUMBER("iter_out", train.iter_out, std::size_t),
      QGRACE_NUMBER("epochs", train.epochs, std::size_t),
      QGRACE_NUMBER("batch_size", train.batch_size, std::size_t),
      QGRACE_NUMBER("k_neg", train.k_neg, std::size_t),
      QGRACE_NUMBER("dim", train.dim, std::size_t),
      QGRACE_NUMBER("layers", train.layers, int),
      {"encoder",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         c.train.encoder = parse_enum(k, v, encoder::parse_encoder_kind);
       },
       [](const RunConfig& c) { return std::string(encoder::to_string(c.train.encoder)); }},
      {"generator",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         c.train.generator = parse_enum(k, v, gen::parse_variant);
       },
       [](const RunConfig& c) { return std::string(gen::to_string(c.train.generator)); }},
      {"trajectory",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         c.train.trajectory = parse_enum(k, v, parse_trajectory);
       },
       [](const RunConfig& c) { return std::string(to_string(c.train.trajectory)); }},
      {"loss",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         c.train.loss = parse_enum(k, v, parse_loss);
       },
       [](const RunConfig& c) { return std::string(to_string(c.train.loss)); }},
      QGRACE_NUMBER("gen_dim", train.gen_dim, std::size_t),
      QGRACE_NUMBER("hidden", train.hidden, std::size_t),
      QGRACE_NUMBER("latent", train.latent, std::size_t),
      QGRACE_NUMBER("beta_kl", train.beta_kl, double),
      {"gen_input",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         c.train.gen_input = parse_enum(k, v, parse_gen_input);
       },
       [](const RunConfig& c) { return std::string(to_string(c.train.gen_input)); }},
      {"deterministic_gen",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         c.train.deterministic_gen = parse_bool(k, v);
       },
       [](const RunConfig& c) { return std::string(c.train.deterministic_gen ? "true" : "false"); }},
      QGRACE_NUMBER("seed", train.seed, std::uint64_t),
      QGRACE_NUMBER("split_train", split.train, double),
      QGRACE_NUMBER("split_val", split.validation, double),
      QGRACE_NUMBER("split_test", split.test, double),
      {"ks",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         c.ks = parse_list<std::size_t>(k, v);
       },
       [](const RunConfig& c) { return join(c.ks); }},
      QGRACE_NUMBER("noise_ratio", noise_ratio, double),
      {"noise_ratios",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         c.noise_ratios = parse_list<double>(k, v);
       },
       [](const RunConfig& c) { return join(c.noise_ratios); }},
      {"alphas",
       [](RunConfig& c, std::string_view k, std::string_view v) {
         c.alphas = parse_list<double>(k, v);
       },
       [](const RunConfig& c) { return join(c.alphas); }},
      QGRACE_NUMBER("seeds", seeds, std::size_t),
      QGRACE_NUMBER("dump_users", dump_users, std::size_t),
      QGRACE_NUMBER("dump_items", dump_items, std::size_t),
      {"input", [](RunConfig& c, std::string_view, std::string_view v) { c.input = v; },
       [](const RunConfig& c) { return c.input.string(); }},
      {"split_dir", [](RunConfig& c, std::string_view, std::string_view v) { c.split_dir = v; },
       [](const RunConfig& c) { return c.split_dir.string(); }},
  };
  return table;
}

#undef QGRACE_NUMBER

}  // namespace

void set_key(RunConfig& cfg, std::string_view key, std::string_view value) {
  for (const auto& e : entries()) {
    if (e.key == key) {
      e.set(cfg, key, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

void apply_stream(RunConfig& cfg, std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view text(line);
    text = trim(text.substr(0, text.find('#')));
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    try {
      set_key(cfg, trim(text.substr(0, eq)), trim(text.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void apply_file(RunConfig& cfg, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  apply_stream(cfg, in);
}

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const auto& e : entries()) out.push_back(e.key);
    return out;
  }();
  return keys;
}

void write(std::ostream& out, const RunConfig& cfg) {
  for (const auto& e : entries()) out << e.key << " = " << e.get(cfg) << '\n';
}

}  // namespace qgrace::config
