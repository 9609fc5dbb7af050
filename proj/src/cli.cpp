#include "qgrace/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>

#include "qgrace/config.hpp"
#include "qgrace/dataset.hpp"
#include "qgrace/experiments.hpp"
#include "qgrace/metrics.hpp"
#include "qgrace/synthetic.hpp"

namespace qgrace::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kThetaFile = "theta.bin";
constexpr const char* kPhiFile = "phi.bin";

/// Options every subcommand accepts.
struct Common {
  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  std::string out_dir = ".";
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_file, "flat 'key = value' config file");
  cmd->add_option("--seed", c.seed, "random seed (overrides the config)");
  cmd->add_option("--set", c.overrides, "extra key=value override, repeatable");
  cmd->add_option("--out", c.out_dir, "output directory");
}

config::RunConfig resolve(const Common& c) {
  config::RunConfig cfg;
  if (!c.config_file.empty()) config::apply_file(cfg, c.config_file);
  for (const auto& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw config::ConfigError("--set expects key=value, got '" + kv + "'");
    config::set_key(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.seed) cfg.train.seed = *c.seed;
  try {
    cfg.train.validate();
  } catch (const std::invalid_argument& e) {
    throw config::ConfigError(e.what());
  }
  return cfg;
}

fs::path ensure_dir(const std::string& dir) {
  fs::path p(dir);
  fs::create_directories(p);
  return p;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

/// Data source for commands that train: a prepared split, a raw
/// interaction file (split with the run seed), or planted synthetic data.
struct Source {
  std::string split_dir;
  std::string input;
  bool synthetic = false;
};

void add_source(CLI::App* cmd, Source& s) {
  cmd->add_option("--split", s.split_dir, "directory written by 'prepare'");
  cmd->add_option("--input", s.input, "raw interaction file, split per seed");
  cmd->add_flag("--synthetic", s.synthetic, "planted-preference synthetic data, regenerated per seed");
}

/// Raw and synthetic sources get `noise_ratio` injected unless `clean` is
/// set; a prepared split already carries whatever noise `prepare` added.
data::SplitDataset load_source(const Source& s, const config::RunConfig& cfg, std::uint64_t seed,
                               bool clean = false) {
  const auto split_dir = s.split_dir.empty() ? cfg.split_dir.string() : s.split_dir;
  const auto input = s.input.empty() ? cfg.input.string() : s.input;
  const int given = !split_dir.empty() + !input.empty() + s.synthetic;
  if (given != 1) {
    throw config::ConfigError("give exactly one of --split, --input or --synthetic");
  }
  if (!split_dir.empty()) return data::load_split(split_dir);
  const auto ds = input.empty() ? synth::planted_preference({}, seed).dataset
                                : data::load_interactions(input);
  auto split = data::split_dataset(ds, cfg.split, seed);
  if (!clean && cfg.noise_ratio > 0.0) {
    auto rng = make_stream(seed, streams::kNoise);
    split = data::inject_noise(split, cfg.noise_ratio, rng);
  }
  return split;
}

void write_config(const fs::path& dir, const config::RunConfig& cfg) {
  auto out = open_out(dir / "config.txt");
  config::write(out, cfg);
}

int cmd_prepare(const Common& c, const std::string& input, std::ostream& out) {
  auto cfg = resolve(c);
  const auto path = input.empty() ? cfg.input : fs::path(input);
  if (path.empty()) throw config::ConfigError("prepare needs --input");
  const auto ds = data::load_interactions(path);
  auto split = data::split_dataset(ds, cfg.split, cfg.train.seed);
  if (cfg.noise_ratio > 0.0) {
    auto rng = make_stream(cfg.train.seed, streams::kNoise);
    split = data::inject_noise(split, cfg.noise_ratio, rng);
  }
  const auto dir = ensure_dir(c.out_dir);
  data::save_split(dir, split);
  write_config(dir, cfg);
  out << "users " << split.num_users() << ", items " << split.num_items() << ", train "
      << split.train().size() << " (noise " << split.noise().size() << "), val "
      << split.validation().size() << ", test " << split.test().size() << '\n';
  if (!split.users_without_train().empty()) {
    out << "warning: " << split.users_without_train().size()
        << " users have no train edge and are excluded from evaluation\n";
  }
  return kExitOk;
}

int cmd_train(const Common& c, const Source& src, const std::string& method,
              const std::string& loss, std::ostream& out) {
  auto cfg = resolve(c);
  exp::Method m;
  try {
    if (!loss.empty()) cfg.train.loss = matcher::parse_loss(loss);
    m = exp::parse_method(method);
  } catch (const std::invalid_argument& e) {
    throw config::ConfigError(e.what());
  }
  const auto split = load_source(src, cfg, cfg.train.seed);
  const auto dir = ensure_dir(c.out_dir);

  matcher::TrainLog log;
  if (m == exp::Method::Normal) {
    auto r = matcher::normal_train(cfg.train, split);
    encoder::save_checkpoint(dir / kThetaFile, r.theta);
    fs::remove(dir / kPhiFile);
    log = std::move(r.log);
  } else {
    auto r = matcher::qgrace_train(cfg.train, split);
    encoder::save_checkpoint(dir / kThetaFile, r.theta);
    gen::save_checkpoint(dir / kPhiFile, r.phi);
    log = std::move(r.log);
  }
  {
    auto f = open_out(dir / "train_log.csv");
    log.write_csv(f);
  }
  {
    auto f = open_out(dir / "epoch_log.csv");
    log.write_epoch_csv(f);
  }
  write_config(dir, cfg);
  out << exp::to_string(m) << ": " << log.rows.size() << " iterations, model in " << dir.string()
      << '\n';
  return kExitOk;
}

int cmd_evaluate(const Common& c, const Source& src, const std::string& model_dir,
                 std::string label, std::ostream& out) {
  auto cfg = resolve(c);
  const auto split = load_source(src, cfg, cfg.train.seed);
  const fs::path model(model_dir);
  const auto theta = encoder::load_checkpoint(model / kThetaFile);
  if (label.empty()) label = fs::exists(model / kPhiFile) ? "qgrace" : "normal";
  const auto report = eval::evaluate(theta, split, cfg.ks);
  const auto dir = ensure_dir(c.out_dir);
  auto f = open_out(dir / "metrics.csv");
  eval::write_metrics_header(f);
  eval::write_metrics_rows(f, label, report, cfg.train.seed);
  for (std::size_t q = 0; q < report.ks.size(); ++q) {
    out << label << " recall@" << report.ks[q] << ' ' << report.recall[q] << "  ndcg@"
        << report.ks[q] << ' ' << report.ndcg[q] << '\n';
  }
  out << report.num_users_evaluated << " users evaluated\n";
  return kExitOk;
}

/// Runs `body` for seeds seed .. seed + seeds - 1 with the source reloaded
/// per seed.
void seed_loop(const config::RunConfig& cfg, const Source& src, bool clean,
               const std::function<void(const config::RunConfig&, const data::SplitDataset&, bool first)>& body) {
  for (std::size_t k = 0; k < cfg.seeds; ++k) {
    auto run = cfg;
    run.train.seed = cfg.train.seed + k;
    body(run, load_source(src, run, run.train.seed, clean), k == 0);
  }
}

int cmd_noise_sweep(const Common& c, const Source& src, std::optional<std::size_t> seeds,
                    std::ostream& out) {
  auto cfg = resolve(c);
  if (seeds) cfg.seeds = *seeds;
  const auto dir = ensure_dir(c.out_dir);
  auto f = open_out(dir / "noise_sweep.csv");
  seed_loop(cfg, src, true, [&](const config::RunConfig& run, const data::SplitDataset& split, bool first) {
    const auto rows = exp::noise_sweep(run, split, run.noise_ratios);
    exp::write_noise_csv(f, rows, run.train.seed, first);
    out << "seed " << run.train.seed << " done\n";
  });
  write_config(dir, cfg);
  return kExitOk;
}

int cmd_alpha_sweep(const Common& c, const Source& src, std::optional<std::size_t> seeds,
                    std::ostream& out) {
  auto cfg = resolve(c);
  if (seeds) cfg.seeds = *seeds;
  const auto dir = ensure_dir(c.out_dir);
  auto f = open_out(dir / "alpha_sweep.csv");
  seed_loop(cfg, src, false, [&](const config::RunConfig& run, const data::SplitDataset& split, bool first) {
    exp::write_alpha_csv(f, exp::alpha_sweep(run, split, run.alphas), run.train.seed, first);
    out << "seed " << run.train.seed << " done\n";
  });
  write_config(dir, cfg);
  return kExitOk;
}

int cmd_dump(const Common& c, const Source& src, const std::string& model_dir, std::ostream& out) {
  auto cfg = resolve(c);
  const auto split = load_source(src, cfg, cfg.train.seed);
  const fs::path model(model_dir);
  if (!fs::exists(model / kPhiFile)) throw Error("no generator checkpoint in " + model_dir);
  const auto theta = encoder::load_checkpoint(model / kThetaFile);
  const auto phi = gen::load_checkpoint(model / kPhiFile);
  auto rng = make_stream(cfg.train.seed, streams::kDumpSubset);
  const auto users = exp::choose_subset(split.num_users(), cfg.dump_users, rng);
  const auto items = exp::choose_subset(split.num_items(), cfg.dump_items, rng);
  const auto rows =
      exp::dump_interests(phi, exp::generator_input(cfg.train, theta, split), users, items);
  const auto dir = ensure_dir(c.out_dir);
  auto f = open_out(dir / "interests.csv");
  exp::write_interest_csv(f, rows);
  out << rows.size() << " interest weights written\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Learn weighted interest graphs from implicit feedback by gradient matching"};
  app.name(args.empty() ? "qgrace" : fs::path(args[0]).filename().string());
  app.require_subcommand(1);

  Common common;
  Source source;
  std::string input, method = "qgrace", loss, model_dir, label;
  std::optional<std::size_t> seeds;

  auto* prepare = app.add_subcommand("prepare", "parse interactions and write a train/val/test split");
  add_common(prepare, common);
  prepare->add_option("--input", input, "interaction file: '<user> <item>' per line");

  auto* train = app.add_subcommand("train", "train a model and write checkpoints and logs");
  add_common(train, common);
  add_source(train, source);
  train->add_option("--method", method, "normal | qgrace")->capture_default_str();
  train->add_option("--loss", loss, "wau | bpr (normal training)");

  auto* evaluate = app.add_subcommand("evaluate", "Recall@K / NDCG@K on the test split");
  add_common(evaluate, common);
  add_source(evaluate, source);
  evaluate->add_option("--model", model_dir, "directory written by 'train'")->required();
  evaluate->add_option("--label", label, "method column in metrics.csv");

  auto* noise = app.add_subcommand("noise-sweep", "robustness to injected noise, both methods");
  add_common(noise, common);
  add_source(noise, source);
  noise->add_option("--seeds", seeds, "number of seeds");

  auto* alpha = app.add_subcommand("alpha-sweep", "QGrace accuracy over the alpha grid");
  add_common(alpha, common);
  add_source(alpha, source);
  alpha->add_option("--seeds", seeds, "number of seeds");

  auto* dump = app.add_subcommand("dump-interests", "generated weights for random user/item subsets");
  add_common(dump, common);
  add_source(dump, source);
  dump->add_option("--model", model_dir, "directory written by 'train --method qgrace'")->required();

  if (args.size() <= 1) {
    err << app.help();
    return kExitUsage;
  }
  std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (prepare->parsed()) return cmd_prepare(common, input, out);
    if (train->parsed()) return cmd_train(common, source, method, loss, out);
    if (evaluate->parsed()) return cmd_evaluate(common, source, model_dir, label, out);
    if (noise->parsed()) return cmd_noise_sweep(common, source, seeds, out);
    if (alpha->parsed()) return cmd_alpha_sweep(common, source, seeds, out);
    if (dump->parsed()) return cmd_dump(common, source, model_dir, out);
  } catch (const config::ConfigError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace qgrace::cli
