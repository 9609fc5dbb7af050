#pragma once

// Flat "key = value" configuration shared by the CLI and the experiment
// harnesses. Keys mirror TrainConfig plus data and experiment settings.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "qgrace/dataset.hpp"
#include "qgrace/error.hpp"
#include "qgrace/matcher.hpp"

namespace qgrace::config {

/// Unknown key or malformed value; the CLI reports it as a usage error.
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct RunConfig {
  matcher::TrainConfig train;
  data::SplitRatios split;
  std::vector<std::size_t> ks = {10, 20};
  double noise_ratio = 0.0;                     // injected before training
  std::vector<double> noise_ratios = {0.05, 0.10, 0.15, 0.20};
  std::vector<double> alphas = {0.2, 0.5, 1, 2, 5, 10};
  std::size_t seeds = 10;                       // experiment seed loop
  std::size_t dump_users = 1000;
  std::size_t dump_items = 1000;
  std::filesystem::path input;                  // raw interaction file
  std::filesystem::path split_dir;              // prepared split
};

/// Sets one key; throws ConfigError naming the key.
void set_key(RunConfig& cfg, std::string_view key, std::string_view value);

/// Applies every "key = value" line; '#' starts a comment.
void apply_stream(RunConfig& cfg, std::istream& in);
void apply_file(RunConfig& cfg, const std::filesystem::path& path);

/// All recognized keys in documentation order.
const std::vector<std::string>& known_keys();

/// Effective settings as "key = value" lines (round-trips through apply).
void write(std::ostream& out, const RunConfig& cfg);

}  // namespace qgrace::config
