#pragma once

// Declarative run description stored as flat "key = value" text.
//
//   covevo-config 1
//   # comment
//   data.synthetic = SE+RQ
//   evolution.population_size = 50
//
// The first non-blank, non-comment line must be the versioned header.
// Unknown keys, duplicate keys and malformed values throw Error with a
// message naming the line.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "covevo/datasets.hpp"
#include "covevo/evolution.hpp"

namespace covevo {

inline constexpr const char* kConfigHeader = "covevo-config";
inline constexpr int kConfigVersion = 1;

enum class SearchMode { Evolve, Random };

struct RunConfig {
  // dataset: either a file or a synthetic generator
  std::string data_path;
  DataFormat data_format = DataFormat::Auto;
  std::optional<std::string> data_target;
  std::optional<SyntheticKind> synthetic;
  std::uint64_t data_seed = 1;
  bool desk_scale = false;  // 441-point subgrid of a synthetic grid

  EvolutionConfig evolution;  // defaults are the standard preset
  SearchMode mode = SearchMode::Evolve;
  long budget = 800;          // random-search evaluations

  std::string out_dir = ".";
  bool with_noise = false;  // predictive band for y* instead of f*
  bool refit = true;        // re-optimize the winner with final_restarts

  void validate() const;
};

RunConfig parse_run_config(std::istream& in);
/// Resolves a relative data.path against the directory of the config file.
RunConfig load_run_config(const std::string& path);
/// Every key, in a stable order; parse_run_config(format_run_config(c)) == c.
std::string format_run_config(const RunConfig& config);

/// Loads or generates the dataset described by the config.
Dataset load_run_dataset(const RunConfig& config);

std::string mode_name(SearchMode mode);
std::string data_format_name(DataFormat format);

}  // namespace covevo
