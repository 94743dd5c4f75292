#include "covevo/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <set>
#include <sstream>
#include <vector>

#include "covevo/error.hpp"

namespace covevo {

namespace {

std::string trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_integer(const std::string& v) {
  T out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) throw Error("expected an integer, got '" + v + "'");
  return out;
}

double parse_real(const std::string& v) {
  double out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) throw Error("expected a number, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error("expected true or false, got '" + v + "'");
}

std::string real_text(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

struct Key {
  const char* name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class T>
Key int_key(const char* name, T EvolutionConfig::*field) {
  return {name, [field](RunConfig& c, const std::string& v) { c.evolution.*field = parse_integer<T>(v); },
          [field](const RunConfig& c) { return std::to_string(c.evolution.*field); }};
}

Key real_key(const char* name, double EvolutionConfig::*field) {
  return {name, [field](RunConfig& c, const std::string& v) { c.evolution.*field = parse_real(v); },
          [field](const RunConfig& c) { return real_text(c.evolution.*field); }};
}

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      {"data.path", [](RunConfig& c, const std::string& v) { c.data_path = v; },
       [](const RunConfig& c) { return c.data_path; }},
      {"data.format",
       [](RunConfig& c, const std::string& v) {
         auto f = parse_data_format(v);
         if (!f) throw Error("unknown data format '" + v + "'");
         c.data_format = *f;
       },
       [](const RunConfig& c) { return data_format_name(c.data_format); }},
      {"data.target",
       [](RunConfig& c, const std::string& v) {
         if (v.empty()) c.data_target.reset();
         else c.data_target = v;
       },
       [](const RunConfig& c) { return c.data_target.value_or(""); }},
      {"data.synthetic",
       [](RunConfig& c, const std::string& v) {
         if (v.empty()) {
           c.synthetic.reset();
           return;
         }
         auto k = parse_synthetic_name(v);
         if (!k) throw Error("unknown synthetic dataset '" + v + "'");
         c.synthetic = *k;
       },
       [](const RunConfig& c) { return c.synthetic ? synthetic_name(*c.synthetic) : std::string(); }},
      {"data.seed", [](RunConfig& c, const std::string& v) { c.data_seed = parse_integer<std::uint64_t>(v); },
       [](const RunConfig& c) { return std::to_string(c.data_seed); }},
      {"data.desk_scale", [](RunConfig& c, const std::string& v) { c.desk_scale = parse_bool(v); },
       [](const RunConfig& c) { return std::string(c.desk_scale ? "true" : "false"); }},
      int_key("evolution.population_size", &EvolutionConfig::population_size),
      int_key("evolution.max_generations", &EvolutionConfig::max_generations),
      real_key("evolution.mutation_rate", &EvolutionConfig::mutation_rate),
      {"evolution.max_length",
       [](RunConfig& c, const std::string& v) { c.evolution.limits.max_length = parse_integer<int>(v); },
       [](const RunConfig& c) { return std::to_string(c.evolution.limits.max_length); }},
      {"evolution.max_height",
       [](RunConfig& c, const std::string& v) { c.evolution.limits.max_height = parse_integer<int>(v); },
       [](const RunConfig& c) { return std::to_string(c.evolution.limits.max_height); }},
      int_key("evolution.ml2_iterations", &EvolutionConfig::ml2_iterations),
      int_key("evolution.restarts", &EvolutionConfig::restarts),
      int_key("evolution.final_restarts", &EvolutionConfig::final_restarts),
      real_key("evolution.success_ratio", &EvolutionConfig::success_ratio),
      real_key("evolution.comparison_factor", &EvolutionConfig::comparison_factor),
      real_key("evolution.max_selection_pressure", &EvolutionConfig::max_selection_pressure),
      int_key("evolution.max_evaluations", &EvolutionConfig::max_evaluations),
      int_key("evolution.seed", &EvolutionConfig::seed),
      int_key("evolution.workers", &EvolutionConfig::workers),
      {"search.mode",
       [](RunConfig& c, const std::string& v) {
         if (v == "evolve") c.mode = SearchMode::Evolve;
         else if (v == "random") c.mode = SearchMode::Random;
         else throw Error("search mode must be evolve or random, got '" + v + "'");
       },
       [](const RunConfig& c) { return mode_name(c.mode); }},
      {"search.budget", [](RunConfig& c, const std::string& v) { c.budget = parse_integer<long>(v); },
       [](const RunConfig& c) { return std::to_string(c.budget); }},
      {"output.dir", [](RunConfig& c, const std::string& v) { c.out_dir = v; },
       [](const RunConfig& c) { return c.out_dir; }},
      {"output.with_noise", [](RunConfig& c, const std::string& v) { c.with_noise = parse_bool(v); },
       [](const RunConfig& c) { return std::string(c.with_noise ? "true" : "false"); }},
      {"output.refit", [](RunConfig& c, const std::string& v) { c.refit = parse_bool(v); },
       [](const RunConfig& c) { return std::string(c.refit ? "true" : "false"); }},
  };
  return table;
}

}  // namespace

std::string mode_name(SearchMode mode) { return mode == SearchMode::Evolve ? "evolve" : "random"; }

std::string data_format_name(DataFormat format) {
  switch (format) {
    case DataFormat::Csv:
      return "csv";
    case DataFormat::Noaa:
      return "noaa";
    case DataFormat::Auto:
      break;
  }
  return "auto";
}

void RunConfig::validate() const {
  if (data_path.empty() == !synthetic.has_value())
    throw Error("config must name exactly one of data.path and data.synthetic");
  if (desk_scale && !synthetic) throw Error("data.desk_scale applies to synthetic data only");
  if (budget < 1) throw Error("search.budget must be >= 1");
  evolution.validate();
}

RunConfig parse_run_config(std::istream& in) {
  RunConfig config;
  std::set<std::string> seen;
  std::string line;
  int lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    std::string text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    if (!header) {
      std::istringstream hs(text);
      std::string word;
      int version = 0;
      if (!(hs >> word >> version) || word != kConfigHeader)
        throw Error(where + "expected header '" + kConfigHeader + " <version>'");
      if (version != kConfigVersion)
        throw Error(where + "unsupported config version " + std::to_string(version));
      header = true;
      continue;
    }
    auto eq = text.find('=');
    if (eq == std::string::npos) throw Error(where + "expected 'key = value'");
    std::string key = trim(std::string_view(text).substr(0, eq));
    std::string value = trim(std::string_view(text).substr(eq + 1));
    auto it = std::find_if(keys().begin(), keys().end(), [&](const Key& k) { return key == k.name; });
    if (it == keys().end()) throw Error(where + "unknown key '" + key + "'");
    if (!seen.insert(key).second) throw Error(where + "duplicate key '" + key + "'");
    try {
      it->set(config, value);
    } catch (const Error& e) {
      throw Error(where + key + ": " + e.what());
    }
  }
  if (!header) throw Error("config is empty (missing header)");
  config.validate();
  return config;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config '" + path + "'");
  RunConfig config = parse_run_config(in);
  // data paths are relative to the config file, not to the working directory
  std::filesystem::path data(config.data_path);
  if (!config.data_path.empty() && data.is_relative())
    config.data_path = (std::filesystem::path(path).parent_path() / data).lexically_normal().string();
  return config;
}

std::string format_run_config(const RunConfig& config) {
  std::ostringstream os;
  os << kConfigHeader << ' ' << kConfigVersion << '\n';
  for (const auto& k : keys()) os << k.name << " = " << k.get(config) << '\n';
  return os.str();
}

Dataset load_run_dataset(const RunConfig& config) {
  if (config.synthetic) {
    Dataset d = make_synthetic(*config.synthetic, config.data_seed);
    return config.desk_scale ? desk_subgrid(d) : d;
  }
  return load_dataset(config.data_path, config.data_format, config.data_target);
}

}  // namespace covevo
