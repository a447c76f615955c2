#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "fairhgr/error.hpp"

namespace fairhgr::cli {

/// Invalid or unknown configuration; the message names the offending key.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Sections and keys accepted in a run configuration file.
inline const std::map<std::string, std::set<std::string>>& config_schema() {
  static const std::map<std::string, std::set<std::string>> schema = {
      {"estimate",
       {"source", "n", "rho", "pattern", "sigma", "csv_path", "u_column", "v_column",
        "estimators"}},
      {"bench-patterns", {"n", "sigmas", "patterns", "estimators"}},
      {"gaussian-sweep", {"n", "rhos"}},
      {"synthetic",
       {"n", "train_fraction", "modes", "variants", "repetitions", "age_bin_width",
        "lambda_hgr_nn", "lambda_chi2_nn", "lambda_mine", "lambda_pearson"}},
      {"train",
       {"csv_path", "features", "sensitive", "target", "train_fraction", "modes", "variants",
        "repetitions", "lambda_hgr_nn", "lambda_chi2_nn", "lambda_mine", "lambda_pearson"}},
      {"fairtrain",
       {"epochs", "batch_size", "predictor_hidden", "predictor_units", "dropout",
        "learning_rate", "adversary_learning_rate_f", "adversary_learning_rate_g",
        "epsilon"}},
      {"hgr_nn",
       {"iterations", "batch_size", "hidden_layers", "units", "learning_rate_f",
        "learning_rate_g", "epsilon"}},
      {"chi2_nn",
       {"iterations", "batch_size", "hidden_layers", "units", "learning_rate_f", "epsilon"}},
      {"mine",
       {"iterations", "batch_size", "hidden_layers", "units", "learning_rate_f", "epsilon"}},
      {"kde", {"grid_size", "grid_padding", "bandwidth"}},
      {"rdc", {"k", "scale"}},
  };
  return schema;
}

/// Flat section/key/value configuration with typed, validated access.
class RunConfig {
 public:
  RunConfig() = default;

  static RunConfig parse(std::istream& in) {
    boost::property_tree::ptree tree;
    try {
      boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
    RunConfig cfg;
    const auto& schema = config_schema();
    for (const auto& [section, body] : tree) {
      if (body.empty() && !body.data().empty()) {
        throw ConfigError("config: key '" + section + "' must be inside a [section]");
      }
      const auto it = schema.find(section);
      if (it == schema.end()) throw ConfigError("config: unknown section [" + section + "]");
      for (const auto& [key, value] : body) {
        if (!it->second.contains(key)) {
          throw ConfigError("config: unknown key '" + section + "." + key + "'");
        }
        cfg.values_[section][key] = value.data();
      }
    }
    return cfg;
  }

  static RunConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path.string() + "'");
    return parse(in);
  }

  [[nodiscard]] bool has(const std::string& section, const std::string& key) const {
    const auto s = values_.find(section);
    return s != values_.end() && s->second.contains(key);
  }

  [[nodiscard]] std::string get_string(const std::string& section, const std::string& key,
                                       const std::string& fallback) const {
    return has(section, key) ? values_.at(section).at(key) : fallback;
  }

  [[nodiscard]] double get_double(const std::string& section, const std::string& key,
                                  double fallback) const {
    if (!has(section, key)) return fallback;
    return to_double(section + "." + key, values_.at(section).at(key));
  }

  [[nodiscard]] std::size_t get_size(const std::string& section, const std::string& key,
                                     std::size_t fallback) const {
    if (!has(section, key)) return fallback;
    const std::string& raw = values_.at(section).at(key);
    std::size_t value = 0;
    const auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), value);
    if (ec != std::errc() || ptr != raw.data() + raw.size() || raw.empty()) {
      throw ConfigError("config: '" + section + "." + key + "' must be a non-negative integer, got '" +
                        raw + "'");
    }
    return value;
  }

  [[nodiscard]] std::vector<std::string> get_list(const std::string& section, const std::string& key,
                                                  const std::vector<std::string>& fallback) const {
    if (!has(section, key)) return fallback;
    std::vector<std::string> out;
    std::stringstream ss(values_.at(section).at(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto a = item.find_first_not_of(" \t");
      if (a == std::string::npos) continue;
      const auto b = item.find_last_not_of(" \t");
      out.push_back(item.substr(a, b - a + 1));
    }
    if (out.empty()) throw ConfigError("config: '" + section + "." + key + "' is an empty list");
    return out;
  }

  [[nodiscard]] std::vector<double> get_doubles(const std::string& section, const std::string& key,
                                                const std::vector<double>& fallback) const {
    if (!has(section, key)) return fallback;
    std::vector<double> out;
    for (const auto& item : get_list(section, key, {})) {
      out.push_back(to_double(section + "." + key, item));
    }
    return out;
  }

 private:
  static double to_double(const std::string& name, const std::string& raw) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), value);
    if (ec != std::errc() || ptr != raw.data() + raw.size() || raw.empty() || !std::isfinite(value)) {
      throw ConfigError("config: '" + name + "' must be a number, got '" + raw + "'");
    }
    return value;
  }

  std::map<std::string, std::map<std::string, std::string>> values_;
};

}  // namespace fairhgr::cli
