#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fairhgr/cli/config.hpp"
#include "fairhgr/data/dataset.hpp"
#include "fairhgr/estimators/kde.hpp"
#include "fairhgr/estimators/neural.hpp"
#include "fairhgr/estimators/pearson.hpp"
#include "fairhgr/estimators/rdc.hpp"
#include "fairhgr/fairtrain/fairtrain.hpp"
#include "fairhgr/metrics/metrics.hpp"
#include "fairhgr/metrics/report_io.hpp"
#include "fairhgr/stats.hpp"

namespace fairhgr::cli {

inline constexpr const char* kConfigEnv = "FAIRHGR_CONFIG";

/// Settings shared by every subcommand, resolved from flags and the config file.
struct RunContext {
  std::string command;
  RunConfig config;
  std::uint64_t seed = 0;
  std::filesystem::path out = "results";
  bool overwrite = false;
  std::ostream* log = &std::cout;
};

// ---------------------------------------------------------------------------
// Config to library settings

inline estimators::NeuralEstimatorConfig neural_from_config(const RunConfig& c,
                                                           const std::string& section,
                                                           estimators::NeuralEstimatorConfig base) {
  const std::size_t in = section == "hgr_nn" ? 1 : 2;
  const std::size_t hidden = c.get_size(section, "hidden_layers", base.f_layers.size() - 1);
  const std::size_t units =
      c.get_size(section, "units", base.f_layers.front().output_width);
  if (hidden < 1) throw ConfigError("config: '" + section + ".hidden_layers' must be >= 1");
  if (units < 1) throw ConfigError("config: '" + section + ".units' must be >= 1");
  base.f_layers = nn::dense_stack(in, hidden, units);
  if (section == "hgr_nn") base.g_layers = nn::dense_stack(1, hidden, units);
  base.iterations = c.get_size(section, "iterations", base.iterations);
  base.batch_size = c.get_size(section, "batch_size", base.batch_size);
  base.f_optimizer.learning_rate =
      c.get_double(section, "learning_rate_f", base.f_optimizer.learning_rate);
  if (section == "hgr_nn") {
    base.g_optimizer.learning_rate =
        c.get_double(section, "learning_rate_g", base.g_optimizer.learning_rate);
  }
  base.epsilon = c.get_double(section, "epsilon", base.epsilon);
  if (base.iterations < 1) throw ConfigError("config: '" + section + ".iterations' must be >= 1");
  if (base.batch_size < 2) throw ConfigError("config: '" + section + ".batch_size' must be >= 2");
  if (!(base.f_optimizer.learning_rate > 0.0) || !(base.g_optimizer.learning_rate > 0.0)) {
    throw ConfigError("config: '" + section + "' learning rates must be positive");
  }
  if (!(base.epsilon >= 0.0)) throw ConfigError("config: '" + section + ".epsilon' must be >= 0");
  return base;
}

inline estimators::KdeConfig kde_from_config(const RunConfig& c) {
  estimators::KdeConfig k;
  k.grid_size = c.get_size("kde", "grid_size", k.grid_size);
  k.grid_padding = c.get_double("kde", "grid_padding", k.grid_padding);
  if (c.has("kde", "bandwidth")) {
    k.bandwidth_rule = estimators::BandwidthRule::fixed;
    k.fixed_bandwidth = c.get_double("kde", "bandwidth", 0.0);
    if (!(k.fixed_bandwidth > 0.0)) throw ConfigError("config: 'kde.bandwidth' must be positive");
  }
  if (k.grid_size < 8) throw ConfigError("config: 'kde.grid_size' must be >= 8");
  if (!(k.grid_padding >= 0.0)) throw ConfigError("config: 'kde.grid_padding' must be >= 0");
  return k;
}

inline estimators::RdcConfig rdc_from_config(const RunConfig& c) {
  estimators::RdcConfig r;
  r.k = c.get_size("rdc", "k", r.k);
  r.scale = c.get_double("rdc", "scale", r.scale);
  if (r.k < 1) throw ConfigError("config: 'rdc.k' must be >= 1");
  if (!(r.scale > 0.0)) throw ConfigError("config: 'rdc.scale' must be positive");
  return r;
}

/// Penalty weights used by `synthetic` and `train` when the config gives none.
inline double default_lambda(fairtrain::PenaltyKind p) {
  switch (p) {
    case fairtrain::PenaltyKind::hgr_nn: return 1.0;
    case fairtrain::PenaltyKind::chi2_nn: return 1.0;
    case fairtrain::PenaltyKind::mine: return 1.0;
    case fairtrain::PenaltyKind::pearson: return 1.0;
    case fairtrain::PenaltyKind::none: return 0.0;
  }
  return 0.0;
}

inline fairtrain::FairTrainConfig fairtrain_from_config(const RunConfig& c) {
  fairtrain::FairTrainConfig f;
  const std::string s = "fairtrain";
  f.epochs = c.get_size(s, "epochs", f.epochs);
  f.batch_size = c.get_size(s, "batch_size", f.batch_size);
  f.predictor_hidden = c.get_size(s, "predictor_hidden", f.predictor_hidden);
  f.predictor_units = c.get_size(s, "predictor_units", f.predictor_units);
  f.predictor_dropout = c.get_double(s, "dropout", f.predictor_dropout);
  f.predictor_optimizer.learning_rate =
      c.get_double(s, "learning_rate", f.predictor_optimizer.learning_rate);
  f.epsilon = c.get_double(s, "epsilon", f.epsilon);
  if (f.epochs < 1) throw ConfigError("config: 'fairtrain.epochs' must be >= 1");
  if (f.batch_size < 2) throw ConfigError("config: 'fairtrain.batch_size' must be >= 2");
  if (f.predictor_hidden < 1 || f.predictor_units < 1) {
    throw ConfigError("config: 'fairtrain.predictor_hidden' and 'fairtrain.predictor_units' must be >= 1");
  }
  if (!(f.predictor_dropout >= 0.0 && f.predictor_dropout < 1.0)) {
    throw ConfigError("config: 'fairtrain.dropout' must lie in [0, 1)");
  }
  if (!(f.predictor_optimizer.learning_rate > 0.0)) {
    throw ConfigError("config: 'fairtrain.learning_rate' must be positive");
  }
  if (!(f.epsilon >= 0.0)) throw ConfigError("config: 'fairtrain.epsilon' must be >= 0");
  return f;
}

/// Adversary shape and rates for one penalty; learning rates from [fairtrain]
/// override the training defaults.
inline estimators::NeuralEstimatorConfig adversary_from_config(const RunConfig& c,
                                                              fairtrain::PenaltyKind p) {
  estimators::NeuralEstimatorConfig a = fairtrain::default_adversary(p);
  a.f_optimizer.learning_rate =
      c.get_double("fairtrain", "adversary_learning_rate_f", a.f_optimizer.learning_rate);
  a.g_optimizer.learning_rate =
      c.get_double("fairtrain", "adversary_learning_rate_g", a.g_optimizer.learning_rate);
  if (!(a.f_optimizer.learning_rate > 0.0) || !(a.g_optimizer.learning_rate > 0.0)) {
    throw ConfigError("config: 'fairtrain' adversary learning rates must be positive");
  }
  return a;
}

inline metrics::EvalSettings eval_from_config(const RunConfig& c) {
  metrics::EvalSettings e;
  e.hgr = neural_from_config(c, "hgr_nn", estimators::hgr_nn_defaults());
  e.chi2 = neural_from_config(c, "chi2_nn", estimators::chi2_nn_defaults());
  e.kde = kde_from_config(c);
  e.rdc = rdc_from_config(c);
  return e;
}

inline double positive(const RunConfig& c, const std::string& section, const std::string& key,
                       double fallback) {
  const double v = c.get_double(section, key, fallback);
  if (!(v > 0.0)) throw ConfigError("config: '" + section + "." + key + "' must be positive");
  return v;
}

inline double fraction(const RunConfig& c, const std::string& section, double fallback) {
  const double f = c.get_double(section, "train_fraction", fallback);
  if (!(f > 0.0 && f < 1.0)) {
    throw ConfigError("config: '" + section + ".train_fraction' must lie in (0, 1)");
  }
  return f;
}

// ---------------------------------------------------------------------------
// Output files

/// Resolves output paths up front so an existing file stops the run before
/// any computation.
class OutputSet {
 public:
  OutputSet(const RunContext& ctx, std::vector<std::string> names) : dir_(ctx.out) {
    for (const auto& n : names) {
      const auto path = dir_ / n;
      if (std::filesystem::exists(path) && !ctx.overwrite) {
        throw ConfigError("output '" + path.string() + "' exists; pass --overwrite to replace it");
      }
      paths_[n] = path;
    }
  }

  void write(const std::string& name, const std::string& contents) const {
    std::filesystem::create_directories(dir_);
    std::ofstream out(paths_.at(name), std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + paths_.at(name).string() + "'");
    out << contents;
    if (!out) throw Error("failed writing '" + paths_.at(name).string() + "'");
  }

  void write_json(const std::string& name, const nlohmann::json& j) const {
    write(name, j.dump(2) + "\n");
  }

 private:
  std::filesystem::path dir_;
  std::map<std::string, std::filesystem::path> paths_;
};

// ---------------------------------------------------------------------------
// estimate

inline const std::vector<std::string>& all_estimators() {
  static const std::vector<std::string> names = {"pearson", "hgr_nn",  "hgr_kde", "rdc",
                                                 "chi2_kde", "chi2_nn", "mine"};
  return names;
}

inline int cmd_estimate(const RunContext& ctx) {
  const RunConfig& c = ctx.config;
  const std::string sec = "estimate";
  const std::string source = c.get_string(sec, "source", "gaussian");
  const std::vector<std::string> names = c.get_list(sec, "estimators", all_estimators());
  for (const auto& n : names) {
    if (std::find(all_estimators().begin(), all_estimators().end(), n) == all_estimators().end()) {
      throw ConfigError("config: 'estimate.estimators' has unknown estimator '" + n + "'");
    }
  }
  const auto hgr = neural_from_config(c, "hgr_nn", estimators::hgr_nn_defaults(ctx.seed));
  const auto chi2 = neural_from_config(c, "chi2_nn", estimators::chi2_nn_defaults(ctx.seed));
  const auto mi = neural_from_config(c, "mine", estimators::mine_defaults(ctx.seed));
  const auto kde = kde_from_config(c);
  estimators::RdcConfig rdc = rdc_from_config(c);
  rdc.seed = ctx.seed;

  nlohmann::json meta = {{"source", source}, {"seed", ctx.seed}};
  std::function<estimators::SamplePairs()> make;
  if (source == "gaussian") {
    const std::size_t n = c.get_size(sec, "n", 2000);
    const double rho = c.get_double(sec, "rho", 0.5);
    if (!(std::abs(rho) < 1.0)) throw ConfigError("config: 'estimate.rho' must satisfy |rho| < 1");
    meta["n"] = n;
    meta["rho"] = rho;
    make = [=, seed = ctx.seed] { return data::gen_bivariate_gaussian(n, rho, seed); };
  } else if (source == "pattern") {
    const std::size_t n = c.get_size(sec, "n", 2000);
    const std::string name = c.get_string(sec, "pattern", "sine");
    data::PatternKind kind{};
    try {
      kind = data::parse_pattern(name);
    } catch (const InvalidArgument&) {
      throw ConfigError("config: 'estimate.pattern' has unknown pattern '" + name + "'");
    }
    const double sigma = c.get_double(sec, "sigma", 0.0);
    if (!(sigma >= 0.0)) throw ConfigError("config: 'estimate.sigma' must be >= 0");
    meta["n"] = n;
    meta["pattern"] = name;
    meta["sigma"] = sigma;
    make = [=, seed = ctx.seed] { return data::gen_pattern(kind, n, sigma, seed); };
  } else if (source == "csv") {
    if (!c.has(sec, "csv_path")) throw ConfigError("config: 'estimate.csv_path' is required for source=csv");
    if (!c.has(sec, "u_column")) throw ConfigError("config: 'estimate.u_column' is required for source=csv");
    if (!c.has(sec, "v_column")) throw ConfigError("config: 'estimate.v_column' is required for source=csv");
    const std::string path = c.get_string(sec, "csv_path", "");
    const std::string uc = c.get_string(sec, "u_column", "");
    const std::string vc = c.get_string(sec, "v_column", "");
    meta["csv_path"] = path;
    meta["u_column"] = uc;
    meta["v_column"] = vc;
    make = [=] {
      const data::Dataset d = data::load_csv(path, {uc}, vc, uc);
      return estimators::SamplePairs{d.y, d.s};
    };
  } else {
    throw ConfigError("config: 'estimate.source' must be gaussian, pattern or csv, got '" + source + "'");
  }

  OutputSet out(ctx, {"estimate.json", "estimate.csv"});
  const estimators::SamplePairs pairs = make();
  pairs.validate();
  meta["n"] = pairs.size();

  nlohmann::json results = nlohmann::json::object();
  std::string csv = "estimator,value,seconds\n";
  std::ostream& log = *ctx.log;
  log << std::left << std::setw(10) << "estimator" << std::right << std::setw(12) << "value"
      << std::setw(10) << "seconds" << "\n";
  for (const auto& name : names) {
    const auto t0 = std::chrono::steady_clock::now();
    estimators::Estimate e;
    if (name == "pearson") {
      e.value = estimators::pearson(pairs);
    } else if (name == "hgr_nn") {
      auto cfg = hgr;
      cfg.batch_size = std::min(cfg.batch_size, pairs.size());
      e = estimators::hgr_nn(pairs, cfg);
    } else if (name == "chi2_nn") {
      auto cfg = chi2;
      cfg.batch_size = std::min(cfg.batch_size, pairs.size());
      e = estimators::chi2_nn(pairs, cfg);
    } else if (name == "mine") {
      auto cfg = mi;
      cfg.batch_size = std::min(cfg.batch_size, pairs.size());
      e = estimators::mine(pairs, cfg);
    } else if (name == "hgr_kde") {
      e = estimators::hgr_kde(pairs, kde);
    } else if (name == "chi2_kde") {
      e = estimators::chi2_kde(pairs, kde);
    } else if (name == "rdc") {
      e = estimators::rdc(pairs, rdc);
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    results[name] = {{"value", e.value}, {"diagnostics", e.diagnostics}};
    csv += name + "," + metrics::detail::fmt(e.value) + "," + metrics::detail::fmt(secs) + "\n";
    log << std::left << std::setw(10) << name << std::right << std::fixed << std::setprecision(4)
        << std::setw(12) << e.value << std::setprecision(1) << std::setw(10) << secs << "\n";
  }
  log.unsetf(std::ios::floatfield);
  out.write_json("estimate.json", {{"input", meta}, {"estimates", results}});
  out.write("estimate.csv", csv);
  return 0;
}

// ---------------------------------------------------------------------------
// bench-patterns

inline int cmd_bench_patterns(const RunContext& ctx) {
  const RunConfig& c = ctx.config;
  const std::string sec = "bench-patterns";
  const std::size_t n = c.get_size(sec, "n", 500);
  const std::vector<double> sigmas = c.get_doubles(sec, "sigmas", {0.0, 1.0, 2.0, 3.0});
  std::vector<data::PatternKind> kinds;
  for (const auto& p : c.get_list(sec, "patterns", {"sine", "square", "gaussian_pdf", "sin_pow"})) {
    try {
      kinds.push_back(data::parse_pattern(p));
    } catch (const InvalidArgument&) {
      throw ConfigError("config: 'bench-patterns.patterns' has unknown pattern '" + p + "'");
    }
  }
  const std::vector<std::string> names = c.get_list(sec, "estimators", {"hgr_nn", "hgr_kde", "rdc"});
  for (const auto& e : names) {
    if (e != "hgr_nn" && e != "hgr_kde" && e != "rdc") {
      throw ConfigError("config: 'bench-patterns.estimators' accepts hgr_nn, hgr_kde, rdc; got '" + e + "'");
    }
  }
  for (double s : sigmas) {
    if (!(s >= 0.0)) throw ConfigError("config: 'bench-patterns.sigmas' must be >= 0");
  }
  if (n < 2) throw ConfigError("config: 'bench-patterns.n' must be >= 2");
  const auto hgr = neural_from_config(c, "hgr_nn", estimators::hgr_nn_defaults());
  const auto kde = kde_from_config(c);
  const auto rdc = rdc_from_config(c);

  OutputSet out(ctx, {"patterns.json", "patterns.csv"});
  nlohmann::json rows = nlohmann::json::array();
  std::string csv = "pattern,sigma,estimator,value\n";
  Rng seeds(ctx.seed, 0xBE7);
  for (data::PatternKind kind : kinds) {
    for (double sigma : sigmas) {
      const std::uint64_t data_seed = seeds.next_u64();
      const std::uint64_t est_seed = seeds.next_u64();
      const estimators::SamplePairs pairs = data::gen_pattern(kind, n, sigma, data_seed);
      nlohmann::json row = {{"pattern", data::to_string(kind)}, {"sigma", sigma}};
      for (const auto& name : names) {
        double v = 0.0;
        if (name == "hgr_nn") {
          auto cfg = hgr;
          cfg.seed = est_seed;
          cfg.batch_size = std::min(cfg.batch_size, n);
          v = estimators::hgr_nn(pairs, cfg).value;
        } else if (name == "hgr_kde") {
          v = estimators::hgr_kde(pairs, kde).value;
        } else {
          auto cfg = rdc;
          cfg.seed = est_seed;
          v = estimators::rdc(pairs, cfg).value;
        }
        row[name] = v;
        csv += std::string(data::to_string(kind)) + "," + metrics::detail::fmt(sigma) + "," + name +
               "," + metrics::detail::fmt(v) + "\n";
      }
      *ctx.log << std::left << std::setw(14) << data::to_string(kind) << " sigma=" << sigma;
      for (const auto& name : names) *ctx.log << "  " << name << "=" << row[name].get<double>();
      *ctx.log << "\n";
      rows.push_back(row);
    }
  }
  out.write_json("patterns.json", {{"n", n}, {"seed", ctx.seed}, {"rows", rows}});
  out.write("patterns.csv", csv);
  return 0;
}

// ---------------------------------------------------------------------------
// gaussian-sweep

inline int cmd_gaussian_sweep(const RunContext& ctx) {
  const RunConfig& c = ctx.config;
  const std::string sec = "gaussian-sweep";
  const std::size_t n = c.get_size(sec, "n", 5000);
  const std::vector<double> rhos =
      c.get_doubles(sec, "rhos", {-0.8, -0.6, -0.4, -0.2, 0.0, 0.2, 0.4, 0.6, 0.8});
  for (double r : rhos) {
    if (!(std::abs(r) < 1.0)) throw ConfigError("config: 'gaussian-sweep.rhos' entries must satisfy |rho| < 1");
  }
  metrics::DominanceSettings s;
  s.hgr = neural_from_config(c, "hgr_nn", metrics::gaussian_sweep_hgr_defaults());
  s.chi2 = neural_from_config(c, "chi2_nn", estimators::chi2_nn_defaults());
  s.mine = neural_from_config(c, "mine", estimators::mine_defaults());
  for (auto* cfg : {&s.hgr, &s.chi2, &s.mine}) cfg->batch_size = std::min(cfg->batch_size, n);

  OutputSet out(ctx, {"gaussian_sweep.json", "gaussian_sweep.csv"});
  const metrics::DominanceReport report = metrics::gaussian_dominance_check(rhos, n, s, ctx.seed);
  *ctx.log << "rho      hgr_sq_est  chi2_est  chi2_true  mi_bound_est  mi_bound_true\n";
  for (const auto& r : report.rows) {
    *ctx.log << std::fixed << std::setprecision(3) << std::setw(6) << r.rho << std::setw(12)
             << r.hgr_sq_est << std::setw(10) << r.chi2_est << std::setw(11) << r.chi2_true
             << std::setw(14) << r.mi_bound_est << std::setw(15) << r.mi_bound_true << "\n";
  }
  *ctx.log << "t = " << std::setprecision(4) << report.t << "\n";
  ctx.log->unsetf(std::ios::floatfield);
  out.write_json("gaussian_sweep.json", metrics::to_json(report));
  out.write("gaussian_sweep.csv", metrics::to_csv(report));
  return 0;
}

// ---------------------------------------------------------------------------
// synthetic and train

struct Variant {
  fairtrain::FairnessMode mode;
  fairtrain::PenaltyKind penalty;
  double lambda;
};

inline std::vector<Variant> variants_from_config(const RunConfig& c, const std::string& sec) {
  std::vector<fairtrain::FairnessMode> modes;
  for (const auto& m : c.get_list(sec, "modes", {"demographic_parity", "equalized_residuals"})) {
    try {
      modes.push_back(fairtrain::parse_mode(m));
    } catch (const InvalidArgument&) {
      throw ConfigError("config: '" + sec + ".modes' has unknown mode '" + m + "'");
    }
  }
  std::vector<fairtrain::PenaltyKind> penalties;
  for (const auto& p : c.get_list(sec, "variants", {"none", "hgr_nn", "chi2_nn", "mine", "pearson"})) {
    try {
      penalties.push_back(fairtrain::parse_penalty(p));
    } catch (const InvalidArgument&) {
      throw ConfigError("config: '" + sec + ".variants' has unknown penalty '" + p + "'");
    }
  }
  std::vector<Variant> out;
  for (auto m : modes) {
    for (auto p : penalties) {
      double lambda = 0.0;
      if (p != fairtrain::PenaltyKind::none) {
        const std::string key = std::string("lambda_") + fairtrain::to_string(p);
        lambda = c.get_double(sec, key, default_lambda(p));
        if (!(lambda >= 0.0)) throw ConfigError("config: '" + sec + "." + key + "' must be >= 0");
      }
      out.push_back({m, p, lambda});
    }
  }
  return out;
}

struct Summary {
  double mean = 0.0;
  double stddev = 0.0;
};

inline Summary summarize(const std::vector<double>& v) {
  Summary s;
  s.mean = stats::mean(v);
  s.stddev = v.size() > 1 ? stats::stddev(v) : 0.0;
  return s;
}

/// Mean and sample standard deviation of every EvalReport metric per
/// (mode, penalty) group, in first-seen order.
inline nlohmann::json aggregate(const std::vector<metrics::EvalReport>& reports) {
  std::vector<std::pair<std::string, std::vector<const metrics::EvalReport*>>> groups;
  for (const auto& r : reports) {
    const std::string key = std::string(fairtrain::to_string(r.mode)) + "/" + r.penalty;
    auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) { return g.first == key; });
    if (it == groups.end()) {
      groups.push_back({key, {}});
      it = groups.end() - 1;
    }
    it->second.push_back(&r);
  }
  const std::vector<std::pair<std::string, double metrics::EvalReport::*>> fields = {
      {"mse", &metrics::EvalReport::mse},         {"hgr_nn", &metrics::EvalReport::hgr_nn},
      {"hgr_kde", &metrics::EvalReport::hgr_kde}, {"rdc", &metrics::EvalReport::rdc},
      {"chi2_kde", &metrics::EvalReport::chi2_kde}, {"chi2_nn", &metrics::EvalReport::chi2_nn},
      {"fairquant", &metrics::EvalReport::fairquant}};
  nlohmann::json out = nlohmann::json::array();
  for (const auto& [key, members] : groups) {
    nlohmann::json g = {{"mode", fairtrain::to_string(members.front()->mode)},
                        {"penalty", members.front()->penalty},
                        {"lambda", members.front()->lambda},
                        {"repetitions", members.size()}};
    for (const auto& [name, field] : fields) {
      std::vector<double> v;
      for (const auto* r : members) v.push_back(r->*field);
      const Summary s = summarize(v);
      g[name] = {{"mean", s.mean}, {"std", s.stddev}};
    }
    out.push_back(g);
  }
  return out;
}

inline void print_report(std::ostream& log, const metrics::EvalReport& r, std::size_t rep) {
  log << std::left << std::setw(20) << fairtrain::to_string(r.mode) << std::setw(9) << r.penalty
      << std::right << std::setw(4) << rep << std::fixed << std::setprecision(4);
  for (double v : {r.mse, r.hgr_nn, r.hgr_kde, r.rdc, r.chi2_kde, r.chi2_nn, r.fairquant}) {
    log << std::setw(10) << v;
  }
  log << "\n";
  log.unsetf(std::ios::floatfield);
}

inline void print_header(std::ostream& log) {
  log << std::left << std::setw(20) << "mode" << std::setw(9) << "penalty" << std::right
      << std::setw(4) << "rep";
  for (const char* h : {"mse", "hgr_nn", "hgr_kde", "rdc", "chi2_kde", "chi2_nn", "fairquant"}) {
    log << std::setw(10) << h;
  }
  log << "\n";
}

/// Trains and evaluates every variant on one split.
struct VariantRun {
  Variant variant;
  fairtrain::TrainedModel model;
  metrics::EvalReport report;
};

inline std::vector<VariantRun> run_variants(const RunConfig& c, const std::vector<Variant>& variants,
                                            const data::Dataset& train, const data::Dataset& test,
                                            std::uint64_t train_seed, std::uint64_t est_seed) {
  const fairtrain::FairTrainConfig base = fairtrain_from_config(c);
  metrics::EvalSettings settings = eval_from_config(c);
  settings.hgr.seed = est_seed;
  settings.chi2.seed = est_seed + 1;
  settings.rdc.seed = est_seed + 2;
  std::vector<VariantRun> runs;
  for (const Variant& v : variants) {
    fairtrain::FairTrainConfig cfg = base;
    cfg.mode = v.mode;
    cfg.penalty = v.penalty;
    cfg.lambda = v.lambda;
    cfg.seed = train_seed;
    if (v.penalty != fairtrain::PenaltyKind::none && v.penalty != fairtrain::PenaltyKind::pearson) {
      cfg.adversary = adversary_from_config(c, v.penalty);
    }
    if (train.rows() < 2 * cfg.batch_size) {
      throw ConfigError("config: 'fairtrain.batch_size' is too large for " +
                        std::to_string(train.rows()) + " training rows");
    }
    fairtrain::TrainedModel model = fairtrain::train_fair(train, cfg);
    metrics::EvalReport report = metrics::evaluate(model, test, v.mode, settings);
    runs.push_back({v, std::move(model), report});
  }
  return runs;
}

inline int cmd_synthetic(const RunContext& ctx) {
  const RunConfig& c = ctx.config;
  const std::string sec = "synthetic";
  const std::size_t n = c.get_size(sec, "n", 10000);
  const double train_fraction = fraction(c, sec, 0.8);
  const std::size_t reps = c.get_size(sec, "repetitions", 5);
  const double bin_width = positive(c, sec, "age_bin_width", 2.0);
  if (reps < 1) throw ConfigError("config: 'synthetic.repetitions' must be >= 1");
  const std::vector<Variant> variants = variants_from_config(c, sec);
  (void)fairtrain_from_config(c);
  (void)eval_from_config(c);

  OutputSet out(ctx, {"synthetic.json", "synthetic.csv", "synthetic_age_bins.csv"});
  std::vector<metrics::EvalReport> reports;
  std::string csv = "repetition," + metrics::eval_csv_header() + "\n";
  std::string bins = "repetition,mode,penalty,age_low,age_high,count,mean_target,mean_prediction,mean_residual\n";
  print_header(*ctx.log);
  for (std::size_t rep = 0; rep < reps; ++rep) {
    Rng seeds(ctx.seed, rep);
    const std::uint64_t data_seed = seeds.next_u64();
    const std::uint64_t split_seed = seeds.next_u64();
    const std::uint64_t train_seed = seeds.next_u64();
    const std::uint64_t est_seed = seeds.next_u64();
    const data::Dataset d = data::gen_synthetic_scenario(n, data_seed);
    const auto [train, test] = data::split(d, train_fraction, split_seed);
    for (const VariantRun& run : run_variants(c, variants, train, test, train_seed, est_seed)) {
      reports.push_back(run.report);
      csv += std::to_string(rep) + "," + metrics::to_csv_row(run.report) + "\n";
      print_report(*ctx.log, run.report, rep);
      const std::vector<double> pred = fairtrain::predict_original_units(run.model, test.x);
      std::map<long, std::vector<std::size_t>> by_bin;
      for (std::size_t i = 0; i < test.rows(); ++i) {
        by_bin[static_cast<long>(std::floor(test.s[i] / bin_width))].push_back(i);
      }
      for (const auto& [bin, idx] : by_bin) {
        double t = 0.0, p = 0.0;
        for (std::size_t i : idx) {
          t += test.y[i];
          p += pred[i];
        }
        t /= static_cast<double>(idx.size());
        p /= static_cast<double>(idx.size());
        bins += std::to_string(rep) + "," + fairtrain::to_string(run.variant.mode) + "," +
                fairtrain::to_string(run.variant.penalty) + "," +
                metrics::detail::fmt(static_cast<double>(bin) * bin_width) + "," +
                metrics::detail::fmt(static_cast<double>(bin + 1) * bin_width) + "," +
                std::to_string(idx.size()) + "," + metrics::detail::fmt(t) + "," +
                metrics::detail::fmt(p) + "," + metrics::detail::fmt(p - t) + "\n";
      }
    }
  }
  nlohmann::json j = {{"seed", ctx.seed}, {"n", n}, {"train_fraction", train_fraction},
                      {"repetitions", reps}, {"reports", nlohmann::json::array()}};
  for (const auto& r : reports) j["reports"].push_back(metrics::to_json(r));
  j["summary"] = aggregate(reports);
  out.write_json("synthetic.json", j);
  out.write("synthetic.csv", csv);
  out.write("synthetic_age_bins.csv", bins);
  return 0;
}

inline int cmd_train(const RunContext& ctx) {
  const RunConfig& c = ctx.config;
  const std::string sec = "train";
  for (const char* key : {"csv_path", "features", "sensitive", "target"}) {
    if (!c.has(sec, key)) throw ConfigError(std::string("config: 'train.") + key + "' is required");
  }
  const std::string path = c.get_string(sec, "csv_path", "");
  const std::vector<std::string> features = c.get_list(sec, "features", {});
  const std::string sensitive = c.get_string(sec, "sensitive", "");
  const std::string target = c.get_string(sec, "target", "");
  const double train_fraction = fraction(c, sec, 0.8);
  const std::size_t reps = c.get_size(sec, "repetitions", 5);
  if (reps < 1) throw ConfigError("config: 'train.repetitions' must be >= 1");
  const std::vector<Variant> variants = variants_from_config(c, sec);
  (void)fairtrain_from_config(c);
  (void)eval_from_config(c);

  OutputSet out(ctx, {"train.json", "train.csv"});
  const data::Dataset d = data::load_csv(path, features, sensitive, target);
  d.validate();
  std::vector<metrics::EvalReport> reports;
  std::string csv = "repetition," + metrics::eval_csv_header() + "\n";
  print_header(*ctx.log);
  for (std::size_t rep = 0; rep < reps; ++rep) {
    Rng seeds(ctx.seed, rep);
    const std::uint64_t split_seed = seeds.next_u64();
    const std::uint64_t train_seed = seeds.next_u64();
    const std::uint64_t est_seed = seeds.next_u64();
    const auto [train, test] = data::split(d, train_fraction, split_seed);
    for (const VariantRun& run : run_variants(c, variants, train, test, train_seed, est_seed)) {
      reports.push_back(run.report);
      csv += std::to_string(rep) + "," + metrics::to_csv_row(run.report) + "\n";
      print_report(*ctx.log, run.report, rep);
    }
  }
  nlohmann::json j = {{"seed", ctx.seed}, {"csv_path", path}, {"rows", d.rows()},
                      {"train_fraction", train_fraction}, {"repetitions", reps},
                      {"reports", nlohmann::json::array()}};
  for (const auto& r : reports) j["reports"].push_back(metrics::to_json(r));
  j["summary"] = aggregate(reports);
  out.write_json("train.json", j);
  out.write("train.csv", csv);
  return 0;
}

// ---------------------------------------------------------------------------
// Entry point

inline int dispatch(const RunContext& ctx) {
  if (ctx.command == "estimate") return cmd_estimate(ctx);
  if (ctx.command == "bench-patterns") return cmd_bench_patterns(ctx);
  if (ctx.command == "gaussian-sweep") return cmd_gaussian_sweep(ctx);
  if (ctx.command == "synthetic") return cmd_synthetic(ctx);
  if (ctx.command == "train") return cmd_train(ctx);
  throw ConfigError("unknown subcommand '" + ctx.command + "'");
}

/// Parses flags, loads the config and runs one subcommand. Returns 0 on
/// success, 1 on a usage or config error, 2 when the computation fails.
inline int run(int argc, const char* const* argv, std::ostream& log = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Fairness-aware regression with neural dependence estimators"};
  app.require_subcommand(1);
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out = "results";
  bool overwrite = false;
  app.add_option("--config", config_path, "INI-style run configuration")->envname(kConfigEnv);
  auto* seed_opt = app.add_option("--seed", seed, "Base seed");
  app.add_option("--out", out, "Output directory");
  app.add_flag("--overwrite", overwrite, "Replace existing output files");
  app.fallthrough();
  for (const char* name : {"estimate", "bench-patterns", "gaussian-sweep", "synthetic", "train"}) {
    app.add_subcommand(name);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, log, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, log, err);
    return 1;
  }

  RunContext ctx;
  ctx.command = app.get_subcommands().front()->get_name();
  ctx.seed = seed_opt->count() > 0 ? seed : 0;
  ctx.out = out;
  ctx.overwrite = overwrite;
  ctx.log = &log;
  try {
    if (!config_path.empty()) ctx.config = RunConfig::load(config_path);
    return dispatch(ctx);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace fairhgr::cli
