#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <Eigen/Dense>

#include "fairhgr/error.hpp"
#include "fairhgr/estimators/types.hpp"
#include "fairhgr/rng.hpp"

namespace fairhgr::data {

enum class PatternKind { sine, square, gaussian_pdf, sin_pow };

inline const char* to_string(PatternKind k) {
  switch (k) {
    case PatternKind::sine: return "sine";
    case PatternKind::square: return "square";
    case PatternKind::gaussian_pdf: return "gaussian_pdf";
    case PatternKind::sin_pow: return "sin_pow";
  }
  return "?";
}

inline PatternKind parse_pattern(const std::string& name) {
  if (name == "sine") return PatternKind::sine;
  if (name == "square") return PatternKind::square;
  if (name == "gaussian_pdf") return PatternKind::gaussian_pdf;
  if (name == "sin_pow") return PatternKind::sin_pow;
  throw InvalidArgument("unknown pattern '" + name + "'");
}

struct Provenance {
  enum class Kind { synthetic_scenario, gaussian, pattern, csv, subset };
  Kind kind = Kind::subset;
  double rho = 0.0;
  PatternKind pattern = PatternKind::sine;
  double sigma = 0.0;
  std::string path;
};

/// Features x (n x p), continuous sensitive attribute s and target y.
struct Dataset {
  std::vector<std::string> feature_names;
  Eigen::MatrixXd x;
  std::vector<double> s;
  std::vector<double> y;
  Provenance provenance;
  std::uint64_t seed = 0;

  [[nodiscard]] std::size_t rows() const { return s.size(); }
  [[nodiscard]] std::size_t features() const { return static_cast<std::size_t>(x.cols()); }

  void validate() const {
    if (static_cast<std::size_t>(x.rows()) != s.size() || s.size() != y.size()) {
      throw InvalidArgument("Dataset: row counts of x, s and y differ");
    }
    if (feature_names.size() != features()) {
      throw InvalidArgument("Dataset: feature name count does not match x");
    }
    if (!x.allFinite()) throw InvalidArgument("Dataset: non-finite feature value");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!std::isfinite(s[i]) || !std::isfinite(y[i])) {
        throw InvalidArgument("Dataset: non-finite value at row " + std::to_string(i));
      }
    }
  }

  [[nodiscard]] Dataset subset(const std::vector<std::size_t>& idx) const {
    Dataset d;
    d.feature_names = feature_names;
    d.x.resize(static_cast<Eigen::Index>(idx.size()), x.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      d.x.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(idx[i]));
      d.s.push_back(s[idx[i]]);
      d.y.push_back(y[idx[i]]);
    }
    d.provenance = provenance;
    d.seed = seed;
    return d;
  }
};

/// Household-insurance scenario: cost depends on rooms, surface and building
/// age; surface is a quadratic function of the (excluded) policyholder age.
inline Dataset gen_synthetic_scenario(std::size_t n, std::uint64_t seed) {
  if (n < 2) throw InvalidArgument("gen_synthetic_scenario: n must be >= 2");
  Rng age_rng(seed, 1), rooms_rng(seed, 2), noise_rng(seed, 3), bldg_rng(seed, 4);
  Dataset d;
  d.feature_names = {"Rooms", "Surface", "BldgAge"};
  d.x.resize(static_cast<Eigen::Index>(n), 3);
  for (std::size_t i = 0; i < n; ++i) {
    const double age = age_rng.normal(40.0, 5.0);
    const double rooms = std::floor(rooms_rng.uniform(1.0, 5.0));
    const double eps = noise_rng.normal();
    const double surface = -0.25 * (-age + 40.0) * (-age + 40.0) + 120.0 + eps;
    const double bldg = bldg_rng.normal(30.0, 10.0);
    const double y = 0.0005 * std::exp(0.07 * surface + 0.08 * bldg + 0.4 * rooms) + 150.0;
    const auto r = static_cast<Eigen::Index>(i);
    d.x(r, 0) = rooms;
    d.x(r, 1) = surface;
    d.x(r, 2) = bldg;
    d.s.push_back(age);
    d.y.push_back(y);
  }
  d.provenance.kind = Provenance::Kind::synthetic_scenario;
  d.seed = seed;
  return d;
}

/// Standard bivariate normal pairs with correlation rho.
inline estimators::SamplePairs gen_bivariate_gaussian(std::size_t n, double rho,
                                                      std::uint64_t seed) {
  if (!(std::abs(rho) < 1.0)) throw InvalidArgument("gen_bivariate_gaussian: |rho| must be < 1");
  if (n < 2) throw InvalidArgument("gen_bivariate_gaussian: n must be >= 2");
  Rng a(seed, 11), b(seed, 12);
  const double c = std::sqrt(1.0 - rho * rho);
  estimators::SamplePairs p;
  p.u.reserve(n);
  p.v.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double z1 = a.normal();
    const double z2 = b.normal();
    p.u.push_back(z1);
    p.v.push_back(rho * z1 + c * z2);
  }
  return p;
}

inline double pattern_function(PatternKind kind, double u) {
  switch (kind) {
    case PatternKind::sine: return std::sin(u);
    case PatternKind::square: return u * u;
    case PatternKind::gaussian_pdf: return std::exp(-0.5 * u * u);
    case PatternKind::sin_pow: return std::sin(std::pow(0.2, u));
  }
  return 0.0;
}

/// u ~ U(-10, 10), v = F(u) + N(0, sigma^2).
inline estimators::SamplePairs gen_pattern(PatternKind kind, std::size_t n, double sigma,
                                           std::uint64_t seed) {
  if (n < 2) throw InvalidArgument("gen_pattern: n must be >= 2");
  if (!(sigma >= 0.0)) throw InvalidArgument("gen_pattern: sigma must be >= 0");
  Rng a(seed, 21), b(seed, 22);
  estimators::SamplePairs p;
  for (std::size_t i = 0; i < n; ++i) {
    const double u = a.uniform(-10.0, 10.0);
    const double noise = b.normal();
    p.u.push_back(u);
    p.v.push_back(pattern_function(kind, u) + sigma * noise);
  }
  return p;
}

namespace detail {

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline std::size_t find_column(const std::vector<std::string>& header, const std::string& name) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw InvalidArgument("load_csv: missing column '" + name + "'");
}

}  // namespace detail

/// Reads a headered, comma-separated numeric table. Rows are numbered from 1
/// after the header in error messages.
inline Dataset load_csv(const std::string& path, const std::vector<std::string>& feature_cols,
                        const std::string& sensitive_col, const std::string& target_col) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("load_csv: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || detail::trim(line).empty()) {
    throw InvalidArgument("load_csv: '" + path + "' is empty");
  }
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  std::vector<std::string> header = detail::split_line(line);
  for (auto& h : header) h = detail::trim(h);

  if (feature_cols.empty()) throw InvalidArgument("load_csv: no feature columns given");
  std::vector<std::size_t> fidx;
  for (const auto& c : feature_cols) fidx.push_back(detail::find_column(header, c));
  const std::size_t sidx = detail::find_column(header, sensitive_col);
  const std::size_t tidx = detail::find_column(header, target_col);

  std::vector<std::vector<double>> feats;
  Dataset d;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    ++row;
    const std::vector<std::string> cells = detail::split_line(line);
    if (cells.size() != header.size()) {
      throw InvalidArgument("load_csv: row " + std::to_string(row) + " has " +
                            std::to_string(cells.size()) + " cells, header has " +
                            std::to_string(header.size()));
    }
    auto parse = [&](std::size_t col) {
      const std::string cell = detail::trim(cells[col]);
      double value = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
      if (ec != std::errc() || ptr != cell.data() + cell.size() || cell.empty() ||
          !std::isfinite(value)) {
        throw InvalidArgument("load_csv: cannot parse '" + cell + "' at row " +
                              std::to_string(row) + ", column '" + header[col] + "'");
      }
      return value;
    };
    std::vector<double> f;
    for (std::size_t c : fidx) f.push_back(parse(c));
    feats.push_back(std::move(f));
    d.s.push_back(parse(sidx));
    d.y.push_back(parse(tidx));
  }
  if (row == 0) throw InvalidArgument("load_csv: '" + path + "' has no data rows");
  d.feature_names = feature_cols;
  d.x.resize(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(fidx.size()));
  for (std::size_t i = 0; i < row; ++i) {
    for (std::size_t j = 0; j < fidx.size(); ++j) {
      d.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = feats[i][j];
    }
  }
  d.provenance.kind = Provenance::Kind::csv;
  d.provenance.path = path;
  return d;
}

/// Seed-shuffled partition into ceil(f n) training rows and the rest.
inline std::pair<Dataset, Dataset> split(const Dataset& d, double train_fraction,
                                         std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw InvalidArgument("split: train fraction must lie in (0, 1)");
  }
  const std::size_t n = d.rows();
  Rng rng(seed, 0x5B1);
  const std::vector<std::size_t> perm = rng.permutation(n);
  // The 1e-9 guard keeps e.g. 0.7 * 10 from rounding up to 8.
  const auto n_train =
      static_cast<std::size_t>(std::ceil(train_fraction * static_cast<double>(n) - 1e-9));
  std::vector<std::size_t> train(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
  return {d.subset(train), d.subset(test)};
}

}  // namespace fairhgr::data
