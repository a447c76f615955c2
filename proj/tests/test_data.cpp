#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <boost/math/distributions/normal.hpp>
#include <gtest/gtest.h>

#include "fairhgr/data/dataset.hpp"
#include "fairhgr/estimators/pearson.hpp"
#include "fairhgr/stats.hpp"

namespace data = fairhgr::data;
namespace est = fairhgr::estimators;
namespace stats = fairhgr::stats;

namespace {

std::vector<double> column(const data::Dataset& d, Eigen::Index j) {
  std::vector<double> out(d.rows());
  for (std::size_t i = 0; i < d.rows(); ++i) out[i] = d.x(static_cast<Eigen::Index>(i), j);
  return out;
}

double ks_to_standard_normal(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  const boost::math::normal_distribution<double> n01;
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = boost::math::cdf(n01, x[i]);
    d = std::max({d, std::abs(f - static_cast<double>(i) / n), std::abs(static_cast<double>(i + 1) / n - f)});
  }
  return d;
}

class TempCsv {
 public:
  explicit TempCsv(const std::string& contents) {
    path_ = std::filesystem::temp_directory_path() /
            ("fairhgr_" + std::to_string(counter()++) + ".csv");
    std::ofstream(path_) << contents;
  }
  ~TempCsv() { std::filesystem::remove(path_); }
  [[nodiscard]] std::string path() const { return path_.string(); }

 private:
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::filesystem::path path_;
};

}  // namespace

TEST(Synthetic, MarginalsAndStructure) {
  const data::Dataset d = data::gen_synthetic_scenario(100000, 1);
  d.validate();
  EXPECT_EQ(d.feature_names, (std::vector<std::string>{"Rooms", "Surface", "BldgAge"}));
  EXPECT_NEAR(stats::mean(d.s), 40.0, 0.1);
  EXPECT_NEAR(stats::stddev(d.s), 5.0, 0.1);
  const std::vector<double> rooms = column(d, 0), surface = column(d, 1), bldg = column(d, 2);
  EXPECT_NEAR(stats::mean(bldg), 30.0, 0.2);
  const std::set<double> room_values(rooms.begin(), rooms.end());
  EXPECT_EQ(room_values, (std::set<double>{1, 2, 3, 4}));
  EXPECT_LT(std::abs(est::pearson({d.s, surface})), 0.02);
}

TEST(Synthetic, SurfaceBoundAndTargetFormula) {
  const data::Dataset d = data::gen_synthetic_scenario(5000, 2);
  for (std::size_t i = 0; i < d.rows(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const double age = d.s[i];
    const double eps = d.x(r, 1) - (-0.25 * (age - 40.0) * (age - 40.0) + 120.0);
    EXPECT_LE(d.x(r, 1), 120.0 + eps + 1e-9);
    const double y = 0.0005 * std::exp(0.07 * d.x(r, 1) + 0.08 * d.x(r, 2) + 0.4 * d.x(r, 0)) + 150.0;
    EXPECT_NEAR(d.y[i], y, 1e-9 * y);
  }
}

TEST(Synthetic, DeterministicPerSeed) {
  const data::Dataset a = data::gen_synthetic_scenario(300, 5);
  const data::Dataset b = data::gen_synthetic_scenario(300, 5);
  EXPECT_TRUE(a.x == b.x);
  EXPECT_EQ(a.s, b.s);
  EXPECT_EQ(a.y, b.y);
  EXPECT_THROW(data::gen_synthetic_scenario(1, 0), fairhgr::InvalidArgument);
}

TEST(BivariateGaussian, CorrelationAndMarginals) {
  for (double rho : {0.0, 0.5}) {
    const est::SamplePairs p = data::gen_bivariate_gaussian(100000, rho, 7);
    EXPECT_NEAR(est::pearson(p), rho, 0.01);
    EXPECT_NEAR(stats::variance(p.u), 1.0, 0.02);
    EXPECT_NEAR(stats::variance(p.v), 1.0, 0.02);
    EXPECT_LT(ks_to_standard_normal(p.u), 0.02);
    EXPECT_LT(ks_to_standard_normal(p.v), 0.02);
  }
  EXPECT_THROW(data::gen_bivariate_gaussian(10, 1.0, 0), fairhgr::InvalidArgument);
}

TEST(Patterns, SquareIsUncorrelated) {
  EXPECT_LT(std::abs(est::pearson(data::gen_pattern(data::PatternKind::square, 10000, 0.0, 8))), 0.05);
}

TEST(Patterns, SineRangeAndDefinitions) {
  const est::SamplePairs p = data::gen_pattern(data::PatternKind::sine, 2000, 0.0, 9);
  for (std::size_t i = 0; i < p.size(); ++i) {
    EXPECT_GE(p.u[i], -10.0);
    EXPECT_LE(p.u[i], 10.0);
    EXPECT_EQ(p.v[i], std::sin(p.u[i]));
  }
  EXPECT_EQ(data::pattern_function(data::PatternKind::square, 3.0), 9.0);
  EXPECT_EQ(data::pattern_function(data::PatternKind::gaussian_pdf, 0.0), 1.0);
  EXPECT_EQ(data::pattern_function(data::PatternKind::sin_pow, 1.0), std::sin(0.2));
}

TEST(Patterns, ReproducibleAndNamed) {
  for (auto k : {data::PatternKind::sine, data::PatternKind::square, data::PatternKind::gaussian_pdf,
                 data::PatternKind::sin_pow}) {
    const est::SamplePairs a = data::gen_pattern(k, 100, 0.0, 3);
    const est::SamplePairs b = data::gen_pattern(k, 100, 0.0, 3);
    EXPECT_EQ(a.u, b.u);
    EXPECT_EQ(a.v, b.v);
    EXPECT_EQ(data::parse_pattern(data::to_string(k)), k);
  }
  EXPECT_THROW(data::parse_pattern("cosine"), fairhgr::InvalidArgument);
}

TEST(Patterns, NoiseIsAdded) {
  const est::SamplePairs clean = data::gen_pattern(data::PatternKind::sine, 5000, 0.0, 4);
  const est::SamplePairs noisy = data::gen_pattern(data::PatternKind::sine, 5000, 2.0, 4);
  std::vector<double> diff(clean.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = noisy.v[i] - std::sin(noisy.u[i]);
  EXPECT_NEAR(stats::stddev(diff), 2.0, 0.1);
}

TEST(Csv, WellFormedFile) {
  const TempCsv f("a,b,s,y\n1,2,3,4\n5,6,7,8\n9,10,11,12\n");
  const data::Dataset d = data::load_csv(f.path(), {"a", "b"}, "s", "y");
  EXPECT_EQ(d.rows(), 3u);
  EXPECT_EQ(d.features(), 2u);
  EXPECT_EQ(d.x(2, 1), 10.0);
  EXPECT_EQ(d.s, (std::vector<double>{3, 7, 11}));
  EXPECT_EQ(d.provenance.kind, data::Provenance::Kind::csv);
}

TEST(Csv, MissingColumnIsNamed) {
  const TempCsv f("a,y\n1,2\n");
  try {
    (void)data::load_csv(f.path(), {"a"}, "age", "y");
    FAIL() << "expected an error";
  } catch (const fairhgr::InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("age"), std::string::npos);
  }
}

TEST(Csv, UnparsableCellCitesRow) {
  const TempCsv f("a,s,y\n1,2,3\nabc,5,6\n");
  try {
    (void)data::load_csv(f.path(), {"a"}, "s", "y");
    FAIL() << "expected an error";
  } catch (const fairhgr::InvalidArgument& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("row 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("abc"), std::string::npos) << msg;
  }
}

TEST(Csv, EmptyAndHeaderOnly) {
  const TempCsv empty("");
  EXPECT_THROW(data::load_csv(empty.path(), {"a"}, "s", "y"), fairhgr::InvalidArgument);
  const TempCsv header("a,s,y\n");
  EXPECT_THROW(data::load_csv(header.path(), {"a"}, "s", "y"), fairhgr::InvalidArgument);
  EXPECT_THROW(data::load_csv("/nonexistent/file.csv", {"a"}, "s", "y"), fairhgr::InvalidArgument);
}

TEST(Split, SizesAndPartition) {
  const data::Dataset d = data::gen_synthetic_scenario(100, 3);
  const auto [train, test] = data::split(d, 0.8, 11);
  EXPECT_EQ(train.rows(), 80u);
  EXPECT_EQ(test.rows(), 20u);
  std::multiset<double> all(d.y.begin(), d.y.end()), parts(train.y.begin(), train.y.end());
  parts.insert(test.y.begin(), test.y.end());
  EXPECT_EQ(all, parts);
  const auto [train2, test2] = data::split(d, 0.8, 11);
  EXPECT_EQ(train.y, train2.y);
  EXPECT_THROW(data::split(d, 1.0, 0), fairhgr::InvalidArgument);
  EXPECT_THROW(data::split(d, 0.0, 0), fairhgr::InvalidArgument);
}

TEST(Split, CeilingOnTrainSize) {
  const data::Dataset d = data::gen_synthetic_scenario(7, 3);
  const auto [train, test] = data::split(d, 0.5, 1);
  EXPECT_EQ(train.rows(), 4u);
  EXPECT_EQ(test.rows(), 3u);
}
