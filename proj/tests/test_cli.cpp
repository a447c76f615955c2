#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include "fairhgr/cli/commands.hpp"

namespace fs = std::filesystem;
namespace cli = fairhgr::cli;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("fairhgr_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    ::unsetenv(cli::kConfigEnv);
  }
  void TearDown() override {
    ::unsetenv(cli::kConfigEnv);
    fs::remove_all(dir_);
  }

  std::string write_config(const std::string& name, const std::string& body) const {
    const fs::path p = dir_ / name;
    std::ofstream(p) << body;
    return p.string();
  }

  int run(std::vector<std::string> args) {
    args.insert(args.begin(), "fairhgr");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    out_.str("");
    err_.str("");
    return cli::run(static_cast<int>(argv.size()), argv.data(), out_, err_);
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

const char* kSmallEstimate =
    "[estimate]\n"
    "source = gaussian\n"
    "n = 400\n"
    "rho = 0.6\n"
    "estimators = pearson, hgr_nn, hgr_kde, chi2_kde\n"
    "[hgr_nn]\n"
    "iterations = 60\n"
    "batch_size = 128\n";

}  // namespace

TEST_F(CliTest, UnknownKeyExitsOneAndNamesIt) {
  const std::string cfg = write_config("bad.ini", "[estimate]\nn = 10\nbogus_key = 3\n");
  EXPECT_EQ(run({"--config", cfg, "--out", (dir_ / "o").string(), "estimate"}), 1);
  EXPECT_NE(err_.str().find("estimate.bogus_key"), std::string::npos) << err_.str();
  EXPECT_FALSE(fs::exists(dir_ / "o" / "estimate.json"));
}

TEST_F(CliTest, UnknownSectionAndBadValueExitOne) {
  EXPECT_EQ(run({"--config", write_config("a.ini", "[nonsense]\nx = 1\n"), "estimate"}), 1);
  EXPECT_NE(err_.str().find("nonsense"), std::string::npos) << err_.str();
  EXPECT_EQ(run({"--config", write_config("b.ini", "[estimate]\nn = many\n"), "estimate"}), 1);
  EXPECT_NE(err_.str().find("estimate.n"), std::string::npos) << err_.str();
  EXPECT_EQ(run({"--config", write_config("c.ini", "[estimate]\nestimators = hsic\n"), "estimate"}), 1);
  EXPECT_EQ(run({"--config", (dir_ / "missing.ini").string(), "estimate"}), 1);
}

TEST_F(CliTest, UsageErrorsExitOne) {
  EXPECT_EQ(run({}), 1);
  EXPECT_EQ(run({"frobnicate"}), 1);
  EXPECT_EQ(run({"--seed", "x", "estimate"}), 1);
}

TEST_F(CliTest, EstimateWritesReproducibleJson) {
  const std::string cfg = write_config("e.ini", kSmallEstimate);
  const fs::path out = dir_ / "run";
  ASSERT_EQ(run({"--config", cfg, "--seed", "3", "--out", out.string(), "estimate"}), 0) << err_.str();
  const std::string first = slurp(out / "estimate.json");
  const nlohmann::json j = nlohmann::json::parse(first);
  EXPECT_EQ(j["input"]["n"], 400);
  for (const char* k : {"pearson", "hgr_nn", "hgr_kde", "chi2_kde"}) {
    ASSERT_TRUE(j["estimates"].contains(k)) << k;
  }
  EXPECT_NEAR(j["estimates"]["pearson"]["value"].get<double>(), 0.6, 0.1);
  EXPECT_TRUE(fs::exists(out / "estimate.csv"));

  // No silent overwrite; the existing file is untouched.
  EXPECT_EQ(run({"--config", cfg, "--seed", "3", "--out", out.string(), "estimate"}), 1);
  EXPECT_NE(err_.str().find("--overwrite"), std::string::npos) << err_.str();
  EXPECT_EQ(slurp(out / "estimate.json"), first);

  ASSERT_EQ(run({"--config", cfg, "--seed", "3", "--out", out.string(), "--overwrite", "estimate"}), 0);
  EXPECT_EQ(slurp(out / "estimate.json"), first);
}

TEST_F(CliTest, EnvironmentSuppliesConfigPathAndFlagWins) {
  const std::string bad = write_config("bad.ini", "[estimate]\nwhat = 1\n");
  const std::string good = write_config("good.ini", kSmallEstimate);
  ::setenv(cli::kConfigEnv, bad.c_str(), 1);
  EXPECT_EQ(run({"--out", (dir_ / "a").string(), "estimate"}), 1);
  EXPECT_NE(err_.str().find("estimate.what"), std::string::npos) << err_.str();
  EXPECT_EQ(run({"--config", good, "--out", (dir_ / "b").string(), "estimate"}), 0) << err_.str();
  ::setenv(cli::kConfigEnv, good.c_str(), 1);
  EXPECT_EQ(run({"--out", (dir_ / "c").string(), "estimate"}), 0) << err_.str();
  EXPECT_EQ(slurp(dir_ / "b" / "estimate.json"), slurp(dir_ / "c" / "estimate.json"));
}

TEST_F(CliTest, RuntimeFailureExitsTwo) {
  const std::string cfg = write_config(
      "t.ini", "[train]\ncsv_path = " + (dir_ / "absent.csv").string() +
                   "\nfeatures = a, b\nsensitive = s\ntarget = y\n");
  EXPECT_EQ(run({"--config", cfg, "--out", (dir_ / "o").string(), "train"}), 2);
  EXPECT_NE(err_.str().find("absent.csv"), std::string::npos) << err_.str();
}

TEST_F(CliTest, TrainRequiresColumns) {
  const std::string cfg = write_config("t.ini", "[train]\nfeatures = a\n");
  EXPECT_EQ(run({"--config", cfg, "train"}), 1);
  EXPECT_NE(err_.str().find("train.csv_path"), std::string::npos) << err_.str();
}

TEST_F(CliTest, GaussianSweepIndependentRowIsNearZero) {
  const std::string cfg = write_config("g.ini",
                                       "[gaussian-sweep]\nn = 2000\nrhos = 0, 0.6\n"
                                       "[hgr_nn]\niterations = 400\n"
                                       "[chi2_nn]\niterations = 400\n"
                                       "[mine]\niterations = 400\n");
  const fs::path out = dir_ / "sweep";
  ASSERT_EQ(run({"--config", cfg, "--out", out.string(), "gaussian-sweep"}), 0) << err_.str();
  const nlohmann::json j = nlohmann::json::parse(slurp(out / "gaussian_sweep.json"));
  EXPECT_NEAR(j["t"].get<double>(), 0.345, 1e-3);
  ASSERT_EQ(j["rows"].size(), 2u);
  const nlohmann::json& zero = j["rows"][0];
  EXPECT_EQ(zero["rho"], 0.0);
  for (const char* k : {"hgr_sq_est", "chi2_est", "mi_bound_est"}) {
    EXPECT_LE(zero[k].get<double>(), 0.05) << k;
  }
  EXPECT_TRUE(fs::exists(out / "gaussian_sweep.csv"));
}

TEST_F(CliTest, SyntheticTinyRunWritesAllOutputs) {
  const std::string cfg = write_config("s.ini",
                                       "[synthetic]\nn = 600\nrepetitions = 1\n"
                                       "modes = dp\nvariants = none, hgr_nn\n"
                                       "[fairtrain]\nepochs = 2\nbatch_size = 64\n"
                                       "[hgr_nn]\niterations = 30\n"
                                       "[chi2_nn]\niterations = 30\n");
  const fs::path out = dir_ / "syn";
  ASSERT_EQ(run({"--config", cfg, "--seed", "1", "--out", out.string(), "synthetic"}), 0) << err_.str();
  const nlohmann::json j = nlohmann::json::parse(slurp(out / "synthetic.json"));
  ASSERT_EQ(j["reports"].size(), 2u);
  EXPECT_EQ(j["reports"][1]["penalty"], "hgr_nn");
  EXPECT_TRUE(j["reports"][0].contains("fairquant"));
  const std::string csv = slurp(out / "synthetic.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "repetition," + fairhgr::metrics::eval_csv_header());
  const std::string bins = slurp(out / "synthetic_age_bins.csv");
  EXPECT_EQ(bins.rfind("repetition,mode,penalty,age_low,age_high", 0), 0u) << bins.substr(0, 80);

  const fs::path again = dir_ / "syn2";
  ASSERT_EQ(run({"--config", cfg, "--seed", "1", "--out", again.string(), "synthetic"}), 0);
  EXPECT_EQ(slurp(out / "synthetic.json"), slurp(again / "synthetic.json"));
}

TEST(RunConfig, ParsesTypedValues) {
  std::istringstream in("[kde]\ngrid_size = 32\n[gaussian-sweep]\nrhos = 0.1, -0.2 ,0.3\n");
  const cli::RunConfig c = cli::RunConfig::parse(in);
  EXPECT_EQ(c.get_size("kde", "grid_size", 64), 32u);
  EXPECT_EQ(c.get_size("kde", "grid_padding", 7), 7u);
  EXPECT_EQ(c.get_doubles("gaussian-sweep", "rhos", {}), (std::vector<double>{0.1, -0.2, 0.3}));
  std::istringstream top("n = 3\n");
  EXPECT_THROW(cli::RunConfig::parse(top), cli::ConfigError);
}
