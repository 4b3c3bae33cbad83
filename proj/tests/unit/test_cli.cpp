#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const fs::path kDir = fs::temp_directory_path() / "locpriv_cli_test";

std::string read(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Runs the CLI; returns the exit code, stdout and stderr land in files.
int run(const std::string& args) {
  const std::string cmd = std::string(LOCPRIV_CLI) + " " + args + " >" + (kDir / "stdout").string() + " 2>" +
                          (kDir / "stderr").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    fs::remove_all(kDir);
    fs::create_directories(kDir);
    std::ofstream(kDir / "sim.ini") << "[scenario]\nusers = 3\ntrials = 40\nseed = 9\n";
  }
};

}  // namespace

TEST_F(Cli, SimulateIsThreadInvariant) {
  const std::string cfg = "--config " + (kDir / "sim.ini").string();
  ASSERT_EQ(run("simulate " + cfg + " --threads 1 --out " + (kDir / "a").string()), 0) << read(kDir / "stderr");
  ASSERT_EQ(run("simulate " + cfg + " --threads 3 --out " + (kDir / "b").string()), 0) << read(kDir / "stderr");
  const std::string a = read(kDir / "a" / "results.csv");
  EXPECT_EQ(a, read(kDir / "b" / "results.csv"));
  EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 5);
  EXPECT_NE(a.find(",40,9\n"), std::string::npos);
}

TEST_F(Cli, FlagsOverrideConfig) {
  ASSERT_EQ(run("simulate --config " + (kDir / "sim.ini").string() + " --seed 3 --trials 7 --out " + kDir.string()), 0);
  const auto j = nlohmann::json::parse(read(kDir / "stdout"));
  EXPECT_EQ(j["results"][0]["trials"], 7);
  EXPECT_EQ(j["results"][0]["seed"], 3);
}

TEST_F(Cli, ErrorsAreMachineReadable) {
  std::ofstream(kDir / "bad.ini") << "[scenario]\nusers = 2\ncolour = red\n";
  EXPECT_NE(run("simulate --config " + (kDir / "bad.ini").string()), 0);
  const auto j = nlohmann::json::parse(read(kDir / "stderr"));
  EXPECT_EQ(j["error"]["kind"], "config");
  EXPECT_NE(j["error"]["message"].get<std::string>().find("line 3"), std::string::npos);

  EXPECT_NE(run("solve-lp --seed notanumber"), 0);
  EXPECT_EQ(nlohmann::json::parse(read(kDir / "stderr"))["error"]["kind"], "usage");
  EXPECT_NE(run("simulate --config " + (kDir / "missing.ini").string()), 0);
  EXPECT_EQ(nlohmann::json::parse(read(kDir / "stderr"))["error"]["kind"], "io");
}

TEST_F(Cli, SolveLpAndApprox) {
  ASSERT_EQ(run("solve-lp --q 0.1 --dump --out " + kDir.string()), 0) << read(kDir / "stderr");
  EXPECT_NEAR(nlohmann::json::parse(read(kDir / "stdout"))["value"].get<double>(), 0.09, 1e-9);
  EXPECT_NE(read(kDir / "lp.lp").find("Subject To"), std::string::npos);
  ASSERT_EQ(run("approx-1d --q 0.05 --cache 0.3 --epsilon 0.001 --out " + kDir.string()), 0) << read(kDir / "stderr");
  const auto j = nlohmann::json::parse(read(kDir / "stdout"));
  EXPECT_GT(j["pi"].get<double>(), j["hiding_pi"].get<double>());
}

TEST_F(Cli, SequenceWritesTableAndWinner) {
  std::ofstream(kDir / "seq.ini") << "[scenario]\nusers = 2\ntrials = 20\nestimator = conditional\n"
                                     "[flexibility]\nvalues = 0.05, 0.08\n";
  ASSERT_EQ(run("sequence --config " + (kDir / "seq.ini").string() + " --out " + kDir.string()), 0)
      << read(kDir / "stderr");
  const std::string csv = read(kDir / "sequence.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "perm,total_pi,ci_half");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  const auto j = nlohmann::json::parse(read(kDir / "sequence.json"));
  EXPECT_TRUE(j.contains("best"));
}

TEST_F(Cli, TimeslotStudy) {
  std::ofstream(kDir / "map.txt") << "4\n1 1 1 1\n1 2 2 1\n1 2 2 1\n1 1 1 1\n";
  std::ofstream(kDir / "slots.txt") << "morning 2\nnoon 3\n";
  std::ofstream(kDir / "ts.ini") << "[scenario]\ndimension = 2\ntrials = 5\nepsilon = 0.05\n[prior]\ndensity = map.txt\n"
                                    "[timeslot]\nseries = slots.txt\ndefenses = approx, hide-approx\n";
  ASSERT_EQ(run("timeslot --config " + (kDir / "ts.ini").string() + " --out " + kDir.string()), 0)
      << read(kDir / "stderr");
  const std::string csv = read(kDir / "timeslot.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  EXPECT_NE(csv.find("\nnoon,3,hide-approx,"), std::string::npos);
}
