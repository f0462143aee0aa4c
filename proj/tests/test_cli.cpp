#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "cli.hpp"

namespace fs = std::filesystem;
using cycletime::io::json;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    std::random_device rd;
    dir_ = fs::temp_directory_path() / ("cycletime_cli_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  int run(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    args.insert(args.begin(), {"--out-dir", dir_.string()});
    return cycletime::cli::run(args, out_, err_);
  }

  std::string read(const std::string& name) const {
    std::ifstream in(dir_ / name, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
  }

  std::size_t lines(const std::string& name) const {
    const auto s = read(name);
    return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

}  // namespace

TEST_F(Cli, GenDataWritesRequestedRows) {
  ASSERT_EQ(run({"gen-data", "--n", "600", "--seed", "7", "--noise", "0.1", "-o", "data.csv"}), 0);
  EXPECT_EQ(lines("data.csv"), 601u);
  EXPECT_NE(out_.str().find("seed 7"), std::string::npos);
}

TEST_F(Cli, GenDataIsDeterministic) {
  ASSERT_EQ(run({"gen-data", "--seed", "7", "-o", "a.csv"}), 0);
  ASSERT_EQ(run({"gen-data", "--seed", "7", "-o", "b.csv"}), 0);
  EXPECT_EQ(read("a.csv"), read("b.csv"));
}

TEST_F(Cli, GenDataRejectsTinyN) { EXPECT_EQ(run({"gen-data", "--n", "5"}), 2); }

TEST_F(Cli, UnknownFlagOrMissingSubcommandIsUsage) {
  EXPECT_EQ(run({"gen-data", "--bogus"}), 2);
  EXPECT_EQ(run({}), 2);
}

TEST_F(Cli, HelpExitsZero) { EXPECT_EQ(run({"--help"}), 0); }

TEST_F(Cli, TrainAnnWritesFourFiles) {
  ASSERT_EQ(run({"gen-data", "--n", "120", "-o", "data.csv"}), 0);
  ASSERT_EQ(run({"train-ann", "--algo", "br", "--hidden", "8,8", "--epochs", "20", "--data", (dir_ / "data.csv").string()}), 0);
  for (const auto* f : {"trainbr.model.json", "trainbr.report.json", "trainbr.loss.csv", "trainbr.regression.csv"}) {
    EXPECT_TRUE(fs::exists(dir_ / f)) << f;
  }
  const auto report = json::parse(read("trainbr.report.json"));
  EXPECT_EQ(report["algorithm"], "trainbr");
  EXPECT_EQ(report["seed"], 42);
  EXPECT_EQ(lines("trainbr.regression.csv"), 121u);
}

TEST_F(Cli, TrainAnnRecordsWidths) {
  ASSERT_EQ(run({"train-ann", "--algo", "lm", "--hidden", "10,10", "--n", "100", "--epochs", "5"}), 0);
  const auto report = json::parse(read("trainlm.report.json"));
  EXPECT_EQ(report["topology"], "3-10-10-1");
  const auto model = json::parse(read("trainlm.model.json"));
  EXPECT_EQ(model["topology"]["hidden_widths"], json({10, 10}));
}

TEST_F(Cli, TrainAnnRejectsUnknownAlgorithm) {
  EXPECT_EQ(run({"train-ann", "--algo", "nadam"}), 2);
  for (const auto* name : {"br", "lm", "gd", "gdm", "scg", "oss"}) EXPECT_NE(err_.str().find(name), std::string::npos);
}

TEST_F(Cli, DivergedRunStillExitsZero) {
  ASSERT_EQ(run({"train-ann", "--algo", "gd", "--lr", "1e6", "--max-fail", "1000", "--n", "100", "--format", "json"}), 0);
  const auto report = json::parse(out_.str());
  EXPECT_EQ(report["diverged"], true);
  EXPECT_EQ(report["stop_reason"], "diverged");
}

TEST_F(Cli, TrainAnfisRuleCounts) {
  ASSERT_EQ(run({"train-anfis", "--mfs", "2", "--order", "linear", "--n", "120", "--epochs", "3"}), 0);
  EXPECT_EQ(json::parse(read("anfis_2mf_linear.report.json"))["rule_count"], 8);
  ASSERT_EQ(run({"train-anfis", "--mfs", "4", "--order", "constant", "--n", "120", "--epochs", "3"}), 0);
  EXPECT_EQ(json::parse(read("anfis_4mf_constant.report.json"))["rule_count"], 64);
  EXPECT_TRUE(fs::exists(dir_ / "anfis_4mf_constant.trace.csv"));
  EXPECT_EQ(run({"train-anfis", "--order", "quadratic"}), 2);
}

TEST_F(Cli, CompareAnnSixtyRows) {
  ASSERT_EQ(run({"compare", "--suite", "ann", "--seeds", "1..10", "--n", "60", "--epochs", "3"}), 0);
  EXPECT_EQ(lines("ann_table.csv"), 61u);
  EXPECT_EQ(json::parse(read("compare.json"))["ann"].size(), 60u);
  EXPECT_FALSE(fs::exists(dir_ / "anfis_table.csv"));
}

TEST_F(Cli, CompareAnfisFourRows) {
  ASSERT_EQ(run({"compare", "--suite", "anfis", "--n", "120", "--anfis-epochs", "2"}), 0);
  EXPECT_EQ(lines("anfis_table.csv"), 5u);
  const auto table = read("anfis_table.csv");
  for (const auto* cell : {"\n2,constant,", "\n2,linear,", "\n4,constant,", "\n4,linear,"}) {
    EXPECT_NE(table.find(cell), std::string::npos) << cell;
  }
}

TEST_F(Cli, CompareIsByteIdentical) {
  const std::vector<std::string> args{"compare", "--suite", "all", "--seed", "42", "--n", "80", "--epochs", "10", "--anfis-epochs", "3"};
  ASSERT_EQ(run(args), 0);
  std::map<std::string, std::string> first;
  for (const auto& e : fs::directory_iterator(dir_)) first[e.path().filename().string()] = read(e.path().filename().string());
  ASSERT_EQ(run(args), 0);
  for (const auto& [name, text] : first) EXPECT_EQ(read(name), text) << name;
}

TEST_F(Cli, PredictSingleAndBatch) {
  ASSERT_EQ(run({"gen-data", "--n", "100", "-o", "data.csv"}), 0);
  ASSERT_EQ(run({"train-ann", "--algo", "lm", "--data", (dir_ / "data.csv").string(), "--epochs", "30"}), 0);
  const auto model = (dir_ / "trainlm.model.json").string();
  ASSERT_EQ(run({"predict", "--model", model, "--input", "50,1000,600"}), 0);
  const double y = std::stod(out_.str());
  EXPECT_TRUE(std::isfinite(y));
  EXPECT_GT(y, 0.0);

  ASSERT_EQ(run({"predict", "--model", model, "--batch", (dir_ / "data.csv").string(), "-o", "pred.csv"}), 0);
  EXPECT_EQ(lines("pred.csv"), 101u);
  EXPECT_EQ(read("pred.csv").substr(0, read("pred.csv").find('\n')),
            "mould_temp,injection_pressure,switchover_pressure,cycle_time,predicted_cycle_time");
}

TEST_F(Cli, PredictWrongKindIsSchemaExit) {
  ASSERT_EQ(run({"train-anfis", "--n", "60", "--epochs", "2"}), 0);
  const auto model = (dir_ / "anfis_2mf_linear.model.json").string();
  EXPECT_EQ(run({"predict", "--model", model, "--kind", "ann", "--input", "50,1000,600"}), 4);
  EXPECT_EQ(run({"predict", "--model", model, "--kind", "anfis", "--input", "50,1000,600"}), 0);
}

TEST_F(Cli, IoAndDataErrors) {
  EXPECT_EQ(run({"predict", "--model", (dir_ / "missing.json").string(), "--input", "1,2,3"}), 3);
  std::ofstream(dir_ / "bad.csv") << "mould_temp,injection_pressure,switchover_pressure,cycle_time\n1,2,x,4\n";
  EXPECT_EQ(run({"train-ann", "--data", (dir_ / "bad.csv").string()}), 4);
  std::ofstream(dir_ / "notjson.json") << "{";
  EXPECT_EQ(run({"predict", "--model", (dir_ / "notjson.json").string(), "--input", "1,2,3"}), 4);
  EXPECT_EQ(run({"predict", "--model", (dir_ / "notjson.json").string()}), 2);
}

TEST_F(Cli, NeverWritesOutsideOutDir) {
  const auto parent = dir_.parent_path();
  const auto escaped = parent / "escaped.csv";
  fs::remove(escaped);
  EXPECT_EQ(run({"gen-data", "-o", "../escaped.csv"}), 2);
  EXPECT_EQ(run({"gen-data", "-o", escaped.string()}), 2);
  EXPECT_FALSE(fs::exists(escaped));
}
