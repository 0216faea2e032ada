#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <sys/wait.h>

#include "rfcl/experiment.hpp"

namespace fs = std::filesystem;
using namespace rfcl;

namespace {

ExperimentConfig tiny(const std::string& strategy = "cwr_star") {
  ExperimentConfig c;
  c.strategy = strategy;
  c.protocol = "nc-5";
  c.num_runs = 3;
  c.test_period = 1;
  c.data.num_classes = 10;
  c.data.train_sessions = 2;
  c.data.test_sessions = 1;
  c.data.patterns_per_session = 16;
  c.mini_batch_size = 16;
  c.eta_b1 = 0.05;
  c.eta_bi = 0.01;
  c.eta_cwr = 0.05;
  c.warmup_iters = 2;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("rfcl_harness_" + name);
  fs::remove_all(dir);
  return dir;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(RFCL_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, ParsesKeysCommentsAndBlankLines) {
  std::istringstream in(
      "# experiment\n"
      "strategy = ar1_star\n"
      "\n"
      "protocol=nicv2-196   # trailing comment\n"
      "eta_bi = 0.0002\n"
      "norm = bn\n"
      "freeze = pointwise\n"
      "num_runs = 4\n"
      "r_max = 1.5\n"
      "data_classes = 20\n");
  const ExperimentConfig c = ExperimentConfig::parse(in);
  EXPECT_EQ(c.strategy, "ar1_star");
  EXPECT_EQ(c.protocol, "nicv2-196");
  EXPECT_EQ(*c.eta_bi, 0.0002);
  EXPECT_EQ(c.norm, NormKind::BatchNorm);
  EXPECT_EQ(c.freeze, FreezeMode::Pointwise);
  EXPECT_EQ(c.num_runs, 4);
  EXPECT_EQ(c.data.num_classes, 20);
  const StrategyConfig s = c.strategy_config();
  EXPECT_EQ(s.eta_bi, 0.0002);
  EXPECT_EQ(s.eta_cwr, StrategyConfig::defaults(StrategyKind::Ar1Star).eta_cwr);
  EXPECT_EQ(s.schedule.r_max, 1.5);
  EXPECT_EQ(s.schedule.d_max, 0.5);  // nicv2-196 target
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  const char* bad[] = {"etab1 = 0.1\n", "eta_b1 = fast\n", "num_runs = 2.5\n", "norm = ln\n",
                       "just a line\n", "mini_batch_size = 0\n"};
  for (const char* text : bad) {
    std::istringstream in(text);
    EXPECT_THROW(ExperimentConfig::parse(in), ConfigError) << text;
  }
  ExperimentConfig c;
  c.strategy = "sgd";
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.protocol = "nicv9";
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, TextRoundTrip) {
  ExperimentConfig c = tiny();
  c.lambda = 3.5;
  c.max_start = 7;
  std::istringstream in(c.to_text());
  const ExperimentConfig d = ExperimentConfig::parse(in);
  EXPECT_EQ(d.to_text(), c.to_text());
  EXPECT_EQ(*d.lambda, 3.5);
  EXPECT_FALSE(d.w_past.has_value());
}

TEST(Config, ScheduleFollowsProtocolTargets) {
  ExperimentConfig c;
  c.protocol = "nicv2-391";
  EXPECT_EQ(c.strategy_config().schedule.r_max, 1.5);
  EXPECT_EQ(c.strategy_config().schedule.d_max, 2.5);
  c.protocol = "nicv2-79";
  EXPECT_EQ(c.strategy_config().schedule.r_max, 1.25);
}

TEST(Csv, HeaderRowsAndThreeDecimals) {
  ExperimentResult r;
  r.runs = {{{10.0, 55.5555, 100.0}, {0, 1, 2}, {}}, {{0.0, 1.0 / 3.0, 99.9996}, {0, 1, 2}, {}}};
  EXPECT_EQ(accuracy_csv(r),
            "Batch,Run 0,Run 1\n"
            "0,10.000,0.000\n"
            "1,55.556,0.333\n"
            "2,100.000,100.000\n");
}

TEST(Csv, ParseRoundTripAndPopulationStd) {
  std::istringstream in("Batch,Run 0,Run 1\n0,10.000,20.000\n1,50.000,50.000\n");
  const AccuracyTable t = parse_accuracy_csv(in);
  ASSERT_EQ(t.batches, (std::vector<int>{0, 1}));
  const Aggregate a = aggregate(t);
  EXPECT_DOUBLE_EQ(a.mean[0], 15.0);
  EXPECT_DOUBLE_EQ(a.stddev[0], 5.0);  // population, not sample (7.07)
  EXPECT_DOUBLE_EQ(a.stddev[1], 0.0);
  std::istringstream bad("Batch,Run 0\n0,1.0,2.0\n");
  EXPECT_THROW(parse_accuracy_csv(bad), ConfigError);
  std::istringstream headless("0,1.0\n");
  EXPECT_THROW(parse_accuracy_csv(headless), ConfigError);
}

TEST(Experiment, BatchZeroIsUntrainedAndRowsCoverEveryBatch) {
  const ExperimentResult r = run_experiment(tiny());
  ASSERT_EQ(r.runs.size(), 3u);
  EXPECT_EQ(r.num_batches(), 6u);
  for (const auto& run : r.runs) {
    // CWR* starts from an all-zero consolidated head: every prediction is class 0.
    EXPECT_DOUBLE_EQ(run.accuracy[0], 10.0);
    EXPECT_EQ(run.seconds[0], 0.0);
    for (real a : run.accuracy) {
      EXPECT_GE(a, 0.0);
      EXPECT_LE(a, 100.0);
    }
  }
}

TEST(Experiment, DeterministicAndSeedSensitive) {
  const ExperimentConfig c = tiny("ar1_star");
  EXPECT_EQ(accuracy_csv(run_experiment(c)), accuracy_csv(run_experiment(c)));
  ExperimentConfig d = c;
  d.seed = 9;
  EXPECT_NE(accuracy_csv(run_experiment(c)), accuracy_csv(run_experiment(d)));
}

TEST(Experiment, RunsDifferAcrossRuns) {
  const ExperimentResult r = run_experiment(tiny("naive"));
  EXPECT_NE(r.runs[0].accuracy, r.runs[1].accuracy);
}

TEST(Outputs, WritesFilesAndReport) {
  const auto dir = scratch("outputs");
  ExperimentConfig a = tiny("cwr_star"), b = tiny("naive");
  write_outputs(a, run_experiment(a), dir / "cwr");
  write_outputs(b, run_experiment(b), dir / "naive");
  for (const char* f : {"accuracy.csv", "timing.csv", "overhead.csv", "config.txt"}) {
    EXPECT_TRUE(fs::exists(dir / "cwr" / f)) << f;
  }
  std::istringstream conf(slurp(dir / "cwr" / "config.txt"));
  EXPECT_EQ(ExperimentConfig::parse(conf).to_text(), a.to_text());
  const std::vector<fs::path> inputs{dir / "cwr", dir / "naive"};
  write_report(inputs, dir / "report");
  const std::string md = slurp(dir / "report" / "report.md");
  EXPECT_NE(md.find("| cwr | cwr_star | nc-5 | 5 |"), std::string::npos) << md;
  EXPECT_NE(md.find("| naive | 0 | 0 | 0 |"), std::string::npos) << md;
  const std::string svg = slurp(dir / "report" / "accuracy.svg");
  EXPECT_TRUE(svg.starts_with("<svg"));
  EXPECT_EQ(std::count(svg.begin(), svg.end(), '\n') > 5, true);
  EXPECT_NE(svg.find("<polyline"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Outputs, ReportNeedsInputs) {
  EXPECT_THROW(write_report({}, scratch("empty")), ConfigError);
  const std::vector<fs::path> missing{"/nonexistent/run"};
  EXPECT_THROW(write_report(missing, scratch("missing")), ConfigError);
}

TEST(Svg, BandPerSeries) {
  const Series s[] = {{"a", {{10, 20, 30}, {1, 2, 3}}}, {"b", {{5, 5, 5}, {0, 0, 0}}}};
  const std::string svg = accuracy_svg(s);
  std::size_t polys = 0;
  for (std::size_t p = svg.find("<polygon"); p != std::string::npos; p = svg.find("<polygon", p + 1)) ++polys;
  EXPECT_EQ(polys, 2u);
  EXPECT_NE(svg.find(">a</text>"), std::string::npos);
}

TEST(Cli, UnknownSubcommandExitsWithUsage) {
  EXPECT_EQ(run_cli("frobnicate"), 2);
  EXPECT_EQ(run_cli(""), 2);
  EXPECT_EQ(run_cli("--help"), 0);
}

TEST(Cli, TrainTwiceGivesIdenticalCsv) {
  const auto dir = scratch("cli");
  fs::create_directories(dir);
  std::ofstream(dir / "exp.cfg") << tiny().to_text();
  const std::string base = "train --config " + (dir / "exp.cfg").string() + " --out ";
  ASSERT_EQ(run_cli(base + (dir / "a").string()), 0);
  ASSERT_EQ(run_cli(base + (dir / "b").string() + " --set num_runs=3"), 0);
  EXPECT_EQ(slurp(dir / "a" / "accuracy.csv"), slurp(dir / "b" / "accuracy.csv"));
  EXPECT_EQ(run_cli(base + (dir / "c").string() + " --set bogus=1"), 1);
  ASSERT_EQ(run_cli("report " + (dir / "a").string() + " --out " + (dir / "r").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "r" / "report.md"));
  fs::remove_all(dir);
}

TEST(Cli, GenerateExportsFileLists) {
  const auto dir = scratch("gen");
  ASSERT_EQ(run_cli("generate --protocol nicv2-79 --runs 2 --seed 3 --out " + dir.string()), 0);
  EXPECT_TRUE(fs::exists(dir / "run1" / "train_batch_78_filelist.txt"));
  EXPECT_EQ(load_filelist(dir / "run0" / "train_batch_00_filelist.txt").sessions.size(), 10u);
  EXPECT_EQ(run_cli("generate --protocol nicv2-80 --out " + dir.string()), 1);
  fs::remove_all(dir);
}
