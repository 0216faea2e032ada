#pragma once

// Experiment configuration, the run loop and its result files.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rfcl/protocol.hpp"
#include "rfcl/strategy.hpp"

namespace rfcl {

struct ExperimentConfig {
  std::string strategy = "ar1_star";
  std::string protocol = "nicv2-79";
  int max_start = 0;
  std::string arch = "dw3,norm,relu,pw16,norm,relu,fc32,norm,relu,head";
  NormKind norm = NormKind::BatchRenorm;
  FreezeMode freeze = FreezeMode::Depthwise;
  int num_runs = 10;
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  std::size_t test_period = 20;

  // Unset values fall back to the strategy's defaults.
  std::optional<real> eta_b1, eta_bi, eta_cwr, lambda, max_f, w_past, w_cur, shrinkage, si_damping;
  std::optional<int> epochs_b1, epochs_bi;
  std::optional<std::size_t> mini_batch_size;
  // Unset values fall back to the protocol's BRN schedule.
  std::optional<real> r_max, d_max, alpha_past, ramp_r_max, ramp_d_max, first_alpha_past;
  std::optional<int> warmup_iters;

  SynthConfig data{.num_classes = 50,
                   .classes_per_category = 5,
                   .train_sessions = 8,
                   .test_sessions = 3,
                   .patterns_per_session = 100,
                   .shape = {2, 4, 4},
                   .class_spread = 1.0,
                   .drift = 0.5,
                   .noise = 1.0,
                   .seed = 1};

  // Sets one key; throws ConfigError on unknown keys or malformed values.
  void set(const std::string& key, const std::string& value);
  // "key = value" lines; '#' starts a comment.
  static ExperimentConfig parse(std::istream& is);
  static ExperimentConfig load(const std::filesystem::path& path);
  // Every key with its current value, one per line, parseable by parse().
  std::string to_text() const;

  StrategyKind strategy_kind() const;
  ProtocolSpec protocol_spec() const;
  StrategyConfig strategy_config() const;
  void validate() const;
};

struct RunResult {
  std::vector<real> accuracy;  // index 0: before training, then after each batch
  std::vector<double> seconds;  // training time per batch (index 0 is 0)
  OverheadRecord overhead;      // after the last batch
};

struct ExperimentResult {
  std::vector<RunResult> runs;
  std::size_t num_batches() const;  // rows including batch 0
};

// Trains `num_runs` learners, each on its own protocol run, and evaluates
// on the subsampled test sessions after every batch.
ExperimentResult run_experiment(const ExperimentConfig& cfg);
// The same for an explicit dataset (protocol runs are generated from it).
ExperimentResult run_experiment(const ExperimentConfig& cfg, const Dataset& ds);

// "Batch,Run 0,...,Run R-1" then one row per batch, values with 3 decimals.
std::string accuracy_csv(const ExperimentResult& r);
std::string timing_csv(const ExperimentResult& r);
struct AccuracyTable {
  std::vector<int> batches;
  std::vector<std::vector<real>> values;  // [batch][run]
};
AccuracyTable parse_accuracy_csv(std::istream& is);

struct Aggregate {
  std::vector<real> mean;
  std::vector<real> stddev;  // population
};
Aggregate aggregate(const AccuracyTable& t);

// Writes accuracy.csv, timing.csv, overhead.csv and config.txt.
void write_outputs(const ExperimentConfig& cfg, const ExperimentResult& r,
                   const std::filesystem::path& dir);

// Summarises result directories into report.md and accuracy.svg.
void write_report(std::span<const std::filesystem::path> result_dirs,
                  const std::filesystem::path& out_dir);

// Line chart of mean accuracy per batch with a +-1 std band per series.
struct Series {
  std::string name;
  Aggregate data;
};
std::string accuracy_svg(std::span<const Series> series);

}  // namespace rfcl
