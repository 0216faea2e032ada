#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>

#include "rfcl/checks.hpp"
#include "rfcl/experiment.hpp"

namespace fs = std::filesystem;
using namespace rfcl;

namespace {

int cmd_generate(const std::string& protocol, int runs, std::uint64_t seed, int max_start,
                 const std::string& filelist, const std::string& out) {
  const Dataset ds = filelist.empty() ? core50_from_index(core50_canonical_index())
                                      : core50_from_index(load_filelist(filelist));
  ProtocolSpec spec = ProtocolSpec::parse(protocol);
  spec.max_start = max_start;
  std::vector<ProtocolRun> plans;
  for (int r = 0; r < runs; ++r) {
    plans.push_back(generate(ds, spec, run_seed(seed, r)));
    const auto problems = validate_run(ds, plans.back(), spec);
    if (!problems.empty()) throw ProtocolError("run " + std::to_string(r) + ": " + problems.front());
  }
  export_filelists(ds, plans, out);
  std::cout << "wrote " << runs << " run(s) of " << spec.tag() << " (" << plans.front().batches.size()
            << " batches) to " << out << '\n';
  return 0;
}

int cmd_train(const std::string& config, const std::vector<std::string>& sets, const std::string& out) {
  ExperimentConfig cfg = config.empty() ? ExperimentConfig{} : ExperimentConfig::load(config);
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!out.empty()) cfg.output_dir = out;
  cfg.validate();
  const ExperimentResult r = run_experiment(cfg);
  write_outputs(cfg, r, cfg.output_dir);
  std::istringstream csv(accuracy_csv(r));
  const Aggregate agg = aggregate(parse_accuracy_csv(csv));
  std::cout << cfg.strategy << " on " << cfg.protocol << ": final accuracy " << agg.mean.back()
            << " +- " << agg.stddev.back() << " over " << cfg.num_runs << " run(s); results in "
            << cfg.output_dir << '\n';
  return 0;
}

int cmd_check(const std::vector<int>& only) {
  const auto results = run_acceptance(only);
  bool ok = true;
  for (const auto& r : results) {
    std::cout << format_check(r) << '\n';
    ok = ok && r.pass;
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rehearsal-free continual learning: protocols, training and reports"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("generate", "Generate protocol runs and export file lists");
  std::string protocol = "nicv2-391", filelist, gen_out = "protocols";
  int runs = 10, max_start = 0;
  std::uint64_t seed = 0;
  gen->add_option("--protocol", protocol, "ni, nc, nc-<B> or nicv2-<B>");
  gen->add_option("--runs", runs, "Number of runs")->check(CLI::PositiveNumber);
  gen->add_option("--seed", seed, "Experiment seed");
  gen->add_option("--max-start", max_start, "Latest NICv2 insertion point (0: default)");
  gen->add_option("--filelist", filelist, "CORe50 file list to index (default: canonical layout)");
  gen->add_option("--out", gen_out, "Output directory");

  auto* train = app.add_subcommand("train", "Run an experiment on the synthetic dataset");
  std::string config, train_out;
  std::vector<std::string> sets;
  train->add_option("--config", config, "key = value config file")->check(CLI::ExistingFile);
  train->add_option("--set", sets, "Override one config key (key=value)");
  train->add_option("--out", train_out, "Output directory (overrides output_dir)");

  auto* report = app.add_subcommand("report", "Summarise result directories");
  std::vector<std::string> inputs;
  std::string report_out = "report";
  report->add_option("inputs", inputs, "Result directories from train")->required();
  report->add_option("--out", report_out, "Output directory");

  auto* check = app.add_subcommand("check", "Run the acceptance criteria");
  std::vector<int> only;
  check->add_option("--only", only, "Criterion numbers to run (default: all)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*gen) return cmd_generate(protocol, runs, seed, max_start, filelist, gen_out);
    if (*train) return cmd_train(config, sets, train_out);
    if (*report) {
      std::vector<fs::path> dirs(inputs.begin(), inputs.end());
      write_report(dirs, report_out);
      std::cout << "wrote " << (fs::path(report_out) / "report.md").string() << '\n';
      return 0;
    }
    if (*check) return cmd_check(only);
  } catch (const rfcl::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
