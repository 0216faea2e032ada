#pragma once

// Batch schedules over the training sessions of a Dataset.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "rfcl/dataset.hpp"

namespace rfcl {

struct BatchPlan {
  int batch_index = 1;               // 1-based
  std::vector<std::size_t> sessions;  // indices into Dataset::train

  std::vector<int> classes(const Dataset& ds) const;
};

struct ProtocolRun {
  std::string tag;
  std::uint64_t seed = 0;
  std::vector<BatchPlan> batches;
  // NICv2 only: per class, the first batch its sessions may enter
  // (1 for the classes of the initial batch).
  std::vector<int> insertion_point;
};

enum class ProtocolKind { NI, NC, NICv2 };

struct ProtocolSpec {
  ProtocolKind kind = ProtocolKind::NICv2;
  int num_batches = 79;
  // NICv2: latest insertion point. 0 picks the default for num_batches.
  int max_start = 0;
  // NC: classes in batch 1 (0 splits all classes evenly).
  int nc_first_batch_classes = 0;

  // "ni", "nc", "nc-<batches>", "nicv2-<batches>".
  static ProtocolSpec parse(std::string_view tag);
  std::string tag() const;
  // Tag used to pick BRN targets: nicv2-79/196/391, ni or nc. Other NICv2
  // lengths use the 391 targets from 300 batches up, the 79 ones below.
  std::string schedule_tag() const;
};

// Latest insertion point used when none is given: 60, 150, 300 for
// 79, 196, 391 batches, about 0.77 * num_batches otherwise.
int default_max_start(int num_batches);

inline constexpr int kMaxInsertionRetries = 1000;

// NICv2: batch 1 holds one session of one class per category; the other
// sessions of those classes may enter from batch 2. Every other class gets
// an insertion point in [2, max_start] and its sessions go to uniformly
// chosen non-full batches at or after it, latest insertion points first.
// Incremental batches hold (sessions - categories) / (num_batches - 1)
// sessions each, which must be a whole number. Throws ProtocolError when the sessions cannot fit.
ProtocolRun generate_nicv2(const Dataset& ds, int num_batches, int max_start, std::uint64_t seed);
std::vector<ProtocolRun> generate_nicv2(const Dataset& ds, int num_runs, int num_batches,
                                        int max_start, std::uint64_t seed);

// NI: batch b holds the b-th training session of every class (in random
// session order per class). Every class needs the same session count.
ProtocolRun generate_ni(const Dataset& ds, std::uint64_t seed);

// NC: classes shuffled and partitioned into num_batches groups; all sessions
// of a class go to its batch.
ProtocolRun generate_nc(const Dataset& ds, int num_batches, std::uint64_t seed,
                        int first_batch_classes = 0);

ProtocolRun generate(const Dataset& ds, const ProtocolSpec& spec, std::uint64_t seed);

// Per-run seeds derived from an experiment seed.
std::uint64_t run_seed(std::uint64_t seed, int run);

// Structural checks shared by tests and `check`; returns problems found.
std::vector<std::string> validate_run(const Dataset& ds, const ProtocolRun& run,
                                      const ProtocolSpec& spec);

// One "path label" file per batch:
//   <dir>/run<r>/train_batch_<bb>_filelist.txt   (bb zero-based, two digits or more)
// plus <dir>/test_filelist.txt with the subsampled test sessions.
void export_filelists(const Dataset& ds, std::span<const ProtocolRun> runs,
                      const std::filesystem::path& dir);

}  // namespace rfcl
