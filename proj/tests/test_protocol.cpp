#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "rfcl/protocol.hpp"

using namespace rfcl;

namespace {

Dataset core50_shape() {
  static const Dataset ds = core50_from_index(core50_canonical_index(4));
  return ds;
}

std::vector<int> first_appearance(const Dataset& ds, const ProtocolRun& run) {
  std::vector<int> first(static_cast<std::size_t>(ds.num_classes), 0);
  for (const auto& b : run.batches) {
    for (int c : b.classes(ds)) {
      if (first[static_cast<std::size_t>(c)] == 0) first[static_cast<std::size_t>(c)] = b.batch_index;
    }
  }
  return first;
}

}  // namespace

TEST(FileList, ParsesSessionAndClassFromDirectories) {
  std::istringstream in("s1/o3/C_01_02_000.png 2\n\ns11/o50/x.png 49\n");
  const auto idx = parse_filelist(in);
  ASSERT_EQ(idx.sessions.size(), 2u);
  EXPECT_EQ(idx.sessions[0].class_id, 2);
  EXPECT_EQ(idx.sessions[0].session_id, 0);
  EXPECT_EQ(idx.sessions[0].category_id, 0);
  EXPECT_EQ(idx.sessions[1].class_id, 49);
  EXPECT_EQ(idx.sessions[1].session_id, 10);
  EXPECT_EQ(idx.sessions[1].category_id, 9);
  EXPECT_EQ(idx.frames(), 2u);
}

TEST(FileList, EmptyInputGivesEmptyIndex) {
  std::istringstream in("");
  EXPECT_TRUE(parse_filelist(in).sessions.empty());
}

TEST(FileList, GroupsFramesInFileOrder) {
  std::istringstream in("a/s2/o1/f1.png 0\na/s2/o1/f0.png 0\na/s1/o1/f.png 0\n");
  const auto idx = parse_filelist(in);
  ASSERT_EQ(idx.sessions.size(), 2u);
  EXPECT_EQ(idx.sessions[0].session_id, 0);
  ASSERT_EQ(idx.sessions[1].paths.size(), 2u);
  EXPECT_EQ(idx.sessions[1].paths[0], "a/s2/o1/f1.png");
}

TEST(FileList, ErrorsNameTheLine) {
  const char* bad[] = {
      "s1/o1/a.png 0\ns1/o1/b.png 50\n",   // label out of range
      "s1/o1/a.png 0\ns1/o1/b.png -1\n",   // negative label
      "s1/o1/a.png 0\nfoo/b.png 0\n",      // no layout
      "s1/o1/a.png 0\ns1/o1/a.png 0\n",    // duplicate
      "s1/o1/a.png 0\ns1/o2/b.png 0\n",    // label disagrees with directory
      "s1/o1/a.png 0\ns12/o1/b.png 0\n",   // session out of range
      "s1/o1/a.png 0\ns1/o1/b.png\n",      // missing label
      "s1/o1/a.png 0\ns1/o1/b.png x\n",    // non-integer label
  };
  for (const char* text : bad) {
    std::istringstream in(text);
    try {
      parse_filelist(in, "list");
      ADD_FAILURE() << "accepted: " << text;
    } catch (const ProtocolError& e) {
      EXPECT_NE(std::string(e.what()).find("list:2:"), std::string::npos) << e.what();
    }
  }
}

TEST(FileList, MissingFileIsConfigError) {
  EXPECT_THROW(load_filelist("/nonexistent/list.txt"), ConfigError);
}

TEST(Dataset, Core50SplitKeepsEightTrainingSessions) {
  const Dataset ds = core50_shape();
  EXPECT_EQ(ds.train.size(), 400u);
  EXPECT_EQ(ds.test.size(), 150u);
  for (const auto& s : ds.test) EXPECT_TRUE(is_core50_test_session(s.session_id));
  for (const auto& s : ds.train) EXPECT_FALSE(is_core50_test_session(s.session_id));
  for (const auto& sessions : ds.train_sessions_by_class()) EXPECT_EQ(sessions.size(), 8u);
}

TEST(Subsample, KeepsEveryTwentiethFrame) {
  for (std::size_t n : {1u, 19u, 20u, 21u, 300u, 301u}) {
    SessionRecord s;
    s.count = n;
    for (std::size_t i = 0; i < n; ++i) s.paths.push_back(std::to_string(i));
    const auto t = subsample_session(s);
    EXPECT_EQ(t.count, (n + 19) / 20);
    ASSERT_EQ(t.paths.size(), t.count);
    for (std::size_t k = 0; k < t.count; ++k) EXPECT_EQ(t.paths[k], std::to_string(20 * k));
  }
  EXPECT_THROW(subsample_session(SessionRecord{}, 0), ConfigError);
}

TEST(Subsample, SyntheticRowsFollowStride) {
  SynthConfig cfg;
  cfg.patterns_per_session = 45;
  const Dataset ds = synth_dataset(cfg);
  const auto sub = subsample_test(ds.test);
  const auto set = materialize(ds, sub);
  ASSERT_EQ(set.size(), ds.test.size() * 3);
  const auto full = materialize(ds, std::span(ds.test.data(), 1));
  for (std::size_t k = 0; k < 3; ++k) {
    const auto a = set.x.row(k);
    const auto b = full.x.row(20 * k);
    EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
  }
}

TEST(Synth, DeterministicPerSeed) {
  SynthConfig cfg;
  const Dataset a = synth_dataset(cfg);
  const Dataset b = synth_dataset(cfg);
  EXPECT_TRUE(a.patterns == b.patterns);
  cfg.seed = 2;
  EXPECT_FALSE(synth_dataset(cfg).patterns == a.patterns);
}

TEST(Synth, LayoutAndLabels) {
  SynthConfig cfg;
  cfg.num_classes = 10;
  cfg.train_sessions = 4;
  cfg.test_sessions = 2;
  cfg.patterns_per_session = 7;
  const Dataset ds = synth_dataset(cfg);
  EXPECT_EQ(ds.train.size(), 40u);
  EXPECT_EQ(ds.test.size(), 20u);
  EXPECT_EQ(ds.patterns.rows(), 60u * 7);
  EXPECT_EQ(ds.patterns.row_size(), cfg.shape.size());
  const auto set = materialize(ds, ds.train);
  EXPECT_EQ(set.size(), 280u);
  for (std::size_t i = 0; i < set.size(); ++i) EXPECT_EQ(set.labels[i], static_cast<int>(i / 28));
  EXPECT_EQ(ds.train[7].category_id, 0);
  EXPECT_EQ(ds.train[39].category_id, 1);
}

TEST(Synth, SessionShiftHasDriftLength) {
  // Without noise every pattern equals centre + shift; two sessions of one
  // class differ by two vectors of length drift.
  SynthConfig cfg;
  cfg.noise = 0.0;
  cfg.drift = 0.7;
  cfg.patterns_per_session = 2;
  const Dataset ds = synth_dataset(cfg);
  const auto a = materialize(ds, std::span(ds.train.data(), 1));
  EXPECT_TRUE(std::equal(a.x.row(0).begin(), a.x.row(0).end(), a.x.row(1).begin()));
  const auto b = materialize(ds, std::span(ds.train.data() + 1, 1));
  real d2 = 0.0;
  for (std::size_t j = 0; j < a.x.row_size(); ++j) d2 += std::pow(a.x.row(0)[j] - b.x.row(0)[j], 2);
  EXPECT_LE(std::sqrt(d2), 2 * 0.7 + 1e-12);
}

TEST(Synth, RejectsBadConfig) {
  SynthConfig cfg;
  cfg.classes_per_category = 3;
  EXPECT_THROW(synth_dataset(cfg), ConfigError);
  cfg = {};
  cfg.noise = -1;
  EXPECT_THROW(synth_dataset(cfg), ConfigError);
}

TEST(Materialize, NeedsPatternData) {
  const Dataset ds = core50_shape();
  EXPECT_THROW(materialize(ds, std::span(ds.train.data(), 1)), ConfigError);
}

TEST(ProtocolSpec, ParsesTags) {
  EXPECT_EQ(ProtocolSpec::parse("nicv2-391").num_batches, 391);
  EXPECT_EQ(ProtocolSpec::parse("nicv2-391").schedule_tag(), "nicv2-391");
  EXPECT_EQ(ProtocolSpec::parse("nicv2-40").schedule_tag(), "nicv2-79");
  EXPECT_EQ(ProtocolSpec::parse("nc").tag(), "nc");
  EXPECT_EQ(ProtocolSpec::parse("nc-10").tag(), "nc-10");
  EXPECT_EQ(ProtocolSpec::parse("ni").kind, ProtocolKind::NI);
  EXPECT_THROW(ProtocolSpec::parse("nicv2-"), ConfigError);
  EXPECT_THROW(ProtocolSpec::parse("nicv2-1"), ConfigError);
  EXPECT_THROW(ProtocolSpec::parse("nicv3-79"), ConfigError);
}

TEST(Nicv2, DefaultMaxStart) {
  EXPECT_EQ(default_max_start(79), 60);
  EXPECT_EQ(default_max_start(196), 150);
  EXPECT_EQ(default_max_start(391), 300);
  EXPECT_EQ(default_max_start(2), 2);
  EXPECT_THROW(default_max_start(1), ConfigError);
}

TEST(Nicv2, StructureForAllLengthsAndSeeds) {
  const Dataset ds = core50_shape();
  for (int n : {79, 196, 391}) {
    const std::size_t cap = 390u / static_cast<std::size_t>(n - 1);
    const auto spec = ProtocolSpec::parse("nicv2-" + std::to_string(n));
    for (const auto& run : generate_nicv2(ds, 10, n, 0, 1234)) {
      EXPECT_TRUE(validate_run(ds, run, spec).empty());
      ASSERT_EQ(run.batches.size(), static_cast<std::size_t>(n));
      std::size_t total = 0;
      for (const auto& b : run.batches) total += b.sessions.size();
      EXPECT_EQ(total, 400u);
      EXPECT_EQ(run.batches[0].sessions.size(), 10u);
      std::set<int> cats;
      for (int c : run.batches[0].classes(ds)) cats.insert(c / 5);
      EXPECT_EQ(cats.size(), 10u);
      for (std::size_t b = 1; b < run.batches.size(); ++b) EXPECT_EQ(run.batches[b].sessions.size(), cap);
      std::vector<int> per_class(50, 0);
      for (const auto& b : run.batches) {
        for (auto i : b.sessions) ++per_class[static_cast<std::size_t>(ds.train[i].class_id)];
      }
      for (int k : per_class) EXPECT_EQ(k, 8);
      const auto first = first_appearance(ds, run);
      for (int c = 0; c < 50; ++c) {
        const int ip = run.insertion_point[static_cast<std::size_t>(c)];
        EXPECT_LE(ip, default_max_start(n));
        EXPECT_GE(first[static_cast<std::size_t>(c)], ip);
        if (ip != 1) {
          EXPECT_GE(first[static_cast<std::size_t>(c)], 2);
        }
      }
    }
  }
}

TEST(Nicv2, DeterministicPerSeed) {
  const Dataset ds = core50_shape();
  const auto a = generate_nicv2(ds, 79, 0, 7);
  const auto b = generate_nicv2(ds, 79, 0, 7);
  const auto c = generate_nicv2(ds, 79, 0, 8);
  bool same = true, differ = false;
  for (std::size_t k = 0; k < a.batches.size(); ++k) {
    same = same && a.batches[k].sessions == b.batches[k].sessions;
    differ = differ || a.batches[k].sessions != c.batches[k].sessions;
  }
  EXPECT_TRUE(same);
  EXPECT_EQ(a.insertion_point, b.insertion_point);
  EXPECT_TRUE(differ);
}

TEST(Nicv2, ClassesSpreadOverTheSequence) {
  // At most half of the classes first appear within the first fifth.
  const Dataset ds = core50_shape();
  for (int n : {79, 196, 391}) {
    for (int r = 0; r < 10; ++r) {
      const auto run = generate_nicv2(ds, n, 0, run_seed(99, r));
      const auto first = first_appearance(ds, run);
      const int early = static_cast<int>(std::count_if(first.begin(), first.end(), [&](int f) {
        return f <= n / 5;
      }));
      EXPECT_LE(early, 25) << "nicv2-" << n << " run " << r;
    }
  }
}

TEST(Nicv2, RejectsUnevenOrInfeasibleLayouts) {
  const Dataset ds = core50_shape();
  EXPECT_THROW(generate_nicv2(ds, 80, 0, 1), ProtocolError);  // 390 / 79 not whole
  EXPECT_THROW(generate_nicv2(ds, 79, 80, 1), ConfigError);
  EXPECT_THROW(generate_nicv2(ds, 79, 1, 1), ConfigError);
  // Late insertion ranges are redrawn until they fit.
  const auto run = generate_nicv2(ds, 79, 79, 1);
  auto spec = ProtocolSpec::parse("nicv2-79");
  spec.max_start = 79;
  EXPECT_TRUE(validate_run(ds, run, spec).empty());
}

TEST(Nicv2, SmallSyntheticSingleSessionBatches) {
  SynthConfig cfg;
  cfg.num_classes = 10;
  cfg.train_sessions = 4;
  cfg.patterns_per_session = 3;
  const Dataset ds = synth_dataset(cfg);
  const auto run = generate_nicv2(ds, 39, 0, 3);
  const auto spec = ProtocolSpec::parse("nicv2-39");
  EXPECT_TRUE(validate_run(ds, run, spec).empty());
  EXPECT_EQ(run.batches[0].sessions.size(), 2u);
  for (std::size_t b = 1; b < run.batches.size(); ++b) EXPECT_EQ(run.batches[b].classes(ds).size(), 1u);
}

TEST(Ni, EachBatchHoldsEveryClassOnce) {
  const Dataset ds = core50_shape();
  const auto run = generate_ni(ds, 5);
  EXPECT_EQ(run.batches.size(), 8u);
  EXPECT_TRUE(validate_run(ds, run, ProtocolSpec::parse("ni")).empty());
}

TEST(Nc, PartitionsClasses) {
  const Dataset ds = core50_shape();
  const auto run = generate(ds, ProtocolSpec::parse("nc"), 5);
  ASSERT_EQ(run.batches.size(), 9u);
  EXPECT_EQ(run.batches[0].classes(ds).size(), 10u);
  for (std::size_t b = 1; b < 9; ++b) EXPECT_EQ(run.batches[b].classes(ds).size(), 5u);
  EXPECT_TRUE(validate_run(ds, run, ProtocolSpec::parse("nc")).empty());

  SynthConfig cfg;
  const Dataset toy = synth_dataset(cfg);
  const auto one = generate_nc(toy, 10, 3);
  for (const auto& b : one.batches) EXPECT_EQ(b.classes(toy).size(), 1u);
  EXPECT_THROW(generate_nc(toy, 11, 3), ConfigError);
}

TEST(Validate, ReportsBrokenRuns) {
  const Dataset ds = core50_shape();
  auto run = generate_nicv2(ds, 79, 0, 1);
  const auto spec = ProtocolSpec::parse("nicv2-79");
  auto moved = run;
  moved.batches[1].sessions.push_back(moved.batches[2].sessions.back());
  EXPECT_FALSE(validate_run(ds, moved, spec).empty());
  auto late = run;
  for (auto& ip : late.insertion_point) {
    if (ip != 1) ip = 79;
  }
  EXPECT_FALSE(validate_run(ds, late, spec).empty());
}

TEST(Export, WritesOneFilePerBatch) {
  const Dataset ds = core50_shape();
  const auto runs = generate_nicv2(ds, 2, 79, 0, 4);
  const auto dir = std::filesystem::temp_directory_path() / "rfcl_export_test";
  std::filesystem::remove_all(dir);
  export_filelists(ds, runs, dir);
  EXPECT_TRUE(std::filesystem::exists(dir / "run1" / "train_batch_78_filelist.txt"));
  // Batch files reparse into the planned sessions.
  const auto idx = load_filelist(dir / "run0" / "train_batch_00_filelist.txt");
  EXPECT_EQ(idx.sessions.size(), 10u);
  EXPECT_EQ(idx.frames(), 40u);
  const auto test = load_filelist(dir / "test_filelist.txt");
  EXPECT_EQ(test.sessions.size(), 150u);
  EXPECT_EQ(test.frames(), 150u);  // 4 frames -> 1 after subsampling
  std::filesystem::remove_all(dir);
}
