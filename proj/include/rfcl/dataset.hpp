#pragma once

// Session-structured datasets shaped like CORe50: classes grouped into
// categories, each class recorded in several sessions.

#include <filesystem>
#include <istream>
#include <span>
#include <string>
#include <vector>

#include "rfcl/common.hpp"
#include "rfcl/strategy.hpp"
#include "rfcl/tensor.hpp"

namespace rfcl {

struct SessionRecord {
  int class_id = 0;
  int category_id = 0;
  int session_id = 0;
  // File-list datasets: one path per frame, in frame order.
  std::vector<std::string> paths;
  // Synthetic datasets: rows offset, offset + stride, ... of Dataset::patterns.
  std::size_t offset = 0;
  std::size_t stride = 1;
  std::size_t count = 0;
};

struct Dataset {
  int num_classes = 50;
  int classes_per_category = 5;
  Shape3 pattern_shape;
  std::vector<SessionRecord> train;  // sorted by (class, session)
  std::vector<SessionRecord> test;
  Tensor patterns;                   // synthetic only; [rows, pattern_shape.size()]

  int num_categories() const { return num_classes / classes_per_category; }
  // Indices into `train` of each class's sessions.
  std::vector<std::vector<std::size_t>> train_sessions_by_class() const;
};

inline constexpr int kCore50Classes = 50;
inline constexpr int kCore50Sessions = 11;
// 0-based ids of the sessions CORe50 holds out for testing (s3, s7, s10).
inline constexpr int kCore50TestSessions[] = {2, 6, 9};
bool is_core50_test_session(int session_id);

// Keeps every `period`-th frame starting at the first: ceil(count / period)
// frames remain.
SessionRecord subsample_session(const SessionRecord& s, std::size_t period = 20);
std::vector<SessionRecord> subsample_test(std::span<const SessionRecord> sessions,
                                          std::size_t period = 20);

// Sessions parsed from a "path label" file list, grouped by (class, session).
struct FileIndex {
  std::vector<SessionRecord> sessions;  // sorted by (class, session)
  std::size_t frames() const;
};

// Each non-empty line: relative path, whitespace, integer label. The path's
// "s<k>/o<m>/" directories give session k-1 and class m-1; the label must
// agree with the class. Errors name the offending line.
FileIndex parse_filelist(std::istream& is, const std::string& source = "<stream>");
FileIndex load_filelist(const std::filesystem::path& path);

// Splits an index into CORe50 training and test sessions.
Dataset core50_from_index(const FileIndex& index);

// CORe50-shaped index with canonical paths
// ("s<k>/o<m>/C_<kk>_<mm>_<fff>.png") and `frames` frames per session.
FileIndex core50_canonical_index(std::size_t frames = 300);

struct SynthConfig {
  int num_classes = 10;
  int classes_per_category = 5;
  int train_sessions = 8;
  int test_sessions = 3;
  std::size_t patterns_per_session = 60;
  Shape3 shape{2, 4, 4};
  // Standard deviation of the class centres, per feature.
  real class_spread = 1.0;
  // Length of each session's mean shift.
  real drift = 0.5;
  real noise = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
};

// Each class is a Gaussian cluster; each session shifts the cluster mean by
// a random direction of length `drift`, shared by all its patterns.
Dataset synth_dataset(const SynthConfig& cfg);

// Patterns and labels of the given sessions, in order.
LabeledSet materialize(const Dataset& ds, std::span<const SessionRecord> sessions);
LabeledSet materialize(const Dataset& ds, std::span<const std::size_t> train_indices);

}  // namespace rfcl
