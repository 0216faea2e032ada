#include "rfcl/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

namespace rfcl {
namespace {

bool session_less(const SessionRecord& a, const SessionRecord& b) {
  return a.class_id != b.class_id ? a.class_id < b.class_id : a.session_id < b.session_id;
}

// Parses the digits following `prefix` at the start of a path component.
bool component_number(std::string_view component, char prefix, int& out) {
  if (component.size() < 2 || component[0] != prefix) return false;
  const auto digits = component.substr(1);
  const auto* end = digits.data() + digits.size();
  auto [p, ec] = std::from_chars(digits.data(), end, out);
  return ec == std::errc{} && p == end;
}

// Finds adjacent "s<k>/o<m>" components anywhere in the path.
bool parse_layout(std::string_view path, int& session, int& object) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (start <= path.size()) {
    const auto slash = path.find('/', start);
    const auto stop = slash == std::string_view::npos ? path.size() : slash;
    parts.push_back(path.substr(start, stop - start));
    if (slash == std::string_view::npos) break;
    start = slash + 1;
  }
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    int s = 0, o = 0;
    if (component_number(parts[i], 's', s) && component_number(parts[i + 1], 'o', o)) {
      session = s;
      object = o;
      return true;
    }
  }
  return false;
}

std::string line_error(const std::string& source, std::size_t line, const std::string& what) {
  return source + ":" + std::to_string(line) + ": " + what;
}

}  // namespace

std::vector<std::vector<std::size_t>> Dataset::train_sessions_by_class() const {
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(num_classes));
  for (std::size_t i = 0; i < train.size(); ++i) {
    const int c = train[i].class_id;
    if (c < 0 || c >= num_classes) throw ProtocolError("session class out of range");
    out[static_cast<std::size_t>(c)].push_back(i);
  }
  return out;
}

bool is_core50_test_session(int session_id) {
  return std::find(std::begin(kCore50TestSessions), std::end(kCore50TestSessions), session_id) !=
         std::end(kCore50TestSessions);
}

SessionRecord subsample_session(const SessionRecord& s, std::size_t period) {
  if (period == 0) throw ConfigError("subsampling period must be positive");
  SessionRecord out = s;
  if (!s.paths.empty()) {
    out.paths.clear();
    for (std::size_t i = 0; i < s.paths.size(); i += period) out.paths.push_back(s.paths[i]);
  }
  out.count = (s.count + period - 1) / period;
  out.stride = s.stride * period;
  return out;
}

std::vector<SessionRecord> subsample_test(std::span<const SessionRecord> sessions,
                                          std::size_t period) {
  std::vector<SessionRecord> out;
  out.reserve(sessions.size());
  for (const auto& s : sessions) out.push_back(subsample_session(s, period));
  return out;
}

std::size_t FileIndex::frames() const {
  std::size_t n = 0;
  for (const auto& s : sessions) n += s.count;
  return n;
}

FileIndex parse_filelist(std::istream& is, const std::string& source) {
  std::map<std::pair<int, int>, SessionRecord> grouped;
  std::map<std::string, std::size_t> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream fields(line);
    std::string path, label_text, extra;
    if (!(fields >> path)) continue;
    if (!(fields >> label_text)) throw ProtocolError(line_error(source, lineno, "missing label"));
    if (fields >> extra) throw ProtocolError(line_error(source, lineno, "unexpected trailing field"));
    int label = 0;
    {
      const auto* end = label_text.data() + label_text.size();
      auto [p, ec] = std::from_chars(label_text.data(), end, label);
      if (ec != std::errc{} || p != end) {
        throw ProtocolError(line_error(source, lineno, "label '" + label_text + "' is not an integer"));
      }
    }
    if (label < 0 || label >= kCore50Classes) {
      throw ProtocolError(line_error(source, lineno, "label " + label_text + " outside 0..49"));
    }
    int s = 0, o = 0;
    if (!parse_layout(path, s, o)) {
      throw ProtocolError(line_error(source, lineno, "path '" + path + "' lacks s<k>/o<m>/ directories"));
    }
    if (s < 1 || s > kCore50Sessions) {
      throw ProtocolError(line_error(source, lineno, "session s" + std::to_string(s) + " outside s1..s11"));
    }
    if (o < 1 || o > kCore50Classes) {
      throw ProtocolError(line_error(source, lineno, "object o" + std::to_string(o) + " outside o1..o50"));
    }
    if (o - 1 != label) {
      throw ProtocolError(line_error(source, lineno,
                                     "label " + label_text + " disagrees with directory o" +
                                         std::to_string(o)));
    }
    if (auto [it, inserted] = seen.emplace(path, lineno); !inserted) {
      throw ProtocolError(line_error(source, lineno,
                                     "duplicate path (first at line " + std::to_string(it->second) + ")"));
    }
    auto& rec = grouped[{o - 1, s - 1}];
    rec.class_id = o - 1;
    rec.category_id = (o - 1) / 5;
    rec.session_id = s - 1;
    rec.paths.push_back(path);
    rec.count = rec.paths.size();
  }
  FileIndex index;
  for (auto& [key, rec] : grouped) index.sessions.push_back(std::move(rec));
  return index;
}

FileIndex load_filelist(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open file list " + path.string());
  return parse_filelist(in, path.string());
}

Dataset core50_from_index(const FileIndex& index) {
  Dataset ds;
  ds.num_classes = kCore50Classes;
  ds.classes_per_category = 5;
  for (const auto& s : index.sessions) {
    (is_core50_test_session(s.session_id) ? ds.test : ds.train).push_back(s);
  }
  std::sort(ds.train.begin(), ds.train.end(), session_less);
  std::sort(ds.test.begin(), ds.test.end(), session_less);
  return ds;
}

FileIndex core50_canonical_index(std::size_t frames) {
  FileIndex index;
  char name[64];
  for (int o = 1; o <= kCore50Classes; ++o) {
    for (int s = 1; s <= kCore50Sessions; ++s) {
      SessionRecord rec;
      rec.class_id = o - 1;
      rec.category_id = (o - 1) / 5;
      rec.session_id = s - 1;
      for (std::size_t f = 0; f < frames; ++f) {
        std::snprintf(name, sizeof name, "s%d/o%d/C_%02d_%02d_%03zu.png", s, o, s, o, f);
        rec.paths.emplace_back(name);
      }
      rec.count = frames;
      index.sessions.push_back(std::move(rec));
    }
  }
  return index;
}

void SynthConfig::validate() const {
  if (num_classes <= 0) throw ConfigError("num_classes must be positive");
  if (classes_per_category <= 0 || num_classes % classes_per_category != 0) {
    throw ConfigError("classes_per_category must divide num_classes");
  }
  if (train_sessions <= 0 || test_sessions < 0) throw ConfigError("session counts must be positive");
  if (patterns_per_session == 0) throw ConfigError("patterns_per_session must be positive");
  if (shape.size() == 0) throw ConfigError("pattern shape must be non-empty");
  if (!(class_spread >= 0.0) || !(drift >= 0.0) || !(noise >= 0.0)) {
    throw ConfigError("class_spread, drift and noise must be non-negative");
  }
}

Dataset synth_dataset(const SynthConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.shape.size();
  const auto classes = static_cast<std::size_t>(cfg.num_classes);
  const auto sessions = static_cast<std::size_t>(cfg.train_sessions + cfg.test_sessions);
  const std::size_t rows = classes * sessions * cfg.patterns_per_session;

  Dataset ds;
  ds.num_classes = cfg.num_classes;
  ds.classes_per_category = cfg.classes_per_category;
  ds.pattern_shape = cfg.shape;
  ds.patterns = Tensor({rows, d});

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<real> normal(0.0, 1.0);
  std::vector<real> centre(d), shift(d);
  std::size_t row = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    for (auto& v : centre) v = cfg.class_spread * normal(rng);
    for (std::size_t s = 0; s < sessions; ++s) {
      real norm2 = 0.0;
      for (auto& v : shift) {
        v = normal(rng);
        norm2 += v * v;
      }
      const real scale = norm2 > 0.0 ? cfg.drift / std::sqrt(norm2) : 0.0;
      SessionRecord rec;
      rec.class_id = static_cast<int>(c);
      rec.category_id = static_cast<int>(c) / cfg.classes_per_category;
      rec.session_id = static_cast<int>(s);
      rec.offset = row;
      rec.count = cfg.patterns_per_session;
      for (std::size_t p = 0; p < cfg.patterns_per_session; ++p, ++row) {
        auto x = ds.patterns.row(row);
        for (std::size_t j = 0; j < d; ++j) x[j] = centre[j] + scale * shift[j] + cfg.noise * normal(rng);
      }
      (s < static_cast<std::size_t>(cfg.train_sessions) ? ds.train : ds.test).push_back(std::move(rec));
    }
  }
  return ds;
}

LabeledSet materialize(const Dataset& ds, std::span<const SessionRecord> sessions) {
  if (ds.patterns.empty()) {
    throw ConfigError("dataset has no pattern data; training needs a synthetic dataset");
  }
  std::vector<std::size_t> rows;
  std::vector<int> labels;
  for (const auto& s : sessions) {
    for (std::size_t i = 0; i < s.count; ++i) {
      const std::size_t r = s.offset + i * s.stride;
      if (r >= ds.patterns.rows()) throw DimensionError("session rows exceed dataset patterns");
      rows.push_back(r);
      labels.push_back(s.class_id);
    }
  }
  LabeledSet out;
  out.x = rows.empty() ? Tensor({0, ds.patterns.row_size()}) : ds.patterns.gather_rows(rows);
  out.labels = std::move(labels);
  return out;
}

LabeledSet materialize(const Dataset& ds, std::span<const std::size_t> train_indices) {
  std::vector<SessionRecord> sessions;
  sessions.reserve(train_indices.size());
  for (auto i : train_indices) sessions.push_back(ds.train.at(i));
  return materialize(ds, sessions);
}

}  // namespace rfcl
