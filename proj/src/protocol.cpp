#include "rfcl/protocol.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

namespace rfcl {
namespace {

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

int parse_positive(std::string_view text, std::string_view tag) {
  int v = 0;
  const auto* end = text.data() + text.size();
  auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || p != end || v <= 0) {
    throw ConfigError("bad batch count in protocol tag '" + std::string(tag) + "'");
  }
  return v;
}

// Sessions whose insertion point is >= t must fit into batches t..N.
bool fits(const std::vector<int>& session_ip, int num_batches, std::size_t capacity) {
  std::vector<std::size_t> at(static_cast<std::size_t>(num_batches) + 2, 0);
  for (int ip : session_ip) ++at[static_cast<std::size_t>(ip)];
  std::size_t tail = 0;
  for (int t = num_batches; t >= 2; --t) {
    tail += at[static_cast<std::size_t>(t)];
    if (tail > capacity * static_cast<std::size_t>(num_batches - t + 1)) return false;
  }
  return true;
}

void require_class_layout(const Dataset& ds) {
  if (ds.num_classes <= 0 || ds.classes_per_category <= 0 ||
      ds.num_classes % ds.classes_per_category != 0) {
    throw ConfigError("dataset class layout is inconsistent");
  }
}

}  // namespace

std::vector<int> BatchPlan::classes(const Dataset& ds) const {
  std::set<int> out;
  for (auto i : sessions) out.insert(ds.train.at(i).class_id);
  return {out.begin(), out.end()};
}

ProtocolSpec ProtocolSpec::parse(std::string_view tag) {
  ProtocolSpec s;
  if (tag == "ni") {
    s.kind = ProtocolKind::NI;
    s.num_batches = 0;
  } else if (tag == "nc") {
    s.kind = ProtocolKind::NC;
    s.num_batches = 9;
    s.nc_first_batch_classes = 10;
  } else if (tag.starts_with("nc-")) {
    s.kind = ProtocolKind::NC;
    s.num_batches = parse_positive(tag.substr(3), tag);
  } else if (tag.starts_with("nicv2-")) {
    s.kind = ProtocolKind::NICv2;
    s.num_batches = parse_positive(tag.substr(6), tag);
    if (s.num_batches < 2) throw ConfigError("NICv2 needs at least 2 batches");
  } else {
    throw ConfigError("unknown protocol '" + std::string(tag) + "'");
  }
  return s;
}

std::string ProtocolSpec::tag() const {
  switch (kind) {
    case ProtocolKind::NI:
      return "ni";
    case ProtocolKind::NC:
      return num_batches == 9 && nc_first_batch_classes == 10 ? "nc"
                                                               : "nc-" + std::to_string(num_batches);
    case ProtocolKind::NICv2:
      return "nicv2-" + std::to_string(num_batches);
  }
  return {};
}

std::string ProtocolSpec::schedule_tag() const {
  switch (kind) {
    case ProtocolKind::NI:
      return "ni";
    case ProtocolKind::NC:
      return "nc";
    case ProtocolKind::NICv2:
      if (num_batches == 79 || num_batches == 196 || num_batches == 391) return tag();
      return num_batches >= 300 ? "nicv2-391" : "nicv2-79";
  }
  return {};
}

int default_max_start(int num_batches) {
  if (num_batches < 2) throw ConfigError("NICv2 needs at least 2 batches");
  switch (num_batches) {
    case 79:
      return 60;
    case 196:
      return 150;
    case 391:
      return 300;
    default:
      return std::clamp(static_cast<int>(std::lround(0.77 * num_batches)), 2, num_batches);
  }
}

std::uint64_t run_seed(std::uint64_t seed, int run) {
  // splitmix64 step over (seed, run)
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(run + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

ProtocolRun generate_nicv2(const Dataset& ds, int num_batches, int max_start, std::uint64_t seed) {
  require_class_layout(ds);
  if (num_batches < 2) throw ConfigError("NICv2 needs at least 2 batches");
  if (max_start == 0) max_start = default_max_start(num_batches);
  if (max_start < 2 || max_start > num_batches) {
    throw ConfigError("max_start must lie in [2, " + std::to_string(num_batches) + "]");
  }
  const auto by_class = ds.train_sessions_by_class();
  for (const auto& s : by_class) {
    if (s.empty()) throw ProtocolError("every class needs at least one training session");
  }
  const int categories = ds.num_categories();
  const std::size_t total = ds.train.size();
  const std::size_t incremental = total - static_cast<std::size_t>(categories);
  if (incremental % static_cast<std::size_t>(num_batches - 1) != 0) {
    throw ProtocolError(std::to_string(incremental) + " incremental sessions do not split evenly into " +
                        std::to_string(num_batches - 1) + " batches");
  }
  const std::size_t capacity = incremental / static_cast<std::size_t>(num_batches - 1);
  if (capacity == 0) throw ProtocolError("too many batches for the available sessions");

  std::mt19937_64 rng(seed);
  ProtocolRun run;
  run.tag = "nicv2-" + std::to_string(num_batches);
  run.seed = seed;
  run.batches.resize(static_cast<std::size_t>(num_batches));
  for (int b = 0; b < num_batches; ++b) run.batches[static_cast<std::size_t>(b)].batch_index = b + 1;

  // Initial batch: one session of one random class per category.
  std::vector<char> used(total, 0);
  std::vector<int> insertion(static_cast<std::size_t>(ds.num_classes), 0);
  for (int cat = 0; cat < categories; ++cat) {
    const int c = cat * ds.classes_per_category + uniform_int(rng, 0, ds.classes_per_category - 1);
    const auto& sessions = by_class[static_cast<std::size_t>(c)];
    const std::size_t pick = sessions[static_cast<std::size_t>(
        uniform_int(rng, 0, static_cast<int>(sessions.size()) - 1))];
    run.batches[0].sessions.push_back(pick);
    used[pick] = 1;
    insertion[static_cast<std::size_t>(c)] = 1;
  }

  // Insertion points for the remaining classes, redrawn until all sessions fit.
  std::vector<int> session_ip(total, 0);
  bool ok = false;
  for (int attempt = 0; attempt < kMaxInsertionRetries && !ok; ++attempt) {
    for (int c = 0; c < ds.num_classes; ++c) {
      auto& ip = insertion[static_cast<std::size_t>(c)];
      if (ip != 1) ip = uniform_int(rng, 2, max_start);
    }
    std::vector<int> pending;
    for (std::size_t i = 0; i < total; ++i) {
      if (used[i]) continue;
      const int ip = insertion[static_cast<std::size_t>(ds.train[i].class_id)];
      session_ip[i] = std::max(ip, 2);
      pending.push_back(session_ip[i]);
    }
    ok = fits(pending, num_batches, capacity);
  }
  if (!ok) {
    throw ProtocolError("no feasible insertion points after " + std::to_string(kMaxInsertionRetries) +
                        " draws; lower max_start");
  }

  // Latest insertion points first: every placement then has a free slot.
  std::vector<int> order(static_cast<std::size_t>(ds.num_classes));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return insertion[static_cast<std::size_t>(a)] > insertion[static_cast<std::size_t>(b)];
  });
  std::vector<int> open;
  for (int c : order) {
    std::vector<std::size_t> sessions;
    for (auto i : by_class[static_cast<std::size_t>(c)]) {
      if (!used[i]) sessions.push_back(i);
    }
    std::shuffle(sessions.begin(), sessions.end(), rng);
    for (auto i : sessions) {
      open.clear();
      for (int b = session_ip[i]; b <= num_batches; ++b) {
        if (run.batches[static_cast<std::size_t>(b - 1)].sessions.size() < capacity) open.push_back(b);
      }
      if (open.empty()) throw ProtocolError("NICv2 placement ran out of room");
      const int b = open[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(open.size()) - 1))];
      run.batches[static_cast<std::size_t>(b - 1)].sessions.push_back(i);
      used[i] = 1;
    }
  }
  for (auto& b : run.batches) std::sort(b.sessions.begin(), b.sessions.end());
  run.insertion_point = std::move(insertion);
  return run;
}

std::vector<ProtocolRun> generate_nicv2(const Dataset& ds, int num_runs, int num_batches,
                                        int max_start, std::uint64_t seed) {
  if (num_runs <= 0) throw ConfigError("num_runs must be positive");
  std::vector<ProtocolRun> runs;
  runs.reserve(static_cast<std::size_t>(num_runs));
  for (int r = 0; r < num_runs; ++r) {
    runs.push_back(generate_nicv2(ds, num_batches, max_start, run_seed(seed, r)));
  }
  return runs;
}

ProtocolRun generate_ni(const Dataset& ds, std::uint64_t seed) {
  require_class_layout(ds);
  auto by_class = ds.train_sessions_by_class();
  const std::size_t n = by_class.front().size();
  if (n == 0) throw ProtocolError("NI needs training sessions");
  for (const auto& s : by_class) {
    if (s.size() != n) throw ProtocolError("NI needs the same session count for every class");
  }
  std::mt19937_64 rng(seed);
  ProtocolRun run;
  run.tag = "ni";
  run.seed = seed;
  run.batches.resize(n);
  for (std::size_t b = 0; b < n; ++b) run.batches[b].batch_index = static_cast<int>(b) + 1;
  for (auto& sessions : by_class) {
    std::shuffle(sessions.begin(), sessions.end(), rng);
    for (std::size_t b = 0; b < n; ++b) run.batches[b].sessions.push_back(sessions[b]);
  }
  return run;
}

ProtocolRun generate_nc(const Dataset& ds, int num_batches, std::uint64_t seed,
                        int first_batch_classes) {
  require_class_layout(ds);
  if (num_batches <= 0 || num_batches > ds.num_classes) {
    throw ConfigError("NC batch count must lie in [1, num_classes]");
  }
  if (first_batch_classes < 0 || first_batch_classes > ds.num_classes) {
    throw ConfigError("NC first batch size out of range");
  }
  std::vector<int> sizes(static_cast<std::size_t>(num_batches));
  if (first_batch_classes > 0) {
    const int rest = ds.num_classes - first_batch_classes;
    if (num_batches == 1 ? rest != 0 : rest < num_batches - 1) {
      throw ConfigError("NC first batch leaves too few classes");
    }
    sizes[0] = first_batch_classes;
    for (int b = 1; b < num_batches; ++b) {
      sizes[static_cast<std::size_t>(b)] = rest / (num_batches - 1) + (b - 1 < rest % (num_batches - 1) ? 1 : 0);
    }
  } else {
    for (int b = 0; b < num_batches; ++b) {
      sizes[static_cast<std::size_t>(b)] = ds.num_classes / num_batches + (b < ds.num_classes % num_batches ? 1 : 0);
    }
  }
  std::mt19937_64 rng(seed);
  std::vector<int> classes(static_cast<std::size_t>(ds.num_classes));
  std::iota(classes.begin(), classes.end(), 0);
  std::shuffle(classes.begin(), classes.end(), rng);
  const auto by_class = ds.train_sessions_by_class();

  ProtocolRun run;
  run.tag = "nc-" + std::to_string(num_batches);
  run.seed = seed;
  run.batches.resize(static_cast<std::size_t>(num_batches));
  std::size_t next = 0;
  for (int b = 0; b < num_batches; ++b) {
    auto& batch = run.batches[static_cast<std::size_t>(b)];
    batch.batch_index = b + 1;
    for (int k = 0; k < sizes[static_cast<std::size_t>(b)]; ++k) {
      const auto& s = by_class[static_cast<std::size_t>(classes[next++])];
      batch.sessions.insert(batch.sessions.end(), s.begin(), s.end());
    }
    std::sort(batch.sessions.begin(), batch.sessions.end());
  }
  return run;
}

ProtocolRun generate(const Dataset& ds, const ProtocolSpec& spec, std::uint64_t seed) {
  ProtocolRun run;
  switch (spec.kind) {
    case ProtocolKind::NI:
      run = generate_ni(ds, seed);
      break;
    case ProtocolKind::NC:
      run = generate_nc(ds, spec.num_batches, seed, spec.nc_first_batch_classes);
      break;
    case ProtocolKind::NICv2:
      run = generate_nicv2(ds, spec.num_batches, spec.max_start, seed);
      break;
  }
  run.tag = spec.tag();
  return run;
}

std::vector<std::string> validate_run(const Dataset& ds, const ProtocolRun& run,
                                      const ProtocolSpec& spec) {
  std::vector<std::string> problems;
  auto fail = [&](std::string msg) { problems.push_back(std::move(msg)); };

  std::vector<int> seen(ds.train.size(), 0);
  std::vector<int> first(static_cast<std::size_t>(ds.num_classes), 0);
  for (std::size_t b = 0; b < run.batches.size(); ++b) {
    const auto& batch = run.batches[b];
    if (batch.batch_index != static_cast<int>(b) + 1) fail("batch " + std::to_string(b + 1) + " misnumbered");
    for (auto i : batch.sessions) {
      if (i >= ds.train.size()) {
        fail("batch " + std::to_string(b + 1) + " names a missing session");
        continue;
      }
      ++seen[i];
      auto& f = first[static_cast<std::size_t>(ds.train[i].class_id)];
      if (f == 0) f = static_cast<int>(b) + 1;
    }
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (seen[i] != 1) {
      fail("session " + std::to_string(i) + " placed " + std::to_string(seen[i]) + " times");
    }
  }

  switch (spec.kind) {
    case ProtocolKind::NICv2: {
      if (static_cast<int>(run.batches.size()) != spec.num_batches) fail("wrong batch count");
      if (run.batches.empty()) break;
      const int cats = ds.num_categories();
      const auto& b1 = run.batches.front();
      std::set<int> b1_cats;
      for (auto i : b1.sessions) b1_cats.insert(ds.train.at(i).category_id);
      if (b1.sessions.size() != static_cast<std::size_t>(cats) || b1_cats.size() != b1.sessions.size()) {
        fail("batch 1 must hold one session of one class per category");
      }
      const std::size_t cap = (ds.train.size() - static_cast<std::size_t>(cats)) /
                              static_cast<std::size_t>(std::max(spec.num_batches - 1, 1));
      for (std::size_t b = 1; b < run.batches.size(); ++b) {
        if (run.batches[b].sessions.size() != cap) {
          fail("batch " + std::to_string(b + 1) + " holds " +
               std::to_string(run.batches[b].sessions.size()) + " sessions, expected " +
               std::to_string(cap));
        }
      }
      const int max_start = spec.max_start > 0 ? spec.max_start : default_max_start(spec.num_batches);
      if (run.insertion_point.size() != static_cast<std::size_t>(ds.num_classes)) {
        fail("missing insertion points");
        break;
      }
      for (int c = 0; c < ds.num_classes; ++c) {
        const int ip = run.insertion_point[static_cast<std::size_t>(c)];
        const int f = first[static_cast<std::size_t>(c)];
        if (ip != 1 && (ip < 2 || ip > max_start)) {
          fail("class " + std::to_string(c) + " insertion point " + std::to_string(ip) + " outside [2, max_start]");
        }
        if (f < ip) fail("class " + std::to_string(c) + " appears before its insertion point");
      }
      break;
    }
    case ProtocolKind::NI: {
      for (const auto& b : run.batches) {
        if (static_cast<int>(b.classes(ds).size()) != ds.num_classes ||
            b.sessions.size() != static_cast<std::size_t>(ds.num_classes)) {
          fail("NI batch " + std::to_string(b.batch_index) + " must hold one session per class");
        }
      }
      break;
    }
    case ProtocolKind::NC: {
      if (static_cast<int>(run.batches.size()) != spec.num_batches) fail("wrong batch count");
      std::vector<int> home(static_cast<std::size_t>(ds.num_classes), 0);
      for (const auto& b : run.batches) {
        for (int c : b.classes(ds)) {
          auto& h = home[static_cast<std::size_t>(c)];
          if (h != 0) fail("class " + std::to_string(c) + " spans several NC batches");
          h = b.batch_index;
        }
      }
      break;
    }
  }
  return problems;
}

namespace {

void write_sessions(std::ostream& os, const Dataset& ds, const SessionRecord& s) {
  if (!s.paths.empty()) {
    for (const auto& p : s.paths) os << p << ' ' << s.class_id << '\n';
    return;
  }
  // Synthetic sessions have no files; name rows of the pattern table.
  (void)ds;
  for (std::size_t i = 0; i < s.count; ++i) {
    os << "synthetic/s" << s.session_id + 1 << "/o" << s.class_id + 1 << "/row_"
       << s.offset + i * s.stride << ' ' << s.class_id << '\n';
  }
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + p.string());
  return os;
}

}  // namespace

void export_filelists(const Dataset& ds, std::span<const ProtocolRun> runs,
                      const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto run_dir = dir / ("run" + std::to_string(r));
    std::filesystem::create_directories(run_dir);
    for (const auto& b : runs[r].batches) {
      char name[64];
      std::snprintf(name, sizeof name, "train_batch_%02d_filelist.txt", b.batch_index - 1);
      auto os = open_out(run_dir / name);
      for (auto i : b.sessions) write_sessions(os, ds, ds.train.at(i));
    }
  }
  auto os = open_out(dir / "test_filelist.txt");
  for (const auto& s : subsample_test(ds.test)) write_sessions(os, ds, s);
}

}  // namespace rfcl
