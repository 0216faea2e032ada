#include "rfcl/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace rfcl {
namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto* end = value.data() + value.size();
  auto [p, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || p != end || value.empty()) {
    throw ConfigError("config key '" + key + "': cannot parse '" + value + "'");
  }
  return out;
}

std::string fmt(real v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string shortest(real v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

NormKind parse_norm(const std::string& v) {
  if (v == "brn") return NormKind::BatchRenorm;
  if (v == "bn") return NormKind::BatchNorm;
  throw ConfigError("norm must be 'bn' or 'brn', got '" + v + "'");
}

std::string norm_name(NormKind n) { return n == NormKind::BatchRenorm ? "brn" : "bn"; }

std::size_t parse_shape_dim(const std::string& key, const std::string& v) {
  const auto n = parse_number<std::size_t>(key, v);
  if (n == 0) throw ConfigError("config key '" + key + "' must be positive");
  return n;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;
using Getter = std::function<std::string(const ExperimentConfig&)>;

struct Key {
  const char* name;
  Setter set;
  Getter get;
};

template <class T>
std::string opt_text(const std::optional<T>& v) {
  if (!v) return {};
  if constexpr (std::is_floating_point_v<T>) {
    return shortest(*v);
  } else {
    return std::to_string(*v);
  }
}

#define RFCL_OPT_REAL(field)                                                                      \
  Key {                                                                                           \
    #field, [](ExperimentConfig& c, const std::string& k, const std::string& v) {                 \
      c.field = parse_number<real>(k, v);                                                         \
    },                                                                                            \
        [](const ExperimentConfig& c) { return opt_text(c.field); }                               \
  }
#define RFCL_OPT_INT(field)                                                                       \
  Key {                                                                                           \
    #field, [](ExperimentConfig& c, const std::string& k, const std::string& v) {                 \
      c.field = parse_number<int>(k, v);                                                          \
    },                                                                                            \
        [](const ExperimentConfig& c) { return opt_text(c.field); }                               \
  }

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      {"strategy", [](auto& c, auto&, auto& v) { c.strategy = v; },
       [](auto& c) { return c.strategy; }},
      {"protocol", [](auto& c, auto&, auto& v) { c.protocol = v; },
       [](auto& c) { return c.protocol; }},
      {"max_start", [](auto& c, auto& k, auto& v) { c.max_start = parse_number<int>(k, v); },
       [](auto& c) { return std::to_string(c.max_start); }},
      {"arch", [](auto& c, auto&, auto& v) { c.arch = v; }, [](auto& c) { return c.arch; }},
      {"norm", [](auto& c, auto&, auto& v) { c.norm = parse_norm(v); },
       [](auto& c) { return norm_name(c.norm); }},
      {"freeze", [](auto& c, auto&, auto& v) { c.freeze = parse_freeze(v); },
       [](auto& c) { return std::string(freeze_name(c.freeze)); }},
      {"num_runs", [](auto& c, auto& k, auto& v) { c.num_runs = parse_number<int>(k, v); },
       [](auto& c) { return std::to_string(c.num_runs); }},
      {"seed", [](auto& c, auto& k, auto& v) { c.seed = parse_number<std::uint64_t>(k, v); },
       [](auto& c) { return std::to_string(c.seed); }},
      {"output_dir", [](auto& c, auto&, auto& v) { c.output_dir = v; },
       [](auto& c) { return c.output_dir; }},
      {"test_period", [](auto& c, auto& k, auto& v) { c.test_period = parse_shape_dim(k, v); },
       [](auto& c) { return std::to_string(c.test_period); }},
      RFCL_OPT_REAL(eta_b1),
      RFCL_OPT_REAL(eta_bi),
      RFCL_OPT_REAL(eta_cwr),
      RFCL_OPT_INT(epochs_b1),
      RFCL_OPT_INT(epochs_bi),
      {"mini_batch_size",
       [](auto& c, auto& k, auto& v) { c.mini_batch_size = parse_shape_dim(k, v); },
       [](auto& c) { return opt_text(c.mini_batch_size); }},
      RFCL_OPT_REAL(lambda),
      RFCL_OPT_REAL(max_f),
      RFCL_OPT_REAL(w_past),
      RFCL_OPT_REAL(w_cur),
      RFCL_OPT_REAL(shrinkage),
      RFCL_OPT_REAL(si_damping),
      RFCL_OPT_REAL(r_max),
      RFCL_OPT_REAL(d_max),
      RFCL_OPT_REAL(alpha_past),
      RFCL_OPT_REAL(ramp_r_max),
      RFCL_OPT_REAL(ramp_d_max),
      RFCL_OPT_REAL(first_alpha_past),
      RFCL_OPT_INT(warmup_iters),
      {"data_classes", [](auto& c, auto& k, auto& v) { c.data.num_classes = parse_number<int>(k, v); },
       [](auto& c) { return std::to_string(c.data.num_classes); }},
      {"data_classes_per_category",
       [](auto& c, auto& k, auto& v) { c.data.classes_per_category = parse_number<int>(k, v); },
       [](auto& c) { return std::to_string(c.data.classes_per_category); }},
      {"data_train_sessions",
       [](auto& c, auto& k, auto& v) { c.data.train_sessions = parse_number<int>(k, v); },
       [](auto& c) { return std::to_string(c.data.train_sessions); }},
      {"data_test_sessions",
       [](auto& c, auto& k, auto& v) { c.data.test_sessions = parse_number<int>(k, v); },
       [](auto& c) { return std::to_string(c.data.test_sessions); }},
      {"data_patterns_per_session",
       [](auto& c, auto& k, auto& v) { c.data.patterns_per_session = parse_shape_dim(k, v); },
       [](auto& c) { return std::to_string(c.data.patterns_per_session); }},
      {"data_channels", [](auto& c, auto& k, auto& v) { c.data.shape.channels = parse_shape_dim(k, v); },
       [](auto& c) { return std::to_string(c.data.shape.channels); }},
      {"data_height", [](auto& c, auto& k, auto& v) { c.data.shape.height = parse_shape_dim(k, v); },
       [](auto& c) { return std::to_string(c.data.shape.height); }},
      {"data_width", [](auto& c, auto& k, auto& v) { c.data.shape.width = parse_shape_dim(k, v); },
       [](auto& c) { return std::to_string(c.data.shape.width); }},
      {"data_class_spread",
       [](auto& c, auto& k, auto& v) { c.data.class_spread = parse_number<real>(k, v); },
       [](auto& c) { return shortest(c.data.class_spread); }},
      {"data_drift", [](auto& c, auto& k, auto& v) { c.data.drift = parse_number<real>(k, v); },
       [](auto& c) { return shortest(c.data.drift); }},
      {"data_noise", [](auto& c, auto& k, auto& v) { c.data.noise = parse_number<real>(k, v); },
       [](auto& c) { return shortest(c.data.noise); }},
      {"data_seed", [](auto& c, auto& k, auto& v) { c.data.seed = parse_number<std::uint64_t>(k, v); },
       [](auto& c) { return std::to_string(c.data.seed); }},
  };
  return table;
}

#undef RFCL_OPT_REAL
#undef RFCL_OPT_INT

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + p.string());
  return os;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <class T>
std::string table_csv(const ExperimentResult& r, int digits, T RunResult::*field) {
  std::ostringstream os;
  os << "Batch";
  for (std::size_t k = 0; k < r.runs.size(); ++k) os << ",Run " << k;
  os << '\n';
  for (std::size_t b = 0; b < r.num_batches(); ++b) {
    os << b;
    for (const auto& run : r.runs) os << ',' << fmt((run.*field).at(b), digits);
    os << '\n';
  }
  return os.str();
}

}  // namespace

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  for (const auto& k : keys()) {
    if (key == k.name) {
      k.set(*this, key, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

ExperimentConfig ExperimentConfig::parse(std::istream& is) {
  ExperimentConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    try {
      cfg.set(key, value);
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse(in);
}

std::string ExperimentConfig::to_text() const {
  std::ostringstream os;
  for (const auto& k : keys()) {
    const std::string v = k.get(*this);
    if (v.empty()) continue;  // strategy or schedule default
    os << k.name << " = " << v << '\n';
  }
  return os.str();
}

StrategyKind ExperimentConfig::strategy_kind() const { return parse_strategy(strategy); }

ProtocolSpec ExperimentConfig::protocol_spec() const {
  ProtocolSpec spec = ProtocolSpec::parse(protocol);
  spec.max_start = max_start;
  return spec;
}

StrategyConfig ExperimentConfig::strategy_config() const {
  StrategyConfig s = StrategyConfig::defaults(strategy_kind());
  auto apply = [](auto& dst, const auto& src) {
    if (src) dst = *src;
  };
  apply(s.eta_b1, eta_b1);
  apply(s.eta_bi, eta_bi);
  apply(s.eta_cwr, eta_cwr);
  apply(s.epochs_b1, epochs_b1);
  apply(s.epochs_bi, epochs_bi);
  apply(s.mini_batch_size, mini_batch_size);
  apply(s.lambda, lambda);
  apply(s.max_f, max_f);
  apply(s.w_past, w_past);
  apply(s.w_cur, w_cur);
  apply(s.shrinkage, shrinkage);
  apply(s.si_damping, si_damping);
  s.freeze = freeze;
  s.schedule = BrnSchedule::for_protocol(protocol_spec().schedule_tag());
  apply(s.schedule.r_max, r_max);
  apply(s.schedule.d_max, d_max);
  apply(s.schedule.alpha_past, alpha_past);
  apply(s.schedule.ramp_r_max, ramp_r_max);
  apply(s.schedule.ramp_d_max, ramp_d_max);
  apply(s.schedule.first_alpha_past, first_alpha_past);
  apply(s.schedule.warmup_iterations, warmup_iters);
  s.validate();
  return s;
}

void ExperimentConfig::validate() const {
  if (num_runs <= 0) throw ConfigError("num_runs must be positive");
  if (test_period == 0) throw ConfigError("test_period must be positive");
  if (max_start < 0) throw ConfigError("max_start must be >= 0");
  data.validate();
  (void)strategy_config();
  (void)parse_architecture(arch, data.shape, static_cast<std::size_t>(data.num_classes), norm);
}

std::size_t ExperimentResult::num_batches() const {
  return runs.empty() ? 0 : runs.front().accuracy.size();
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  return run_experiment(cfg, synth_dataset(cfg.data));
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const Dataset& ds) {
  if (cfg.num_runs <= 0) throw ConfigError("num_runs must be positive");
  const StrategyKind kind = cfg.strategy_kind();
  const StrategyConfig scfg = cfg.strategy_config();
  const ProtocolSpec pspec = cfg.protocol_spec();
  const NetworkSpec net =
      parse_architecture(cfg.arch, ds.pattern_shape, static_cast<std::size_t>(ds.num_classes), cfg.norm);
  const LabeledSet test = materialize(ds, subsample_test(ds.test, cfg.test_period));

  ExperimentResult result;
  for (int r = 0; r < cfg.num_runs; ++r) {
    const ProtocolRun plan = generate(ds, pspec, run_seed(cfg.seed, r));
    Learner learner(kind, scfg, net, run_seed(~cfg.seed, r));
    RunResult run;
    run.accuracy.push_back(learner.evaluate(test));
    run.seconds.push_back(0.0);
    for (const auto& batch : plan.batches) {
      const LabeledSet data = materialize(ds, batch.sessions);
      const auto t0 = std::chrono::steady_clock::now();
      learner.train_batch(data);
      const auto t1 = std::chrono::steady_clock::now();
      run.seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
      run.accuracy.push_back(learner.evaluate(test));
    }
    run.overhead = learner.overhead();
    result.runs.push_back(std::move(run));
  }
  return result;
}

std::string accuracy_csv(const ExperimentResult& r) { return table_csv(r, 3, &RunResult::accuracy); }

std::string timing_csv(const ExperimentResult& r) { return table_csv(r, 6, &RunResult::seconds); }

AccuracyTable parse_accuracy_csv(std::istream& is) {
  AccuracyTable t;
  std::string line;
  if (!std::getline(is, line) || !line.starts_with("Batch")) {
    throw ConfigError("accuracy CSV must start with a 'Batch' header");
  }
  const auto runs = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(fields, cell, ',')) cells.push_back(cell);
    if (cells.size() != runs + 1) {
      throw ConfigError("accuracy CSV line " + std::to_string(lineno) + " has the wrong column count");
    }
    t.batches.push_back(parse_number<int>("Batch", cells[0]));
    std::vector<real> row;
    for (std::size_t k = 1; k < cells.size(); ++k) row.push_back(parse_number<real>("Run", cells[k]));
    t.values.push_back(std::move(row));
  }
  return t;
}

Aggregate aggregate(const AccuracyTable& t) {
  Aggregate a;
  for (const auto& row : t.values) {
    if (row.empty()) throw ConfigError("accuracy row without runs");
    real mean = 0.0;
    for (real v : row) mean += v;
    mean /= static_cast<real>(row.size());
    real var = 0.0;
    for (real v : row) var += (v - mean) * (v - mean);
    a.mean.push_back(mean);
    a.stddev.push_back(std::sqrt(var / static_cast<real>(row.size())));
  }
  return a;
}

void write_outputs(const ExperimentConfig& cfg, const ExperimentResult& r,
                   const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  open_out(dir / "accuracy.csv") << accuracy_csv(r);
  open_out(dir / "timing.csv") << timing_csv(r);
  open_out(dir / "config.txt") << cfg.to_text();
  auto os = open_out(dir / "overhead.csv");
  os << "strategy,data_bytes,param_values,param_bytes\n";
  if (!r.runs.empty()) {
    const auto& o = r.runs.front().overhead;
    os << cfg.strategy << ',' << o.data_bytes << ',' << o.param_values << ',' << o.param_bytes << '\n';
  }
}

std::string accuracy_svg(std::span<const Series> series) {
  constexpr double W = 720, H = 420, L = 60, R = 160, T = 20, B = 50;
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                 "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  std::size_t n = 0;
  for (const auto& s : series) n = std::max(n, s.data.mean.size());
  const double xmax = n > 1 ? static_cast<double>(n - 1) : 1.0;
  auto px = [&](double b) { return L + (W - L - R) * b / xmax; };
  auto py = [&](double acc) { return T + (H - T - B) * (1.0 - std::clamp(acc, 0.0, 100.0) / 100.0); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (int g = 0; g <= 100; g += 20) {
    os << "<line x1=\"" << L << "\" x2=\"" << W - R << "\" y1=\"" << py(g) << "\" y2=\"" << py(g)
       << "\" stroke=\"#ddd\"/>\n";
    os << "<text x=\"" << L - 8 << "\" y=\"" << py(g) + 4 << "\" text-anchor=\"end\">" << g << "</text>\n";
  }
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">Batch</text>\n";
  os << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" transform=\"rotate(-90 16 " << (T + H - B) / 2
     << ")\" text-anchor=\"middle\">Accuracy (%)</text>\n";
  os << "<text x=\"" << L << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">0</text>\n";
  os << "<text x=\"" << W - R << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << n - (n > 0)
     << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = colors[k % std::size(colors)];
    std::ostringstream band, line;
    for (std::size_t b = 0; b < s.data.mean.size(); ++b) {
      band << (b ? " " : "") << px(static_cast<double>(b)) << ',' << py(s.data.mean[b] + s.data.stddev[b]);
      line << (b ? " " : "") << px(static_cast<double>(b)) << ',' << py(s.data.mean[b]);
    }
    for (std::size_t b = s.data.mean.size(); b-- > 0;) {
      band << ' ' << px(static_cast<double>(b)) << ',' << py(s.data.mean[b] - s.data.stddev[b]);
    }
    os << "<polygon points=\"" << band.str() << "\" fill=\"" << color << "\" fill-opacity=\"0.15\"/>\n";
    os << "<polyline points=\"" << line.str() << "\" fill=\"none\" stroke=\"" << color
       << "\" stroke-width=\"1.5\"/>\n";
    os << "<text x=\"" << W - R + 10 << "\" y=\"" << T + 16 * (k + 1) << "\" fill=\"" << color << "\">"
       << s.name << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void write_report(std::span<const std::filesystem::path> result_dirs,
                  const std::filesystem::path& out_dir) {
  if (result_dirs.empty()) throw ConfigError("report needs at least one result directory");
  std::vector<Series> series;
  std::ostringstream md, overhead;
  md << "# Results\n\n";
  md << "| Run | Strategy | Protocol | Batches | Final accuracy (%) | Std |\n";
  md << "|---|---|---|---|---|---|\n";
  overhead << "| Strategy | Stored data (bytes) | Extra values | Extra bytes |\n|---|---|---|---|\n";
  for (const auto& dir : result_dirs) {
    std::istringstream csv(read_file(dir / "accuracy.csv"));
    const AccuracyTable table = parse_accuracy_csv(csv);
    if (table.values.empty()) throw ConfigError(dir.string() + "/accuracy.csv has no rows");
    std::istringstream conf(read_file(dir / "config.txt"));
    const ExperimentConfig cfg = ExperimentConfig::parse(conf);
    Aggregate agg = aggregate(table);
    const std::string name = dir.filename().empty() ? dir.parent_path().filename().string()
                                                    : dir.filename().string();
    md << "| " << name << " | " << cfg.strategy << " | " << cfg.protocol << " | "
       << table.values.size() - 1 << " | " << fmt(agg.mean.back(), 2) << " | "
       << fmt(agg.stddev.back(), 2) << " |\n";
    if (std::filesystem::exists(dir / "overhead.csv")) {
      std::istringstream oh(read_file(dir / "overhead.csv"));
      std::string header, row;
      std::getline(oh, header);
      if (std::getline(oh, row) && !row.empty()) {
        std::istringstream cells(row);
        std::string cell;
        std::vector<std::string> parts;
        while (std::getline(cells, cell, ',')) parts.push_back(cell);
        if (parts.size() == 4) {
          overhead << "| " << parts[0] << " | " << parts[1] << " | " << parts[2] << " | " << parts[3] << " |\n";
        }
      }
    }
    series.push_back({name, std::move(agg)});
  }
  md << "\n## Memory overhead\n\n" << overhead.str();
  md << "\n![accuracy](accuracy.svg)\n";
  std::filesystem::create_directories(out_dir);
  open_out(out_dir / "report.md") << md.str();
  open_out(out_dir / "accuracy.svg") << accuracy_svg(series);
}

}  // namespace rfcl
