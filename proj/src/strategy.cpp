#include "rfcl/strategy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rfcl/sgd.hpp"

namespace rfcl {
namespace {

struct StrategyTag {
  StrategyKind kind;
  std::string_view name;
};

constexpr StrategyTag kStrategyTags[] = {
    {StrategyKind::Naive, "naive"},         {StrategyKind::CwrPlus, "cwr_plus"},
    {StrategyKind::CwrStar, "cwr_star"},    {StrategyKind::Ewc, "ewc"},
    {StrategyKind::Ar1Star, "ar1_star"},    {StrategyKind::Dslda, "dslda"},
    {StrategyKind::Cumulative, "cumulative"}, {StrategyKind::LwfStub, "lwf_stub"},
};

std::mt19937_64 shuffle_rng(std::uint64_t seed) { return std::mt19937_64(seed ^ 0x5eed5eed5eedULL); }

void check_positive(real v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be finite and > 0");
}

}  // namespace

std::string_view strategy_name(StrategyKind kind) {
  for (const auto& t : kStrategyTags) {
    if (t.kind == kind) return t.name;
  }
  return "?";
}

StrategyKind parse_strategy(std::string_view tag) {
  for (const auto& t : kStrategyTags) {
    if (t.name == tag) return t.kind;
  }
  throw ConfigError("unknown strategy '" + std::string(tag) + "'");
}

const std::vector<StrategyKind>& all_strategies() {
  static const std::vector<StrategyKind> kinds = [] {
    std::vector<StrategyKind> v;
    for (const auto& t : kStrategyTags) v.push_back(t.kind);
    return v;
  }();
  return kinds;
}

std::string_view freeze_name(FreezeMode mode) {
  switch (mode) {
    case FreezeMode::None: return "none";
    case FreezeMode::Depthwise: return "depthwise";
    case FreezeMode::Pointwise: return "pointwise";
    case FreezeMode::AllConv: return "conv";
  }
  return "?";
}

FreezeMode parse_freeze(std::string_view tag) {
  for (FreezeMode m : {FreezeMode::None, FreezeMode::Depthwise, FreezeMode::Pointwise,
                       FreezeMode::AllConv}) {
    if (freeze_name(m) == tag) return m;
  }
  throw ConfigError("unknown freeze mode '" + std::string(tag) + "'");
}

LabeledSet concat(std::span<const LabeledSet* const> sets) {
  LabeledSet out;
  std::size_t rows = 0;
  std::vector<std::size_t> shape;
  for (const LabeledSet* s : sets) {
    if (s->size() == 0) continue;
    if (shape.empty()) {
      shape = s->x.shape();
    } else if (s->x.row_size() != shape_product(shape) / shape[0]) {
      throw DimensionError("cannot concatenate sets with different pattern sizes");
    }
    rows += s->size();
  }
  if (rows == 0) return out;
  shape[0] = rows;
  std::vector<real> data;
  data.reserve(shape_product(shape));
  for (const LabeledSet* s : sets) {
    data.insert(data.end(), s->x.data().begin(), s->x.data().end());
    out.labels.insert(out.labels.end(), s->labels.begin(), s->labels.end());
  }
  out.x = Tensor(std::move(shape), std::move(data));
  return out;
}

StrategyConfig StrategyConfig::defaults(StrategyKind kind) {
  StrategyConfig c;
  switch (kind) {
    case StrategyKind::Naive:
    case StrategyKind::Cumulative:
    case StrategyKind::Dslda:
      break;
    case StrategyKind::LwfStub:
      c.eta_bi = 0.00005;
      c.lambda = 0.1;  // distillation weight; unused by the stub
      break;
    case StrategyKind::Ewc:
      c.eta_bi = 0.0001;
      c.lambda = 2.0e6;
      break;
    case StrategyKind::CwrPlus:
    case StrategyKind::CwrStar:
      c.epochs_b1 = 4;
      c.epochs_bi = 4;
      c.eta_bi = 0.001;
      c.eta_cwr = 0.001;
      break;
    case StrategyKind::Ar1Star:
      c.epochs_b1 = 4;
      c.epochs_bi = 4;
      c.eta_bi = 0.0001;
      c.eta_cwr = 0.001;
      break;
  }
  return c;
}

void StrategyConfig::validate() const {
  check_positive(eta_b1, "eta_b1");
  check_positive(eta_bi, "eta_bi");
  check_positive(eta_cwr, "eta_cwr");
  check_positive(max_f, "max_f");
  check_positive(si_damping, "si_damping");
  if (epochs_b1 <= 0 || epochs_bi <= 0) throw ConfigError("epochs must be positive");
  if (mini_batch_size == 0) throw ConfigError("mini_batch_size must be positive");
  if (lambda < 0.0 || !std::isfinite(lambda)) throw ConfigError("lambda must be finite and >= 0");
  if (w_past < 0.0 || w_cur < 0.0) throw ConfigError("w_past and w_cur must be >= 0");
  if (!(shrinkage >= 0.0 && shrinkage <= 1.0)) throw ConfigError("shrinkage must lie in [0, 1]");
  if (schedule.warmup_iterations < 0 || schedule.ramp_iterations < 0) {
    throw ConfigError("schedule iteration counts must be >= 0");
  }
  if (schedule.r_max < 1.0 || schedule.ramp_r_max < 1.0) throw ConfigError("r_max must be >= 1");
  if (schedule.d_max < 0.0 || schedule.ramp_d_max < 0.0) throw ConfigError("d_max must be >= 0");
  for (real a : {schedule.alpha_past, schedule.first_alpha_past}) {
    if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("alpha_past must lie in [0, 1]");
  }
}

OverheadRecord memory_overhead_report(StrategyKind kind, const OverheadInputs& in) {
  OverheadRecord r;
  switch (kind) {
    case StrategyKind::Naive:
    case StrategyKind::LwfStub:
      break;
    case StrategyKind::Ewc:
      r.param_values = 2 * in.param_count;
      break;
    case StrategyKind::Ar1Star:
      r.param_values = in.param_count;
      break;
    case StrategyKind::CwrPlus:
    case StrategyKind::CwrStar:
      r.param_values = in.num_classes * (in.feature_size + 1) + in.num_classes;
      break;
    case StrategyKind::Dslda:
      r.param_values = in.num_classes * in.feature_size + in.feature_size * in.feature_size +
                       in.num_classes;
      break;
    case StrategyKind::Cumulative:
      r.data_bytes = in.training_bytes_seen;
      break;
  }
  r.param_bytes = r.param_values * sizeof(real);
  return r;
}

Learner::Learner(StrategyKind kind, StrategyConfig cfg, NetworkSpec spec, std::uint64_t seed)
    : kind_(kind),
      cfg_(std::move(cfg)),
      spec_(std::move(spec)),
      seed_(seed),
      net_(spec_, seed),
      rng_(shuffle_rng(seed)) {
  cfg_.validate();
  const ParamSet& p = std::as_const(net_).params();
  is_head_.assign(p.size(), false);
  for (const ParamBlock& b : p.blocks()) {
    if (b.kind != LayerKind::Head) continue;
    for (std::size_t k = b.offset; k < b.offset + b.size; ++k) is_head_[k] = true;
  }
  head_ = HeadState(net_.num_classes(), net_.feature_size());
  counters_ = ClassCounters(net_.num_classes());
  importance_ = ImportanceState(p.size(), kind_ == StrategyKind::Ewc);
  importance_.max_f = cfg_.max_f;
  importance_.lambda = cfg_.lambda;
  importance_.w_past = cfg_.w_past;
  importance_.w_cur = cfg_.w_cur;
  importance_.damping = cfg_.si_damping;
  if (kind_ == StrategyKind::Dslda) {
    dslda_.emplace(net_.num_classes(), net_.feature_size(), cfg_.shrinkage);
  }
}

bool Learner::uses_cwr() const {
  return kind_ == StrategyKind::CwrPlus || kind_ == StrategyKind::CwrStar ||
         kind_ == StrategyKind::Ar1Star;
}

void Learner::apply_freezing() {
  const FreezeMode mode = cfg_.freeze;
  freeze_layers(net_.params(), [mode](LayerKind k) {
    switch (mode) {
      case FreezeMode::None: return false;
      case FreezeMode::Depthwise: return k == LayerKind::Depthwise;
      case FreezeMode::Pointwise: return k == LayerKind::Pointwise;
      case FreezeMode::AllConv: return k == LayerKind::Depthwise || k == LayerKind::Pointwise;
    }
    return false;
  });
  if ((kind_ == StrategyKind::CwrPlus || kind_ == StrategyKind::CwrStar) &&
      !cfg_.cwr_train_representation) {
    freeze_layers(net_.params(), [](LayerKind k) { return k != LayerKind::Head; });
  }
}

void Learner::step(const Gradient& g, int batch_index) {
  const real eta = batch_index == 1 ? cfg_.eta_b1 : cfg_.eta_bi;
  switch (kind_) {
    case StrategyKind::Naive:
    case StrategyKind::LwfStub:
    case StrategyKind::Cumulative:
    case StrategyKind::Dslda:
      sgd_step(net_.params(), g, eta);
      return;
    case StrategyKind::Ewc:
      ewc_update(net_.params(), g, importance_, eta);
      return;
    case StrategyKind::CwrPlus:
    case StrategyKind::CwrStar:
    case StrategyKind::Ar1Star:
      break;
  }
  const real eta_head = batch_index == 1 ? cfg_.eta_b1 : cfg_.eta_cwr;
  Gradient g_head(g.size(), 0.0), g_rep(g.size(), 0.0);
  for (std::size_t k = 0; k < g.size(); ++k) (is_head_[k] ? g_head : g_rep)[k] = g[k];
  ParamSet& p = net_.params();
  sgd_step(p, g_head, eta_head);
  const bool si = kind_ == StrategyKind::Ar1Star && cfg_.si_enabled;
  std::vector<real> before;
  if (si) before.assign(p.values().begin(), p.values().end());
  lr_modulated_update(p, g_rep, importance_, eta);
  if (si) {
    std::vector<real> delta(before.size());
    for (std::size_t k = 0; k < delta.size(); ++k) delta[k] = p.values()[k] - before[k];
    si_accumulate(importance_, g_rep, delta);
  }
}

void Learner::sgd_epochs(const LabeledSet& data, int epochs, int batch_index,
                         int batch1_iterations, std::mt19937_64& rng) {
  const std::size_t n = data.size();
  const std::size_t mbs = std::min(cfg_.mini_batch_size, n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  int iteration = 0;
  for (int e = 0; e < epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += mbs) {
      const std::size_t stop = std::min(start + mbs, n);
      const std::span<const std::size_t> idx(order.data() + start, stop - start);
      const Tensor xb = data.x.gather_rows(idx);
      std::vector<int> yb(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) yb[i] = data.labels[idx[i]];
      net_.set_norm_params(schedule_params(cfg_.schedule, batch_index, iteration, batch1_iterations));
      const ForwardCache cache = net_.forward(xb, Mode::Train);
      net_.update_moving_moments(cache);
      const Gradient g = net_.backward(cache, yb);
      step(g, batch_index);
      ++iteration;
    }
  }
}

Gradient Learner::ewc_fisher(const LabeledSet& data) const {
  const std::size_t n = data.size();
  const std::size_t mbs = std::min(cfg_.mini_batch_size, n);
  Gradient fisher(net_.params().size(), 0.0);
  std::size_t count = 0;
  for (std::size_t start = 0; start < n; start += mbs) {
    const std::size_t stop = std::min(start + mbs, n);
    std::vector<std::size_t> idx(stop - start);
    std::iota(idx.begin(), idx.end(), start);
    const Tensor xb = data.x.gather_rows(idx);
    const std::vector<int> yb(data.labels.begin() + static_cast<std::ptrdiff_t>(start),
                              data.labels.begin() + static_cast<std::ptrdiff_t>(stop));
    const ForwardCache cache = net_.forward(xb, Mode::Train);
    const Gradient g = net_.backward(cache, yb);
    for (std::size_t k = 0; k < g.size(); ++k) fisher[k] += g[k] * g[k];
    ++count;
  }
  for (real& f : fisher) f /= static_cast<real>(count);
  return fisher;
}

void Learner::train_batch(const LabeledSet& batch) {
  if (batch.size() == 0) throw ProtocolError("training batch is empty");
  if (batch.x.rows() != batch.size()) {
    throw DimensionError("training batch has " + std::to_string(batch.x.rows()) + " patterns and " +
                         std::to_string(batch.size()) + " labels");
  }
  const int i = ++batch_index_;
  bytes_seen_ += batch.bytes();
  const auto iterations = [this](std::size_t n, int epochs) {
    const std::size_t mbs = std::min(cfg_.mini_batch_size, n);
    return epochs * static_cast<int>((n + mbs - 1) / mbs);
  };

  if (kind_ == StrategyKind::Cumulative) {
    history_.push_back(batch);
    std::vector<const LabeledSet*> parts;
    for (const auto& h : history_) parts.push_back(&h);
    const LabeledSet all = concat(parts);
    net_ = Network(spec_, seed_);
    std::mt19937_64 rng = shuffle_rng(seed_);
    sgd_epochs(all, cfg_.epochs_b1, 1, iterations(all.size(), cfg_.epochs_b1), rng);
    return;
  }

  if (kind_ == StrategyKind::Dslda) {
    if (i == 1) {
      sgd_epochs(batch, cfg_.epochs_b1, 1, iterations(batch.size(), cfg_.epochs_b1), rng_);
      freeze_layers(net_.params(), [](LayerKind) { return true; });
    }
    const Tensor f = net_.features(batch.x);
    for (std::size_t n = 0; n < batch.size(); ++n) dslda_update(*dslda_, f.row(n), batch.labels[n]);
    return;
  }

  if (i == 2) apply_freezing();
  const std::vector<int> classes = classes_in(batch.labels);
  if (uses_cwr()) {
    counters_.begin_batch(batch.labels);
    if (kind_ == StrategyKind::CwrPlus) {
      cwr_plus_prepare(head_, classes);
    } else {
      cwr_star_prepare(head_, classes);
    }
    write_head(net_, head_.tw);
  }
  if (kind_ == StrategyKind::Ar1Star) si_begin_batch(importance_, std::as_const(net_).params().values());

  const int epochs = i == 1 ? cfg_.epochs_b1 : cfg_.epochs_bi;
  sgd_epochs(batch, epochs, i, iterations(batch.size(), cfg_.epochs_b1), rng_);

  if (uses_cwr()) {
    head_.tw = read_head(net_);
    if (kind_ == StrategyKind::CwrPlus) {
      cwr_plus_consolidate(head_, classes);
      for (int c : classes) counters_.past[static_cast<std::size_t>(c)] += counters_.cur[static_cast<std::size_t>(c)];
    } else {
      cwr_star_consolidate(head_, counters_, classes);
    }
  }
  if (kind_ == StrategyKind::Ar1Star && cfg_.si_enabled) {
    fisher_consolidate(importance_, std::as_const(net_).params().values());
  } else if (kind_ == StrategyKind::Ewc) {
    const Gradient fisher = ewc_fisher(batch);
    fisher_consolidate(importance_, std::as_const(net_).params().values(), fisher);
  }
}

Network Learner::inference_network() const {
  Network n = net_;
  if (uses_cwr()) write_head(n, head_.cw);
  return n;
}

std::vector<int> Learner::predict(const Tensor& x) const {
  if (kind_ == StrategyKind::Dslda) {
    const DsldaClassifier clf(*dslda_);
    return clf.predict(net_.features(x));
  }
  if (uses_cwr()) return argmax_rows(inference_network().predict_logits(x));
  return argmax_rows(net_.predict_logits(x));
}

real Learner::evaluate(const LabeledSet& test) const {
  if (test.size() == 0) throw ConfigError("cannot evaluate on an empty test set");
  const std::vector<int> pred = predict(test.x);
  std::size_t correct = 0;
  for (std::size_t n = 0; n < pred.size(); ++n) correct += pred[n] == test.labels[n];
  return 100.0 * static_cast<real>(correct) / static_cast<real>(test.size());
}

OverheadRecord Learner::overhead() const {
  OverheadInputs in;
  in.param_count = net_.params().size();
  in.num_classes = net_.num_classes();
  in.feature_size = net_.feature_size();
  in.training_bytes_seen = bytes_seen_;
  return memory_overhead_report(kind_, in);
}

}  // namespace rfcl
