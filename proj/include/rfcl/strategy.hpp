#pragma once

#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "rfcl/cwr.hpp"
#include "rfcl/dslda.hpp"
#include "rfcl/importance.hpp"
#include "rfcl/network.hpp"

namespace rfcl {

enum class StrategyKind { Naive, CwrPlus, CwrStar, Ewc, Ar1Star, Dslda, Cumulative, LwfStub };

std::string_view strategy_name(StrategyKind kind);
// Tags: naive, cwr_plus, cwr_star, ewc, ar1_star, dslda, cumulative, lwf_stub.
StrategyKind parse_strategy(std::string_view tag);
const std::vector<StrategyKind>& all_strategies();

// Which convolution filters stop learning from batch 2 on.
enum class FreezeMode { None, Depthwise, Pointwise, AllConv };

std::string_view freeze_name(FreezeMode mode);
FreezeMode parse_freeze(std::string_view tag);

// Patterns and labels of one training batch or test set.
struct LabeledSet {
  Tensor x;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t bytes() const { return x.size() * sizeof(real) + labels.size() * sizeof(int); }
};

// Concatenates rows of sets with equal pattern size.
LabeledSet concat(std::span<const LabeledSet* const> sets);

struct StrategyConfig {
  real eta_b1 = 0.001;
  int epochs_b1 = 2;
  real eta_bi = 0.000035;
  int epochs_bi = 2;
  // Output-layer rate from batch 2 on for CWR+, CWR* and AR1*.
  real eta_cwr = 0.001;
  std::size_t mini_batch_size = 128;
  real lambda = 0.0;
  real max_f = 0.001;
  real w_past = 0.5;
  real w_cur = 0.5;
  real si_damping = 1e-3;
  real shrinkage = 1e-4;
  FreezeMode freeze = FreezeMode::Depthwise;
  // AR1*: accumulate SI importance. Off leaves F at 0.
  bool si_enabled = true;
  // CWR+/CWR*: keep training the representation after batch 1 (at eta_bi).
  bool cwr_train_representation = false;
  BrnSchedule schedule;

  // Hyperparameter table defaults for each strategy.
  static StrategyConfig defaults(StrategyKind kind);
  void validate() const;
};

struct OverheadRecord {
  std::size_t data_bytes = 0;    // stored past training patterns
  std::size_t param_values = 0;  // extra per-parameter or head-sized values
  std::size_t param_bytes = 0;
};

struct OverheadInputs {
  std::size_t param_count = 0;  // trainable parameters of the network
  std::size_t num_classes = 0;
  std::size_t feature_size = 0;
  std::size_t training_bytes_seen = 0;
};

// Naive / LWF: nothing. EWC: F and theta* per parameter. AR1*: F only.
// CWR+/CWR*: cw rows plus class counters. DSLDA: class means, covariance and
// counts. Cumulative: all training data seen so far.
OverheadRecord memory_overhead_report(StrategyKind kind, const OverheadInputs& in);

// One training run of one strategy: a network plus whatever state the
// strategy keeps between batches.
class Learner {
 public:
  Learner(StrategyKind kind, StrategyConfig cfg, NetworkSpec spec, std::uint64_t seed);

  // Trains on the next batch (the first call is batch 1).
  void train_batch(const LabeledSet& batch);

  // Top-1 predictions with consolidated weights only. Never mutates state.
  std::vector<int> predict(const Tensor& x) const;
  // Accuracy in percent. Throws ConfigError on an empty set.
  real evaluate(const LabeledSet& test) const;

  OverheadRecord overhead() const;

  StrategyKind kind() const { return kind_; }
  const StrategyConfig& config() const { return cfg_; }
  int batches_seen() const { return batch_index_; }
  const Network& network() const { return net_; }
  Network& network() { return net_; }
  const HeadState& head() const { return head_; }
  HeadState& head() { return head_; }
  const ClassCounters& counters() const { return counters_; }
  const ImportanceState& importance() const { return importance_; }
  ImportanceState& importance() { return importance_; }
  const std::optional<DsldaState>& dslda() const { return dslda_; }

 private:
  bool uses_cwr() const;
  // Network whose output layer holds cw (CWR family) or the trained head.
  Network inference_network() const;

  void sgd_epochs(const LabeledSet& data, int epochs, int batch_index, int batch1_iterations,
                  std::mt19937_64& rng);
  void step(const Gradient& g, int batch_index);
  void apply_freezing();
  Gradient ewc_fisher(const LabeledSet& data) const;

  StrategyKind kind_;
  StrategyConfig cfg_;
  NetworkSpec spec_;
  std::uint64_t seed_;
  Network net_;
  std::mt19937_64 rng_;
  int batch_index_ = 0;
  std::vector<bool> is_head_;

  HeadState head_;
  ClassCounters counters_;
  ImportanceState importance_;
  std::optional<DsldaState> dslda_;
  std::vector<LabeledSet> history_;  // Cumulative only
  std::size_t bytes_seen_ = 0;
};

}  // namespace rfcl
