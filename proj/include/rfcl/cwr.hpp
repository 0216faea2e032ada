#pragma once

// Consolidated/temporary output weights for CWR+ and CWR*.

#include <span>
#include <vector>

#include "rfcl/network.hpp"

namespace rfcl {

// Output-layer weights, one row per class: [w_0 .. w_{inputs-1}, bias].
// The head is "maximal": every class row exists from the start, and a class
// becomes known the first time it appears in a batch.
struct HeadState {
  std::size_t classes = 0;
  std::size_t inputs = 0;
  std::vector<real> cw;  // consolidated, used for inference
  std::vector<real> tw;  // temporary, used for training
  std::vector<bool> known;

  HeadState() = default;
  HeadState(std::size_t num_classes, std::size_t num_inputs);

  std::size_t row_size() const { return inputs + 1; }
  std::span<real> cw_row(std::size_t j) { return std::span(cw).subspan(j * row_size(), row_size()); }
  std::span<real> tw_row(std::size_t j) { return std::span(tw).subspan(j * row_size(), row_size()); }
  std::span<const real> cw_row(std::size_t j) const {
    return std::span(cw).subspan(j * row_size(), row_size());
  }
  std::span<const real> tw_row(std::size_t j) const {
    return std::span(tw).subspan(j * row_size(), row_size());
  }
};

struct ClassCounters {
  std::vector<std::size_t> past;
  std::vector<std::size_t> cur;

  ClassCounters() = default;
  explicit ClassCounters(std::size_t num_classes) : past(num_classes, 0), cur(num_classes, 0) {}

  // Sets cur to the per-class pattern counts of `labels`.
  void begin_batch(std::span<const int> labels);
};

// Sorted distinct labels.
std::vector<int> classes_in(std::span<const int> labels);

// CWR*: tw[j] = cw[j] for batch classes, 0 otherwise. Marks batch classes known.
void cwr_star_prepare(HeadState& head, std::span<const int> batch_classes);
// CWR+: tw = 0 everywhere. Marks batch classes known.
void cwr_plus_prepare(HeadState& head, std::span<const int> batch_classes);

// Mean of tw over the batch-class rows, separately for weights and biases.
struct HeadMean {
  real weight = 0.0;
  real bias = 0.0;
};
HeadMean head_mean(const HeadState& head, std::span<const int> batch_classes);

// For each batch class j: wpast = sqrt(past_j / cur_j),
// cw[j] = (cw[j] * wpast + (tw[j] - avg(tw))) / (wpast + 1), past_j += cur_j.
// Throws ProtocolError if a listed class has cur_j = 0.
void cwr_star_consolidate(HeadState& head, ClassCounters& counters,
                          std::span<const int> batch_classes);
// cw[j] = tw[j] - avg(tw) for batch classes.
void cwr_plus_consolidate(HeadState& head, std::span<const int> batch_classes);

// Copy a head matrix (cw or tw layout) into / out of the network's output layer.
void write_head(Network& net, std::span<const real> rows);
std::vector<real> read_head(const Network& net);

}  // namespace rfcl
