#include "rfcl/cwr.hpp"

#include <algorithm>
#include <cmath>

namespace rfcl {
namespace {

void check_class(const HeadState& head, int c) {
  if (c < 0 || static_cast<std::size_t>(c) >= head.classes) {
    throw DimensionError("class " + std::to_string(c) + " outside head of " +
                         std::to_string(head.classes) + " classes");
  }
}

void check_head_shape(const Network& net, std::size_t size) {
  const std::size_t expect = net.num_classes() * (net.feature_size() + 1);
  if (size != expect) {
    throw DimensionError("head matrix has " + std::to_string(size) + " values, network head " +
                         std::to_string(expect));
  }
}

}  // namespace

HeadState::HeadState(std::size_t num_classes, std::size_t num_inputs)
    : classes(num_classes),
      inputs(num_inputs),
      cw(num_classes * (num_inputs + 1), 0.0),
      tw(num_classes * (num_inputs + 1), 0.0),
      known(num_classes, false) {}

void ClassCounters::begin_batch(std::span<const int> labels) {
  std::fill(cur.begin(), cur.end(), 0);
  for (int c : labels) {
    if (c < 0 || static_cast<std::size_t>(c) >= cur.size()) {
      throw DimensionError("label " + std::to_string(c) + " outside class range");
    }
    ++cur[static_cast<std::size_t>(c)];
  }
}

std::vector<int> classes_in(std::span<const int> labels) {
  std::vector<int> out(labels.begin(), labels.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void cwr_star_prepare(HeadState& head, std::span<const int> batch_classes) {
  std::fill(head.tw.begin(), head.tw.end(), 0.0);
  for (int c : batch_classes) {
    check_class(head, c);
    const auto j = static_cast<std::size_t>(c);
    std::copy_n(head.cw_row(j).begin(), head.row_size(), head.tw_row(j).begin());
    head.known[j] = true;
  }
}

void cwr_plus_prepare(HeadState& head, std::span<const int> batch_classes) {
  std::fill(head.tw.begin(), head.tw.end(), 0.0);
  for (int c : batch_classes) {
    check_class(head, c);
    head.known[static_cast<std::size_t>(c)] = true;
  }
}

HeadMean head_mean(const HeadState& head, std::span<const int> batch_classes) {
  HeadMean m;
  if (batch_classes.empty()) return m;
  for (int c : batch_classes) {
    check_class(head, c);
    const auto row = head.tw_row(static_cast<std::size_t>(c));
    for (std::size_t i = 0; i < head.inputs; ++i) m.weight += row[i];
    m.bias += row[head.inputs];
  }
  const auto n = static_cast<real>(batch_classes.size());
  if (head.inputs > 0) m.weight /= n * static_cast<real>(head.inputs);
  m.bias /= n;
  return m;
}

void cwr_star_consolidate(HeadState& head, ClassCounters& counters,
                          std::span<const int> batch_classes) {
  const HeadMean avg = head_mean(head, batch_classes);
  for (int c : batch_classes) {
    const auto j = static_cast<std::size_t>(c);
    if (counters.cur.at(j) == 0) {
      throw ProtocolError("class " + std::to_string(c) + " listed in batch with no patterns");
    }
    const real wpast = std::sqrt(static_cast<real>(counters.past[j]) /
                                 static_cast<real>(counters.cur[j]));
    auto cw = head.cw_row(j);
    const auto tw = head.tw_row(j);
    for (std::size_t i = 0; i < head.row_size(); ++i) {
      const real shift = i < head.inputs ? avg.weight : avg.bias;
      cw[i] = (cw[i] * wpast + (tw[i] - shift)) / (wpast + 1.0);
    }
    counters.past[j] += counters.cur[j];
  }
}

void cwr_plus_consolidate(HeadState& head, std::span<const int> batch_classes) {
  const HeadMean avg = head_mean(head, batch_classes);
  for (int c : batch_classes) {
    const auto j = static_cast<std::size_t>(c);
    auto cw = head.cw_row(j);
    const auto tw = head.tw_row(j);
    for (std::size_t i = 0; i < head.row_size(); ++i) {
      cw[i] = tw[i] - (i < head.inputs ? avg.weight : avg.bias);
    }
  }
}

void write_head(Network& net, std::span<const real> rows) {
  check_head_shape(net, rows.size());
  const std::size_t layer = net.head_layer();
  const std::size_t in = net.feature_size();
  ParamSet& p = net.params();
  auto w = p.view(layer, ParamRole::Weight);
  auto b = p.view(layer, ParamRole::Bias);
  for (std::size_t j = 0; j < net.num_classes(); ++j) {
    std::copy_n(rows.begin() + static_cast<std::ptrdiff_t>(j * (in + 1)), in,
                w.begin() + static_cast<std::ptrdiff_t>(j * in));
    b[j] = rows[j * (in + 1) + in];
  }
}

std::vector<real> read_head(const Network& net) {
  const std::size_t layer = net.head_layer();
  const std::size_t in = net.feature_size();
  const auto w = net.params().view(layer, ParamRole::Weight);
  const auto b = net.params().view(layer, ParamRole::Bias);
  std::vector<real> rows(net.num_classes() * (in + 1));
  for (std::size_t j = 0; j < net.num_classes(); ++j) {
    std::copy_n(w.begin() + static_cast<std::ptrdiff_t>(j * in), in,
                rows.begin() + static_cast<std::ptrdiff_t>(j * (in + 1)));
    rows[j * (in + 1) + in] = b[j];
  }
  return rows;
}

}  // namespace rfcl
