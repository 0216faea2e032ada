#pragma once

// Network weight file:
//   "RFCLNET\0"                8-byte magic
//   u32 version                (1)
//   u32 norm kind, f64 eps
//   3 x u64 input shape
//   u32 layer count, then per layer:
//       u32 kind, 3 x u64 in shape, 3 x u64 out shape, u64 kernel, u64 param count
//   u64 total parameter count, then f64 values in flat-index order
//   per normalization layer: u32 initialized, f64 mu[C], f64 sigma[C]
// All integers and floats little-endian.

#include <filesystem>
#include <iosfwd>

#include "rfcl/cwr.hpp"
#include "rfcl/importance.hpp"
#include "rfcl/network.hpp"

namespace rfcl {

inline constexpr std::uint32_t kWeightFileVersion = 1;

void write_network(std::ostream& os, const Network& net);
Network read_network(std::istream& is);

void save_network(const std::filesystem::path& path, const Network& net);
Network load_network(const std::filesystem::path& path);

// Strategy state file:
//   "RFCLSTA\0", u32 version,
//   head:       u64 classes, u64 inputs, f64 cw[], f64 tw[], u8 known[],
//               u64 past[], u64 cur[]
//   importance: u64 size, f64 max_f, lambda, w_past, w_cur, damping,
//               f64 F[], f64 trajectory[], f64 batch_start[],
//               u32 has_anchor, f64 anchor[] when present
struct StrategyState {
  HeadState head;
  ClassCounters counters;
  ImportanceState importance;
};

void write_strategy_state(std::ostream& os, const StrategyState& st);
StrategyState read_strategy_state(std::istream& is);

}  // namespace rfcl
