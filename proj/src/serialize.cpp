#include "rfcl/serialize.hpp"

#include <algorithm>
#include <fstream>

#include "rfcl/binary_io.hpp"

namespace rfcl {
namespace {

const std::string kMagic("RFCLNET\0", 8);
const std::string kStateMagic("RFCLSTA\0", 8);

void put_counts(std::ostream& os, const std::vector<std::size_t>& v) {
  for (std::size_t c : v) binary::put_u64(os, c);
}

std::vector<std::size_t> get_counts(std::istream& is, std::size_t n) {
  std::vector<std::size_t> v(n);
  for (auto& c : v) c = binary::get_u64(is);
  return v;
}

void put_shape(std::ostream& os, const Shape3& s) {
  binary::put_u64(os, s.channels);
  binary::put_u64(os, s.height);
  binary::put_u64(os, s.width);
}

Shape3 get_shape(std::istream& is) {
  Shape3 s;
  s.channels = binary::get_u64(is);
  s.height = binary::get_u64(is);
  s.width = binary::get_u64(is);
  return s;
}

std::size_t layer_param_count(const ParamSet& p, std::size_t layer) {
  std::size_t n = 0;
  for (const auto& b : p.blocks()) {
    if (b.layer == layer) n += b.size;
  }
  return n;
}

}  // namespace

void write_network(std::ostream& os, const Network& net) {
  const NetworkSpec& spec = net.spec();
  binary::put_magic(os, kMagic);
  binary::put_u32(os, kWeightFileVersion);
  binary::put_u32(os, static_cast<std::uint32_t>(spec.norm));
  binary::put_f64(os, spec.epsilon);
  put_shape(os, spec.input);
  binary::put_u32(os, static_cast<std::uint32_t>(spec.layers.size()));
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    binary::put_u32(os, static_cast<std::uint32_t>(l.kind));
    put_shape(os, l.in);
    put_shape(os, l.out);
    binary::put_u64(os, l.kernel);
    binary::put_u64(os, layer_param_count(net.params(), i));
  }
  binary::put_u64(os, net.params().size());
  binary::put_f64s(os, net.params().values());
  for (const BrnLayerState& st : net.norm_states()) {
    binary::put_u32(os, st.initialized ? 1u : 0u);
    binary::put_f64s(os, st.mu);
    binary::put_f64s(os, st.sigma);
  }
  if (!os) throw Error("failed writing network weights");
}

Network read_network(std::istream& is) {
  binary::expect_magic(is, kMagic);
  const std::uint32_t version = binary::get_u32(is);
  if (version != kWeightFileVersion) {
    throw Error("unsupported weight file version " + std::to_string(version));
  }
  NetworkSpec spec;
  const std::uint32_t norm = binary::get_u32(is);
  if (norm > 1) throw Error("weight file: bad normalization kind");
  spec.norm = static_cast<NormKind>(norm);
  spec.epsilon = binary::get_f64(is);
  spec.input = get_shape(is);
  const std::uint32_t n_layers = binary::get_u32(is);
  std::vector<std::uint64_t> counts;
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    LayerSpec l;
    const std::uint32_t kind = binary::get_u32(is);
    if (kind > static_cast<std::uint32_t>(LayerKind::Head)) throw Error("weight file: bad layer kind");
    l.kind = static_cast<LayerKind>(kind);
    l.in = get_shape(is);
    l.out = get_shape(is);
    l.kernel = binary::get_u64(is);
    counts.push_back(binary::get_u64(is));
    spec.layers.push_back(l);
  }
  Network net(std::move(spec), 0);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (layer_param_count(net.params(), i) != counts[i]) {
      throw DimensionError("weight file: layer " + std::to_string(i) + " parameter count mismatch");
    }
  }
  const std::uint64_t total = binary::get_u64(is);
  if (total != net.params().size()) throw DimensionError("weight file: parameter count mismatch");
  auto values = binary::get_f64s(is, total);
  auto dst = net.params().values();
  std::copy(values.begin(), values.end(), dst.begin());
  for (BrnLayerState& st : net.norm_states()) {
    st.initialized = binary::get_u32(is) != 0;
    st.mu = binary::get_f64s(is, st.channels());
    st.sigma = binary::get_f64s(is, st.channels());
  }
  return net;
}

void save_network(const std::filesystem::path& path, const Network& net) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open '" + path.string() + "' for writing");
  write_network(os, net);
}

Network load_network(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open '" + path.string() + "'");
  return read_network(is);
}

void write_strategy_state(std::ostream& os, const StrategyState& st) {
  const HeadState& h = st.head;
  binary::put_magic(os, kStateMagic);
  binary::put_u32(os, kWeightFileVersion);
  binary::put_u64(os, h.classes);
  binary::put_u64(os, h.inputs);
  binary::put_f64s(os, h.cw);
  binary::put_f64s(os, h.tw);
  for (bool k : h.known) os.put(k ? 1 : 0);
  put_counts(os, st.counters.past);
  put_counts(os, st.counters.cur);
  const ImportanceState& imp = st.importance;
  binary::put_u64(os, imp.size());
  for (real v : {imp.max_f, imp.lambda, imp.w_past, imp.w_cur, imp.damping}) binary::put_f64(os, v);
  binary::put_f64s(os, imp.F);
  binary::put_f64s(os, imp.trajectory);
  binary::put_f64s(os, imp.batch_start);
  binary::put_u32(os, imp.anchor ? 1u : 0u);
  if (imp.anchor) binary::put_f64s(os, *imp.anchor);
  if (!os) throw Error("failed writing strategy state");
}

StrategyState read_strategy_state(std::istream& is) {
  binary::expect_magic(is, kStateMagic);
  const std::uint32_t version = binary::get_u32(is);
  if (version != kWeightFileVersion) {
    throw Error("unsupported strategy state version " + std::to_string(version));
  }
  StrategyState st;
  const std::size_t classes = binary::get_u64(is);
  const std::size_t inputs = binary::get_u64(is);
  st.head = HeadState(classes, inputs);
  st.head.cw = binary::get_f64s(is, st.head.cw.size());
  st.head.tw = binary::get_f64s(is, st.head.tw.size());
  for (std::size_t j = 0; j < classes; ++j) {
    const int c = is.get();
    if (c == std::char_traits<char>::eof()) throw Error("unexpected end of file");
    st.head.known[j] = c != 0;
  }
  st.counters.past = get_counts(is, classes);
  st.counters.cur = get_counts(is, classes);
  const std::size_t n = binary::get_u64(is);
  st.importance = ImportanceState(n, false);
  ImportanceState& imp = st.importance;
  imp.max_f = binary::get_f64(is);
  imp.lambda = binary::get_f64(is);
  imp.w_past = binary::get_f64(is);
  imp.w_cur = binary::get_f64(is);
  imp.damping = binary::get_f64(is);
  imp.F = binary::get_f64s(is, n);
  imp.trajectory = binary::get_f64s(is, n);
  imp.batch_start = binary::get_f64s(is, n);
  if (binary::get_u32(is) != 0) imp.anchor = binary::get_f64s(is, n);
  return st;
}

}  // namespace rfcl
