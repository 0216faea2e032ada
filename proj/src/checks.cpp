#include "rfcl/checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <random>
#include <regex>
#include <sstream>

#include <Eigen/Dense>

#include "rfcl/cwr.hpp"
#include "rfcl/dslda.hpp"
#include "rfcl/experiment.hpp"
#include "support/gradcheck.hpp"
#include "support/random.hpp"

namespace rfcl {
namespace {

using testing::bit_identical;
using testing::random_labels;
using testing::random_tensor;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      if (pass) detail.str("");
      pass = false;
      detail << what << "; ";
    }
  }
};

// ---------------------------------------------------------------- toy data

ExperimentConfig toy_config(const std::string& strategy, const std::string& protocol) {
  ExperimentConfig c;
  c.strategy = strategy;
  c.protocol = protocol;
  c.num_runs = 5;
  c.test_period = 1;
  c.data.num_classes = 10;
  c.data.train_sessions = 4;
  c.data.test_sessions = 2;
  c.data.patterns_per_session = 60;
  c.mini_batch_size = 32;
  c.eta_b1 = 0.05;
  c.eta_bi = 0.01;
  c.eta_cwr = 0.05;
  c.warmup_iters = 4;
  return c;
}

real final_mean(const ExperimentResult& r) {
  real sum = 0.0;
  for (const auto& run : r.runs) sum += run.accuracy.back();
  return sum / static_cast<real>(r.runs.size());
}

// ---------------------------------------------------------------- 1

void randomize_affine(Network& net, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(0.5, 1.5), s(-0.5, 0.5);
  for (const auto& b : net.params().blocks()) {
    if (b.role == ParamRole::Scale) {
      for (std::size_t k = 0; k < b.size; ++k) net.params().values()[b.offset + k] = d(rng);
    } else if (b.role == ParamRole::Shift || b.role == ParamRole::Bias) {
      for (std::size_t k = 0; k < b.size; ++k) net.params().values()[b.offset + k] = s(rng);
    }
  }
}

// Moving moments far from any batch so r and d sit on their clip bounds.
void saturate_renorm(Network& net) {
  for (auto& st : net.norm_states()) {
    st.initialized = true;
    std::fill(st.mu.begin(), st.mu.end(), 100.0);
    std::fill(st.sigma.begin(), st.sigma.end(), 1e-3);
  }
  net.set_norm_params({1.5, 2.5, 0.9999});
}

void gradient_checks(Outcome& o) {
  struct Case {
    const char* name;
    const char* arch;
    Shape3 input;
    NormKind norm;
    bool saturate;
  };
  const Case cases[] = {
      {"dense", "fc6,head", {5, 1, 1}, NormKind::BatchNorm, false},
      {"depthwise+pointwise", "dw3,pw4,head", {3, 4, 4}, NormKind::BatchNorm, false},
      {"bn", "dw3,norm,pw4,norm,fc6,norm,head", {2, 3, 3}, NormKind::BatchNorm, false},
      {"brn", "dw3,norm,pw4,norm,fc6,norm,head", {2, 3, 3}, NormKind::BatchRenorm, true},
      {"relu", "dw3,norm,relu,pw4,norm,relu,fc6,relu,head", {2, 3, 3}, NormKind::BatchRenorm, false},
  };
  const auto t0 = std::chrono::steady_clock::now();
  const int per_case = limits::kGradInstances / static_cast<int>(std::size(cases));
  int instances = 0;
  double worst = 0.0;
  for (const Case& c : cases) {
    for (int inst = 0; inst < per_case; ++inst) {
      std::mt19937_64 rng(7000 + inst);
      Network net(parse_architecture(c.arch, c.input, 4, c.norm), 300 + static_cast<std::uint64_t>(inst));
      randomize_affine(net, rng);
      if (c.saturate) saturate_renorm(net);
      const Tensor x = random_tensor({8, c.input.size()}, rng);
      const auto labels = random_labels(8, 4, rng);
      const auto r = testing::check_gradients(net, x, labels);
      worst = std::max(worst, r.max_rel_error);
      ++instances;
      o.require(r.max_rel_error < limits::kGradRelError,
                std::string(c.name) + " instance " + std::to_string(inst) + " rel err " +
                    std::to_string(r.max_rel_error));
      o.require(r.checked * 10 > net.params().size() * 9, std::string(c.name) + " skipped too many kinks");
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  o.require(instances >= 20, "fewer than 20 instances");
  o.require(secs < limits::kGradSeconds, "took " + std::to_string(secs) + " s");
  if (o.pass) o.detail << instances << " instances over 5 layer kinds, max rel err " << worst;
}

// ---------------------------------------------------------------- 2

void brn_equals_bn(Outcome& o) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.2, 3.0), v(-2.0, 2.0);
  double worst = 0.0;
  for (int t = 0; t < limits::kBrnBnBatches; ++t) {
    const std::size_t channels = 3, spatial = 4, batch = 2 + static_cast<std::size_t>(t % 15);
    const Tensor x = random_tensor({batch, channels, 2, 2}, rng, -4.0, 4.0);
    BrnLayerState st(channels);
    st.initialized = true;
    for (std::size_t c = 0; c < channels; ++c) {
      st.mu[c] = v(rng);
      st.sigma[c] = u(rng);
    }
    st.r_max = 1.0;
    st.d_max = 0.0;
    std::vector<real> scale(channels), shift(channels);
    for (auto& s : scale) s = u(rng);
    for (auto& s : shift) s = v(rng);
    const NormOutput brn = brn_forward_train(x, st, scale, shift);
    // Oracle: the renormalized formula with r, d clipped to [1, 1] and [0, 0].
    for (std::size_t c = 0; c < channels; ++c) {
      double mean = 0.0, sq = 0.0;
      for (std::size_t n = 0; n < batch; ++n) {
        for (std::size_t s = 0; s < spatial; ++s) mean += x[(n * channels + c) * spatial + s];
      }
      mean /= static_cast<double>(batch * spatial);
      for (std::size_t n = 0; n < batch; ++n) {
        for (std::size_t s = 0; s < spatial; ++s) {
          sq += std::pow(x[(n * channels + c) * spatial + s] - mean, 2);
        }
      }
      const double sd = std::sqrt(sq / static_cast<double>(batch * spatial) + st.epsilon);
      const double r = std::clamp(sd / st.sigma[c], 1.0, 1.0);
      const double d = std::clamp((mean - st.mu[c]) / st.sigma[c], 0.0, 0.0);
      for (std::size_t n = 0; n < batch; ++n) {
        for (std::size_t s = 0; s < spatial; ++s) {
          const std::size_t i = (n * channels + c) * spatial + s;
          const double y = scale[c] * ((x[i] - mean) / sd * r + d) + shift[c];
          worst = std::max(worst, std::abs(y - brn.y[i]));
        }
      }
    }
  }
  // The same through whole networks sharing weights.
  Network bn(parse_architecture("dw3,norm,relu,pw4,norm,fc6,norm,head", {2, 3, 3}, 4, NormKind::BatchNorm), 5);
  Network brn(parse_architecture("dw3,norm,relu,pw4,norm,fc6,norm,head", {2, 3, 3}, 4, NormKind::BatchRenorm), 5);
  brn.set_norm_params({1.0, 0.0, 0.99});
  for (int t = 0; t < limits::kBrnBnBatches; ++t) {
    const Tensor x = random_tensor({6, 18}, rng);
    const auto a = bn.forward(x, Mode::Train);
    const auto b = brn.forward(x, Mode::Train);
    for (std::size_t i = 0; i < a.logits().size(); ++i) {
      worst = std::max(worst, std::abs(a.logits()[i] - b.logits()[i]));
    }
    bn.update_moving_moments(a);
    brn.update_moving_moments(b);
  }
  o.require(worst <= limits::kBrnBnTol, "max deviation " + std::to_string(worst));
  if (o.pass) o.detail << 2 * limits::kBrnBnBatches << " mini-batches, max |BRN - BN| " << worst;
}

// ---------------------------------------------------------------- 3

void clip_law(Outcome& o) {
  std::mt19937_64 rng(3);
  std::lognormal_distribution<double> ratio(0.0, 2.0);
  std::normal_distribution<double> offset(0.0, 10.0);
  std::uniform_real_distribution<double> rmax(1.0, 4.0), dmax(0.0, 6.0);
  for (int i = 0; i < 100000; ++i) {
    const double rm = rmax(rng), dm = dmax(rng), q = ratio(rng), off = offset(rng);
    const ClipFactors f = clip_factors(q, off, rm, dm);
    const bool ok = f.r >= 1.0 / rm && f.r <= rm && f.d >= -dm && f.d <= dm &&
                    (q < 1.0 / rm || q > rm || f.r == q) && (off < -dm || off > dm || f.d == off);
    if (!ok) {
      o.require(false, "clip violated at sample " + std::to_string(i));
      return;
    }
  }
  const ClipFactors hi = clip_factors(4.0, -7.0, 3.0, 5.0);
  o.require(hi.r == 3.0 && hi.d == -5.0, "clip(4, -7) != (3, -5)");
  // Batch-1 ramp reaches the targets by its last iteration.
  const BrnSchedule s = BrnSchedule::for_protocol("nicv2-79");
  const int b1 = 148;
  const BrnParams end = schedule_params(s, 1, b1 - 1, b1);
  o.require(end.r_max == 3.0 && end.d_max == 5.0, "ramp does not reach (3, 5)");
  const BrnParams warm = schedule_params(s, 1, 0, b1);
  o.require(warm.r_max == 1.0 && warm.d_max == 0.0, "warm-up is not BN");
  // Saturated forward pass attains both bounds.
  BrnLayerState st(1);
  st.initialized = true;
  st.mu = {7.0};
  st.sigma = {1.0};
  st.epsilon = 0.0;
  st.r_max = 3.0;
  st.d_max = 5.0;
  const std::vector<real> one{1.0}, zero{0.0};
  const NormOutput out = brn_forward_train(Tensor({2, 1}, {-4.0, 4.0}), st, one, zero);
  o.require(out.cache.r[0] == 3.0 && out.cache.d[0] == -5.0, "forward pass did not reach r=3, d=-5");
  if (o.pass) o.detail << "100000 sampled pairs within bounds; r_max=3, d_max=5 reached";
}

// ---------------------------------------------------------------- 4

void cwr_star_equals_plus(Outcome& o) {
  const ExperimentConfig cfg = toy_config("cwr_star", "nc-10");
  const Dataset ds = synth_dataset(cfg.data);
  const NetworkSpec spec = parse_architecture(cfg.arch, ds.pattern_shape, 10, cfg.norm);
  const LabeledSet test = materialize(ds, ds.test);
  const ProtocolRun plan = generate(ds, cfg.protocol_spec(), 11);
  ExperimentConfig plus_cfg = cfg;
  plus_cfg.strategy = "cwr_plus";
  Learner star(StrategyKind::CwrStar, cfg.strategy_config(), spec, 17);
  Learner plus(StrategyKind::CwrPlus, plus_cfg.strategy_config(), spec, 17);
  double worst = 0.0;
  for (const auto& b : plan.batches) {
    const LabeledSet data = materialize(ds, b.sessions);
    star.train_batch(data);
    plus.train_batch(data);
    for (std::size_t i = 0; i < star.head().cw.size(); ++i) {
      worst = std::max(worst, std::abs(star.head().cw[i] - plus.head().cw[i]));
    }
    o.require(star.predict(test.x) == plus.predict(test.x),
              "predictions differ after batch " + std::to_string(b.batch_index));
  }
  o.require(worst <= limits::kCwrTol, "cw deviation " + std::to_string(worst));
  if (o.pass) o.detail << "10 batches, max |cw*-cw+| " << worst << ", identical predictions";
}

// ---------------------------------------------------------------- 5

void consolidation_examples(Outcome& o) {
  struct Case {
    std::size_t past;
    double cw_before;
    double expect;
    const char* wpast;
  };
  // One input, two classes: tw0 = [3, 3], tw1 = [-1, -1] so tw0 - avg(tw) = 2;
  // cur = 300, wpast = sqrt(past / cur).
  const Case cases[] = {{0, 0.0, 2.0, "0"}, {300, 1.0, 1.5, "1"}, {1200, 1.0, 4.0 / 3.0, "2"}};
  const std::vector<int> batch{0, 1};
  for (const Case& c : cases) {
    HeadState h(2, 1);
    h.cw = {c.cw_before, c.cw_before, 0.0, 0.0};
    h.tw = {3.0, 3.0, -1.0, -1.0};
    ClassCounters counters(2);
    counters.past = {c.past, 0};
    counters.cur = {300, 300};
    cwr_star_consolidate(h, counters, batch);
    o.require(h.cw[0] == c.expect && h.cw[1] == c.expect,
              std::string("wpast=") + c.wpast + " gave " + std::to_string(h.cw[0]));
  }
  if (o.pass) o.detail << "wpast 0, 1, 2 give 2, 1.5, 4/3 exactly";
}

// ---------------------------------------------------------------- 6

void freezing(Outcome& o) {
  const ExperimentConfig cfg = toy_config("ar1_star", "nc-10");
  const Dataset ds = synth_dataset(cfg.data);
  const NetworkSpec spec = parse_architecture(cfg.arch, ds.pattern_shape, 10, cfg.norm);
  const ProtocolRun plan = generate(ds, cfg.protocol_spec(), 4);

  Learner ar1(StrategyKind::Ar1Star, cfg.strategy_config(), spec, 8);
  ar1.train_batch(materialize(ds, plan.batches[0].sessions));
  ImportanceState& imp = ar1.importance();
  const ParamSet& p = std::as_const(ar1.network()).params();
  for (std::size_t k = 0; k < imp.size(); ++k) {
    if (p.block_of(k).kind != LayerKind::Head) imp.F[k] = imp.max_f;
  }
  const std::vector<real> before(p.values().begin(), p.values().end());
  ar1.train_batch(materialize(ds, plan.batches[1].sessions));
  std::size_t frozen = 0;
  bool head_moved = false;
  for (std::size_t k = 0; k < before.size(); ++k) {
    if (p.block_of(k).kind == LayerKind::Head) {
      head_moved = head_moved || p.values()[k] != before[k];
    } else if (bit_identical(std::span(&before[k], 1), p.values().subspan(k, 1))) {
      ++frozen;
    } else {
      o.require(false, "parameter " + p.describe(k) + " moved with F = max_F");
      break;
    }
  }
  o.require(head_moved, "head did not train");

  // Depthwise filters over exactly 100 SGD steps of a later batch.
  StrategyConfig naive_cfg = toy_config("naive", "nc-10").strategy_config();
  naive_cfg.mini_batch_size = 8;
  naive_cfg.epochs_bi = 5;
  Learner naive(StrategyKind::Naive, naive_cfg, spec, 8);
  naive.train_batch(materialize(ds, plan.batches[0].sessions));
  LabeledSet second = materialize(ds, plan.batches[1].sessions);
  std::vector<std::size_t> rows(160);
  std::iota(rows.begin(), rows.end(), 0);
  second.x = second.x.gather_rows(rows);
  second.labels.resize(160);  // 160 / 8 * 5 epochs = 100 steps
  const ParamSet& q = std::as_const(naive.network()).params();
  const std::vector<real> q0(q.values().begin(), q.values().end());
  naive.train_batch(second);
  bool others_moved = false;
  for (const ParamBlock& b : q.blocks()) {
    const auto now = q.values().subspan(b.offset, b.size);
    const auto then = std::span(q0).subspan(b.offset, b.size);
    if (b.kind == LayerKind::Depthwise) {
      o.require(bit_identical(now, then), "depthwise block " + q.describe(b.offset) + " moved");
    } else if (!bit_identical(now, then)) {
      others_moved = true;
    }
  }
  o.require(others_moved, "nothing trained in the 100-step batch");
  if (o.pass) o.detail << frozen << " parameters at max_F bit-identical over a batch; depthwise frozen for 100 steps";
}

// ---------------------------------------------------------------- 7

void protocol_structure(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const Dataset ds = core50_from_index(core50_canonical_index(1));
  int checked = 0;
  for (int n : {79, 196, 391}) {
    const ProtocolSpec spec = ProtocolSpec::parse("nicv2-" + std::to_string(n));
    const std::size_t cap = 390 / static_cast<std::size_t>(n - 1);
    const int max_start = default_max_start(n);
    for (int r = 0; r < 10; ++r) {
      const std::uint64_t seed = run_seed(2024, r);
      const ProtocolRun run = generate(ds, spec, seed);
      const ProtocolRun again = generate(ds, spec, seed);
      const std::string tag = spec.tag() + " run " + std::to_string(r);
      const auto problems = validate_run(ds, run, spec);
      o.require(problems.empty(), tag + ": " + (problems.empty() ? "" : problems.front()));
      std::size_t total = 0;
      std::vector<int> per_class(50, 0);
      bool same = run.insertion_point == again.insertion_point;
      for (std::size_t b = 0; b < run.batches.size(); ++b) {
        total += run.batches[b].sessions.size();
        same = same && run.batches[b].sessions == again.batches[b].sessions;
        if (b > 0) o.require(run.batches[b].sessions.size() == cap, tag + ": wrong capacity");
        for (auto i : run.batches[b].sessions) ++per_class[static_cast<std::size_t>(ds.train[i].class_id)];
      }
      o.require(total == 400, tag + ": " + std::to_string(total) + " sessions");
      std::vector<int> cats;
      for (auto i : run.batches[0].sessions) cats.push_back(ds.train[i].category_id);
      std::sort(cats.begin(), cats.end());
      o.require(cats.size() == 10 && std::adjacent_find(cats.begin(), cats.end()) == cats.end(),
                tag + ": initial batch is not one class per category");
      o.require(std::all_of(per_class.begin(), per_class.end(), [](int k) { return k == 8; }),
                tag + ": a class does not have 8 sessions");
      o.require(std::all_of(run.insertion_point.begin(), run.insertion_point.end(),
                            [&](int ip) { return ip >= 1 && ip <= max_start; }),
                tag + ": insertion point beyond max_start");
      o.require(same, tag + ": not deterministic");
      ++checked;
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  o.require(secs < limits::kProtocolSeconds, "took " + std::to_string(secs) + " s");
  if (o.pass) o.detail << checked << " runs (79/196/391 x 10 seeds) valid in " << secs << " s";
}

// ---------------------------------------------------------------- 8

struct Sample {
  std::vector<real> x;
  int label;
};

std::vector<Sample> gaussian_stream(std::size_t n, std::size_t dim, int classes, std::uint64_t seed,
                                    double spread) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::uniform_int_distribution<int> pick(0, classes - 1);
  const auto d = static_cast<Eigen::Index>(dim);
  Eigen::MatrixXd centres(classes, d), a(d, d);
  for (auto& v : centres.reshaped()) v = spread * nd(rng);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) a(i, j) = (i == j ? 1.0 : 0.0) + 0.3 * nd(rng);
  }
  std::vector<Sample> out;
  for (std::size_t i = 0; i < n; ++i) {
    const int c = pick(rng);
    Eigen::VectorXd z(d);
    for (auto& v : z) v = nd(rng);
    const Eigen::VectorXd x = centres.row(c).transpose() + a * z;
    out.push_back({std::vector<real>(x.data(), x.data() + x.size()), c});
  }
  return out;
}

void dslda(Outcome& o) {
  const std::size_t dim = 6;
  const int classes = 4;
  const auto d = static_cast<Eigen::Index>(dim);
  auto stream = gaussian_stream(500, dim, classes, 99, 3.0);
  // Two-pass oracle.
  Eigen::MatrixXd means = Eigen::MatrixXd::Zero(classes, d), cov = Eigen::MatrixXd::Zero(d, d);
  std::vector<double> counts(static_cast<std::size_t>(classes), 0.0);
  for (const auto& s : stream) {
    means.row(s.label) += Eigen::Map<const Eigen::RowVectorXd>(s.x.data(), d);
    ++counts[static_cast<std::size_t>(s.label)];
  }
  for (int c = 0; c < classes; ++c) means.row(c) /= counts[static_cast<std::size_t>(c)];
  for (const auto& s : stream) {
    const Eigen::VectorXd r = Eigen::Map<const Eigen::VectorXd>(s.x.data(), d) - means.row(s.label).transpose();
    cov += r * r.transpose();
  }
  cov /= static_cast<double>(stream.size());
  std::mt19937_64 rng(1);
  double worst = 0.0;
  for (int perm = 0; perm < 10; ++perm) {
    DsldaState st(static_cast<std::size_t>(classes), dim);
    for (const auto& s : stream) dslda_update(st, s.x, s.label);
    worst = std::max({worst, (st.means - means).cwiseAbs().maxCoeff(),
                      (st.covariance() - cov).cwiseAbs().maxCoeff()});
    std::shuffle(stream.begin(), stream.end(), rng);
  }
  o.require(worst <= limits::kDsldaMomentTol, "moment deviation " + std::to_string(worst));

  // Offline LDA on a 3-class set.
  const auto train = gaussian_stream(600, 5, 3, 17, 1.5);
  const auto queries = gaussian_stream(1000, 5, 3, 18, 1.5);
  DsldaState st(3, 5, 1e-4);
  for (const auto& s : train) dslda_update(st, s.x, s.label);
  const DsldaClassifier clf(st);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(3, 5), sw = Eigen::MatrixXd::Zero(5, 5);
  std::vector<double> n(3, 0.0);
  for (const auto& s : train) {
    m.row(s.label) += Eigen::Map<const Eigen::RowVectorXd>(s.x.data(), 5);
    ++n[static_cast<std::size_t>(s.label)];
  }
  for (int c = 0; c < 3; ++c) m.row(c) /= n[static_cast<std::size_t>(c)];
  for (const auto& s : train) {
    const Eigen::VectorXd r = Eigen::Map<const Eigen::VectorXd>(s.x.data(), 5) - m.row(s.label).transpose();
    sw += r * r.transpose();
  }
  sw /= static_cast<double>(train.size());
  const Eigen::MatrixXd prec =
      ((1.0 - 1e-4) * sw + 1e-4 * Eigen::MatrixXd::Identity(5, 5)).fullPivLu().inverse();
  std::size_t agree = 0;
  for (const auto& q : queries) {
    const Eigen::Map<const Eigen::VectorXd> x(q.x.data(), 5);
    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < 3; ++c) {
      const Eigen::VectorXd mu = m.row(c).transpose();
      const double s = mu.dot(prec * x) - 0.5 * mu.dot(prec * mu);
      if (s > best_score) {
        best_score = s;
        best = c;
      }
    }
    agree += clf.predict(q.x) == best;
  }
  const double rate = static_cast<double>(agree) / static_cast<double>(queries.size());
  o.require(rate >= limits::kDsldaAgreement, "agreement " + std::to_string(rate));
  if (o.pass) o.detail << "moments within " << worst << " over 10 orders; " << 100 * rate << "% agreement with offline LDA";
}

// ---------------------------------------------------------------- 9

void overhead(Outcome& o) {
  const Dataset ds = synth_dataset(toy_config("naive", "nc-10").data);
  const NetworkSpec spec = parse_architecture(toy_config("naive", "nc-10").arch, ds.pattern_shape, 10,
                                              NormKind::BatchRenorm);
  const ProtocolRun plan = generate(ds, ProtocolSpec::parse("nc-10"), 3);
  std::vector<LabeledSet> batches;
  for (std::size_t b = 0; b < 3; ++b) batches.push_back(materialize(ds, plan.batches[b].sessions));
  std::size_t bytes = 0;
  for (const auto& b : batches) bytes += b.bytes();

  auto trained = [&](StrategyKind k) {
    StrategyConfig c = StrategyConfig::defaults(k);
    c.mini_batch_size = 32;
    c.epochs_b1 = c.epochs_bi = 1;
    auto l = std::make_unique<Learner>(k, c, spec, 1);
    for (const auto& b : batches) l->train_batch(b);
    return l;
  };
  const auto ewc = trained(StrategyKind::Ewc);
  const auto ar1 = trained(StrategyKind::Ar1Star);
  const auto naive = trained(StrategyKind::Naive);
  const auto cumul = trained(StrategyKind::Cumulative);
  const auto P = ewc->network().params().size();
  o.require(ewc->overhead().param_bytes == 2 * ar1->overhead().param_bytes &&
                ewc->overhead().param_values == 2 * P,
            "EWC overhead is not twice AR1*");
  o.require(ewc->importance().anchor.has_value(), "EWC holds no anchor");
  o.require(!ar1->importance().anchor.has_value(), "AR1* stores theta*");
  const auto n = naive->overhead();
  o.require(n.data_bytes == 0 && n.param_bytes == 0 && n.param_values == 0, "Naive overhead not 0");
  o.require(cumul->overhead().data_bytes == bytes, "Cumulative data bytes differ from training bytes");
  if (o.pass) {
    o.detail << "EWC " << ewc->overhead().param_bytes << " B = 2 x AR1* " << ar1->overhead().param_bytes
             << " B; Naive 0; Cumulative " << bytes << " B";
  }
}

// ---------------------------------------------------------------- 10

void toy_ordering(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  auto final_of = [](ExperimentConfig c) { return final_mean(run_experiment(c)); };
  const real naive = final_of(toy_config("naive", "nc-10"));
  const real cwr = final_of(toy_config("cwr_star", "nc-10"));
  const real ar1 = final_of(toy_config("ar1_star", "nc-10"));
  const real cumul = final_of(toy_config("cumulative", "nc-10"));
  ExperimentConfig brn_cfg = toy_config("ar1_star", "nicv2-39");
  ExperimentConfig bn_cfg = brn_cfg;
  bn_cfg.norm = NormKind::BatchNorm;
  const real brn = final_of(brn_cfg);
  const real bn = final_of(bn_cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  o.require(cumul >= ar1, "Cumulative < AR1*");
  o.require(cwr >= naive, "CWR* < Naive");
  o.require(cwr - naive >= limits::kToyMargin, "CWR* - Naive below margin");
  o.require(brn >= bn, "BRN AR1* < BN AR1*");
  o.require(secs < limits::kToySeconds, "took " + std::to_string(secs) + " s");
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "cumulative %.2f, ar1* %.2f, cwr* %.2f, naive %.2f (margin %.2f >= %.0f); "
                "single-class batches: brn %.2f, bn %.2f; %.0f s",
                cumul, ar1, cwr, naive, cwr - naive, limits::kToyMargin, brn, bn, secs);
  if (o.pass) {
    o.detail << buf;
  } else {
    o.detail << "[" << buf << "]";
  }
}

// ---------------------------------------------------------------- 11

void csv_determinism(Outcome& o) {
  ExperimentConfig cfg = toy_config("cwr_star", "nc-5");
  cfg.num_runs = 10;
  cfg.data.patterns_per_session = 20;
  const auto base = std::filesystem::temp_directory_path() / "rfcl_acceptance_csv";
  std::filesystem::remove_all(base);
  write_outputs(cfg, run_experiment(cfg), base / "a");
  write_outputs(cfg, run_experiment(cfg), base / "b");
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  const std::string a = slurp(base / "a" / "accuracy.csv");
  const std::string b = slurp(base / "b" / "accuracy.csv");
  std::filesystem::remove_all(base);
  o.require(!a.empty() && a == b, "CSV files differ");
  std::istringstream lines(a);
  std::string header;
  std::getline(lines, header);
  o.require(header == "Batch,Run 0,Run 1,Run 2,Run 3,Run 4,Run 5,Run 6,Run 7,Run 8,Run 9",
            "bad header '" + header + "'");
  const std::regex row(R"(\d+(,\d+\.\d{3}){10})");
  std::string line;
  int rows = 0;
  while (std::getline(lines, line)) {
    o.require(std::regex_match(line, row), "bad row '" + line + "'");
    ++rows;
  }
  o.require(rows == 6, "expected 6 rows (batch 0..5)");
  o.require(a.find('\r') == std::string::npos, "CR line endings");
  if (o.pass) o.detail << "two runs byte-identical (" << a.size() << " bytes), header and 3-decimal rows";
}

struct Criterion {
  int id;
  const char* name;
  void (*fn)(Outcome&);
};

const Criterion kCriteria[] = {
    {1, "gradient checks", gradient_checks},
    {2, "BRN equals BN at r_max=1, d_max=0", brn_equals_bn},
    {3, "clip law", clip_law},
    {4, "CWR* equals CWR+ on new classes", cwr_star_equals_plus},
    {5, "consolidation examples", consolidation_examples},
    {6, "freezing exactness", freezing},
    {7, "NICv2 protocol structure", protocol_structure},
    {8, "DSLDA streaming and offline agreement", dslda},
    {9, "memory overhead rules", overhead},
    {10, "toy strategy ordering", toy_ordering},
    {11, "deterministic CSV output", csv_determinism},
};

}  // namespace

CheckResult run_criterion(int id) {
  for (const Criterion& c : kCriteria) {
    if (c.id != id) continue;
    CheckResult r;
    r.id = id;
    r.name = c.name;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      c.fn(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail.str("");
      o.detail << "exception: " << e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    r.pass = o.pass;
    r.detail = o.detail.str();
    return r;
  }
  throw ConfigError("no acceptance criterion " + std::to_string(id));
}

std::vector<CheckResult> run_acceptance(std::span<const int> only) {
  std::vector<CheckResult> out;
  for (const Criterion& c : kCriteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    out.push_back(run_criterion(c.id));
  }
  return out;
}

std::string format_check(const CheckResult& r) {
  char secs[32];
  std::snprintf(secs, sizeof secs, "%.2f", r.seconds);
  return std::string(r.pass ? "[PASS] " : "[FAIL] ") + std::to_string(r.id) + " " + r.name + ": " +
         r.detail + " (" + secs + " s)";
}

}  // namespace rfcl
