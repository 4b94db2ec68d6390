#include "programs.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>

#include "ariann/federated.hpp"
#include "ariann/fss.hpp"
#include "ariann/fss_protocol.hpp"
#include "ariann/nn_ops.hpp"
#include "ariann/reference.hpp"

namespace ariann::programs {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

RunOptions run_options(const Settings& st, const PrepPlan& plan) {
  RunOptions opt;
  opt.transport = st.transport;
  opt.dealer_seed = st.seed;
  opt.coin_seed = st.seed + 1;
  if (st.bundles) {
    BundlePair b = dealer_preprocess(plan, st.seed);
    opt.prep = {std::make_shared<BundlePrep>(std::move(b.b0)), std::make_shared<BundlePrep>(std::move(b.b1))};
  }
  return opt;
}

std::uint64_t offline_bytes(const PrepPlan& plan) {
  std::uint64_t b = 0;
  for (const auto& r : plan) b += r.party_bytes();
  return b;
}

void put_ledger(json& rec, const RoundLedger& l) {
  const LedgerEntry t = l.total();
  rec["rounds"] = t.rounds;
  rec["bytes"] = t.bytes_sent + t.bytes_received;
  rec["elements"] = t.elements;
}

void put_format(json& rec, const FixedFormat& f) {
  rec["n_bits"] = f.n_bits;
  rec["precision"] = f.precision;
  rec["fss_bits"] = f.fss_bits;
}

constexpr std::size_t kArgmaxWidth = 10;
constexpr std::size_t kInner = 16;  // matmul: [B,16] x [16,16]

}  // namespace

std::string transport_name(TransportKind t) { return t == TransportKind::kTcp ? "tcp" : "local"; }

// ---------------------------------------------------------------------------
// Single protocols

const std::vector<std::string>& op_names() {
  static const std::vector<std::string> names{"compare", "relu",   "argmax", "maxpool",
                                              "maxpool-k2", "matmul", "conv"};
  return names;
}

int expected_rounds(const std::string& op) {
  if (op == "compare" || op == "matmul" || op == "conv") return 1;
  if (op == "relu" || op == "argmax") return 2;
  if (op == "maxpool") return 3;
  if (op == "maxpool-k2") return 4;
  throw std::invalid_argument("unknown program " + op);
}

OpInstance make_op(const std::string& op, std::size_t batch, const FixedFormat& fmt, std::uint64_t seed) {
  expected_rounds(op);
  if (batch == 0) throw std::invalid_argument("batch must be positive");
  OpInstance in;
  in.op = op;
  in.batch = batch;
  in.fmt = fmt;
  Shape xs{batch}, ws;
  if (op == "argmax") xs = {batch, kArgmaxWidth};
  if (op == "maxpool" || op == "maxpool-k2") xs = {batch, 1, 8, 8};
  if (op == "matmul") {
    xs = {batch, kInner};
    ws = {kInner, kInner};
  }
  if (op == "conv") {
    in.geometry = ConvGeometry{batch, 1, 8, 8, 4, 3, 1, 0};
    xs = in.geometry.input_shape();
    ws = in.geometry.kernel_shape();
  }
  // Values in +-10 at the working precision.
  Rng data(seed ^ 0x64617461ULL);
  const auto draw = [&](const Shape& s) {
    const std::int64_t range = 10 * pow10(fmt.precision);
    std::vector<std::int64_t> v(shape_size(s));
    for (auto& e : v) e = static_cast<std::int64_t>(data.uniform(2 * range + 1)) - range;
    return RingTensor::from_signed(s, fmt.n_bits, v);
  };
  in.x = draw(xs);
  Rng shares(seed ^ 0x736861726573ULL);
  auto [x0, x1] = share(in.x, shares, fmt.precision);
  in.x_share[0] = std::move(x0);
  in.x_share[1] = std::move(x1);
  if (!ws.empty()) {
    in.w = draw(ws);
    auto [w0, w1] = share(in.w, shares, fmt.precision);
    in.w_share[0] = std::move(w0);
    in.w_share[1] = std::move(w1);
  }
  return in;
}

PrepPlan op_plan(const OpInstance& in) {
  const int n = in.fmt.n_bits, f = in.fmt.fss_bits;
  if (in.op == "compare") return {PrepRequest::cmp(in.x.size(), f, n, "compare")};
  if (in.op == "relu") return relu_plan(in.x.size(), n, f);
  if (in.op == "argmax") return argmax_plan(in.batch, kArgmaxWidth, n, f);
  if (in.op == "maxpool") return maxpool_plan(in.x.shape(), 2, 2, n, f);
  if (in.op == "maxpool-k2") return maxpool_k2_plan(in.x.shape(), 2, n, f);
  if (in.op == "matmul") return {PrepRequest::beaver(TripleSpec::matmul(in.batch, kInner, kInner, n), "matmul")};
  return {PrepRequest::beaver(TripleSpec::conv(in.geometry, n), "conv")};
}

AdditiveShare run_op(Session& s, const OpInstance& in) {
  const int j = s.party(), n = in.fmt.n_bits, f = in.fmt.fss_bits;
  const AdditiveShare& x = in.x_share[j];
  if (in.op == "compare") {
    auto op = s.op("compare");
    const auto keys = s.take_cmp(x.size(), f, n);
    return sign_protocol(s, x, keys);
  }
  if (in.op == "relu") return relu(s, x, f);
  if (in.op == "argmax") return argmax(s, x, f);
  if (in.op == "maxpool") return maxpool(s, x, 2, 2, f);
  if (in.op == "maxpool-k2") return maxpool_k2(s, x, 2, f);
  if (in.op == "matmul") {
    auto op = s.op("matmul");
    const auto t = s.take_triple(TripleSpec::matmul(in.batch, kInner, kInner, n));
    return matmul_protocol(s, x, in.w_share[j], t);
  }
  auto op = s.op("conv");
  const auto t = s.take_triple(TripleSpec::conv(in.geometry, n));
  return conv2d_protocol(s, x, in.w_share[j], t, in.geometry);
}

RingTensor op_oracle(const OpInstance& in) {
  const int n = in.fmt.n_bits;
  const auto& v = in.x.data();
  const auto sv = [&](std::size_t i) { return to_signed(v[i], n); };
  std::vector<std::int64_t> out;
  if (in.op == "compare" || in.op == "relu") {
    for (std::size_t i = 0; i < v.size(); ++i) {
      out.push_back(in.op == "compare" ? (sv(i) <= 0 ? 1 : 0) : std::max<std::int64_t>(sv(i), 0));
    }
    return RingTensor::from_signed(in.x.shape(), n, out);
  }
  if (in.op == "argmax") {
    for (std::size_t r = 0; r < in.batch; ++r) {
      std::int64_t best = sv(r * kArgmaxWidth);
      for (std::size_t i = 1; i < kArgmaxWidth; ++i) best = std::max(best, sv(r * kArgmaxWidth + i));
      for (std::size_t i = 0; i < kArgmaxWidth; ++i) out.push_back(sv(r * kArgmaxWidth + i) == best ? 1 : 0);
    }
    return RingTensor::from_signed(in.x.shape(), n, out);
  }
  if (in.op == "maxpool" || in.op == "maxpool-k2") {
    for (std::size_t b = 0; b < in.batch; ++b) {
      for (std::size_t r = 0; r < 4; ++r) {
        for (std::size_t c = 0; c < 4; ++c) {
          std::int64_t best = INT64_MIN;
          for (std::size_t dr = 0; dr < 2; ++dr) {
            for (std::size_t dc = 0; dc < 2; ++dc) best = std::max(best, sv(b * 64 + (2 * r + dr) * 8 + 2 * c + dc));
          }
          out.push_back(best);
        }
      }
    }
    return RingTensor::from_signed({in.batch, 1, 4, 4}, n, out);
  }
  if (in.op == "matmul") return apply_bilinear(TripleSpec::matmul(in.batch, kInner, kInner, n), in.x, in.w);
  return apply_bilinear(TripleSpec::conv(in.geometry, n), in.x, in.w);
}

std::pair<std::size_t, std::size_t> check_op(const OpInstance& in, const RingTensor& opened) {
  const RingTensor want = op_oracle(in);
  if (want.shape() != opened.shape()) throw std::runtime_error("output shape " + shape_string(opened.shape()));
  std::size_t bad = 0;
  for (std::size_t i = 0; i < want.size(); ++i) bad += want.data()[i] != opened.data()[i];
  return {want.size(), bad};
}

json bench_op(const std::string& op, std::size_t batch, const Settings& st) {
  const OpInstance in = make_op(op, batch, st.fmt, st.seed);
  const PrepPlan plan = op_plan(in);
  const RunOptions opt = run_options(st, plan);
  const auto t0 = Clock::now();
  const auto r = run_two_party([&](Session& s) { return run_op(s, in); }, opt);
  const double wall = ms_since(t0);
  const auto [elements, bad] = check_op(in, reconstruct(r.out[0], r.out[1]));
  json rec{{"op", op}, {"batch", batch}, {"transport", transport_name(st.transport)},
           {"prep", st.bundles ? "bundle" : "stream"}, {"seed", st.seed}};
  put_format(rec, st.fmt);
  put_ledger(rec, r.ledger[0]);
  rec["expected_rounds"] = expected_rounds(op);
  rec["offline_bytes"] = offline_bytes(plan);
  rec["outputs"] = elements;
  rec["mismatches"] = bad;
  rec["agreement"] = 1.0 - static_cast<double>(bad) / static_cast<double>(elements);
  rec["wall_ms"] = wall;
  return rec;
}

json compare_exhaustive(int n) {
  if (n < 1 || n > 16) throw std::invalid_argument("exhaustive comparison needs 1 <= n <= 16");
  const std::uint64_t size = std::uint64_t{1} << n, mask = ring_mask(n);
  Rng rng(static_cast<std::uint64_t>(n));
  std::uint64_t cmp_bad = 0, eq_bad = 0;
  const auto t0 = Clock::now();
  for (std::uint64_t alpha = 0; alpha < size; ++alpha) {
    KeygenTape tape = draw_tape(n, rng);
    tape.alpha = alpha;
    const auto c = keygen_cmp_from_tape(n, n, tape);
    tape = draw_tape(n, rng);
    tape.alpha = alpha;
    const auto e = keygen_eq_from_tape(n, n, tape);
    for (std::uint64_t x = 0; x < size; ++x) {
      cmp_bad += ((eval_cmp(0, c.k0, x) + eval_cmp(1, c.k1, x)) & mask) != (x <= alpha ? 1u : 0u);
      eq_bad += ((eval_eq(0, e.k0, x) + eval_eq(1, e.k1, x)) & mask) != (x == alpha ? 1u : 0u);
    }
  }
  return json{{"op", "compare_exhaustive"}, {"n_bits", n},         {"cases", size * size},
              {"cmp_mismatches", cmp_bad},  {"eq_mismatches", eq_bad}, {"mismatches", cmp_bad + eq_bad},
              {"wall_ms", ms_since(t0)}};
}

// ---------------------------------------------------------------------------
// Learning tasks

Task make_task(const std::string& name) {
  Task t;
  t.name = name;
  t.cfg.batch_size = 32;
  t.cfg.lr = 0.1;
  t.cfg.momentum = 0.9;
  t.cfg.shuffle_seed = 5;
  if (name == "xor") {
    t.train = make_xor(200, 0.15, 3);
    t.test = make_xor(1000, 0.15, 4);
    t.arch = Architecture::mlp({2, 8, 1});
    t.outputs = 1;
    t.cfg.epochs = 40;
    t.cfg.batch_size = 10;
    t.init_seed = 3;
  } else if (name == "moons") {
    t.train = make_moons(1000, 0.1, 3);
    t.test = make_moons(1000, 0.1, 4);
    t.arch = Architecture::mlp({2, 16, 16, 2});
    t.outputs = 2;
    t.cfg.epochs = 30;
    t.init_seed = 1;
  } else if (name == "toy-mlp") {
    const Dataset all = make_blobs(4000, 16, 10, 0.35, 42);
    t.train = all.slice(0, 3000);
    t.test = all.slice(3000, 4000);
    t.arch = Architecture::mlp({16, 64, 64, 10});
    t.outputs = 10;
    t.cfg.epochs = 20;
    t.init_seed = 1;
  } else {
    throw std::invalid_argument("unknown task " + name + " (expected xor, moons or toy-mlp)");
  }
  return t;
}

std::vector<int> private_labels(const PrivateModel& m0, const PrivateModel& m1, const Dataset& d,
                                std::size_t outputs, const Settings& st, RoundLedger* ledger) {
  const FixedFormat& f = m0.format();
  Rng rng(st.seed ^ 0x696e666572ULL);
  const FlClientData data = share_client_data(d, outputs, f, rng);
  const PrepPlan plan = predict_plan(m0.arch(), d.n, f);
  const auto r = run_two_party(
      [&](Session& s) { return predict(s, s.party() == 0 ? m0 : m1, data.x[s.party()]); }, run_options(st, plan));
  if (ledger) *ledger = r.ledger[0];
  const auto opened = decode_fixed(reconstruct(r.out[0], r.out[1]), 0);
  if (outputs > 1) return labels_from_onehot(opened, d.n);
  std::vector<int> labels;
  for (double v : opened) labels.push_back(v > 0.5 ? 1 : 0);
  return labels;
}

json infer_demo(const std::string& task, std::size_t samples, const Settings& st) {
  const Task t = make_task(task);
  FloatNet plain(t.arch, init_params(t.arch, t.init_seed));
  train_reference(plain, t.train.x, t.train.targets(t.outputs), t.train.n, t.cfg);
  const Params p = plain.params();
  const Dataset test = t.test.slice(0, std::min(samples, t.test.n));

  FixedNet fixed(t.arch, p, FixedArith{st.fmt.n_bits, st.fmt.precision});
  const auto la = predict_labels(plain, test.x, test.n);
  const auto lb = predict_labels(fixed, test.x, test.n);
  Rng rng(st.seed);
  const ModelPair m = share_model(t.arch, p, st.fmt, rng);
  RoundLedger ledger;
  const auto t0 = Clock::now();
  const auto lc = private_labels(m.m0, m.m1, test, t.outputs, st, &ledger);
  json rec{{"op", "infer"}, {"task", task}, {"samples", test.n}, {"transport", transport_name(st.transport)},
           {"seed", st.seed}};
  put_format(rec, st.fmt);
  rec["plain_accuracy"] = accuracy(la, test.labels);
  rec["fixed_accuracy"] = accuracy(lb, test.labels);
  rec["private_accuracy"] = accuracy(lc, test.labels);
  rec["agreement"] = agreement(lb, lc);
  rec["plain_private_agreement"] = agreement(la, lc);
  put_ledger(rec, ledger);
  rec["wall_ms"] = ms_since(t0);
  return rec;
}

json train_demo(const std::string& task, std::optional<std::size_t> epochs, const Settings& st) {
  Task t = make_task(task);
  if (epochs) t.cfg.epochs = *epochs;
  const Params p0 = init_params(t.arch, t.init_seed);
  const auto targets = t.train.targets(t.outputs);
  FloatNet plain(t.arch, p0);
  train_reference(plain, t.train.x, targets, t.train.n, t.cfg);
  FixedNet fixed(t.arch, p0, FixedArith{st.fmt.n_bits, st.fmt.precision});
  train_reference(fixed, t.train.x, targets, t.train.n, t.cfg);

  Rng rng(st.seed);
  ModelPair m = share_model(t.arch, p0, st.fmt, rng);
  const FlClientData data = share_client_data(t.train, t.outputs, st.fmt, rng);
  const std::uint64_t opened_before = reconstruction_count();
  const auto t0 = Clock::now();
  const auto r = run_two_party(
      [&](Session& s) {
        PrivateModel& mm = s.party() == 0 ? m.m0 : m.m1;
        return train(s, mm, data.x[s.party()], data.y[s.party()], t.cfg).steps;
      },
      run_options(st, train_plan(t.arch, t.train.n, t.cfg, st.fmt)));
  const double wall = ms_since(t0);
  const bool sealed = reconstruction_count() == opened_before;
  const auto lp = private_labels(m.m0, m.m1, t.test, t.outputs, st);

  json rec{{"op", "train"}, {"task", task}, {"epochs", t.cfg.epochs}, {"steps", r.out[0]},
           {"transport", transport_name(st.transport)}, {"seed", st.seed}};
  put_format(rec, st.fmt);
  rec["plain_accuracy"] = accuracy(predict_labels(plain, t.test.x, t.test.n), t.test.labels);
  rec["fixed_accuracy"] = accuracy(predict_labels(fixed, t.test.x, t.test.n), t.test.labels);
  rec["private_accuracy"] = accuracy(lp, t.test.labels);
  rec["agreement"] = agreement(predict_labels(fixed, t.test.x, t.test.n), lp);
  rec["model_opened_during_training"] = !sealed;
  put_ledger(rec, r.ledger[0]);
  rec["wall_ms"] = wall;
  return rec;
}

Records precision_sweep(const std::string& model, const std::vector<int>& fss_bits,
                        const std::vector<int>& precisions, const Settings& st) {
  if (model != "toy-mlp") throw std::invalid_argument("precision sweep supports --model toy-mlp");
  const Task t = make_task(model);
  FloatNet plain(t.arch, init_params(t.arch, t.init_seed));
  train_reference(plain, t.train.x, t.train.targets(t.outputs), t.train.n, t.cfg);
  const Params p = plain.params();
  const double plain_acc = accuracy(predict_labels(plain, t.test.x, t.test.n), t.test.labels);
  Records out;
  for (int prec : precisions) {
    FixedNet fixed(t.arch, p, FixedArith{st.fmt.n_bits, prec});
    const auto lf = predict_labels(fixed, t.test.x, t.test.n);
    for (int fb : fss_bits) {
      Settings s = st;
      s.fmt.precision = prec;
      s.fmt.fss_bits = fb;
      Rng rng(st.seed);
      const ModelPair m = share_model(t.arch, p, s.fmt, rng);
      const auto t0 = Clock::now();
      const auto lp = private_labels(m.m0, m.m1, t.test, t.outputs, s);
      json rec{{"op", "precision_sweep"}, {"model", model}, {"samples", t.test.n}};
      put_format(rec, s.fmt);
      rec["agreement"] = agreement(lf, lp);
      rec["private_accuracy"] = accuracy(lp, t.test.labels);
      rec["fixed_accuracy"] = accuracy(lf, t.test.labels);
      rec["plain_accuracy"] = plain_acc;
      rec["wall_ms"] = ms_since(t0);
      out.push_back(std::move(rec));
    }
  }
  return out;
}

json fl_mask_sweep(std::size_t max_n) {
  std::size_t topologies = 0, mask_bad = 0, agg_bad = 0;
  const Architecture arch = Architecture::mlp({3, 4, 2});
  const FixedFormat fmt;
  for (std::size_t n = 2; n <= max_n; ++n) {
    for (std::size_t k = 1; k < n; ++k) {
      ++topologies;
      FlTopology topo;
      topo.n = n;
      topo.k = k;
      Rng rng(n * 131 + k);
      const FlSeeds seeds = fl_exchange_seeds(topo, rng);
      std::vector<ModelPair> copies;
      for (std::size_t i = 0; i < n; ++i) copies.push_back(share_model(arch, init_params(arch, 50 + i), fmt, rng));
      const std::size_t len = flatten_params(copies[0].m1).size();
      std::vector<std::uint64_t> mask_sum(len, 0), plain(len, 0);
      std::vector<PrivateModel> server;
      std::vector<std::vector<std::uint64_t>> masked;
      for (std::size_t i = 0; i < n; ++i) {
        const auto mu = fl_mask(i, topo, seeds, 0, len, fmt.n_bits);
        auto w = flatten_params(copies[i].m1);
        const auto w0 = flatten_params(copies[i].m0);
        for (std::size_t j = 0; j < len; ++j) {
          mask_sum[j] += mu[j];
          plain[j] += w[j] + w0[j];
          w[j] += mu[j];
        }
        server.push_back(copies[i].m0);
        masked.push_back(std::move(w));
      }
      mask_bad += std::count_if(mask_sum.begin(), mask_sum.end(), [](std::uint64_t v) { return v != 0; }) > 0;
      const FlAggregate agg = fl_aggregate(server, masked, rng.uniform(n));
      const auto g0 = flatten_params(agg.global.m0), g1 = flatten_params(agg.global.m1);
      bool ok = true;
      for (std::size_t j = 0; j < len; ++j) ok = ok && g0[j] + g1[j] == plain[j];
      agg_bad += !ok;
    }
  }
  return json{{"op", "fl_mask_sweep"},    {"max_clients", max_n},     {"topologies", topologies},
              {"mask_failures", mask_bad}, {"aggregate_failures", agg_bad}};
}

Records fl_demo(std::size_t clients, std::size_t k, std::size_t rounds, const Settings& st) {
  Task t = make_task("xor");
  t.cfg.epochs = 20;
  FlConfig cfg;
  cfg.train = t.cfg;
  cfg.seed = st.seed;
  cfg.transport = st.transport;
  FlState state;
  state.topo.n = clients;
  state.topo.k = clients == 1 ? 0 : k;
  state.topo.validate();
  const Params p0 = init_params(t.arch, t.init_seed);
  Rng rng(st.seed);
  state.copies = fl_init(t.arch, p0, st.fmt, state.topo, rng);
  std::vector<FlClientData> data;
  for (std::size_t i = 0; i < clients; ++i) {
    const std::size_t b = t.train.n * i / clients, e = t.train.n * (i + 1) / clients;
    data.push_back(share_client_data(t.train.slice(b, e), t.outputs, st.fmt, rng));
  }
  Records out;
  const std::uint64_t opened_before = reconstruction_count();
  const auto t0 = Clock::now();
  for (std::size_t r = 0; r < rounds; ++r) {
    const auto t1 = Clock::now();
    const FlRoundReport rep = fl_round(state, data, cfg);
    std::uint64_t train_rounds = 0, train_bytes = 0;
    for (const auto& l : rep.train_ledgers) {
      train_rounds = std::max(train_rounds, l.total().rounds);
      train_bytes += l.total().bytes_sent + l.total().bytes_received;
    }
    out.push_back(json{{"op", "fl_round"},
                       {"round", rep.round},
                       {"clients", clients},
                       {"k", state.topo.k},
                       {"aggregator", rep.aggregator},
                       {"train_rounds", train_rounds},
                       {"train_bytes", train_bytes},
                       {"aggregation_rounds", rep.aggregation.rounds},
                       {"aggregation_bytes", rep.aggregation.bytes},
                       {"aggregation_messages", rep.aggregation.messages},
                       {"wall_ms", ms_since(t1)}});
  }
  const double wall = ms_since(t0);
  const bool sealed = reconstruction_count() == opened_before;

  TrainConfig central = t.cfg;
  central.epochs = t.cfg.epochs * rounds;
  FixedNet oracle(t.arch, p0, FixedArith{st.fmt.n_bits, st.fmt.precision});
  train_reference(oracle, t.train.x, t.train.targets(t.outputs), t.train.n, central);
  const auto lp = private_labels(state.copies[0].m0, state.copies[0].m1, t.test, t.outputs, st);
  const double fed = accuracy(lp, t.test.labels);
  const double cen = accuracy(predict_labels(oracle, t.test.x, t.test.n), t.test.labels);
  json rec{{"op", "fl_demo"}, {"clients", clients}, {"k", state.topo.k}, {"rounds", rounds},
           {"epochs_per_round", t.cfg.epochs}, {"transport", transport_name(st.transport)}, {"seed", st.seed}};
  put_format(rec, st.fmt);
  rec["federated_accuracy"] = fed;
  rec["centralized_accuracy"] = cen;
  rec["gap"] = cen - fed;
  rec["model_opened_during_rounds"] = !sealed;
  rec["wall_ms"] = wall;
  out.push_back(std::move(rec));
  return out;
}

}  // namespace ariann::programs
