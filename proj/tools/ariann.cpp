// ariann: dealer and party processes, protocol benchmarks and the small
// experiments. Every measurement is printed as one JSON line.
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "programs.hpp"

#include "ariann/federated.hpp"
#include "ariann/key_io.hpp"

using namespace ariann;
using programs::json;

namespace {

enum Exit { kOk = 0, kUsage = 1, kAbort = 2, kMismatch = 3 };

struct Endpoint {
  TransportKind kind = TransportKind::kLocal;
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
};

// local | tcp | tcp:HOST:PORT
Endpoint parse_endpoint(const std::string& s) {
  Endpoint e;
  if (s == "local") return e;
  e.kind = TransportKind::kTcp;
  if (s == "tcp") return e;
  if (s.rfind("tcp:", 0) != 0) throw CLI::ValidationError("--transport", "expected local, tcp or tcp:HOST:PORT");
  const std::string rest = s.substr(4);
  const auto colon = rest.rfind(':');
  if (colon == std::string::npos || colon == 0) {
    throw CLI::ValidationError("--transport", "expected tcp:HOST:PORT, got " + s);
  }
  e.host = rest.substr(0, colon);
  try {
    const int port = std::stoi(rest.substr(colon + 1));
    if (port <= 0 || port > 65535) throw std::out_of_range("port");
    e.port = static_cast<std::uint16_t>(port);
  } catch (const std::exception&) {
    throw CLI::ValidationError("--transport", "bad port in " + s);
  }
  return e;
}

class Reporter {
 public:
  void open(const std::string& path) {
    if (path.empty()) return;
    file_.open(path, std::ios::app);
    if (!file_) throw std::runtime_error("cannot open report file " + path);
  }
  void emit(const json& rec) {
    std::ostream& out = file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout;
    out << rec.dump() << '\n';
    out.flush();
  }

 private:
  std::ofstream file_;
};

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  if (out.empty()) throw CLI::ValidationError("list", "empty list");
  return out;
}

// Runs one side of a benchmark program against a peer process.
json run_party(int party, const std::string& op, std::size_t batch, const std::string& prep_path,
               const Endpoint& ep, const programs::Settings& st) {
  if (ep.kind != TransportKind::kTcp || ep.port == 0) {
    throw CLI::ValidationError("--transport", "party mode needs --transport tcp:HOST:PORT");
  }
  const auto inst = programs::make_op(op, batch, st.fmt, st.seed);
  auto prep = std::make_shared<BundlePrep>(deserialize_bundle(read_bytes(prep_path)));
  const auto timeout = default_timeout();
  std::shared_ptr<Channel> ch;
  if (party == 0) {
    TcpListener listener(ep.port, ep.host);
    ch = listener.accept(timeout);
  } else {
    ch = tcp_connect(ep.host, ep.port, timeout);
  }
  Session s(party, ch, prep, st.seed + 1);
  s.set_timeout(timeout);
  const auto t0 = std::chrono::steady_clock::now();
  AdditiveShare y;
  try {
    y = programs::run_op(s, inst);
  } catch (const std::exception& e) {
    s.abort(e.what());
    throw;
  }
  const double wall = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  const LedgerEntry online = s.ledger().total();
  // Opening the output for the check is not part of the protocol's cost.
  const auto theirs = s.exchange(FrameType::kReveal, y.values().data(), y.n_bits());
  std::vector<std::uint64_t> sum(theirs.size());
  for (std::size_t i = 0; i < sum.size(); ++i) sum[i] = (y.values().data()[i] + theirs[i]) & y.values().mask();
  const auto [elements, bad] = programs::check_op(inst, RingTensor(y.shape(), y.n_bits(), std::move(sum)));
  s.channel().close();
  return json{{"op", op},
              {"role", "party" + std::to_string(party)},
              {"batch", batch},
              {"transport", "tcp"},
              {"prep", "bundle"},
              {"seed", st.seed},
              {"n_bits", st.fmt.n_bits},
              {"precision", st.fmt.precision},
              {"fss_bits", st.fmt.fss_bits},
              {"rounds", online.rounds},
              {"bytes", online.bytes_sent + online.bytes_received},
              {"elements", online.elements},
              {"expected_rounds", programs::expected_rounds(op)},
              {"prep_left", prep->remaining()},
              {"outputs", elements},
              {"mismatches", bad},
              {"agreement", 1.0 - static_cast<double>(bad) / static_cast<double>(elements)},
              {"wall_ms", wall}};
}

int rounds_exit(const json& rec) {
  return rec["rounds"] == rec["expected_rounds"] ? kOk : kMismatch;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Private inference and training with function secret sharing"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand

  programs::Settings st;
  std::string transport = "local", report_path;
  app.add_option("--n-bits", st.fmt.n_bits, "Arithmetic ring width")->check(CLI::Range(8, 64));
  app.add_option("--precision", st.fmt.precision, "Fixed-point decimals")->check(CLI::Range(0, 6));
  app.add_option("--fss-bits", st.fmt.fss_bits, "Comparison input domain")->check(CLI::Range(2, 64));
  app.add_option("--seed", st.seed, "Dealer and share randomness");
  app.add_option("--transport", transport, "local, tcp (loopback) or tcp:HOST:PORT");
  app.add_option("--report", report_path, "Append JSON lines here instead of stdout");
  app.add_flag("--bundles", st.bundles, "Preprocess into bundles before the online phase");

  std::size_t batch = 0;
  std::string program = "relu";

  auto* compare = app.add_subcommand("compare", "Comparison keys: exhaustive check or private batch");
  int cmp_n = 8;
  bool exhaustive = false;
  compare->add_option("--n", cmp_n, "Input domain bits")->check(CLI::Range(1, 64));
  compare->add_flag("--exhaustive", exhaustive, "Every (alpha, x) pair, keys evaluated directly");
  compare->add_option("--batch", batch, "Private comparisons when not exhaustive");

  auto* bench = app.add_subcommand("bench", "One protocol on a random batch");
  bench->add_option("--program", program, "compare relu argmax maxpool maxpool-k2 matmul conv")
      ->check(CLI::IsMember(programs::op_names()));
  bench->add_option("--batch", batch, "Batch size")->required();

  auto* relu = app.add_subcommand("relu", "Private ReLU on a random batch");
  relu->add_option("--batch", batch, "Elements");
  auto* argmax = app.add_subcommand("argmax", "Private argmax over rows of 10");
  argmax->add_option("--batch", batch, "Rows");
  auto* maxpool = app.add_subcommand("maxpool", "Private 2x2 max pooling of 8x8 images");
  bool k2 = false;
  maxpool->add_option("--batch", batch, "Images");
  maxpool->add_flag("--k2", k2, "Pairwise tree instead of the window argmax");

  auto* infer = app.add_subcommand("infer", "Plaintext-trained model: plain, fixed-point and private labels");
  std::string task = "moons";
  std::size_t samples = 1000;
  infer->add_option("--task", task, "xor, moons or toy-mlp");
  infer->add_option("--samples", samples, "Test samples");

  auto* train = app.add_subcommand("train", "Private training against fixed-point and float");
  train->alias("demo");
  std::string train_task = "xor";
  std::optional<std::size_t> epochs;
  train->add_option("--task", train_task, "xor, moons or toy-mlp");
  train->add_option("--epochs", epochs, "Override the task's epochs");

  auto* sweep = app.add_subcommand("precision-sweep", "Private inference with the comparison domain varied");
  std::string model = "toy-mlp", fss_list = "12,16,20,24,28,32", prec_list = "3";
  sweep->add_option("--model", model, "toy-mlp");
  sweep->add_option("--fss-bits-list", fss_list, "Comma separated domains");
  sweep->add_option("--precisions", prec_list, "Comma separated decimals");

  auto* fl = app.add_subcommand("fl-demo", "Federated XOR over n clients");
  std::size_t clients = 2, k = 1, rounds = 2, mask_sweep = 8;
  std::string topology;
  fl->add_option("--clients", clients, "Clients")->check(CLI::Range(1, 64));
  fl->add_option("--k", k, "Collusion parameter");
  fl->add_option("--rounds", rounds, "Federated rounds");
  fl->add_option("--topology", topology, "key=value file with n, k and endpoints")->check(CLI::ExistingFile);
  fl->add_option("--mask-sweep", mask_sweep, "Check mask cancellation for all n up to this (0: skip)");

  auto* dealer = app.add_subcommand("dealer", "Write both parties' preprocessing bundles");
  std::string out_prefix;
  dealer->add_option("--program", program)->check(CLI::IsMember(programs::op_names()));
  dealer->add_option("--batch", batch)->required();
  dealer->add_option("--out", out_prefix, "Writes PREFIX.p0.arnb and PREFIX.p1.arnb")->required();

  auto* party = app.add_subcommand("party", "One online party over TCP");
  int party_id = 0;
  std::string prep_path;
  party->add_option("--party", party_id)->required()->check(CLI::IsMember({0, 1}));
  party->add_option("--program", program)->check(CLI::IsMember(programs::op_names()));
  party->add_option("--batch", batch)->required();
  party->add_option("--prep", prep_path, "This party's bundle")->required()->check(CLI::ExistingFile);

  auto* aio = app.add_subcommand("all-in-one", "Dealer and both parties in one process");
  std::string aio_program = "relu";
  aio->add_option("--program", aio_program, "A protocol, infer or train");
  aio->add_option("--batch", batch);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  Reporter rep;
  try {
    const Endpoint ep = parse_endpoint(transport);
    st.transport = ep.kind;
    check_fss_widths(st.fmt.fss_bits, st.fmt.n_bits);
    rep.open(report_path);

    if (*compare) {
      if (exhaustive) {
        const json r = programs::compare_exhaustive(cmp_n);
        rep.emit(r);
        return r["mismatches"] == 0 ? kOk : kMismatch;
      }
      st.fmt.fss_bits = cmp_n;
      check_fss_widths(st.fmt.fss_bits, st.fmt.n_bits);
      const json r = programs::bench_op("compare", batch ? batch : 1000, st);
      rep.emit(r);
      return rounds_exit(r);
    }
    if (*bench || *relu || *argmax || *maxpool) {
      if (*relu) program = "relu";
      if (*argmax) program = "argmax";
      if (*maxpool) program = k2 ? "maxpool-k2" : "maxpool";
      const json r = programs::bench_op(program, batch ? batch : 1000, st);
      rep.emit(r);
      return rounds_exit(r);
    }
    if (*infer) {
      rep.emit(programs::infer_demo(task, samples, st));
      return kOk;
    }
    if (*train) {
      rep.emit(programs::train_demo(train_task, epochs, st));
      return kOk;
    }
    if (*sweep) {
      for (const auto& r : programs::precision_sweep(model, parse_int_list(fss_list), parse_int_list(prec_list), st)) {
        rep.emit(r);
      }
      return kOk;
    }
    if (*fl) {
      if (!topology.empty()) {
        const FlTopology t = FlTopology::load(topology);
        clients = t.n;
        k = t.k;
      }
      int code = kOk;
      if (mask_sweep >= 2) {
        const json m = programs::fl_mask_sweep(mask_sweep);
        rep.emit(m);
        if (m["mask_failures"] != 0 || m["aggregate_failures"] != 0) code = kMismatch;
      }
      for (const auto& r : programs::fl_demo(clients, k, rounds, st)) rep.emit(r);
      return code;
    }
    if (*dealer) {
      const auto inst = programs::make_op(program, batch, st.fmt, st.seed);
      const PrepPlan plan = programs::op_plan(inst);
      const BundlePair b = dealer_preprocess(plan, st.seed);
      const auto bytes0 = serialize_bundle(b.b0), bytes1 = serialize_bundle(b.b1);
      write_bytes(out_prefix + ".p0.arnb", bytes0);
      write_bytes(out_prefix + ".p1.arnb", bytes1);
      rep.emit(json{{"op", "dealer"},
                    {"program", program},
                    {"batch", batch},
                    {"items", plan.size()},
                    {"party_bytes", {bytes0.size(), bytes1.size()}},
                    {"files", {out_prefix + ".p0.arnb", out_prefix + ".p1.arnb"}}});
      return kOk;
    }
    if (*party) {
      const json r = run_party(party_id, program, batch, prep_path, ep, st);
      rep.emit(r);
      return rounds_exit(r);
    }
    if (*aio) {
      // The dealer writes both bundles up front, then the two parties run
      // on their own threads over the in-process transport.
      st.bundles = true;
      st.transport = TransportKind::kLocal;
      if (aio_program == "train") {
        rep.emit(programs::train_demo("xor", std::nullopt, st));
        return kOk;
      }
      if (aio_program == "infer") {
        rep.emit(programs::infer_demo("moons", samples, st));
        return kOk;
      }
      const auto& ops = programs::op_names();
      if (std::find(ops.begin(), ops.end(), aio_program) == ops.end()) {
        throw CLI::ValidationError("--program", "expected a protocol, infer or train, got " + aio_program);
      }
      const json r = programs::bench_op(aio_program, batch ? batch : 1000, st);
      rep.emit(r);
      return rounds_exit(r);
    }
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ProtocolError& e) {
    rep.emit(json{{"op", "abort"}, {"error", e.what()}});
    std::cerr << "protocol abort: " << e.what() << "\n";
    return kAbort;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
