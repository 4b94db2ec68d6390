#include "ariann/federated.hpp"

#include <fstream>
#include <future>
#include <sstream>
#include <stdexcept>

#include "ariann/session.hpp"

namespace ariann {

// ---------------------------------------------------------------------------
// Topology

void FlTopology::validate() const {
  if (n == 1 && k == 0) return;
  if (k < 1 || k >= n) {
    throw std::invalid_argument("topology needs 1 <= k < n, got n=" + std::to_string(n) + " k=" + std::to_string(k));
  }
  if (!endpoints.empty() && endpoints.size() != n) {
    throw std::invalid_argument("topology lists " + std::to_string(endpoints.size()) + " endpoints for " +
                                std::to_string(n) + " clients");
  }
}

std::vector<std::pair<std::size_t, std::size_t>> FlTopology::edges() const {
  validate();
  std::vector<std::pair<std::size_t, std::size_t>> e;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 1; j <= k; ++j) e.emplace_back(i, (i + j) % n);
  }
  return e;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::size_t parse_count(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  unsigned long long x = 0;
  try {
    x = std::stoull(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size()) throw std::invalid_argument("topology: " + key + " is not a number: " + v);
  return static_cast<std::size_t>(x);
}

}  // namespace

FlTopology FlTopology::parse(const std::string& text) {
  FlTopology t;
  bool have_n = false, have_k = false;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("topology line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key == "n") {
      t.n = parse_count(key, value);
      have_n = true;
    } else if (key == "k") {
      t.k = parse_count(key, value);
      have_k = true;
    } else if (key == "endpoints") {
      t.endpoints.clear();
      std::istringstream parts(value);
      std::string p;
      while (std::getline(parts, p, ',')) {
        if (!trim(p).empty()) t.endpoints.push_back(trim(p));
      }
    } else {
      throw std::invalid_argument("topology line " + std::to_string(lineno) + ": unknown key " + key);
    }
  }
  if (!have_n || !have_k) throw std::invalid_argument("topology needs both n and k");
  t.validate();
  return t;
}

FlTopology FlTopology::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

// ---------------------------------------------------------------------------
// Initialisation and masks

FlSeeds fl_exchange_seeds(const FlTopology& topo, Rng& rng) {
  topo.validate();
  FlSeeds s;
  s.own.assign(topo.n, {});
  s.received.assign(topo.n, std::vector<Seed>(topo.k));
  for (std::size_t i = 0; i < topo.n; ++i) {
    for (std::size_t j = 0; j < topo.k; ++j) {
      s.own[i].push_back(rng.next_seed());
      // Delivered to i+1+j, which files it under "from (i+1+j) - 1 - j".
      s.received[(i + 1 + j) % topo.n][j] = s.own[i].back();
    }
  }
  return s;
}

std::vector<ModelPair> fl_init(const Architecture& arch, const Params& theta, const FixedFormat& fmt,
                               const FlTopology& topo, Rng& rng) {
  topo.validate();
  std::vector<ModelPair> copies;
  for (std::size_t i = 0; i < topo.n; ++i) copies.push_back(share_model(arch, theta, fmt, rng));
  return copies;
}

namespace {

void add_stream(std::vector<std::uint64_t>& acc, const Seed& seed, std::uint64_t round, bool negate, int n_bits) {
  Rng stream(seed.block() ^ Block{round, 0});
  const std::uint64_t mask = ring_mask(n_bits);
  for (auto& v : acc) {
    const std::uint64_t m = stream.next_u64();
    v = (negate ? v - m : v + m) & mask;
  }
}

}  // namespace

std::vector<std::uint64_t> fl_mask(std::size_t client, const FlTopology& topo, const FlSeeds& seeds,
                                   std::uint64_t round, std::size_t length, int n_bits) {
  topo.validate();
  if (client >= topo.n) throw std::out_of_range("no client " + std::to_string(client));
  if (client >= seeds.own.size() || client >= seeds.received.size() || seeds.own[client].size() != topo.k ||
      seeds.received[client].size() != topo.k) {
    throw std::invalid_argument("client " + std::to_string(client) + " is missing seeds");
  }
  std::vector<std::uint64_t> mu(length, 0);
  for (const Seed& s : seeds.own[client]) add_stream(mu, s, round, false, n_bits);
  for (const Seed& s : seeds.received[client]) add_stream(mu, s, round, true, n_bits);
  return mu;
}

std::vector<std::uint64_t> flatten_params(const PrivateModel& m) {
  std::vector<std::uint64_t> out;
  for (const auto& layer : m.params()) {
    for (const auto& t : layer) out.insert(out.end(), t.values().data().begin(), t.values().data().end());
  }
  return out;
}

void assign_params(PrivateModel& m, const std::vector<std::uint64_t>& words) {
  std::size_t pos = 0;
  for (auto& layer : m.params()) {
    for (auto& t : layer) {
      if (pos + t.size() > words.size()) throw std::invalid_argument("assign_params: too few words");
      std::vector<std::uint64_t> v(words.begin() + static_cast<std::ptrdiff_t>(pos),
                                   words.begin() + static_cast<std::ptrdiff_t>(pos + t.size()));
      t = AdditiveShare(t.party(), RingTensor(t.shape(), t.n_bits(), std::move(v)), t.precision());
      pos += t.size();
    }
  }
  if (pos != words.size()) throw std::invalid_argument("assign_params: too many words");
}

// ---------------------------------------------------------------------------
// Aggregation

FlAggregate fl_aggregate(const std::vector<PrivateModel>& server_halves,
                         const std::vector<std::vector<std::uint64_t>>& masked, std::size_t aggregator) {
  const std::size_t n = server_halves.size();
  if (n == 0) throw std::invalid_argument("nothing to aggregate");
  if (masked.size() != n) {
    throw std::invalid_argument("aggregation abort: " + std::to_string(masked.size()) + " masked shares for " +
                                std::to_string(n) + " clients");
  }
  if (aggregator >= n) throw std::out_of_range("aggregator is not a client");
  const PrivateModel& like = server_halves[0];
  const int n_bits = like.format().n_bits;
  const std::uint64_t mask = ring_mask(n_bits);
  std::vector<std::uint64_t> s0 = flatten_params(like);
  for (std::size_t i = 1; i < n; ++i) {
    const auto w = flatten_params(server_halves[i]);
    if (w.size() != s0.size()) throw std::invalid_argument("server halves differ in size");
    for (std::size_t j = 0; j < w.size(); ++j) s0[j] = (s0[j] + w[j]) & mask;
  }
  std::vector<std::uint64_t> s1(s0.size(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (masked[i].size() != s0.size()) {
      throw std::invalid_argument("aggregation abort: client " + std::to_string(i) + " sent " +
                                  std::to_string(masked[i].size()) + " words");
    }
    for (std::size_t j = 0; j < s1.size(); ++j) s1[j] = (s1[j] + masked[i][j]) & mask;
  }
  FlAggregate out;
  out.aggregator = aggregator;
  out.global.m0 = like;
  assign_params(out.global.m0, s0);
  std::vector<std::vector<AdditiveShare>> p1;
  for (const auto& layer : like.params()) {
    p1.emplace_back();
    for (const auto& t : layer) p1.back().emplace_back(1, RingTensor(t.shape(), t.n_bits()), t.precision());
  }
  out.global.m1 = PrivateModel(like.arch(), like.format(), 1, std::move(p1));
  assign_params(out.global.m1, s1);
  // n - 1 uploads to the aggregator (its own stays local) and n - 1
  // broadcast copies; two rounds.
  const std::uint64_t width = (static_cast<std::uint64_t>(n_bits) + 7) / 8;
  out.ledger.rounds = n > 1 ? 2 : 0;
  out.ledger.messages = 2 * (n - 1);
  out.ledger.bytes = out.ledger.messages * s0.size() * width;
  return out;
}

void fl_normalize(ModelPair& global, std::size_t n) {
  if (n == 0) throw std::invalid_argument("cannot normalize by zero clients");
  if (n == 1) return;
  for (PrivateModel* m : {&global.m0, &global.m1}) {
    for (auto& layer : m->params()) {
      for (auto& t : layer) t = div_public(t, static_cast<double>(n));
    }
  }
}

FlClientData share_client_data(const Dataset& d, std::size_t outputs, const FixedFormat& fmt, Rng& rng) {
  FlClientData c;
  auto [x0, x1] = share(encode_fixed(d.x, {d.n, d.features}, fmt.precision, fmt.n_bits), rng, fmt.precision);
  auto [y0, y1] = share(encode_fixed(d.targets(outputs), {d.n, outputs}, fmt.precision, fmt.n_bits), rng,
                        fmt.precision);
  c.x[0] = std::move(x0);
  c.x[1] = std::move(x1);
  c.y[0] = std::move(y0);
  c.y[1] = std::move(y1);
  return c;
}

// ---------------------------------------------------------------------------
// One round

RunOptions fl_session_options(const FlConfig& cfg, std::uint64_t round, std::size_t client) {
  RunOptions opt;
  opt.transport = cfg.transport;
  opt.dealer_seed = cfg.seed * 1000003 + round * 1009 + client;
  opt.coin_seed = cfg.seed + round;
  return opt;
}

FlRoundReport fl_round(FlState& state, const std::vector<FlClientData>& data, const FlConfig& cfg) {
  const FlTopology& topo = state.topo;
  const std::size_t n = state.copies.size();
  if (n == 0 || data.size() != n) throw std::invalid_argument("one data set per client copy");
  topo.validate();
  if (topo.n != n) throw std::invalid_argument("topology and client copies disagree on n");
  const std::uint64_t round = state.round;
  FlRoundReport rep;
  rep.round = round;

  // Training: one two-party session per client, concurrently, on working
  // copies so that an aborted round leaves the state as it was.
  std::vector<ModelPair> work = state.copies;
  std::vector<std::future<RunResult<int>>> jobs;
  for (std::size_t i = 0; i < n; ++i) {
    jobs.push_back(std::async(std::launch::async, [&, i] {
      const RunOptions opt = fl_session_options(cfg, round, i);
      ModelPair& copy = work[i];
      return run_two_party(
          [&](Session& s) {
            PrivateModel& m = s.party() == 0 ? copy.m0 : copy.m1;
            train(s, m, data[i].x[s.party()], data[i].y[s.party()], cfg.train);
            return 0;
          },
          opt);
    }));
  }
  std::exception_ptr failure;
  for (auto& j : jobs) {
    try {
      rep.train_ledgers.push_back(j.get().ledger[0]);
    } catch (...) {
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  if (n == 1) {
    state.copies = std::move(work);
    state.round++;
    return rep;
  }

  // Aggregation.
  Rng coins(Block{cfg.seed, 0x666c000000000000ULL | round});
  rep.aggregator = static_cast<std::size_t>(coins.uniform(n));
  const FlSeeds seeds = fl_exchange_seeds(topo, coins);
  const int n_bits = work[0].m1.format().n_bits;
  std::vector<PrivateModel> server_halves;
  std::vector<std::vector<std::uint64_t>> masked;
  for (std::size_t i = 0; i < n; ++i) {
    server_halves.push_back(work[i].m0);
    auto w = flatten_params(work[i].m1);
    const auto mu = fl_mask(i, topo, seeds, round, w.size(), n_bits);
    for (std::size_t j = 0; j < w.size(); ++j) w[j] = (w[j] + mu[j]) & ring_mask(n_bits);
    masked.push_back(std::move(w));
  }
  FlAggregate agg = fl_aggregate(server_halves, masked, rep.aggregator);
  if (cfg.normalize) fl_normalize(agg.global, n);
  rep.aggregation = agg.ledger;
  rep.aggregation.messages += topo.edges().size();
  rep.aggregation.bytes += topo.edges().size() * 16;
  rep.aggregation.rounds += 1;

  // Every copy continues from the global shares; momentum stays per client.
  const auto g0 = flatten_params(agg.global.m0), g1 = flatten_params(agg.global.m1);
  for (auto& copy : work) {
    assign_params(copy.m0, g0);
    assign_params(copy.m1, g1);
  }
  state.copies = std::move(work);
  state.round++;
  return rep;
}

}  // namespace ariann
