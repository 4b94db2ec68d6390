#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ariann/datasets.hpp"
#include "ariann/model.hpp"
#include "ariann/run.hpp"

// Federated training: a server holds share 0 of every client's model copy,
// client i holds share 1 of its own copy. Client halves are aggregated
// through one randomly chosen client behind pairwise seed masks, so no
// coalition of the server and k clients sees another client's share.
namespace ariann {

struct FlTopology {
  std::size_t n = 2;  // clients
  std::size_t k = 1;  // client i sends seeds to i+1 .. i+k (mod n)
  std::vector<std::string> endpoints;  // optional, one per client

  // 1 <= k < n; n = 1, k = 0 is the single-client degenerate case.
  void validate() const;
  // Directed seed edges (from, to).
  std::vector<std::pair<std::size_t, std::size_t>> edges() const;

  // key=value lines: n, k, endpoints (comma separated). '#' starts a comment.
  static FlTopology parse(const std::string& text);
  static FlTopology load(const std::string& path);
};

// own[i][j] is the seed client i sent to i+1+j; received[i][j] the one it
// got from i-1-j.
struct FlSeeds {
  std::vector<std::vector<Seed>> own;
  std::vector<std::vector<Seed>> received;
};

FlSeeds fl_exchange_seeds(const FlTopology& topo, Rng& rng);

// Copy i = {server half (party 0), client i half (party 1)}, each copy an
// independent sharing of theta.
std::vector<ModelPair> fl_init(const Architecture& arch, const Params& theta, const FixedFormat& fmt,
                               const FlTopology& topo, Rng& rng);

// mu_i = sum of masks from own seeds - sum of masks from received seeds.
// A mask is the stream Rng(seed XOR (round, 0)) read as `length` n-bit
// words. Throws std::invalid_argument if client i is missing a seed.
std::vector<std::uint64_t> fl_mask(std::size_t client, const FlTopology& topo, const FlSeeds& seeds,
                                   std::uint64_t round, std::size_t length, int n_bits);

// All parameter words of one half, layer by layer, weights then bias.
std::vector<std::uint64_t> flatten_params(const PrivateModel& m);
void assign_params(PrivateModel& m, const std::vector<std::uint64_t>& words);

// Traffic of one aggregation: seed exchange, masked shares to the
// aggregator and its broadcast back.
struct FlAggregationLedger {
  std::uint64_t rounds = 0;
  std::uint64_t bytes = 0;
  std::uint64_t messages = 0;
};

struct FlAggregate {
  ModelPair global;         // m0 = sum of server halves, m1 = sum of client halves
  std::size_t aggregator = 0;
  FlAggregationLedger ledger;
};

// server_halves[i] and masked[i] belong to client i. The client half of the
// result is what the aggregator broadcasts.
FlAggregate fl_aggregate(const std::vector<PrivateModel>& server_halves,
                         const std::vector<std::vector<std::uint64_t>>& masked, std::size_t aggregator);

// Multiplies both halves by 1/n (a public constant), locally.
void fl_normalize(ModelPair& global, std::size_t n);

struct FlClientData {
  AdditiveShare x[2];  // server, client
  AdditiveShare y[2];
};

FlClientData share_client_data(const Dataset& d, std::size_t outputs, const FixedFormat& fmt, Rng& rng);

struct FlConfig {
  TrainConfig train;        // local training per round
  bool normalize = true;    // average instead of sum
  std::uint64_t seed = 1;   // dealer, masks and the aggregator draw
  TransportKind transport = TransportKind::kLocal;
};

// Session options of client i's training in a given round.
RunOptions fl_session_options(const FlConfig& cfg, std::uint64_t round, std::size_t client);

struct FlState {
  FlTopology topo;
  std::vector<ModelPair> copies;
  std::uint64_t round = 0;
};

struct FlRoundReport {
  std::uint64_t round = 0;
  std::size_t aggregator = 0;
  std::vector<RoundLedger> train_ledgers;  // server side, per client
  FlAggregationLedger aggregation;
};

// Trains every copy on its client's data in concurrent two-party sessions,
// then masks, aggregates and hands the new global shares back to every
// copy. Any client failure aborts the round.
FlRoundReport fl_round(FlState& state, const std::vector<FlClientData>& data, const FlConfig& cfg);

}  // namespace ariann
