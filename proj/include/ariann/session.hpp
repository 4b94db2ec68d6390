#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "ariann/prep.hpp"
#include "ariann/prg.hpp"
#include "ariann/transport.hpp"

namespace ariann {

struct LedgerEntry {
  std::uint64_t rounds = 0;
  std::uint64_t bytes_sent = 0;
  std::uint64_t bytes_received = 0;
  std::uint64_t elements = 0;  // ring elements sent
  bool operator==(const LedgerEntry&) const = default;
};

// Online communication per operation tag. A round is one matched
// send + receive in a protocol step; it is credited to the outermost
// operation scope open at the time.
class RoundLedger {
 public:
  void record(const std::string& tag, std::uint64_t sent, std::uint64_t received,
              std::uint64_t elements);
  LedgerEntry get(const std::string& tag) const;
  LedgerEntry total() const { return total_; }
  const std::map<std::string, LedgerEntry>& entries() const { return entries_; }
  bool operator==(const RoundLedger&) const = default;

 private:
  std::map<std::string, LedgerEntry> entries_;
  LedgerEntry total_;
};

class Session {
 public:
  // `coin_seed` must be the same on both parties; it drives public coins.
  Session(int party, std::shared_ptr<Channel> channel, std::shared_ptr<PrepSource> prep,
          std::uint64_t coin_seed = 0);
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  int party() const { return party_; }
  RoundLedger& ledger() { return ledger_; }
  const RoundLedger& ledger() const { return ledger_; }
  PrepSource& prep();
  Channel& channel() { return *channel_; }

  std::chrono::milliseconds timeout() const { return timeout_; }
  void set_timeout(std::chrono::milliseconds t) { timeout_ = t; }

  // One round: sends our ring elements (ceil(n/8) bytes each) and returns the
  // peer's message of the same length.
  std::vector<std::uint64_t> exchange(FrameType type, std::span<const std::uint64_t> mine,
                                      int n_bits);
  std::vector<std::uint8_t> exchange_bytes(FrameType type, std::span<const std::uint8_t> mine,
                                           std::uint64_t elements);

  // Draws from the prep source and logs the request under the current tag.
  CmpKeyBatch take_cmp(std::size_t count, int n_bits, int out_bits);
  EqKeyBatch take_eq(std::size_t count, int n_bits, int out_bits);
  TripleShare take_triple(const TripleSpec& spec);
  const PrepPlan& prep_log() const { return prep_log_; }

  // Marks a preprocessing item used. Throws KeyReuseError the second time.
  void consume(std::uint64_t prep_id, const std::string& what);

  class OpScope {
   public:
    OpScope(Session& s, std::string tag);
    ~OpScope();
    OpScope(const OpScope&) = delete;
    OpScope& operator=(const OpScope&) = delete;

   private:
    Session& s_;
  };
  OpScope op(std::string tag) { return OpScope(*this, std::move(tag)); }
  std::string current_tag() const;

  // Uniform in [0, bound), identical on both parties.
  std::uint64_t public_uniform(std::uint64_t bound) { return coins_.uniform(bound); }

  // Tells the peer we are giving up and closes the channel.
  void abort(const std::string& reason) noexcept;

 private:
  int party_;
  std::shared_ptr<Channel> channel_;
  std::shared_ptr<PrepSource> prep_;
  RoundLedger ledger_;
  std::unordered_set<std::uint64_t> consumed_;
  PrepPlan prep_log_;
  std::vector<std::string> scopes_;
  Rng coins_;
  std::chrono::milliseconds timeout_;
};

std::vector<std::uint8_t> pack_ring(std::span<const std::uint64_t> v, int n_bits);
std::vector<std::uint64_t> unpack_ring(std::span<const std::uint8_t> b, int n_bits);

}  // namespace ariann
