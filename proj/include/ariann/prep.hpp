#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "ariann/beaver.hpp"
#include "ariann/fss.hpp"
#include "ariann/key_io.hpp"

// Correlated randomness from the dealer: FSS keys and Beaver triples. It is
// input independent, so it can be produced ahead of time from the model
// architecture alone (a plan) or streamed on demand while a protocol runs.
namespace ariann {

struct PrepRequest {
  PrepKind kind = PrepKind::kCmp;
  int n_bits = 0;    // FSS input domain, or the triple's ring
  int out_bits = 0;  // FSS output ring
  std::size_t count = 0;
  TripleSpec triple;  // kTriple only
  std::string tag;    // consuming layer; informational

  static PrepRequest cmp(std::size_t count, int n_bits, int out_bits, std::string tag = {});
  static PrepRequest eq(std::size_t count, int n_bits, int out_bits, std::string tag = {});
  static PrepRequest beaver(const TripleSpec& spec, std::string tag = {});

  // Same material, whatever the tag.
  bool matches(const PrepRequest& o) const;
  std::string describe() const;
  // Bytes of one party's share of this item.
  std::size_t party_bytes() const;
};

using PrepPlan = std::vector<PrepRequest>;

class PrepSource {
 public:
  virtual ~PrepSource() = default;
  virtual CmpKeyBatch take_cmp(std::size_t count, int n_bits, int out_bits) = 0;
  virtual EqKeyBatch take_eq(std::size_t count, int n_bits, int out_bits) = 0;
  virtual TripleShare take_triple(const TripleSpec& spec) = 0;
};

// Both halves of one item, as produced by the dealer.
struct IssuedItem {
  PrepRequest request;
  std::variant<BatchPair<CmpKeyBatch>, BatchPair<EqKeyBatch>, TriplePair> material;
  std::vector<KeygenTape> tapes;  // FSS items, when requested
};

IssuedItem issue(const PrepRequest& req, Rng& rng, bool keep_tapes = false);

// Streams material to two in-process parties. Whichever party asks first
// triggers generation; the other half waits in that party's queue. Items are
// generated in request order from one seeded stream, so a given seed and
// program always produce the same material.
class Dealer {
 public:
  explicit Dealer(std::uint64_t seed, bool keep_tapes = false);
  std::shared_ptr<PrepSource> source(int party);
  // Every item issued so far (requests and tapes; material is not kept).
  std::vector<PrepRequest> issued() const;
  std::vector<std::vector<KeygenTape>> tapes() const;

  struct State;

 private:
  std::shared_ptr<State> state_;
};

// One party's offline material in consumption order.
struct Bundle {
  int party = 0;
  std::vector<KeyBatch> items;
  bool operator==(const Bundle&) const = default;
};

struct BundlePair {
  Bundle b0;
  Bundle b1;
  std::vector<std::vector<KeygenTape>> tapes;  // per item, when requested
};

BundlePair dealer_preprocess(const PrepPlan& plan, std::uint64_t seed, bool keep_tapes = false);

std::vector<std::uint8_t> serialize_bundle(const Bundle& b);
Bundle deserialize_bundle(std::span<const std::uint8_t> bytes);

// Serves a bundle strictly in order. A request that does not match the next
// item is a ProtocolError (the parties are out of step with the plan).
class BundlePrep final : public PrepSource {
 public:
  explicit BundlePrep(Bundle bundle);
  CmpKeyBatch take_cmp(std::size_t count, int n_bits, int out_bits) override;
  EqKeyBatch take_eq(std::size_t count, int n_bits, int out_bits) override;
  TripleShare take_triple(const TripleSpec& spec) override;
  std::size_t remaining() const { return bundle_.items.size() - next_; }

 private:
  const KeyBatch& next(const PrepRequest& want);
  Bundle bundle_;
  std::size_t next_ = 0;
};

}  // namespace ariann
