#include "ariann/prep.hpp"

#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>
#include <sstream>

#include "ariann/errors.hpp"

namespace ariann {

PrepRequest PrepRequest::cmp(std::size_t count, int n_bits, int out_bits, std::string tag) {
  PrepRequest r;
  r.kind = PrepKind::kCmp;
  r.n_bits = n_bits;
  r.out_bits = out_bits == 0 ? n_bits : out_bits;
  r.count = count;
  r.tag = std::move(tag);
  return r;
}

PrepRequest PrepRequest::eq(std::size_t count, int n_bits, int out_bits, std::string tag) {
  PrepRequest r = cmp(count, n_bits, out_bits, std::move(tag));
  r.kind = PrepKind::kEq;
  return r;
}

PrepRequest PrepRequest::beaver(const TripleSpec& spec, std::string tag) {
  PrepRequest r;
  r.kind = PrepKind::kTriple;
  r.n_bits = spec.n_bits;
  r.out_bits = spec.n_bits;
  r.count = 1;
  r.triple = spec;
  r.tag = std::move(tag);
  return r;
}

bool PrepRequest::matches(const PrepRequest& o) const {
  if (kind != o.kind || n_bits != o.n_bits || out_bits != o.out_bits || count != o.count) {
    return false;
  }
  return kind != PrepKind::kTriple || triple == o.triple;
}

std::string PrepRequest::describe() const {
  std::ostringstream os;
  switch (kind) {
    case PrepKind::kCmp:
      os << count << " cmp keys n=" << n_bits << " out=" << out_bits;
      break;
    case PrepKind::kEq:
      os << count << " eq keys n=" << n_bits << " out=" << out_bits;
      break;
    case PrepKind::kTriple:
      os << "triple " << triple.describe();
      break;
  }
  return os.str();
}

std::size_t PrepRequest::party_bytes() const {
  switch (kind) {
    case PrepKind::kCmp:
      return count * cmp_key_bytes(n_bits, out_bits);
    case PrepKind::kEq:
      return count * eq_key_bytes(n_bits, out_bits);
    case PrepKind::kTriple: {
      const std::size_t w = static_cast<std::size_t>((triple.n_bits + 7) / 8);
      return w * (shape_size(triple.x_shape) + shape_size(triple.y_shape) +
                  shape_size(triple.z_shape()));
    }
  }
  return 0;
}

IssuedItem issue(const PrepRequest& req, Rng& rng, bool keep_tapes) {
  IssuedItem out{req, TriplePair{}, {}};
  auto* tapes = keep_tapes ? &out.tapes : nullptr;
  switch (req.kind) {
    case PrepKind::kCmp:
      out.material = keygen_cmp_batch(req.count, req.n_bits, req.out_bits, rng, tapes);
      break;
    case PrepKind::kEq:
      out.material = keygen_eq_batch(req.count, req.n_bits, req.out_bits, rng, tapes);
      break;
    case PrepKind::kTriple:
      out.material = gen_triple(req.triple, rng);
      break;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Streaming dealer

namespace {

using Half = std::variant<CmpKeyBatch, EqKeyBatch, TripleShare>;

struct Pending {
  PrepRequest request;
  Half half;
};

Half half_of(IssuedItem& item, int party) {
  return std::visit(
      [&](auto& m) -> Half {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, TriplePair>) {
          return party == 0 ? std::move(m.t0) : std::move(m.t1);
        } else {
          return party == 0 ? std::move(m.k0) : std::move(m.k1);
        }
      },
      item.material);
}

}  // namespace

struct Dealer::State {
  std::mutex mu;
  Rng rng;
  bool keep_tapes;
  std::deque<Pending> pending[2];
  std::vector<PrepRequest> issued;
  std::vector<std::vector<KeygenTape>> tapes;

  State(std::uint64_t seed, bool keep) : rng(seed), keep_tapes(keep) {}

  Half take(int party, const PrepRequest& want) {
    std::lock_guard lock(mu);
    auto& q = pending[party];
    if (!q.empty()) {
      Pending p = std::move(q.front());
      q.pop_front();
      if (!p.request.matches(want)) {
        throw ProtocolError("preprocessing desync: party " + std::to_string(party) +
                            " asked for " + want.describe() + " but the peer took " +
                            p.request.describe());
      }
      return std::move(p.half);
    }
    IssuedItem item = issue(want, rng, keep_tapes);
    issued.push_back(want);
    tapes.push_back(std::move(item.tapes));
    pending[1 - party].push_back({want, half_of(item, 1 - party)});
    return half_of(item, party);
  }
};

namespace {

class DealerSource final : public PrepSource {
 public:
  DealerSource(std::shared_ptr<Dealer::State> s, int party) : s_(std::move(s)), party_(party) {}

  CmpKeyBatch take_cmp(std::size_t count, int n_bits, int out_bits) override {
    return std::get<CmpKeyBatch>(s_->take(party_, PrepRequest::cmp(count, n_bits, out_bits)));
  }
  EqKeyBatch take_eq(std::size_t count, int n_bits, int out_bits) override {
    return std::get<EqKeyBatch>(s_->take(party_, PrepRequest::eq(count, n_bits, out_bits)));
  }
  TripleShare take_triple(const TripleSpec& spec) override {
    return std::get<TripleShare>(s_->take(party_, PrepRequest::beaver(spec)));
  }

 private:
  std::shared_ptr<Dealer::State> s_;
  int party_;
};

}  // namespace

Dealer::Dealer(std::uint64_t seed, bool keep_tapes)
    : state_(std::make_shared<State>(seed, keep_tapes)) {}

std::shared_ptr<PrepSource> Dealer::source(int party) {
  if (party != 0 && party != 1) throw std::invalid_argument("party must be 0 or 1");
  return std::make_shared<DealerSource>(state_, party);
}

std::vector<PrepRequest> Dealer::issued() const {
  std::lock_guard lock(state_->mu);
  return state_->issued;
}

std::vector<std::vector<KeygenTape>> Dealer::tapes() const {
  std::lock_guard lock(state_->mu);
  return state_->tapes;
}

// ---------------------------------------------------------------------------
// Offline bundles

BundlePair dealer_preprocess(const PrepPlan& plan, std::uint64_t seed, bool keep_tapes) {
  Rng rng(seed);
  BundlePair out;
  out.b0.party = 0;
  out.b1.party = 1;
  for (const PrepRequest& req : plan) {
    IssuedItem item = issue(req, rng, keep_tapes);
    std::visit(
        [&](const auto& m) {
          using M = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<M, TriplePair>) {
            out.b0.items.push_back(pack_triple(&m.t0, nullptr));
            out.b1.items.push_back(pack_triple(nullptr, &m.t1));
          } else {
            out.b0.items.push_back(pack_keys(&m.k0, nullptr));
            out.b1.items.push_back(pack_keys(nullptr, &m.k1));
          }
        },
        item.material);
    out.tapes.push_back(std::move(item.tapes));
  }
  return out;
}

namespace {
constexpr char kBundleMagic[4] = {'A', 'R', 'N', 'B'};
constexpr std::uint8_t kBundleVersion = 1;
}  // namespace

// "ARNB" | version u8 | party u8 | count u32 | count x (u64 length | key file)
std::vector<std::uint8_t> serialize_bundle(const Bundle& b) {
  std::vector<std::uint8_t> out(kBundleMagic, kBundleMagic + 4);
  out.push_back(kBundleVersion);
  out.push_back(static_cast<std::uint8_t>(b.party));
  const auto n = static_cast<std::uint32_t>(b.items.size());
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(n >> (8 * i)));
  for (const KeyBatch& k : b.items) {
    const auto blob = serialize_keys(k);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(blob.size() >> (8 * i)));
    out.insert(out.end(), blob.begin(), blob.end());
  }
  return out;
}

Bundle deserialize_bundle(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 10) throw FormatError("truncated bundle header");
  if (std::memcmp(bytes.data(), kBundleMagic, 4) != 0) throw FormatError("bad magic, not a bundle");
  if (bytes[4] != kBundleVersion) {
    throw FormatError("unsupported bundle version " + std::to_string(bytes[4]));
  }
  Bundle b;
  b.party = bytes[5];
  if (b.party > 1) throw FormatError("bad bundle party");
  std::uint32_t n = 0;
  for (int i = 0; i < 4; ++i) n |= std::uint32_t{bytes[6 + i]} << (8 * i);
  std::size_t at = 10;
  for (std::uint32_t k = 0; k < n; ++k) {
    if (bytes.size() - at < 8) throw FormatError("truncated bundle item length");
    std::uint64_t len = 0;
    for (int i = 0; i < 8; ++i) len |= std::uint64_t{bytes[at + i]} << (8 * i);
    at += 8;
    if (len > bytes.size() - at) throw FormatError("truncated bundle item");
    b.items.push_back(deserialize_keys(bytes.subspan(at, len)));
    if (!b.items.back().payload[b.party]) {
      throw FormatError("bundle item lacks this party's payload");
    }
    at += len;
  }
  if (at != bytes.size()) throw FormatError("trailing bytes after bundle");
  return b;
}

BundlePrep::BundlePrep(Bundle bundle) : bundle_(std::move(bundle)) {}

const KeyBatch& BundlePrep::next(const PrepRequest& want) {
  if (next_ >= bundle_.items.size()) {
    throw ProtocolError("preprocessing bundle exhausted; wanted " + want.describe());
  }
  const KeyBatch& k = bundle_.items[next_];
  const bool ok = k.kind == want.kind && (want.kind == PrepKind::kTriple ||
                                          (k.n_bits == want.n_bits && k.out_bits == want.out_bits &&
                                           k.count == want.count));
  if (!ok) {
    throw ProtocolError("preprocessing desync at bundle item " + std::to_string(next_) +
                        ": wanted " + want.describe());
  }
  ++next_;
  return k;
}

CmpKeyBatch BundlePrep::take_cmp(std::size_t count, int n_bits, int out_bits) {
  return unpack_cmp(next(PrepRequest::cmp(count, n_bits, out_bits)), bundle_.party);
}

EqKeyBatch BundlePrep::take_eq(std::size_t count, int n_bits, int out_bits) {
  return unpack_eq(next(PrepRequest::eq(count, n_bits, out_bits)), bundle_.party);
}

TripleShare BundlePrep::take_triple(const TripleSpec& spec) {
  const std::size_t at = next_;
  TripleShare t = unpack_triple(next(PrepRequest::beaver(spec)), bundle_.party);
  if (!(t.spec == spec)) {
    throw ProtocolError("preprocessing desync at bundle item " + std::to_string(at) +
                        ": wanted " + spec.describe() + ", bundle has " + t.spec.describe());
  }
  return t;
}

}  // namespace ariann
