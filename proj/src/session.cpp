#include "ariann/session.hpp"

#include "ariann/prep.hpp"
#include "ariann/ring_tensor.hpp"

namespace ariann {

void RoundLedger::record(const std::string& tag, std::uint64_t sent, std::uint64_t received,
                         std::uint64_t elements) {
  for (LedgerEntry* e : {&entries_[tag], &total_}) {
    e->rounds += 1;
    e->bytes_sent += sent;
    e->bytes_received += received;
    e->elements += elements;
  }
}

LedgerEntry RoundLedger::get(const std::string& tag) const {
  const auto it = entries_.find(tag);
  return it == entries_.end() ? LedgerEntry{} : it->second;
}

std::vector<std::uint8_t> pack_ring(std::span<const std::uint64_t> v, int n_bits) {
  const std::size_t w = static_cast<std::size_t>((n_bits + 7) / 8);
  std::vector<std::uint8_t> out(v.size() * w);
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t b = 0; b < w; ++b) out[i * w + b] = static_cast<std::uint8_t>(v[i] >> (8 * b));
  }
  return out;
}

std::vector<std::uint64_t> unpack_ring(std::span<const std::uint8_t> bytes, int n_bits) {
  const std::size_t w = static_cast<std::size_t>((n_bits + 7) / 8);
  if (bytes.size() % w != 0) throw ProtocolError("ring payload not a whole number of elements");
  std::vector<std::uint64_t> out(bytes.size() / w, 0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t b = 0; b < w; ++b) out[i] |= std::uint64_t{bytes[i * w + b]} << (8 * b);
    out[i] &= ring_mask(n_bits);
  }
  return out;
}

Session::Session(int party, std::shared_ptr<Channel> channel, std::shared_ptr<PrepSource> prep,
                 std::uint64_t coin_seed)
    : party_(party),
      channel_(std::move(channel)),
      prep_(std::move(prep)),
      coins_(Block{coin_seed, 0x636f696e73ULL}),
      timeout_(default_timeout()) {
  if (party != 0 && party != 1) throw std::invalid_argument("party must be 0 or 1");
  if (!channel_) throw std::invalid_argument("session needs a channel");
}

Session::~Session() = default;

PrepSource& Session::prep() {
  if (!prep_) throw std::logic_error("session has no preprocessing source");
  return *prep_;
}

CmpKeyBatch Session::take_cmp(std::size_t count, int n_bits, int out_bits) {
  CmpKeyBatch k = prep().take_cmp(count, n_bits, out_bits);
  prep_log_.push_back(PrepRequest::cmp(count, n_bits, out_bits, current_tag()));
  return k;
}

EqKeyBatch Session::take_eq(std::size_t count, int n_bits, int out_bits) {
  EqKeyBatch k = prep().take_eq(count, n_bits, out_bits);
  prep_log_.push_back(PrepRequest::eq(count, n_bits, out_bits, current_tag()));
  return k;
}

TripleShare Session::take_triple(const TripleSpec& spec) {
  TripleShare t = prep().take_triple(spec);
  prep_log_.push_back(PrepRequest::beaver(spec, current_tag()));
  return t;
}

std::vector<std::uint8_t> Session::exchange_bytes(FrameType type, std::span<const std::uint8_t> mine,
                                                  std::uint64_t elements) {
  Frame out{type, std::vector<std::uint8_t>(mine.begin(), mine.end())};
  channel_->send(out);
  Frame in = channel_->recv(timeout_);
  if (in.type == FrameType::kAbort) {
    throw ProtocolError("peer aborted: " + std::string(in.payload.begin(), in.payload.end()));
  }
  if (in.type != type) {
    throw ProtocolError("protocol desync: expected frame type " +
                        std::to_string(static_cast<int>(type)) + ", got " +
                        std::to_string(static_cast<int>(in.type)));
  }
  if (in.payload.size() != mine.size()) {
    throw ProtocolError("protocol desync: peer sent " + std::to_string(in.payload.size()) +
                        " bytes, expected " + std::to_string(mine.size()));
  }
  ledger_.record(current_tag(), mine.size(), in.payload.size(), elements);
  return std::move(in.payload);
}

std::vector<std::uint64_t> Session::exchange(FrameType type, std::span<const std::uint64_t> mine,
                                             int n_bits) {
  const auto bytes = pack_ring(mine, n_bits);
  return unpack_ring(exchange_bytes(type, bytes, mine.size()), n_bits);
}

void Session::consume(std::uint64_t prep_id, const std::string& what) {
  if (!consumed_.insert(prep_id).second) {
    throw KeyReuseError(what + " " + std::to_string(prep_id) + " was already used");
  }
}

Session::OpScope::OpScope(Session& s, std::string tag) : s_(s) { s_.scopes_.push_back(std::move(tag)); }
Session::OpScope::~OpScope() { s_.scopes_.pop_back(); }

std::string Session::current_tag() const { return scopes_.empty() ? "other" : scopes_.front(); }

void Session::abort(const std::string& reason) noexcept {
  try {
    channel_->send(Frame{FrameType::kAbort, std::vector<std::uint8_t>(reason.begin(), reason.end())});
  } catch (...) {
  }
  try {
    channel_->close();
  } catch (...) {
  }
}

}  // namespace ariann
