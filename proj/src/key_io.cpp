#include "ariann/key_io.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

namespace ariann {
namespace {

constexpr char kMagic[4] = {'A', 'R', 'N', 'K'};

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_uint(std::span<const std::uint8_t> b, std::size_t at, std::size_t n) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < n; ++i) v |= std::uint64_t{b[at + i]} << (8 * i);
  return v;
}

std::size_t expected_payload(const KeyBatch& b) {
  switch (b.kind) {
    case PrepKind::kEq:
      return b.count * eq_key_bytes(b.n_bits, b.out_bits);
    case PrepKind::kCmp:
      return b.count * cmp_key_bytes(b.n_bits, b.out_bits);
    case PrepKind::kTriple:
      return 0;  // variable, checked by the triple decoder
  }
  return 0;
}

void check_payloads(const KeyBatch& b) {
  const auto& p = b.payload;
  if (p[0] && p[1] && p[0]->size() != p[1]->size()) {
    throw FormatError("party payloads differ in length");
  }
  if (b.kind == PrepKind::kTriple) return;
  const std::size_t want = expected_payload(b);
  for (int j = 0; j < 2; ++j) {
    if (p[j] && p[j]->size() != want) {
      throw FormatError("payload size mismatch for party " + std::to_string(j) + ": " +
                        std::to_string(p[j]->size()) + " bytes, expected " +
                        std::to_string(want));
    }
  }
}

}  // namespace

std::vector<std::uint8_t> serialize_keys(const KeyBatch& b) {
  check_payloads(b);
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  out.push_back(kKeyFileVersion);
  out.push_back(static_cast<std::uint8_t>(b.kind));
  out.push_back(static_cast<std::uint8_t>(b.n_bits));
  out.push_back(static_cast<std::uint8_t>(b.out_bits));
  put_u16(out, static_cast<std::uint16_t>(b.lambda));
  put_u32(out, b.count);
  const std::uint8_t parties = static_cast<std::uint8_t>((b.payload[0] ? 1 : 0) | (b.payload[1] ? 2 : 0));
  out.push_back(parties);
  for (int j = 0; j < 2; ++j) {
    if (!b.payload[j]) continue;
    put_u64(out, b.payload[j]->size());
    out.insert(out.end(), b.payload[j]->begin(), b.payload[j]->end());
  }
  return out;
}

KeyBatch deserialize_keys(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kKeyHeaderBytes) throw FormatError("truncated key header");
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("bad magic, not a key file");
  if (bytes[4] != kKeyFileVersion) {
    throw FormatError("unsupported key file version " + std::to_string(bytes[4]));
  }
  if (bytes[5] > 2) throw FormatError("unknown key kind " + std::to_string(bytes[5]));
  KeyBatch b;
  b.kind = static_cast<PrepKind>(bytes[5]);
  b.n_bits = bytes[6];
  b.out_bits = bytes[7];
  b.lambda = static_cast<int>(get_uint(bytes, 8, 2));
  b.count = static_cast<std::uint32_t>(get_uint(bytes, 10, 4));
  const std::uint8_t parties = bytes[14];
  if (parties > 3) throw FormatError("bad party mask");
  if (b.kind != PrepKind::kTriple) {
    if (b.lambda != kLambda) throw FormatError("unsupported lambda " + std::to_string(b.lambda));
    try {
      check_fss_widths(b.n_bits, b.out_bits);
    } catch (const std::invalid_argument& e) {
      throw FormatError(e.what());
    }
  }
  std::size_t at = kKeyHeaderBytes;
  for (int j = 0; j < 2; ++j) {
    if ((parties & (1 << j)) == 0) continue;
    if (bytes.size() < at + 8) throw FormatError("truncated payload length");
    const std::uint64_t len = get_uint(bytes, at, 8);
    at += 8;
    if (len > bytes.size() - at) throw FormatError("truncated payload");
    b.payload[j].emplace(bytes.begin() + static_cast<std::ptrdiff_t>(at),
                         bytes.begin() + static_cast<std::ptrdiff_t>(at + len));
    at += len;
  }
  if (at != bytes.size()) throw FormatError("trailing bytes after key payloads");
  check_payloads(b);
  return b;
}

namespace {

template <class Batch>
KeyBatch pack_impl(PrepKind kind, const Batch* k0, const Batch* k1) {
  const Batch* any = k0 != nullptr ? k0 : k1;
  if (any == nullptr) throw std::invalid_argument("pack_keys needs at least one party");
  if (k0 && k1 && (k0->size() != k1->size() || k0->n_bits() != k1->n_bits() ||
                   k0->out_bits() != k1->out_bits())) {
    throw std::invalid_argument("pack_keys: party batches disagree in shape");
  }
  KeyBatch b;
  b.kind = kind;
  b.n_bits = any->n_bits();
  b.out_bits = any->out_bits();
  b.count = static_cast<std::uint32_t>(any->size());
  if (k0) b.payload[0] = k0->serialize();
  if (k1) b.payload[1] = k1->serialize();
  return b;
}

const std::vector<std::uint8_t>& party_payload(const KeyBatch& b, PrepKind kind, int party) {
  if (b.kind != kind) throw FormatError("key batch has the wrong kind");
  if (party != 0 && party != 1) throw std::invalid_argument("party must be 0 or 1");
  if (!b.payload[party]) {
    throw FormatError("key batch has no payload for party " + std::to_string(party));
  }
  return *b.payload[party];
}

}  // namespace

KeyBatch pack_keys(const EqKeyBatch* k0, const EqKeyBatch* k1) {
  return pack_impl(PrepKind::kEq, k0, k1);
}

KeyBatch pack_keys(const CmpKeyBatch* k0, const CmpKeyBatch* k1) {
  return pack_impl(PrepKind::kCmp, k0, k1);
}

EqKeyBatch unpack_eq(const KeyBatch& b, int party) {
  const auto& p = party_payload(b, PrepKind::kEq, party);
  try {
    return EqKeyBatch::deserialize(b.n_bits, b.out_bits, b.count, p);
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what());
  }
}

CmpKeyBatch unpack_cmp(const KeyBatch& b, int party) {
  const auto& p = party_payload(b, PrepKind::kCmp, party);
  try {
    return CmpKeyBatch::deserialize(b.n_bits, b.out_bits, b.count, p);
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what());
  }
}

void write_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("write to " + path + " failed");
}

std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace ariann
