#include "ariann/prg.hpp"

#include <cstring>
#include <random>
#include <stdexcept>

namespace ariann {
namespace {

std::array<std::uint8_t, 16> fixed_key(int index) {
  std::array<std::uint8_t, 16> key{};
  for (int j = 0; j < 16; ++j) key[j] = static_cast<std::uint8_t>(16 * index + j);
  return key;
}

void check_blocks(int out_blocks) {
  if (out_blocks < kEqExpandBlocks || out_blocks > kMaxExpandBlocks) {
    throw std::invalid_argument("expand supports 2 to 4 output blocks, got " +
                                std::to_string(out_blocks));
  }
}

constexpr std::uint64_t kTop = std::uint64_t{1} << 63;

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  throw std::invalid_argument("bad hex digit");
}

}  // namespace

std::array<std::uint8_t, 16> Block::bytes() const {
  std::array<std::uint8_t, 16> out{};
  std::memcpy(out.data(), &lo, 8);
  std::memcpy(out.data() + 8, &hi, 8);
  return out;
}

Block Block::from_bytes(std::span<const std::uint8_t, 16> b) {
  Block out;
  std::memcpy(&out.lo, b.data(), 8);
  std::memcpy(&out.hi, b.data() + 8, 8);
  return out;
}

std::string Block::hex() const {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s;
  for (std::uint8_t b : bytes()) {
    s.push_back(kDigits[b >> 4]);
    s.push_back(kDigits[b & 15]);
  }
  return s;
}

Block Block::from_hex(const std::string& hex) {
  if (hex.size() != 32) throw std::invalid_argument("block hex must be 32 digits");
  std::array<std::uint8_t, 16> b{};
  for (int i = 0; i < 16; ++i) {
    b[i] = static_cast<std::uint8_t>(hex_value(hex[2 * i]) * 16 +
                                     hex_value(hex[2 * i + 1]));
  }
  return from_bytes(b);
}

const Aes128& fixed_cipher(int index) {
  static const std::array<Aes128, kMaxExpandBlocks> ciphers = {
      Aes128(fixed_key(0)), Aes128(fixed_key(1)), Aes128(fixed_key(2)),
      Aes128(fixed_key(3))};
  return ciphers.at(static_cast<std::size_t>(index));
}

void expand_into(const Block& seed, int out_blocks, Block* out) {
  // Distinct keys per block, so each is a separate cipher call.
  for (int b = 0; b < out_blocks; ++b) {
    out[b] = fixed_cipher(b).encrypt(seed) ^ seed;
  }
}

std::vector<Block> expand(const Seed& seed, int out_blocks) {
  check_blocks(out_blocks);
  std::vector<Block> out(static_cast<std::size_t>(out_blocks));
  expand_into(seed.block(), out_blocks, out.data());
  return out;
}

void expand_many(std::span<const Block> seeds, int out_blocks, Block* out) {
  check_blocks(out_blocks);
  std::vector<Block> tmp(seeds.begin(), seeds.end());
  for (int b = 0; b < out_blocks; ++b) {
    std::copy(seeds.begin(), seeds.end(), tmp.begin());
    fixed_cipher(b).encrypt_blocks(tmp);
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      out[i * out_blocks + b] = tmp[i] ^ seeds[i];
    }
  }
}

EqExpansion slice_eq(std::span<const Block> raw) {
  if (raw.size() != 2) {
    throw std::invalid_argument("equality slice needs exactly 256 bits");
  }
  EqExpansion e;
  e.s_left = Seed(raw[0]);
  e.t_left = raw[0].top_bit();
  e.s_right = Seed(raw[1]);
  e.t_right = raw[1].top_bit();
  return e;
}

std::vector<Block> reassemble_eq(const EqExpansion& e) {
  Block l = e.s_left.block();
  Block r = e.s_right.block();
  if (e.t_left) l.hi |= kTop;
  if (e.t_right) r.hi |= kTop;
  return {l, r};
}

CmpExpansion slice_cmp(std::span<const Block> raw, int out_bits) {
  if (out_bits < 1 || out_bits > 64) {
    throw std::invalid_argument("comparison output width must be in [1, 64]");
  }
  const std::size_t needed = static_cast<std::size_t>(cmp_expand_blocks(out_bits));
  if (raw.size() < needed) {
    throw std::invalid_argument("comparison slice needs " + std::to_string(needed) +
                                " blocks, got " + std::to_string(raw.size()));
  }
  CmpExpansion e;
  e.seeds = slice_eq(raw.first(2));
  const Block& w = raw[2];
  if (out_bits < 64) {
    const std::uint64_t m = (std::uint64_t{1} << out_bits) - 1;
    e.sigma_left = w.lo & m;
    e.tau_left = ((w.lo >> out_bits) & 1U) != 0;
    e.sigma_right = w.hi & m;
    e.tau_right = ((w.hi >> out_bits) & 1U) != 0;
  } else {
    e.sigma_left = w.lo;
    e.sigma_right = w.hi;
    e.tau_left = (raw[3].lo & 1U) != 0;
    e.tau_right = (raw[3].hi & 1U) != 0;
  }
  return e;
}

std::vector<Block> reassemble_cmp(const CmpExpansion& e, int out_bits) {
  std::vector<Block> out = reassemble_eq(e.seeds);
  if (out_bits < 64) {
    Block w;
    w.lo = e.sigma_left | (std::uint64_t{e.tau_left} << out_bits);
    w.hi = e.sigma_right | (std::uint64_t{e.tau_right} << out_bits);
    out.push_back(w);
  } else {
    out.push_back({e.sigma_left, e.sigma_right});
    out.push_back({std::uint64_t{e.tau_left}, std::uint64_t{e.tau_right}});
  }
  return out;
}

Rng::Rng(Block seed) : cipher_(seed.bytes()) {}

Rng Rng::from_os() {
  std::random_device rd;
  Block b;
  b.lo = (std::uint64_t{rd()} << 32) | rd();
  b.hi = (std::uint64_t{rd()} << 32) | rd();
  return Rng(b);
}

Block Rng::next_block() {
  Block ctr{counter_++, 0};
  return cipher_.encrypt(ctr);
}

std::uint64_t Rng::next_u64() {
  if (buffered_ == 0) {
    const Block b = next_block();
    buffer_ = {b.lo, b.hi};
    buffered_ = 2;
  }
  return buffer_[static_cast<std::size_t>(--buffered_)];
}

std::uint64_t Rng::next_bits(int n_bits) {
  const std::uint64_t v = next_u64();
  return n_bits >= 64 ? v : v & ((std::uint64_t{1} << n_bits) - 1);
}

std::uint64_t Rng::uniform(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("uniform bound must be positive");
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  std::uint64_t v;
  do {
    v = next_u64();
  } while (v >= limit);
  return v % bound;
}

Rng Rng::fork() { return Rng(next_block()); }

}  // namespace ariann
