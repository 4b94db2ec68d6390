#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ariann {

// 128-bit block. Byte i of the AES state is byte i of the little-endian
// words (lo then hi); bit j is bit j of that little-endian integer.
struct Block {
  std::uint64_t lo = 0;
  std::uint64_t hi = 0;

  constexpr Block operator^(const Block& o) const { return {lo ^ o.lo, hi ^ o.hi}; }
  constexpr Block& operator^=(const Block& o) {
    lo ^= o.lo;
    hi ^= o.hi;
    return *this;
  }
  constexpr bool operator==(const Block&) const = default;

  constexpr bool top_bit() const { return (hi >> 63) != 0; }
  constexpr Block without_top_bit() const {
    return {lo, hi & ~(std::uint64_t{1} << 63)};
  }

  std::array<std::uint8_t, 16> bytes() const;
  static Block from_bytes(std::span<const std::uint8_t, 16> b);
  std::string hex() const;
  static Block from_hex(const std::string& hex);
};

constexpr int kLambda = 127;

/// A lambda = 127 bit seed, stored in a block whose top bit is always clear.
class Seed {
 public:
  constexpr Seed() = default;
  // Clears the top bit of the given block.
  constexpr explicit Seed(Block b) : block_(b.without_top_bit()) {}

  constexpr const Block& block() const { return block_; }
  // Low `bits` bits of the seed read as an integer (bits <= 64).
  constexpr std::uint64_t low_bits(int bits) const {
    return bits >= 64 ? block_.lo : block_.lo & ((std::uint64_t{1} << bits) - 1);
  }
  constexpr Seed operator^(const Seed& o) const { return Seed(block_ ^ o.block_); }
  constexpr bool operator==(const Seed&) const = default;

 private:
  Block block_;
};

/// AES-128 with a fixed key. Uses AES-NI when the CPU has it and a
/// table-free byte implementation otherwise; both give identical output.
class Aes128 {
 public:
  explicit Aes128(const std::array<std::uint8_t, 16>& key);

  Block encrypt(const Block& in) const;
  void encrypt_blocks(std::span<Block> blocks) const;

  // Forces the portable path, for cross-checking against the hardware path.
  Block encrypt_portable(const Block& in) const;
  static bool hardware_available();

 private:
  alignas(16) std::array<std::uint8_t, 176> round_keys_;
};

// Number of expansion blocks the comparison tree needs for outputs in
// Z_{2^out_bits}: two seed blocks plus the sigma/tau block(s).
constexpr int cmp_expand_blocks(int out_bits) { return 2 * (out_bits + 1) <= 128 ? 3 : 4; }
constexpr int kEqExpandBlocks = 2;
constexpr int kMaxExpandBlocks = 4;

// Matyas-Meyer-Oseas length-extending PRG:
//   G(s) = AES_{k1}(s) ^ s || AES_{k2}(s) ^ s || ...
// with the fixed public keys k_i = bytes (16(i-1) .. 16(i-1)+15).
std::vector<Block> expand(const Seed& seed, int out_blocks);
// Hot-path variant writing `out_blocks` blocks to out.
void expand_into(const Block& seed, int out_blocks, Block* out);
// Expands `count` seeds, writing out[i*out_blocks + b].
void expand_many(std::span<const Block> seeds, int out_blocks, Block* out);

const Aes128& fixed_cipher(int index);

struct EqExpansion {
  Seed s_left;
  bool t_left = false;
  Seed s_right;
  bool t_right = false;
  bool operator==(const EqExpansion&) const = default;
};

struct CmpExpansion {
  EqExpansion seeds;
  std::uint64_t sigma_left = 0;
  bool tau_left = false;
  std::uint64_t sigma_right = 0;
  bool tau_right = false;
  bool operator==(const CmpExpansion&) const = default;
};

// Field extraction, see LAYOUT.md for bit positions.
EqExpansion slice_eq(std::span<const Block> raw);
std::vector<Block> reassemble_eq(const EqExpansion& e);
CmpExpansion slice_cmp(std::span<const Block> raw, int out_bits);
std::vector<Block> reassemble_cmp(const CmpExpansion& e, int out_bits);

/// Deterministic AES-CTR random stream used by the dealer and for shares.
class Rng {
 public:
  explicit Rng(Block seed);
  explicit Rng(std::uint64_t seed) : Rng(Block{seed, 0x617269616e6e0000ULL}) {}
  static Rng from_os();

  Block next_block();
  std::uint64_t next_u64();
  std::uint64_t next_bits(int n_bits);
  // Uniform in [0, bound), bound > 0.
  std::uint64_t uniform(std::uint64_t bound);
  Seed next_seed() { return Seed(next_block()); }
  bool next_bit() { return (next_u64() & 1U) != 0; }
  // Independent child stream.
  Rng fork();

 private:
  Aes128 cipher_;
  std::uint64_t counter_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int buffered_ = 0;
};

}  // namespace ariann
