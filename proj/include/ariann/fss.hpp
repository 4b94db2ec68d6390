#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ariann/prg.hpp"

// Function secret sharing for the point function 1[x == alpha] and the
// interval function 1[x <= alpha] over n-bit inputs.
//
// Keys are parameterised by two widths: n_bits, the input domain of the
// tree walk, and out_bits, the ring Z_{2^out_bits} in which the two output
// shares live. The usual case is out_bits == n_bits; a wider output ring
// lets a comparison on the low n bits of a value feed straight into
// arithmetic over a larger ring.
namespace ariann {

struct EqCorrection {
  Seed seed;  // shared by both children
  bool t_left = false;
  bool t_right = false;
  bool operator==(const EqCorrection&) const = default;
};

struct CmpCorrection {
  Seed seed;
  bool t_left = false;
  bool t_right = false;
  std::uint64_t sigma = 0;  // shared by both leaf labels
  bool tau_left = false;
  bool tau_right = false;
  bool operator==(const CmpCorrection&) const = default;
};

struct EqKey {
  int n_bits = 0;
  int out_bits = 0;
  std::uint64_t alpha_share = 0;
  Seed seed;
  std::vector<EqCorrection> cw;  // one per level
  std::uint64_t cw_final = 0;

  void validate() const;
  bool operator==(const EqKey&) const = default;
};

struct CmpKey {
  int n_bits = 0;
  int out_bits = 0;
  std::uint64_t alpha_share = 0;
  Seed seed;
  std::vector<CmpCorrection> cw;     // n levels
  std::vector<std::uint64_t> cw_leaf;  // n + 1 leaf words, the last for x == alpha

  void validate() const;
  bool operator==(const CmpKey&) const = default;
};

// Everything keygen draws at random. Disclosing it lets an auditor replay
// keygen bit for bit.
struct KeygenTape {
  std::uint64_t alpha = 0;
  std::uint64_t alpha_share0 = 0;
  Seed seed0;
  Seed seed1;
  bool operator==(const KeygenTape&) const = default;
};

template <class Key>
struct KeyPair {
  std::uint64_t alpha = 0;
  Key k0;
  Key k1;
};

void check_fss_widths(int n_bits, int out_bits);

KeygenTape draw_tape(int n_bits, Rng& rng);

// out_bits == 0 means "same as n_bits".
KeyPair<EqKey> keygen_eq(int n_bits, Rng& rng, int out_bits = 0);
KeyPair<EqKey> keygen_eq_from_tape(int n_bits, int out_bits, const KeygenTape& tape);
// Share of 1[x == alpha] in Z_{2^out_bits}.
std::uint64_t eval_eq(int party, const EqKey& key, std::uint64_t x);

KeyPair<CmpKey> keygen_cmp(int n_bits, Rng& rng, int out_bits = 0);
KeyPair<CmpKey> keygen_cmp_from_tape(int n_bits, int out_bits, const KeygenTape& tape);
// Share of 1[x <= alpha] in Z_{2^out_bits}.
std::uint64_t eval_cmp(int party, const CmpKey& key, std::uint64_t x);
// The n + 1 per-level outputs whose sum is eval_cmp.
std::vector<std::uint64_t> eval_cmp_levels(int party, const CmpKey& key, std::uint64_t x);

// Keys for a whole tensor, one party's half, in structure-of-arrays form:
// everything for level i is contiguous across elements so evaluation can
// walk all elements one level at a time.
class EqKeyBatch {
 public:
  EqKeyBatch() = default;
  EqKeyBatch(int n_bits, int out_bits, std::size_t count);

  int n_bits() const { return n_bits_; }
  int out_bits() const { return out_bits_; }
  std::size_t size() const { return count_; }
  std::uint64_t id() const { return id_; }

  EqKey key(std::size_t i) const;
  void set_key(std::size_t i, const EqKey& key);
  std::uint64_t alpha_share(std::size_t i) const { return alpha_share_[i]; }
  std::span<const std::uint64_t> alpha_shares() const { return alpha_share_; }

  std::size_t element_bytes() const;
  std::vector<std::uint8_t> serialize() const;
  static EqKeyBatch deserialize(int n_bits, int out_bits, std::size_t count,
                                std::span<const std::uint8_t> payload);
  // Serialized bytes of element i only (same field order).
  std::vector<std::uint8_t> element(std::size_t i) const;
  EqKeyBatch without(std::span<const std::size_t> indices) const;

  bool operator==(const EqKeyBatch& o) const;

 private:
  friend std::vector<std::uint64_t> eval_eq_batch(int, const EqKeyBatch&,
                                                  std::span<const std::uint64_t>);
  int n_bits_ = 0;
  int out_bits_ = 0;
  std::size_t count_ = 0;
  std::uint64_t id_ = 0;
  std::vector<std::uint64_t> alpha_share_;
  std::vector<Block> seed_;
  std::vector<Block> cw_seed_;       // [level][element]
  std::vector<std::uint8_t> cw_t_;   // bit0 t_left, bit1 t_right
  std::vector<std::uint64_t> cw_final_;
};

class CmpKeyBatch {
 public:
  CmpKeyBatch() = default;
  CmpKeyBatch(int n_bits, int out_bits, std::size_t count);

  int n_bits() const { return n_bits_; }
  int out_bits() const { return out_bits_; }
  std::size_t size() const { return count_; }
  std::uint64_t id() const { return id_; }

  CmpKey key(std::size_t i) const;
  void set_key(std::size_t i, const CmpKey& key);
  std::uint64_t alpha_share(std::size_t i) const { return alpha_share_[i]; }
  std::span<const std::uint64_t> alpha_shares() const { return alpha_share_; }

  std::size_t element_bytes() const;
  std::vector<std::uint8_t> serialize() const;
  static CmpKeyBatch deserialize(int n_bits, int out_bits, std::size_t count,
                                 std::span<const std::uint8_t> payload);
  std::vector<std::uint8_t> element(std::size_t i) const;
  CmpKeyBatch without(std::span<const std::size_t> indices) const;

  bool operator==(const CmpKeyBatch& o) const;

 private:
  friend std::vector<std::uint64_t> eval_cmp_batch(int, const CmpKeyBatch&,
                                                   std::span<const std::uint64_t>);
  int n_bits_ = 0;
  int out_bits_ = 0;
  std::size_t count_ = 0;
  std::uint64_t id_ = 0;
  std::vector<std::uint64_t> alpha_share_;
  std::vector<Block> seed_;
  std::vector<Block> cw_seed_;        // [level][element]
  std::vector<std::uint64_t> cw_sigma_;  // [level][element]
  std::vector<std::uint8_t> cw_t_;    // bit0 t_left, bit1 t_right, bit2 tau_left, bit3 tau_right
  std::vector<std::uint64_t> leaf_;   // [level 0..n][element]
};

std::size_t eq_key_bytes(int n_bits, int out_bits);
std::size_t cmp_key_bytes(int n_bits, int out_bits);

template <class Batch>
struct BatchPair {
  std::vector<std::uint64_t> alpha;
  Batch k0;
  Batch k1;
};

// `tapes`, when given, receives the per-element randomness for auditing.
BatchPair<EqKeyBatch> keygen_eq_batch(std::size_t count, int n_bits, int out_bits,
                                      Rng& rng, std::vector<KeygenTape>* tapes = nullptr);
BatchPair<CmpKeyBatch> keygen_cmp_batch(std::size_t count, int n_bits, int out_bits,
                                        Rng& rng, std::vector<KeygenTape>* tapes = nullptr);

std::vector<std::uint64_t> eval_eq_batch(int party, const EqKeyBatch& keys,
                                         std::span<const std::uint64_t> xs);
std::vector<std::uint64_t> eval_cmp_batch(int party, const CmpKeyBatch& keys,
                                          std::span<const std::uint64_t> xs);

struct AuditSample {
  std::size_t index = 0;
  KeygenTape tape;
};

struct AuditReport {
  bool ok = true;
  std::vector<std::size_t> failures;
};

// Cut-and-choose check: replays keygen from each disclosed tape and compares
// the issued keys byte for byte (correction words and leaf words included).
AuditReport audit_keys(const EqKeyBatch& k0, const EqKeyBatch& k1,
                       std::span<const AuditSample> sample);
AuditReport audit_keys(const CmpKeyBatch& k0, const CmpKeyBatch& k1,
                       std::span<const AuditSample> sample);

std::uint64_t next_batch_id();

}  // namespace ariann
