#include "ariann/fss.hpp"

#include <algorithm>
#include <atomic>
#include <cstring>
#include <stdexcept>
#include <string>
#include <type_traits>

#include "ariann/ring_tensor.hpp"

namespace ariann {
namespace {

constexpr std::uint64_t kTop = std::uint64_t{1} << 63;

std::size_t bytes_for(int bits) { return static_cast<std::size_t>((bits + 7) / 8); }

void put_le(std::uint8_t* out, std::uint64_t v, std::size_t nbytes) {
  for (std::size_t i = 0; i < nbytes; ++i) out[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

std::uint64_t get_le(const std::uint8_t* in, std::size_t nbytes) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < nbytes; ++i) v |= std::uint64_t{in[i]} << (8 * i);
  return v;
}

void put_block(std::uint8_t* out, const Block& b) {
  std::memcpy(out, &b.lo, 8);
  std::memcpy(out + 8, &b.hi, 8);
}

Block get_block(const std::uint8_t* in) {
  Block b;
  std::memcpy(&b.lo, in, 8);
  std::memcpy(&b.hi, in + 8, 8);
  return b;
}

int resolve_out(int n_bits, int out_bits) { return out_bits == 0 ? n_bits : out_bits; }

// Seed block with t folded into bit 127, the on-disk form of a correction word.
Block pack_seed_t(const Seed& s, bool t) {
  Block b = s.block();
  if (t) b.hi |= kTop;
  return b;
}

struct Slice {
  Block s_left, s_right;
  bool t_left, t_right;
  std::uint64_t sigma_left, sigma_right;
  bool tau_left, tau_right;
};

// Same field positions as slice_eq / slice_cmp, without the checks.
inline Slice slice_raw(const Block* g, bool cmp, int out_bits, std::uint64_t mask) {
  Slice r;
  r.t_left = g[0].top_bit();
  r.t_right = g[1].top_bit();
  r.s_left = g[0].without_top_bit();
  r.s_right = g[1].without_top_bit();
  if (!cmp) return r;
  if (out_bits < 64) {
    r.sigma_left = g[2].lo & mask;
    r.tau_left = ((g[2].lo >> out_bits) & 1U) != 0;
    r.sigma_right = g[2].hi & mask;
    r.tau_right = ((g[2].hi >> out_bits) & 1U) != 0;
  } else {
    r.sigma_left = g[2].lo;
    r.sigma_right = g[2].hi;
    r.tau_left = (g[3].lo & 1U) != 0;
    r.tau_right = (g[3].hi & 1U) != 0;
  }
  return r;
}

struct LevelCw {
  Block seed;
  bool t_left, t_right;
  std::uint64_t sigma;
  bool tau_left, tau_right;
};

struct GenOut {
  std::vector<std::uint64_t> alpha;
  std::vector<std::uint64_t> alpha_share[2];
  std::vector<Block> seed[2];
  std::vector<LevelCw> cw;            // [level][element]
  std::vector<std::uint64_t> leaf;    // [level 0..n][element] (cmp only)
  std::vector<std::uint64_t> final_;  // [element] (eq only)
};

// Level-major keygen for equality (cmp = false) and comparison (cmp = true).
// Both parties' trees are advanced in lock step. The seed state follows
// alpha; the sigma/tau state is the child that just left it.
GenOut generate(bool cmp, int n, int m, std::span<const KeygenTape> tapes) {
  const std::size_t count = tapes.size();
  const std::uint64_t in_mask = ring_mask(n);
  const std::uint64_t mask = ring_mask(m);
  const int blocks = cmp ? cmp_expand_blocks(m) : kEqExpandBlocks;

  GenOut g;
  g.alpha.resize(count);
  g.cw.resize(static_cast<std::size_t>(n) * count);
  if (cmp) {
    g.leaf.resize(static_cast<std::size_t>(n + 1) * count);
  } else {
    g.final_.resize(count);
  }
  std::vector<Block> state[2];
  std::vector<std::uint8_t> t[2];
  for (int j = 0; j < 2; ++j) {
    g.alpha_share[j].resize(count);
    g.seed[j].resize(count);
    state[j].resize(count);
    t[j].assign(count, static_cast<std::uint8_t>(j));
  }
  for (std::size_t e = 0; e < count; ++e) {
    const KeygenTape& tp = tapes[e];
    g.alpha[e] = tp.alpha & in_mask;
    g.alpha_share[0][e] = tp.alpha_share0 & in_mask;
    g.alpha_share[1][e] = (g.alpha[e] - g.alpha_share[0][e]) & in_mask;
    g.seed[0][e] = state[0][e] = tp.seed0.block();
    g.seed[1][e] = state[1][e] = tp.seed1.block();
  }

  std::vector<Block> raw[2];
  raw[0].resize(count * blocks);
  raw[1].resize(count * blocks);
  for (int i = 0; i < n; ++i) {
    expand_many(state[0], blocks, raw[0].data());
    expand_many(state[1], blocks, raw[1].data());
    for (std::size_t e = 0; e < count; ++e) {
      const bool a = ((g.alpha[e] >> (n - 1 - i)) & 1U) != 0;
      const Slice p0 = slice_raw(&raw[0][e * blocks], cmp, m, mask);
      const Slice p1 = slice_raw(&raw[1][e * blocks], cmp, m, mask);

      LevelCw cw{};
      // Lose side is the child off the alpha path.
      cw.seed = a ? (p0.s_left ^ p1.s_left) : (p0.s_right ^ p1.s_right);
      cw.t_left = p0.t_left ^ p1.t_left ^ a ^ true;
      cw.t_right = p0.t_right ^ p1.t_right ^ a;
      if (cmp) {
        cw.sigma = a ? (p0.sigma_right ^ p1.sigma_right) : (p0.sigma_left ^ p1.sigma_left);
        cw.tau_left = p0.tau_left ^ p1.tau_left ^ a;
        cw.tau_right = p0.tau_right ^ p1.tau_right ^ !a;
      }
      g.cw[static_cast<std::size_t>(i) * count + e] = cw;

      std::uint64_t sigma[2] = {0, 0};
      bool tau[2] = {false, false};
      for (int j = 0; j < 2; ++j) {
        const Slice& p = j == 0 ? p0 : p1;
        const bool tj = t[j][e] != 0;
        Block next = a ? p.s_right : p.s_left;
        bool next_t = a ? p.t_right : p.t_left;
        if (tj) {
          next ^= cw.seed;
          next_t ^= a ? cw.t_right : cw.t_left;
        }
        state[j][e] = next;
        t[j][e] = next_t;
        if (cmp) {
          sigma[j] = a ? p.sigma_left : p.sigma_right;
          tau[j] = a ? p.tau_left : p.tau_right;
          if (tj) {
            sigma[j] ^= cw.sigma;
            tau[j] ^= a ? cw.tau_left : cw.tau_right;
          }
        }
      }
      if (cmp) {
        std::uint64_t w = (static_cast<std::uint64_t>(a) - sigma[0] + sigma[1]) & mask;
        if (tau[1]) w = (0 - w) & mask;
        g.leaf[static_cast<std::size_t>(i) * count + e] = w;
      }
    }
  }
  for (std::size_t e = 0; e < count; ++e) {
    const std::uint64_t s0 = Seed(state[0][e]).low_bits(m);
    const std::uint64_t s1 = Seed(state[1][e]).low_bits(m);
    std::uint64_t w = (1 - s0 + s1) & mask;
    if (t[1][e] != 0) w = (0 - w) & mask;
    if (cmp) {
      g.leaf[static_cast<std::size_t>(n) * count + e] = w;
    } else {
      g.final_[e] = w;
    }
  }
  return g;
}

std::atomic<std::uint64_t> g_batch_ids{1};

void check_party(int party) {
  if (party != 0 && party != 1) throw std::invalid_argument("party must be 0 or 1");
}

void check_input(std::uint64_t x, int n) {
  if ((x & ~ring_mask(n)) != 0) {
    throw std::invalid_argument("FSS input " + std::to_string(x) + " does not fit in " +
                                std::to_string(n) + " bits");
  }
}

}  // namespace

std::uint64_t next_batch_id() { return g_batch_ids.fetch_add(1); }

void check_fss_widths(int n_bits, int out_bits) {
  if (n_bits < 4 || n_bits > 64) {
    throw std::invalid_argument("FSS input width must be in [4, 64], got " +
                                std::to_string(n_bits));
  }
  if (out_bits < 4 || out_bits > 64) {
    throw std::invalid_argument("FSS output width must be in [4, 64], got " +
                                std::to_string(out_bits));
  }
}

void EqKey::validate() const {
  check_fss_widths(n_bits, out_bits);
  if (cw.size() != static_cast<std::size_t>(n_bits)) {
    throw std::invalid_argument("malformed equality key: expected " +
                                std::to_string(n_bits) + " correction words, got " +
                                std::to_string(cw.size()));
  }
}

void CmpKey::validate() const {
  check_fss_widths(n_bits, out_bits);
  if (cw.size() != static_cast<std::size_t>(n_bits) ||
      cw_leaf.size() != static_cast<std::size_t>(n_bits) + 1) {
    throw std::invalid_argument("malformed comparison key: cw " + std::to_string(cw.size()) +
                                ", leaf " + std::to_string(cw_leaf.size()) + " for n = " +
                                std::to_string(n_bits));
  }
}

KeygenTape draw_tape(int n_bits, Rng& rng) {
  KeygenTape tp;
  tp.alpha = rng.next_bits(n_bits);
  tp.alpha_share0 = rng.next_bits(n_bits);
  tp.seed0 = rng.next_seed();
  tp.seed1 = rng.next_seed();
  return tp;
}

// ---------------------------------------------------------------------------
// Batches

EqKeyBatch::EqKeyBatch(int n_bits, int out_bits, std::size_t count)
    : n_bits_(n_bits), out_bits_(out_bits), count_(count), id_(next_batch_id()) {
  check_fss_widths(n_bits, out_bits);
  const auto n = static_cast<std::size_t>(n_bits);
  alpha_share_.resize(count);
  seed_.resize(count);
  cw_seed_.resize(n * count);
  cw_t_.resize(n * count);
  cw_final_.resize(count);
}

EqKey EqKeyBatch::key(std::size_t i) const {
  if (i >= count_) throw std::out_of_range("key index out of range");
  EqKey k;
  k.n_bits = n_bits_;
  k.out_bits = out_bits_;
  k.alpha_share = alpha_share_[i];
  k.seed = Seed(seed_[i]);
  k.cw.resize(static_cast<std::size_t>(n_bits_));
  for (int l = 0; l < n_bits_; ++l) {
    const std::size_t at = static_cast<std::size_t>(l) * count_ + i;
    k.cw[l].seed = Seed(cw_seed_[at]);
    k.cw[l].t_left = (cw_t_[at] & 1U) != 0;
    k.cw[l].t_right = (cw_t_[at] & 2U) != 0;
  }
  k.cw_final = cw_final_[i];
  return k;
}

void EqKeyBatch::set_key(std::size_t i, const EqKey& k) {
  if (i >= count_) throw std::out_of_range("key index out of range");
  k.validate();
  if (k.n_bits != n_bits_ || k.out_bits != out_bits_) {
    throw std::invalid_argument("key widths do not match batch");
  }
  alpha_share_[i] = k.alpha_share & ring_mask(n_bits_);
  seed_[i] = k.seed.block();
  for (int l = 0; l < n_bits_; ++l) {
    const std::size_t at = static_cast<std::size_t>(l) * count_ + i;
    cw_seed_[at] = k.cw[l].seed.block();
    cw_t_[at] = static_cast<std::uint8_t>(k.cw[l].t_left | (k.cw[l].t_right << 1));
  }
  cw_final_[i] = k.cw_final & ring_mask(out_bits_);
}

std::size_t eq_key_bytes(int n_bits, int out_bits) {
  const auto n = static_cast<std::size_t>(n_bits);
  return bytes_for(n_bits) + 16 + n * 17 + bytes_for(out_bits);
}

std::size_t cmp_key_bytes(int n_bits, int out_bits) {
  const auto n = static_cast<std::size_t>(n_bits);
  const std::size_t mb = bytes_for(out_bits);
  return bytes_for(n_bits) + 16 + n * (16 + mb + 1) + (n + 1) * mb;
}

std::size_t EqKeyBatch::element_bytes() const { return eq_key_bytes(n_bits_, out_bits_); }

// Layout (per party, SoA): alpha[count] | seed[count] |
//   per level: cw block[count] (t_left in bit 127) | flags[count] (bit0 t_right) |
//   cw_final[count]
std::vector<std::uint8_t> EqKeyBatch::serialize() const {
  const std::size_t ab = bytes_for(n_bits_), mb = bytes_for(out_bits_);
  std::vector<std::uint8_t> out(count_ * element_bytes());
  std::uint8_t* p = out.data();
  for (std::size_t e = 0; e < count_; ++e, p += ab) put_le(p, alpha_share_[e], ab);
  for (std::size_t e = 0; e < count_; ++e, p += 16) put_block(p, seed_[e]);
  for (int l = 0; l < n_bits_; ++l) {
    const std::size_t base = static_cast<std::size_t>(l) * count_;
    for (std::size_t e = 0; e < count_; ++e, p += 16) {
      put_block(p, pack_seed_t(Seed(cw_seed_[base + e]), (cw_t_[base + e] & 1U) != 0));
    }
    for (std::size_t e = 0; e < count_; ++e) *p++ = static_cast<std::uint8_t>(cw_t_[base + e] >> 1);
  }
  for (std::size_t e = 0; e < count_; ++e, p += mb) put_le(p, cw_final_[e], mb);
  return out;
}

EqKeyBatch EqKeyBatch::deserialize(int n_bits, int out_bits, std::size_t count,
                                   std::span<const std::uint8_t> payload) {
  EqKeyBatch b(n_bits, out_bits, count);
  if (payload.size() != count * b.element_bytes()) {
    throw std::invalid_argument("equality key payload size mismatch: " +
                                std::to_string(payload.size()) + " bytes for " +
                                std::to_string(count) + " keys");
  }
  const std::size_t ab = bytes_for(n_bits), mb = bytes_for(out_bits);
  const std::uint8_t* p = payload.data();
  for (std::size_t e = 0; e < count; ++e, p += ab) b.alpha_share_[e] = get_le(p, ab) & ring_mask(n_bits);
  for (std::size_t e = 0; e < count; ++e, p += 16) b.seed_[e] = Seed(get_block(p)).block();
  for (int l = 0; l < n_bits; ++l) {
    const std::size_t base = static_cast<std::size_t>(l) * count;
    for (std::size_t e = 0; e < count; ++e, p += 16) {
      const Block w = get_block(p);
      b.cw_seed_[base + e] = w.without_top_bit();
      b.cw_t_[base + e] = w.top_bit() ? 1 : 0;
    }
    for (std::size_t e = 0; e < count; ++e) {
      b.cw_t_[base + e] = static_cast<std::uint8_t>(b.cw_t_[base + e] | ((*p++ & 1U) << 1));
    }
  }
  for (std::size_t e = 0; e < count; ++e, p += mb) b.cw_final_[e] = get_le(p, mb) & ring_mask(out_bits);
  return b;
}

std::vector<std::uint8_t> EqKeyBatch::element(std::size_t i) const {
  EqKeyBatch one(n_bits_, out_bits_, 1);
  one.set_key(0, key(i));
  return one.serialize();
}

EqKeyBatch EqKeyBatch::without(std::span<const std::size_t> indices) const {
  std::vector<bool> drop(count_, false);
  for (std::size_t i : indices) {
    if (i >= count_) throw std::out_of_range("audit index out of range");
    drop[i] = true;
  }
  const auto kept = static_cast<std::size_t>(std::count(drop.begin(), drop.end(), false));
  EqKeyBatch out(n_bits_, out_bits_, kept);
  std::size_t j = 0;
  for (std::size_t i = 0; i < count_; ++i) {
    if (!drop[i]) out.set_key(j++, key(i));
  }
  return out;
}

bool EqKeyBatch::operator==(const EqKeyBatch& o) const {
  return n_bits_ == o.n_bits_ && out_bits_ == o.out_bits_ && count_ == o.count_ &&
         alpha_share_ == o.alpha_share_ && seed_ == o.seed_ && cw_seed_ == o.cw_seed_ &&
         cw_t_ == o.cw_t_ && cw_final_ == o.cw_final_;
}

CmpKeyBatch::CmpKeyBatch(int n_bits, int out_bits, std::size_t count)
    : n_bits_(n_bits), out_bits_(out_bits), count_(count), id_(next_batch_id()) {
  check_fss_widths(n_bits, out_bits);
  const auto n = static_cast<std::size_t>(n_bits);
  alpha_share_.resize(count);
  seed_.resize(count);
  cw_seed_.resize(n * count);
  cw_sigma_.resize(n * count);
  cw_t_.resize(n * count);
  leaf_.resize((n + 1) * count);
}

CmpKey CmpKeyBatch::key(std::size_t i) const {
  if (i >= count_) throw std::out_of_range("key index out of range");
  CmpKey k;
  k.n_bits = n_bits_;
  k.out_bits = out_bits_;
  k.alpha_share = alpha_share_[i];
  k.seed = Seed(seed_[i]);
  k.cw.resize(static_cast<std::size_t>(n_bits_));
  for (int l = 0; l < n_bits_; ++l) {
    const std::size_t at = static_cast<std::size_t>(l) * count_ + i;
    CmpCorrection& c = k.cw[l];
    c.seed = Seed(cw_seed_[at]);
    c.t_left = (cw_t_[at] & 1U) != 0;
    c.t_right = (cw_t_[at] & 2U) != 0;
    c.sigma = cw_sigma_[at];
    c.tau_left = (cw_t_[at] & 4U) != 0;
    c.tau_right = (cw_t_[at] & 8U) != 0;
  }
  k.cw_leaf.resize(static_cast<std::size_t>(n_bits_) + 1);
  for (int l = 0; l <= n_bits_; ++l) k.cw_leaf[l] = leaf_[static_cast<std::size_t>(l) * count_ + i];
  return k;
}

void CmpKeyBatch::set_key(std::size_t i, const CmpKey& k) {
  if (i >= count_) throw std::out_of_range("key index out of range");
  k.validate();
  if (k.n_bits != n_bits_ || k.out_bits != out_bits_) {
    throw std::invalid_argument("key widths do not match batch");
  }
  const std::uint64_t mask = ring_mask(out_bits_);
  alpha_share_[i] = k.alpha_share & ring_mask(n_bits_);
  seed_[i] = k.seed.block();
  for (int l = 0; l < n_bits_; ++l) {
    const std::size_t at = static_cast<std::size_t>(l) * count_ + i;
    const CmpCorrection& c = k.cw[l];
    cw_seed_[at] = c.seed.block();
    cw_sigma_[at] = c.sigma & mask;
    cw_t_[at] = static_cast<std::uint8_t>(c.t_left | (c.t_right << 1) | (c.tau_left << 2) |
                                          (c.tau_right << 3));
  }
  for (int l = 0; l <= n_bits_; ++l) {
    leaf_[static_cast<std::size_t>(l) * count_ + i] = k.cw_leaf[l] & mask;
  }
}

std::size_t CmpKeyBatch::element_bytes() const { return cmp_key_bytes(n_bits_, out_bits_); }

// Layout (per party, SoA): alpha[count] | seed[count] |
//   per level: cw block[count] (t_left in bit 127) | sigma[count] |
//              flags[count] (bit0 t_right, bit1 tau_left, bit2 tau_right) |
//   per leaf level 0..n: leaf[count]
std::vector<std::uint8_t> CmpKeyBatch::serialize() const {
  const std::size_t ab = bytes_for(n_bits_), mb = bytes_for(out_bits_);
  std::vector<std::uint8_t> out(count_ * element_bytes());
  std::uint8_t* p = out.data();
  for (std::size_t e = 0; e < count_; ++e, p += ab) put_le(p, alpha_share_[e], ab);
  for (std::size_t e = 0; e < count_; ++e, p += 16) put_block(p, seed_[e]);
  for (int l = 0; l < n_bits_; ++l) {
    const std::size_t base = static_cast<std::size_t>(l) * count_;
    for (std::size_t e = 0; e < count_; ++e, p += 16) {
      put_block(p, pack_seed_t(Seed(cw_seed_[base + e]), (cw_t_[base + e] & 1U) != 0));
    }
    for (std::size_t e = 0; e < count_; ++e, p += mb) put_le(p, cw_sigma_[base + e], mb);
    for (std::size_t e = 0; e < count_; ++e) *p++ = static_cast<std::uint8_t>(cw_t_[base + e] >> 1);
  }
  for (int l = 0; l <= n_bits_; ++l) {
    const std::size_t base = static_cast<std::size_t>(l) * count_;
    for (std::size_t e = 0; e < count_; ++e, p += mb) put_le(p, leaf_[base + e], mb);
  }
  return out;
}

CmpKeyBatch CmpKeyBatch::deserialize(int n_bits, int out_bits, std::size_t count,
                                     std::span<const std::uint8_t> payload) {
  CmpKeyBatch b(n_bits, out_bits, count);
  if (payload.size() != count * b.element_bytes()) {
    throw std::invalid_argument("comparison key payload size mismatch: " +
                                std::to_string(payload.size()) + " bytes for " +
                                std::to_string(count) + " keys");
  }
  const std::size_t ab = bytes_for(n_bits), mb = bytes_for(out_bits);
  const std::uint64_t mask = ring_mask(out_bits);
  const std::uint8_t* p = payload.data();
  for (std::size_t e = 0; e < count; ++e, p += ab) b.alpha_share_[e] = get_le(p, ab) & ring_mask(n_bits);
  for (std::size_t e = 0; e < count; ++e, p += 16) b.seed_[e] = Seed(get_block(p)).block();
  for (int l = 0; l < n_bits; ++l) {
    const std::size_t base = static_cast<std::size_t>(l) * count;
    for (std::size_t e = 0; e < count; ++e, p += 16) {
      const Block w = get_block(p);
      b.cw_seed_[base + e] = w.without_top_bit();
      b.cw_t_[base + e] = w.top_bit() ? 1 : 0;
    }
    for (std::size_t e = 0; e < count; ++e, p += mb) b.cw_sigma_[base + e] = get_le(p, mb) & mask;
    for (std::size_t e = 0; e < count; ++e) {
      b.cw_t_[base + e] = static_cast<std::uint8_t>(b.cw_t_[base + e] | ((*p++ & 7U) << 1));
    }
  }
  for (int l = 0; l <= n_bits; ++l) {
    const std::size_t base = static_cast<std::size_t>(l) * count;
    for (std::size_t e = 0; e < count; ++e, p += mb) b.leaf_[base + e] = get_le(p, mb) & mask;
  }
  return b;
}

std::vector<std::uint8_t> CmpKeyBatch::element(std::size_t i) const {
  CmpKeyBatch one(n_bits_, out_bits_, 1);
  one.set_key(0, key(i));
  return one.serialize();
}

CmpKeyBatch CmpKeyBatch::without(std::span<const std::size_t> indices) const {
  std::vector<bool> drop(count_, false);
  for (std::size_t i : indices) {
    if (i >= count_) throw std::out_of_range("audit index out of range");
    drop[i] = true;
  }
  const auto kept = static_cast<std::size_t>(std::count(drop.begin(), drop.end(), false));
  CmpKeyBatch out(n_bits_, out_bits_, kept);
  std::size_t j = 0;
  for (std::size_t i = 0; i < count_; ++i) {
    if (!drop[i]) out.set_key(j++, key(i));
  }
  return out;
}

bool CmpKeyBatch::operator==(const CmpKeyBatch& o) const {
  return n_bits_ == o.n_bits_ && out_bits_ == o.out_bits_ && count_ == o.count_ &&
         alpha_share_ == o.alpha_share_ && seed_ == o.seed_ && cw_seed_ == o.cw_seed_ &&
         cw_sigma_ == o.cw_sigma_ && cw_t_ == o.cw_t_ && leaf_ == o.leaf_;
}

// ---------------------------------------------------------------------------
// Keygen

namespace {

template <class Batch>
BatchPair<Batch> fill_pair(bool cmp, int n, int m, std::span<const KeygenTape> tapes) {
  check_fss_widths(n, m);
  GenOut g = generate(cmp, n, m, tapes);
  const std::size_t count = tapes.size();
  BatchPair<Batch> out{std::move(g.alpha), Batch(n, m, count), Batch(n, m, count)};
  for (int j = 0; j < 2; ++j) {
    Batch& b = j == 0 ? out.k0 : out.k1;
    for (std::size_t e = 0; e < count; ++e) {
      if constexpr (std::is_same_v<Batch, EqKeyBatch>) {
        EqKey k;
        k.n_bits = n;
        k.out_bits = m;
        k.alpha_share = g.alpha_share[j][e];
        k.seed = Seed(g.seed[j][e]);
        k.cw.resize(static_cast<std::size_t>(n));
        for (int l = 0; l < n; ++l) {
          const LevelCw& c = g.cw[static_cast<std::size_t>(l) * count + e];
          k.cw[l] = {Seed(c.seed), c.t_left, c.t_right};
        }
        k.cw_final = g.final_[e];
        b.set_key(e, k);
      } else {
        CmpKey k;
        k.n_bits = n;
        k.out_bits = m;
        k.alpha_share = g.alpha_share[j][e];
        k.seed = Seed(g.seed[j][e]);
        k.cw.resize(static_cast<std::size_t>(n));
        for (int l = 0; l < n; ++l) {
          const LevelCw& c = g.cw[static_cast<std::size_t>(l) * count + e];
          k.cw[l] = {Seed(c.seed), c.t_left, c.t_right, c.sigma, c.tau_left, c.tau_right};
        }
        k.cw_leaf.resize(static_cast<std::size_t>(n) + 1);
        for (int l = 0; l <= n; ++l) k.cw_leaf[l] = g.leaf[static_cast<std::size_t>(l) * count + e];
        b.set_key(e, k);
      }
    }
  }
  return out;
}

std::vector<KeygenTape> draw_tapes(std::size_t count, int n, Rng& rng) {
  std::vector<KeygenTape> tapes(count);
  for (auto& tp : tapes) tp = draw_tape(n, rng);
  return tapes;
}

}  // namespace

KeyPair<EqKey> keygen_eq_from_tape(int n_bits, int out_bits, const KeygenTape& tape) {
  const int m = resolve_out(n_bits, out_bits);
  auto pair = fill_pair<EqKeyBatch>(false, n_bits, m, {&tape, 1});
  return {pair.alpha[0], pair.k0.key(0), pair.k1.key(0)};
}

KeyPair<EqKey> keygen_eq(int n_bits, Rng& rng, int out_bits) {
  check_fss_widths(n_bits, resolve_out(n_bits, out_bits));
  return keygen_eq_from_tape(n_bits, out_bits, draw_tape(n_bits, rng));
}

KeyPair<CmpKey> keygen_cmp_from_tape(int n_bits, int out_bits, const KeygenTape& tape) {
  const int m = resolve_out(n_bits, out_bits);
  auto pair = fill_pair<CmpKeyBatch>(true, n_bits, m, {&tape, 1});
  return {pair.alpha[0], pair.k0.key(0), pair.k1.key(0)};
}

KeyPair<CmpKey> keygen_cmp(int n_bits, Rng& rng, int out_bits) {
  check_fss_widths(n_bits, resolve_out(n_bits, out_bits));
  return keygen_cmp_from_tape(n_bits, out_bits, draw_tape(n_bits, rng));
}

BatchPair<EqKeyBatch> keygen_eq_batch(std::size_t count, int n_bits, int out_bits, Rng& rng,
                                      std::vector<KeygenTape>* tapes) {
  const int m = resolve_out(n_bits, out_bits);
  check_fss_widths(n_bits, m);
  std::vector<KeygenTape> drawn = draw_tapes(count, n_bits, rng);
  auto out = fill_pair<EqKeyBatch>(false, n_bits, m, drawn);
  if (tapes != nullptr) *tapes = std::move(drawn);
  return out;
}

BatchPair<CmpKeyBatch> keygen_cmp_batch(std::size_t count, int n_bits, int out_bits, Rng& rng,
                                        std::vector<KeygenTape>* tapes) {
  const int m = resolve_out(n_bits, out_bits);
  check_fss_widths(n_bits, m);
  std::vector<KeygenTape> drawn = draw_tapes(count, n_bits, rng);
  auto out = fill_pair<CmpKeyBatch>(true, n_bits, m, drawn);
  if (tapes != nullptr) *tapes = std::move(drawn);
  return out;
}

// ---------------------------------------------------------------------------
// Eval

std::uint64_t eval_eq(int party, const EqKey& key, std::uint64_t x) {
  check_party(party);
  key.validate();
  check_input(x, key.n_bits);
  const int n = key.n_bits;
  const std::uint64_t mask = ring_mask(key.out_bits);
  Block s = key.seed.block();
  bool t = party == 1;
  Block raw[kEqExpandBlocks];
  for (int i = 0; i < n; ++i) {
    expand_into(s, kEqExpandBlocks, raw);
    Slice p = slice_raw(raw, false, key.out_bits, mask);
    if (t) {
      const EqCorrection& c = key.cw[i];
      p.s_left ^= c.seed.block();
      p.s_right ^= c.seed.block();
      p.t_left ^= c.t_left;
      p.t_right ^= c.t_right;
    }
    const bool xi = ((x >> (n - 1 - i)) & 1U) != 0;
    s = xi ? p.s_right : p.s_left;
    t = xi ? p.t_right : p.t_left;
  }
  std::uint64_t out = Seed(s).low_bits(key.out_bits);
  if (t) out += key.cw_final;
  if (party == 1) out = 0 - out;
  return out & mask;
}

std::vector<std::uint64_t> eval_cmp_levels(int party, const CmpKey& key, std::uint64_t x) {
  check_party(party);
  key.validate();
  check_input(x, key.n_bits);
  const int n = key.n_bits;
  const int blocks = cmp_expand_blocks(key.out_bits);
  const std::uint64_t mask = ring_mask(key.out_bits);
  std::vector<std::uint64_t> outs;
  outs.reserve(static_cast<std::size_t>(n) + 1);
  Block s = key.seed.block();
  bool t = party == 1;
  Block raw[kMaxExpandBlocks];
  for (int i = 0; i < n; ++i) {
    expand_into(s, blocks, raw);
    Slice p = slice_raw(raw, true, key.out_bits, mask);
    if (t) {
      const CmpCorrection& c = key.cw[i];
      p.s_left ^= c.seed.block();
      p.s_right ^= c.seed.block();
      p.t_left ^= c.t_left;
      p.t_right ^= c.t_right;
      p.sigma_left ^= c.sigma;
      p.sigma_right ^= c.sigma;
      p.tau_left ^= c.tau_left;
      p.tau_right ^= c.tau_right;
    }
    const bool xi = ((x >> (n - 1 - i)) & 1U) != 0;
    std::uint64_t o = xi ? p.sigma_right : p.sigma_left;
    if (xi ? p.tau_right : p.tau_left) o += key.cw_leaf[i];
    if (party == 1) o = 0 - o;
    outs.push_back(o & mask);
    s = xi ? p.s_right : p.s_left;
    t = xi ? p.t_right : p.t_left;
  }
  std::uint64_t o = Seed(s).low_bits(key.out_bits);
  if (t) o += key.cw_leaf[n];
  if (party == 1) o = 0 - o;
  outs.push_back(o & mask);
  return outs;
}

std::uint64_t eval_cmp(int party, const CmpKey& key, std::uint64_t x) {
  std::uint64_t acc = 0;
  for (std::uint64_t o : eval_cmp_levels(party, key, x)) acc += o;
  return acc & ring_mask(key.out_bits);
}

std::vector<std::uint64_t> eval_eq_batch(int party, const EqKeyBatch& keys,
                                         std::span<const std::uint64_t> xs) {
  check_party(party);
  const std::size_t count = keys.count_;
  if (xs.size() != count) {
    throw std::invalid_argument("eval_eq_batch: " + std::to_string(xs.size()) +
                                " inputs for " + std::to_string(count) + " keys");
  }
  const int n = keys.n_bits_;
  for (std::uint64_t x : xs) check_input(x, n);
  const std::uint64_t mask = ring_mask(keys.out_bits_);
  std::vector<Block> s(keys.seed_);
  std::vector<std::uint8_t> t(count, static_cast<std::uint8_t>(party));
  std::vector<Block> raw(count * kEqExpandBlocks);
  for (int i = 0; i < n; ++i) {
    expand_many(s, kEqExpandBlocks, raw.data());
    const std::size_t base = static_cast<std::size_t>(i) * count;
    for (std::size_t e = 0; e < count; ++e) {
      const bool xi = ((xs[e] >> (n - 1 - i)) & 1U) != 0;
      const Block& g = raw[e * kEqExpandBlocks + (xi ? 1 : 0)];
      Block next = g.without_top_bit();
      bool nt = g.top_bit();
      if (t[e] != 0) {
        next ^= keys.cw_seed_[base + e];
        nt ^= ((keys.cw_t_[base + e] >> (xi ? 1 : 0)) & 1U) != 0;
      }
      s[e] = next;
      t[e] = nt ? 1 : 0;
    }
  }
  std::vector<std::uint64_t> out(count);
  for (std::size_t e = 0; e < count; ++e) {
    std::uint64_t o = Seed(s[e]).low_bits(keys.out_bits_);
    if (t[e] != 0) o += keys.cw_final_[e];
    if (party == 1) o = 0 - o;
    out[e] = o & mask;
  }
  return out;
}

std::vector<std::uint64_t> eval_cmp_batch(int party, const CmpKeyBatch& keys,
                                          std::span<const std::uint64_t> xs) {
  check_party(party);
  const std::size_t count = keys.count_;
  if (xs.size() != count) {
    throw std::invalid_argument("eval_cmp_batch: " + std::to_string(xs.size()) +
                                " inputs for " + std::to_string(count) + " keys");
  }
  const int n = keys.n_bits_;
  const int m = keys.out_bits_;
  for (std::uint64_t x : xs) check_input(x, n);
  const int blocks = cmp_expand_blocks(m);
  const std::uint64_t mask = ring_mask(m);
  std::vector<Block> s(keys.seed_);
  std::vector<std::uint8_t> t(count, static_cast<std::uint8_t>(party));
  std::vector<std::uint64_t> acc(count, 0);
  std::vector<Block> raw(count * static_cast<std::size_t>(blocks));
  for (int i = 0; i < n; ++i) {
    expand_many(s, blocks, raw.data());
    const std::size_t base = static_cast<std::size_t>(i) * count;
    for (std::size_t e = 0; e < count; ++e) {
      const bool xi = ((xs[e] >> (n - 1 - i)) & 1U) != 0;
      const Slice p = slice_raw(&raw[e * blocks], true, m, mask);
      Block next = xi ? p.s_right : p.s_left;
      bool nt = xi ? p.t_right : p.t_left;
      std::uint64_t sigma = xi ? p.sigma_right : p.sigma_left;
      bool tau = xi ? p.tau_right : p.tau_left;
      if (t[e] != 0) {
        const std::uint8_t f = keys.cw_t_[base + e];
        next ^= keys.cw_seed_[base + e];
        nt ^= ((f >> (xi ? 1 : 0)) & 1U) != 0;
        sigma ^= keys.cw_sigma_[base + e];
        tau ^= ((f >> (xi ? 3 : 2)) & 1U) != 0;
      }
      std::uint64_t o = sigma;
      if (tau) o += keys.leaf_[base + e];
      acc[e] += o;
      s[e] = next;
      t[e] = nt ? 1 : 0;
    }
  }
  const std::size_t last = static_cast<std::size_t>(n) * count;
  std::vector<std::uint64_t> out(count);
  for (std::size_t e = 0; e < count; ++e) {
    std::uint64_t o = acc[e] + Seed(s[e]).low_bits(m);
    if (t[e] != 0) o += keys.leaf_[last + e];
    if (party == 1) o = 0 - o;
    out[e] = o & mask;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Audit

namespace {

template <class Batch, class Regen>
AuditReport audit_impl(const Batch& k0, const Batch& k1, std::span<const AuditSample> sample,
                       Regen regen) {
  if (k0.size() != k1.size() || k0.n_bits() != k1.n_bits() || k0.out_bits() != k1.out_bits()) {
    throw std::invalid_argument("audit: party batches disagree in shape");
  }
  AuditReport report;
  for (const AuditSample& smp : sample) {
    if (smp.index >= k0.size()) throw std::out_of_range("audit index out of range");
    const auto pair = regen(k0.n_bits(), k0.out_bits(), smp.tape);
    Batch r0(k0.n_bits(), k0.out_bits(), 1), r1(k0.n_bits(), k0.out_bits(), 1);
    r0.set_key(0, pair.k0);
    r1.set_key(0, pair.k1);
    if (r0.serialize() != k0.element(smp.index) || r1.serialize() != k1.element(smp.index)) {
      report.ok = false;
      report.failures.push_back(smp.index);
    }
  }
  return report;
}

}  // namespace

AuditReport audit_keys(const EqKeyBatch& k0, const EqKeyBatch& k1,
                       std::span<const AuditSample> sample) {
  return audit_impl(k0, k1, sample, keygen_eq_from_tape);
}

AuditReport audit_keys(const CmpKeyBatch& k0, const CmpKeyBatch& k1,
                       std::span<const AuditSample> sample) {
  return audit_impl(k0, k1, sample, keygen_cmp_from_tape);
}

}  // namespace ariann
