#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "ariann/prg.hpp"
#include "test_util.hpp"

using namespace ariann;

namespace {

std::vector<std::uint8_t> from_hex(const std::string& h) {
  std::vector<std::uint8_t> out(h.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(std::stoul(h.substr(2 * i, 2), nullptr, 16));
  }
  return out;
}

std::vector<std::uint8_t> to_bytes(const std::vector<Block>& blocks) {
  std::vector<std::uint8_t> out;
  for (const auto& b : blocks) {
    const auto bytes = b.bytes();
    out.insert(out.end(), bytes.begin(), bytes.end());
  }
  return out;
}

}  // namespace

TEST(Prg, PinnedVectorsFromIndependentAes) {
  std::ifstream f(std::string(ARIANN_TEST_DATA) + "/prg_vectors.txt");
  ASSERT_TRUE(f) << "missing prg_vectors.txt";
  std::string line;
  int checked = 0;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    std::string seed_hex, out_hex;
    int blocks = 0;
    is >> seed_hex >> blocks >> out_hex;
    const Seed seed(Block::from_hex(seed_hex));
    ASSERT_EQ(seed.block().hex(), seed_hex);
    EXPECT_EQ(to_bytes(expand(seed, blocks)), from_hex(out_hex)) << line;
    ++checked;
  }
  EXPECT_EQ(checked, 48);
}

TEST(Prg, ZeroSeedKnownAnswer) {
  // AES-128 with key 000102..0f on the zero block (FIPS-197 key schedule).
  const auto out = expand(Seed(), 2);
  EXPECT_EQ(out[0].hex(), "c6a13b37878f5b826f4f8162a1c8d879");
}

TEST(Prg, DeterministicAndPrefix) {
  Rng rng(11);
  for (int i = 0; i < 50; ++i) {
    const Seed s = rng.next_seed();
    const auto two = expand(s, 2);
    EXPECT_EQ(two, expand(s, 2));
    const auto three = expand(s, 3);
    EXPECT_EQ(std::vector<Block>(three.begin(), three.begin() + 2), two);
    const auto four = expand(s, 4);
    EXPECT_EQ(std::vector<Block>(four.begin(), four.begin() + 3), three);
  }
}

TEST(Prg, BlockCountRange) {
  EXPECT_THROW(expand(Seed(), 1), std::invalid_argument);
  EXPECT_THROW(expand(Seed(), 5), std::invalid_argument);
}

TEST(Prg, HardwareMatchesPortable) {
  Rng rng(12);
  for (int k = 0; k < kMaxExpandBlocks; ++k) {
    for (int i = 0; i < 200; ++i) {
      const Block b = rng.next_block();
      EXPECT_EQ(fixed_cipher(k).encrypt(b), fixed_cipher(k).encrypt_portable(b));
    }
  }
}

TEST(Prg, ExpandManyMatchesSingle) {
  Rng rng(13);
  std::vector<Block> seeds(37);
  for (auto& s : seeds) s = rng.next_seed().block();
  std::vector<Block> out(seeds.size() * 3);
  expand_many(seeds, 3, out.data());
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const auto single = expand(Seed(seeds[i]), 3);
    for (int b = 0; b < 3; ++b) EXPECT_EQ(out[i * 3 + b], single[b]);
  }
}

TEST(Seed, TopBitCleared) {
  const Seed s(Block{~0ULL, ~0ULL});
  EXPECT_FALSE(s.block().top_bit());
  EXPECT_EQ(s.block().hi, 0x7fffffffffffffffULL);
}

TEST(SliceEq, Probes) {
  std::vector<Block> raw(2);
  EXPECT_EQ(slice_eq(raw), EqExpansion{});
  raw[0].hi = 1ULL << 63;
  const auto e = slice_eq(raw);
  EXPECT_TRUE(e.t_left);
  EXPECT_FALSE(e.t_right);
  EXPECT_EQ(e.s_left, Seed());
  EXPECT_EQ(e.s_right, Seed());
  EXPECT_THROW(slice_eq(std::vector<Block>(3)), std::invalid_argument);
}

TEST(SliceEq, RoundTrip) {
  Rng rng(14);
  for (int i = 0; i < 100; ++i) {
    std::vector<Block> raw = {rng.next_block(), rng.next_block()};
    EXPECT_EQ(reassemble_eq(slice_eq(raw)), raw);
  }
}

TEST(SliceCmp, Probes) {
  for (int m : {8, 32, 63, 64}) {
    const int blocks = cmp_expand_blocks(m);
    std::vector<Block> raw(static_cast<std::size_t>(blocks));
    EXPECT_EQ(slice_cmp(raw, m), CmpExpansion{});
    // tau_right alone
    if (m < 64) {
      raw[2].hi = 1ULL << m;
    } else {
      raw[3].hi = 1;
    }
    const auto e = slice_cmp(raw, m);
    EXPECT_TRUE(e.tau_right);
    EXPECT_FALSE(e.tau_left);
    EXPECT_EQ(e.sigma_right, 0U);
    EXPECT_EQ(e.sigma_left, 0U);
  }
  // sigma_left is the low m bits of block 2's low word.
  std::vector<Block> raw(3);
  raw[2].lo = 0xABCDEF;
  EXPECT_EQ(slice_cmp(raw, 8).sigma_left, 0xEFU);
  EXPECT_THROW(slice_cmp(std::vector<Block>(2), 8), std::invalid_argument);
  EXPECT_THROW(slice_cmp(std::vector<Block>(3), 64), std::invalid_argument);
}

TEST(SliceCmp, RoundTripOnUsedBits) {
  Rng rng(15);
  for (int m : {16, 32, 64}) {
    for (int i = 0; i < 50; ++i) {
      std::vector<Block> raw;
      for (int b = 0; b < cmp_expand_blocks(m); ++b) raw.push_back(rng.next_block());
      const auto e = slice_cmp(raw, m);
      EXPECT_EQ(slice_cmp(reassemble_cmp(e, m), m), e);
    }
  }
}

TEST(Prg, ByteHistogramChiSquare) {
  Rng rng(16);
  testutil::ByteHistogram h;
  for (int i = 0; i < 10000; ++i) {
    const auto out = to_bytes(expand(rng.next_seed(), 2));
    h.add(out);
  }
  EXPECT_LT(h.chi_square(), testutil::kChi2Crit255);
}

TEST(Rng, DeterministicAndUniformBound) {
  Rng a(99), b(99);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
  for (int i = 0; i < 1000; ++i) EXPECT_LT(a.uniform(7), 7U);
  EXPECT_THROW(a.uniform(0), std::invalid_argument);
}
