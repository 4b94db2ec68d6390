#include <gtest/gtest.h>

#include "ariann/errors.hpp"
#include "ariann/nn_ops.hpp"
#include "ariann/prep.hpp"
#include "ariann/run.hpp"

using namespace ariann;

TEST(DealerPreprocess, ReluOnHundredElements) {
  const auto plan = relu_plan(100, 64);
  const auto b = dealer_preprocess(plan, 5);
  for (const Bundle* bundle : {&b.b0, &b.b1}) {
    ASSERT_EQ(bundle->items.size(), 2U);
    EXPECT_EQ(bundle->items[0].kind, PrepKind::kCmp);
    EXPECT_EQ(bundle->items[0].count, 100U);
    EXPECT_EQ(bundle->items[1].kind, PrepKind::kTriple);
    const auto t = unpack_triple(bundle->items[1], bundle->party);
    EXPECT_EQ(t.spec, TripleSpec::mul({100}, 64));
  }
  EXPECT_FALSE(b.b0.items[0].payload[1].has_value());
  EXPECT_FALSE(b.b1.items[0].payload[0].has_value());
}

TEST(DealerPreprocess, SameSeedSameBundles) {
  PrepPlan plan = relu_plan(50, 64);
  const auto more = argmax_plan(4, 10, 64);
  plan.insert(plan.end(), more.begin(), more.end());
  plan.push_back(PrepRequest::beaver(TripleSpec::matmul(4, 8, 3, 64)));
  const auto a = dealer_preprocess(plan, 9), b = dealer_preprocess(plan, 9);
  EXPECT_EQ(serialize_bundle(a.b0), serialize_bundle(b.b0));
  EXPECT_EQ(serialize_bundle(a.b1), serialize_bundle(b.b1));
  const auto c = dealer_preprocess(plan, 10);
  EXPECT_NE(serialize_bundle(a.b0), serialize_bundle(c.b0));
}

TEST(DealerPreprocess, PartyBytesMatchesPayloads) {
  PrepPlan plan = relu_plan(7, 64, 32);
  plan.push_back(PrepRequest::eq(3, 16, 64));
  const auto b = dealer_preprocess(plan, 1);
  // Triple payloads carry a spec header besides the three tensors.
  EXPECT_EQ(b.b0.items[0].payload[0]->size(), plan[0].party_bytes());
  EXPECT_EQ(b.b0.items[2].payload[0]->size(), plan[2].party_bytes());
  EXPECT_GT(b.b0.items[1].payload[0]->size(), plan[1].party_bytes());
}

TEST(Bundle, SerializeRoundTripAndRejects) {
  const auto b = dealer_preprocess(relu_plan(10, 64), 3);
  const auto bytes = serialize_bundle(b.b1);
  EXPECT_EQ(deserialize_bundle(bytes), b.b1);
  auto cut = bytes;
  cut.pop_back();
  EXPECT_THROW(deserialize_bundle(cut), FormatError);
  auto magic = bytes;
  magic[0] = 'X';
  EXPECT_THROW(deserialize_bundle(magic), FormatError);
  auto wrong_party = bytes;
  wrong_party[5] = 0;  // claims party 0 but carries party 1's payloads
  EXPECT_THROW(deserialize_bundle(wrong_party), FormatError);
}

TEST(Bundle, OfflineAndStreamingGiveIdenticalShares) {
  std::vector<std::int64_t> v{-3, 5, 0, 9, -8, 2};
  Rng rng(4);
  auto [x0, x1] = share(RingTensor::from_signed({2, 3}, 64, v), rng);
  auto program = [&](Session& s) {
    auto y = relu(s, s.party() == 0 ? x0 : x1);
    return argmax(s, y);
  };
  PrepPlan plan = relu_plan(6, 64);
  const auto am = argmax_plan(2, 3, 64);
  plan.insert(plan.end(), am.begin(), am.end());
  const auto bundles = dealer_preprocess(plan, 77);
  RunOptions offline;
  offline.prep = {std::make_shared<BundlePrep>(deserialize_bundle(serialize_bundle(bundles.b0))),
                  std::make_shared<BundlePrep>(deserialize_bundle(serialize_bundle(bundles.b1)))};
  RunOptions streaming;
  streaming.dealer_seed = 77;
  const auto a = run_two_party(program, offline);
  const auto b = run_two_party(program, streaming);
  EXPECT_EQ(a.out[0].values(), b.out[0].values());
  EXPECT_EQ(a.out[1].values(), b.out[1].values());
  EXPECT_EQ(reconstruct(a.out[0], a.out[1]).values(), (std::vector<std::uint64_t>{0, 1, 0, 1, 0, 0}));
  EXPECT_EQ(a.ledger, b.ledger);
}

TEST(Bundle, OutOfPlanRequestIsDesync) {
  const auto bundles = dealer_preprocess(relu_plan(4, 64), 1);
  BundlePrep p(bundles.b0);
  EXPECT_THROW(p.take_cmp(5, 32, 64), ProtocolError);
  EXPECT_NO_THROW(p.take_cmp(4, 32, 64));
  EXPECT_THROW(p.take_triple(TripleSpec::mul({5}, 64)), ProtocolError);
  BundlePrep q(bundles.b0);
  q.take_cmp(4, 32, 64);
  q.take_triple(TripleSpec::mul({4}, 64));
  EXPECT_EQ(q.remaining(), 0U);
  EXPECT_THROW(q.take_eq(1, 32, 64), ProtocolError);
}

TEST(Dealer, PartiesAskingForDifferentMaterialIsDesync) {
  Dealer d(1);
  auto p0 = d.source(0), p1 = d.source(1);
  p0->take_cmp(3, 16, 64);
  EXPECT_THROW(p1->take_eq(3, 16, 64), ProtocolError);
}

TEST(Dealer, HalvesReconstructAndOrderIndependent) {
  Dealer d(2, true);
  auto p0 = d.source(0), p1 = d.source(1);
  // Party 1 runs ahead by two items.
  const auto t1 = p1->take_triple(TripleSpec::mul({3}, 64));
  const auto k1 = p1->take_cmp(8, 16, 64);
  const auto t0 = p0->take_triple(TripleSpec::mul({3}, 64));
  const auto k0 = p0->take_cmp(8, 16, 64);
  EXPECT_EQ((t0.c + t1.c), (t0.a + t1.a) * (t0.b + t1.b));
  for (std::size_t i = 0; i < 8; ++i) {
    const std::uint64_t x = (k0.alpha_share(i) + k1.alpha_share(i)) & 0xFFFF;
    EXPECT_EQ(eval_cmp(0, k0.key(i), x) + eval_cmp(1, k1.key(i), x), 1U);
  }
  ASSERT_EQ(d.issued().size(), 2U);
  ASSERT_EQ(d.tapes()[1].size(), 8U);
  std::vector<AuditSample> sample{{2, d.tapes()[1][2]}, {5, d.tapes()[1][5]}};
  EXPECT_TRUE(audit_keys(k0, k1, sample).ok);
}

TEST(DealerPreprocess, TapesAuditTheBundle) {
  const auto b = dealer_preprocess(relu_plan(20, 64), 11, true);
  ASSERT_EQ(b.tapes.size(), 2U);
  ASSERT_EQ(b.tapes[0].size(), 20U);
  EXPECT_TRUE(b.tapes[1].empty());
  const auto k0 = unpack_cmp(b.b0.items[0], 0), k1 = unpack_cmp(b.b1.items[0], 1);
  std::vector<AuditSample> sample;
  for (std::size_t i = 0; i < 20; i += 3) sample.push_back({i, b.tapes[0][i]});
  EXPECT_TRUE(audit_keys(k0, k1, sample).ok);
}
