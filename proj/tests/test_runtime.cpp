#include <gtest/gtest.h>

#include <chrono>
#include <thread>

#include "ariann/errors.hpp"
#include "ariann/fss_protocol.hpp"
#include "ariann/run.hpp"
#include "ariann/session.hpp"
#include "ariann/transport.hpp"

using namespace ariann;
using namespace std::chrono_literals;

TEST(FrameCodec, EmptyPayloadIsFiveBytes) {
  const auto b = encode_frame({FrameType::kControl, {}});
  ASSERT_EQ(b.size(), 5U);
  EXPECT_EQ(b[0], 1);
  EXPECT_EQ(b[1], 0);
  EXPECT_EQ(b[4], 0x04);
}

TEST(FrameCodec, Layout) {
  const auto b = encode_frame({FrameType::kMaskedShare, {0xAA, 0xBB, 0xCC}});
  const std::vector<std::uint8_t> want{4, 0, 0, 0, 0x02, 0xAA, 0xBB, 0xCC};
  EXPECT_EQ(b, want);
}

TEST(FrameCodec, RoundTripAndConcatenation) {
  std::vector<Frame> frames{{FrameType::kReveal, {1, 2, 3}},
                            {FrameType::kTripleDelta, {}},
                            {FrameType::kAbort, std::vector<std::uint8_t>(70000, 9)}};
  std::vector<std::uint8_t> stream;
  for (const auto& f : frames) {
    const auto e = encode_frame(f);
    EXPECT_EQ(decode_frames(e).front(), f);
    stream.insert(stream.end(), e.begin(), e.end());
  }
  EXPECT_EQ(decode_frames(stream), frames);

  // Byte-at-a-time feeding yields the same frames.
  FrameDecoder d;
  std::vector<Frame> got;
  for (auto byte : stream) {
    d.feed({&byte, 1});
    while (auto f = d.next()) got.push_back(*f);
  }
  EXPECT_EQ(got, frames);
}

TEST(FrameCodec, Errors) {
  auto e = encode_frame({FrameType::kReveal, {1, 2, 3}});
  e.pop_back();
  EXPECT_THROW(decode_frames(e), ProtocolError);
  const std::vector<std::uint8_t> zero{0, 0, 0, 0, 1};
  EXPECT_THROW(decode_frames(zero), ProtocolError);
  const std::vector<std::uint8_t> bad_type{1, 0, 0, 0, 0x09};
  EXPECT_THROW(decode_frames(bad_type), ProtocolError);
}

TEST(Channel, LocalFifoAndTimeout) {
  auto [a, b] = make_local_channel_pair();
  a->send({FrameType::kReveal, {1}});
  a->send({FrameType::kReveal, {2}});
  EXPECT_EQ(b->recv(100ms).payload[0], 1);
  EXPECT_EQ(b->recv(100ms).payload[0], 2);
  EXPECT_THROW(b->recv(50ms), TimeoutError);
  a->close();
  EXPECT_THROW(b->recv(1000ms), TransportError);
}

TEST(Channel, TcpLargeSimultaneousSends) {
  auto [a, b] = make_channel_pair(TransportKind::kTcp, 5000ms);
  const std::vector<std::uint8_t> big(4 << 20, 0x5A);
  // Both ends send before either reads; the writer threads keep this from
  // deadlocking on full socket buffers.
  a->send({FrameType::kMaskedShare, big});
  b->send({FrameType::kMaskedShare, big});
  EXPECT_EQ(a->recv(5000ms).payload, big);
  EXPECT_EQ(b->recv(5000ms).payload, big);
}

TEST(Channel, TcpPeerCloseIsAnError) {
  auto [a, b] = make_channel_pair(TransportKind::kTcp, 5000ms);
  b->close();
  const auto start = std::chrono::steady_clock::now();
  EXPECT_THROW(a->recv(5000ms), TransportError);
  EXPECT_LT(std::chrono::steady_clock::now() - start, 4000ms);
}

TEST(Ledger, CountsOneRoundPerExchangeUnderOutermostTag) {
  auto r = run_two_party([](Session& s) {
    {
      auto outer = s.op("relu");
      auto inner = s.op("mul");
      std::vector<std::uint64_t> v(10, s.party());
      s.exchange(FrameType::kReveal, v, 32);
    }
    std::vector<std::uint64_t> w(3, 1);
    s.exchange(FrameType::kReveal, w, 64);
    return 0;
  });
  for (int j = 0; j < 2; ++j) {
    const auto& l = r.ledger[j];
    EXPECT_EQ(l.get("relu").rounds, 1U);
    EXPECT_EQ(l.get("relu").bytes_sent, 40U);
    EXPECT_EQ(l.get("relu").elements, 10U);
    EXPECT_EQ(l.get("mul").rounds, 0U);
    EXPECT_EQ(l.get("other").rounds, 1U);
    EXPECT_EQ(l.get("other").bytes_received, 24U);
    EXPECT_EQ(l.total().rounds, 2U);
  }
}

TEST(Session, DesyncIsAProtocolError) {
  EXPECT_THROW(run_two_party([](Session& s) {
                 std::vector<std::uint64_t> v(2, 0);
                 s.exchange(s.party() == 0 ? FrameType::kReveal : FrameType::kMaskedShare, v, 64);
                 return 0;
               }),
               ProtocolError);
  EXPECT_THROW(run_two_party([](Session& s) {
                 std::vector<std::uint64_t> v(s.party() + 1, 0);
                 s.exchange(FrameType::kReveal, v, 64);
                 return 0;
               }),
               ProtocolError);
}

TEST(Session, ConsumeRejectsReuse) {
  auto [a, b] = make_local_channel_pair();
  Session s(0, a, nullptr);
  s.consume(17, "key");
  EXPECT_THROW(s.consume(17, "key"), KeyReuseError);
  EXPECT_THROW(s.prep(), std::logic_error);
}

TEST(Session, PublicCoinsAgree) {
  auto r = run_two_party([](Session& s) {
    std::vector<std::uint64_t> v;
    for (int i = 0; i < 50; ++i) v.push_back(s.public_uniform(1000));
    return v;
  });
  EXPECT_EQ(r.out[0], r.out[1]);
}

TEST(Session, PeerFailureAbortsCleanly) {
  for (auto kind : {TransportKind::kLocal, TransportKind::kTcp}) {
    RunOptions opt;
    opt.transport = kind;
    opt.timeout = 20000ms;
    const auto start = std::chrono::steady_clock::now();
    try {
      run_two_party(
          [](Session& s) {
            if (s.party() == 1) throw std::runtime_error("party 1 crashed");
            std::vector<std::uint64_t> v(4, 0);
            s.exchange(FrameType::kReveal, v, 64);
            return 0;
          },
          opt);
      FAIL() << "expected an error";
    } catch (const std::runtime_error& e) {
      EXPECT_STREQ(e.what(), "party 1 crashed");
    }
    EXPECT_LT(std::chrono::steady_clock::now() - start, 5000ms);
  }
}

TEST(Session, KilledPeerGivesTransportErrorNotHang) {
  // A peer that disappears without an abort notice.
  auto [a, b] = make_channel_pair(TransportKind::kTcp, 5000ms);
  Session s(0, a, nullptr);
  s.set_timeout(10000ms);
  std::thread killer([&, ch = b]() mutable {
    std::this_thread::sleep_for(50ms);
    ch->close();
    ch.reset();
  });
  b.reset();
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::uint64_t> v(4, 0);
  EXPECT_THROW(s.exchange(FrameType::kReveal, v, 64), TransportError);
  EXPECT_LT(std::chrono::steady_clock::now() - start, 5000ms);
  killer.join();
}

TEST(Session, TimeoutFromEnvironment) {
  ::setenv("ARIANN_TIMEOUT_MS", "1234", 1);
  EXPECT_EQ(default_timeout(), 1234ms);
  ::setenv("ARIANN_TIMEOUT_MS", "junk", 1);
  EXPECT_EQ(default_timeout(), 30000ms);
  ::unsetenv("ARIANN_TIMEOUT_MS");
  EXPECT_EQ(default_timeout(), 30000ms);
}

TEST(Session, SilentPeerTimesOut) {
  auto [a, b] = make_local_channel_pair();
  Session s(0, a, nullptr);
  s.set_timeout(100ms);
  std::vector<std::uint64_t> v(1, 0);
  EXPECT_THROW(s.exchange(FrameType::kReveal, v, 64), TimeoutError);
}

TEST(PackRing, WidthIsCeilBitsOverEight) {
  const std::vector<std::uint64_t> v{0x1234, 0xFFFF, 0};
  EXPECT_EQ(pack_ring(v, 16).size(), 6U);
  EXPECT_EQ(pack_ring(v, 17).size(), 9U);
  EXPECT_EQ(unpack_ring(pack_ring(v, 16), 16), v);
  EXPECT_THROW(unpack_ring(std::vector<std::uint8_t>(5), 16), ProtocolError);
}

TEST(SignProtocol, SingleComparisonIsOneRoundOfMElementsEachWay) {
  for (auto kind : {TransportKind::kLocal, TransportKind::kTcp}) {
    RunOptions opt;
    opt.transport = kind;
    auto r = run_two_party(
        [](Session& s) {
          const std::vector<std::int64_t> ys{-5, 0, 7, -100, 100};
          const auto secret = RingTensor::from_signed({5}, 64, ys);
          auto y = public_share(s.party(), secret, 0);
          auto op = s.op("cmp");
          const auto keys = s.take_cmp(5, 16, 64);
          return sign_protocol(s, y, keys);
        },
        opt);
    const auto v = reconstruct(r.out[0], r.out[1]);
    EXPECT_EQ(v.values(), (std::vector<std::uint64_t>{1, 1, 0, 1, 0}));
    for (int j = 0; j < 2; ++j) {
      const auto e = r.ledger[j].get("cmp");
      EXPECT_EQ(e.rounds, 1U);
      EXPECT_EQ(e.elements, 5U);
      EXPECT_EQ(e.bytes_sent, 5U * 2);
      EXPECT_EQ(e.bytes_received, 5U * 2);
    }
  }
}

TEST(SignProtocol, KeyReuseIsRejected) {
  EXPECT_THROW(run_two_party([](Session& s) {
                 auto y = public_share(s.party(), RingTensor({2}, 64), 0);
                 const auto keys = s.take_cmp(2, 16, 64);
                 sign_protocol(s, y, keys);
                 return sign_protocol(s, y, keys);
               }),
               KeyReuseError);
}

TEST(SignProtocol, TransportTransparency) {
  auto program = [](Session& s) {
    Rng rng(99);
    std::vector<std::int64_t> ys(200);
    for (auto& y : ys) y = static_cast<std::int64_t>(rng.uniform(2001)) - 1000;
    auto [y0, y1] = share(RingTensor::from_signed({200}, 64, ys), rng);
    auto keys = s.take_cmp(200, 32, 64);
    auto eq = s.take_eq(200, 32, 64);
    auto c = sign_protocol(s, s.party() == 0 ? y0 : y1, keys);
    auto z = equal_zero_protocol(s, s.party() == 0 ? y0 : y1, eq);
    return c + z;
  };
  RunOptions tcp;
  tcp.transport = TransportKind::kTcp;
  const auto a = run_two_party(program);
  const auto b = run_two_party(program, tcp);
  EXPECT_EQ(a.out[0].values(), b.out[0].values());
  EXPECT_EQ(a.out[1].values(), b.out[1].values());
  EXPECT_EQ(a.ledger, b.ledger);
}

TEST(EqualZeroProtocol, Exact) {
  auto r = run_two_party([](Session& s) {
    const std::vector<std::int64_t> ys{0, 1, -1, 1 << 20, -(1 << 20), 0};
    auto y = public_share(s.party(), RingTensor::from_signed({6}, 64, ys), 0);
    return equal_zero_protocol(s, y, s.take_eq(6, 24, 64));
  });
  EXPECT_EQ(reconstruct(r.out[0], r.out[1]).values(),
            (std::vector<std::uint64_t>{1, 0, 0, 0, 0, 1}));
}
