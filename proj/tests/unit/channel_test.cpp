#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "nbpk/channel.hpp"
#include "net.hpp"
#include "vectors.hpp"

using namespace nbpk;
using namespace nbpk::channel;
using namespace std::chrono_literals;

namespace {

struct Pair {
  UdpEndpoint rx;
  UdpEndpoint tx;
};

Pair loopback_pair(std::size_t receive_buffer = 65536) {
  EndpointConfig rx_cfg;
  rx_cfg.bind = Address{"127.0.0.1", 0};
  rx_cfg.receive_buffer = receive_buffer;
  auto rx = UdpEndpoint::open(rx_cfg);
  if (!rx) throw std::runtime_error(rx.error().detail);
  EndpointConfig tx_cfg;
  tx_cfg.peer = Address{"127.0.0.1", rx->local_port()};
  auto tx = UdpEndpoint::open(tx_cfg);
  if (!tx) throw std::runtime_error(tx.error().detail);
  return {std::move(*rx), std::move(*tx)};
}

std::vector<Timed<int>> numbered(int n) {
  std::vector<Timed<int>> v;
  for (int i = 0; i < n; ++i) v.push_back({i, static_cast<std::uint64_t>(i) * 100});
  return v;
}

}  // namespace

TEST(SplitMix, MatchesIndependentReference) {
  SplitMix64 a(42);
  for (auto want : nbpk::testing::kSplitMixSeed42) EXPECT_EQ(a.next(), want);
  SplitMix64 b(0);
  for (auto want : nbpk::testing::kSplitMixSeed0) EXPECT_EQ(b.next(), want);
}

TEST(SplitMix, UnitDrawsAreInRange) {
  SplitMix64 r(9);
  for (int i = 0; i < 100000; ++i) {
    const double u = r.next_unit();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}

TEST(Address, Parsing) {
  auto a = parse_address("10.0.0.2:12000");
  ASSERT_TRUE(a);
  EXPECT_EQ(a->host, "10.0.0.2");
  EXPECT_EQ(a->port, 12000);
  auto b = parse_address("localhost", 10023);
  ASSERT_TRUE(b);
  EXPECT_EQ(b->port, 10023);
  EXPECT_FALSE(parse_address("host:80"));
  EXPECT_FALSE(parse_address("host:99999"));
  EXPECT_FALSE(parse_address("host:abc"));
}

TEST(EndpointConfig, PortRange) {
  EndpointConfig cfg;
  cfg.bind = Address{"127.0.0.1", 80};
  EXPECT_FALSE(validate(cfg));
  cfg.bind->port = 0;  // ephemeral
  EXPECT_TRUE(validate(cfg));
  cfg.peer = Address{"127.0.0.1", 1023};
  EXPECT_FALSE(validate(cfg));
}

TEST(UdpEndpoint, MotionDatagramIntact) {
  auto p = loopback_pair();
  Bytes d(172);
  std::iota(d.begin(), d.end(), 0);
  ASSERT_TRUE(p.tx.send(d));
  auto got = p.rx.recv(1000ms);
  ASSERT_TRUE(got);
  EXPECT_EQ(got->data, d);
}

TEST(UdpEndpoint, OversizeIsRejected) {
  auto p = loopback_pair();
  auto r = p.tx.send(Bytes(70000, 0));
  ASSERT_FALSE(r);
  EXPECT_EQ(r.error().code, TransportErrc::Oversize);
}

TEST(UdpEndpoint, TimedOut) {
  auto p = loopback_pair();
  auto r = p.rx.recv(10ms);
  ASSERT_FALSE(r);
  EXPECT_EQ(r.error().code, TransportErrc::TimedOut);
}

TEST(UdpEndpoint, ThousandDatagramsKeepBoundaries) {
  auto p = loopback_pair();
  for (int i = 0; i < 1000; ++i) {
    Bytes d(1 + i % 300, static_cast<std::uint8_t>(i));
    d[0] = static_cast<std::uint8_t>(i & 0xFF);
    ASSERT_TRUE(p.tx.send(d));
    auto got = p.rx.recv(1000ms);
    ASSERT_TRUE(got) << i;
    ASSERT_EQ(got->data, d);
  }
}

TEST(UdpEndpoint, BurstKeepsBoundariesAndOrder) {
  auto p = loopback_pair();
  for (int i = 0; i < 1000; ++i) {
    Bytes d(8 + i % 64, static_cast<std::uint8_t>(i));
    ASSERT_TRUE(p.tx.send(d));
  }
  for (int i = 0; i < 1000; ++i) {
    auto got = p.rx.recv(1000ms);
    ASSERT_TRUE(got) << i;
    ASSERT_EQ(got->data, Bytes(8 + i % 64, static_cast<std::uint8_t>(i)));
  }
}

TEST(UdpEndpoint, TruncationIsReported) {
  auto p = loopback_pair(100);
  ASSERT_TRUE(p.tx.send(Bytes(500, 1)));
  auto r = p.rx.recv(1000ms);
  ASSERT_FALSE(r);
  EXPECT_EQ(r.error().code, TransportErrc::Truncated);
  // The endpoint stays usable afterwards.
  ASSERT_TRUE(p.tx.send(Bytes(50, 2)));
  auto ok = p.rx.recv(1000ms);
  ASSERT_TRUE(ok);
  EXPECT_EQ(ok->data.size(), 50u);
}

TEST(UdpEndpoint, SendWithoutPeer) {
  EndpointConfig cfg;
  auto ep = UdpEndpoint::open(cfg);
  ASSERT_TRUE(ep);
  auto r = ep->send(Bytes(4, 0));
  ASSERT_FALSE(r);
  EXPECT_EQ(r.error().code, TransportErrc::NoPeer);
}

TEST(UdpEndpoint, UnreachablePeerIsNotAnError) {
  EndpointConfig cfg;
  cfg.peer = Address{"127.0.0.1", nbpk::testing::free_udp_port()};
  auto ep = UdpEndpoint::open(cfg);
  ASSERT_TRUE(ep);
  for (int i = 0; i < 3; ++i) EXPECT_TRUE(ep->send(Bytes(10, 0)));
}

TEST(UdpEndpoint, BindConflictIsReported) {
  auto p = loopback_pair();
  EndpointConfig cfg;
  cfg.bind = Address{"127.0.0.1", p.rx.local_port()};
  auto second = UdpEndpoint::open(cfg);
  ASSERT_FALSE(second);
  EXPECT_EQ(second.error().code, TransportErrc::Socket);
}

TEST(Impair, IdentityWhenAllProbabilitiesZero) {
  ImpairmentConfig cfg;
  cfg.seed = 5;
  auto out = impair(cfg, numbered(1000));
  ASSERT_EQ(out.size(), 1000u);
  for (int i = 0; i < 1000; ++i) {
    EXPECT_EQ(out[static_cast<std::size_t>(i)].item, i);
    EXPECT_EQ(out[static_cast<std::size_t>(i)].deliver_time_us, static_cast<std::uint64_t>(i) * 100);
  }
}

TEST(Impair, FullLossIsEmpty) {
  ImpairmentConfig cfg;
  cfg.loss_p = 1.0;
  EXPECT_TRUE(impair(cfg, numbered(1000)).empty());
}

TEST(Impair, HalfLossMatchesReferenceTrace) {
  ImpairmentConfig cfg;
  cfg.loss_p = 0.5;
  cfg.seed = 42;
  auto out = impair(cfg, numbered(10000));
  ASSERT_EQ(out.size(), nbpk::testing::kLossHalfSurvivors);
  for (std::size_t i = 0; i < nbpk::testing::kLossHalfFirstSurvivors.size(); ++i)
    EXPECT_EQ(out[i].index, nbpk::testing::kLossHalfFirstSurvivors[i]);
  std::uint64_t h = nbpk::testing::kFnvOffset;
  for (const auto& d : out) h = nbpk::testing::fnv1a_u32(h, static_cast<std::uint32_t>(d.index));
  EXPECT_EQ(h, nbpk::testing::kLossHalfSurvivorDigest);
  const double sigma = std::sqrt(10000 * 0.25);
  EXPECT_LE(std::abs(static_cast<double>(out.size()) - 5000.0), 3 * sigma);
}

TEST(Impair, DuplicateFollowsOriginal) {
  ImpairmentConfig cfg;
  cfg.dup_p = 1.0;
  auto out = impair(cfg, numbered(10));
  ASSERT_EQ(out.size(), 20u);
  for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(out[i].item, static_cast<int>(i / 2));
}

TEST(Impair, ReorderHoldsForDepthSlots) {
  // Reordering everything by the same depth keeps the order but releases each
  // packet two slots later.
  ImpairmentConfig cfg;
  cfg.reorder_p = 1.0;
  cfg.reorder_depth = 2;
  auto out = impair(cfg, numbered(5));
  ASSERT_EQ(out.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(out[i].item, static_cast<int>(i));
  EXPECT_EQ(out[0].deliver_time_us, 200u);  // released when packet 2 is sent
  EXPECT_EQ(out[2].deliver_time_us, 400u);
  EXPECT_EQ(out[3].deliver_time_us, 400u);  // flushed at the last send time
}

TEST(Impair, PartialReorderMovesPacketsLater) {
  ImpairmentConfig cfg;
  cfg.reorder_p = 0.3;
  cfg.reorder_depth = 3;
  cfg.seed = 11;
  Impairer<int> imp(cfg);
  imp.record_fates(true);
  std::vector<Delivery<int>> out;
  for (auto& t : numbered(200)) imp.push(t.item, t.send_time_us, out);
  imp.flush(out);
  ASSERT_EQ(out.size(), 200u);
  // Each packet lands no earlier than its own slot and no later than slot+depth.
  for (std::size_t pos = 0; pos < out.size(); ++pos) {
    const auto idx = out[pos].index;
    const auto& fate = imp.fates()[idx];
    const auto release_slot = idx + (fate.reordered ? cfg.reorder_depth : 0);
    EXPECT_EQ(out[pos].deliver_time_us, std::min<std::size_t>(release_slot, 199) * 100);
  }
  // Release order is (slot, index).
  for (std::size_t pos = 1; pos < out.size(); ++pos) {
    auto key = [&](const Delivery<int>& d) {
      const auto& f = imp.fates()[d.index];
      return std::pair(std::min<std::size_t>(d.index + (f.reordered ? cfg.reorder_depth : 0), 199), d.index);
    };
    EXPECT_LE(key(out[pos - 1]), key(out[pos]));
  }
}

TEST(Impair, DelayAndJitterBounds) {
  ImpairmentConfig cfg;
  cfg.base_delay_us = 1000;
  cfg.jitter_us = 500;
  cfg.seed = 3;
  auto out = impair(cfg, numbered(1000));
  ASSERT_EQ(out.size(), 1000u);
  bool varied = false;
  const auto first_extra = out.front().deliver_time_us;
  for (const auto& d : out) {
    const auto extra = d.deliver_time_us - d.index * 100;
    EXPECT_GE(extra, 1000u);
    EXPECT_LE(extra, 1500u);
    varied = varied || extra != first_extra;
  }
  EXPECT_TRUE(varied);
}

TEST(Impair, DeterministicAndNeverAltersItems) {
  ImpairmentConfig cfg{0.2, 0.1, 0.1, 4, 10, 20, 77};
  auto a = impair(cfg, numbered(5000));
  auto b = impair(cfg, numbered(5000));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].item, b[i].item);
    EXPECT_EQ(a[i].index, b[i].index);
    EXPECT_EQ(a[i].deliver_time_us, b[i].deliver_time_us);
    EXPECT_EQ(a[i].item, static_cast<int>(a[i].index));
  }
}

TEST(Impair, ThreeDrawsPerPacketRegardlessOfOutcome) {
  // With jitter off, the fates of a stream must line up with plain triples of draws.
  ImpairmentConfig cfg{0.4, 0.3, 0.2, 1, 0, 0, 1234};
  Impairer<int> imp(cfg);
  imp.record_fates(true);
  std::vector<Delivery<int>> out;
  for (int i = 0; i < 1000; ++i) imp.push(i, 0, out);
  SplitMix64 ref(1234);
  for (const auto& f : imp.fates()) {
    EXPECT_EQ(f.lost, ref.next_unit() < 0.4);
    EXPECT_EQ(f.duplicated, ref.next_unit() < 0.3);
    EXPECT_EQ(f.reordered, ref.next_unit() < 0.2);
  }
}

TEST(ImpairmentConfig, Validation) {
  ImpairmentConfig cfg;
  EXPECT_TRUE(validate(cfg));
  cfg.loss_p = 1.5;
  EXPECT_FALSE(validate(cfg));
  cfg.loss_p = 0.0;
  cfg.reorder_depth = 0;
  EXPECT_FALSE(validate(cfg));
}
