#include "support.hpp"

#include <perfkit/render.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <set>

using namespace perfkit;
using namespace perfkit::testing;

namespace {

std::vector<topo::CacheDescriptor> data_caches(const topo::TopologyMap& t) {
  std::vector<topo::CacheDescriptor> out;
  for (const auto& c : t.caches) {
    if (c.kind != topo::CacheKind::Instruction) out.push_back(c);
  }
  return out;
}

const std::vector<std::string> kDumps{"westmere_ep.dump", "nehalem_ep.dump", "core2_quad.dump",
                                      "amd_istanbul.dump", "pentium_m.dump", "minimal.dump"};

std::uint32_t bits(std::uint32_t v, unsigned lo, unsigned width) { return (v >> lo) & ((1u << width) - 1); }

// Capacities straight from the leaf 0x4 register fields, per level and kind.
std::map<std::pair<unsigned, unsigned>, std::uint64_t> leaf4_capacities(const topo::CpuidDump& dump) {
  std::map<std::pair<unsigned, unsigned>, std::uint64_t> out;
  for (std::uint32_t sub = 0;; ++sub) {
    const auto r = dump.query(0, 0x4, sub);
    if (!r || bits(r->a, 0, 5) == 0) break;
    const std::uint64_t size = std::uint64_t{bits(r->b, 22, 10) + 1} * (bits(r->b, 12, 10) + 1) *
                               (bits(r->b, 0, 12) + 1) * (std::uint64_t{r->c} + 1);
    out[{bits(r->a, 5, 3), bits(r->a, 0, 5)}] = size;
  }
  return out;
}

}  // namespace

TEST(ThreadTopology, WestmereRowsMatchListing) {
  const auto t = topology("westmere_ep.dump");
  EXPECT_EQ(t.sockets, 2u);
  EXPECT_EQ(t.cores_per_socket, 6u);
  EXPECT_EQ(t.threads_per_core, 2u);
  ASSERT_EQ(t.threads.size(), 24u);
  EXPECT_EQ(t.thread(3).smt_id, 0u);
  EXPECT_EQ(t.thread(3).core_id, 8u);
  EXPECT_EQ(t.thread(3).socket_id, 0u);
  EXPECT_EQ(t.thread(15).smt_id, 1u);
  EXPECT_EQ(t.thread(15).core_id, 8u);
  EXPECT_EQ(t.thread(15).socket_id, 0u);
  EXPECT_EQ(t.socket_members(0), (std::vector<topo::OsId>{0, 12, 1, 13, 2, 14, 3, 15, 4, 16, 5, 17}));
  EXPECT_EQ(t.socket_members(1), (std::vector<topo::OsId>{6, 18, 7, 19, 8, 20, 9, 21, 10, 22, 11, 23}));
}

TEST(ThreadTopology, SingleThreadMachine) {
  const auto t = topology("minimal.dump");
  ASSERT_EQ(t.threads.size(), 1u);
  EXPECT_EQ(t.threads[0], (topo::HWThread{0, t.threads[0].apic_id, 0, 0, 0}));
}

TEST(ThreadTopology, StrategiesFollowTheAvailableLeaves) {
  EXPECT_EQ(topo::decode_thread_topology(topo::load_dump(fixture("westmere_ep.dump"))).strategy,
            topo::ThreadStrategy::ExtendedTopologyLeaf);
  EXPECT_EQ(topo::decode_thread_topology(topo::load_dump(fixture("core2_quad.dump"))).strategy,
            topo::ThreadStrategy::LegacyIntel);
  EXPECT_EQ(topo::decode_thread_topology(topo::load_dump(fixture("amd_istanbul.dump"))).strategy,
            topo::ThreadStrategy::LegacyAmd);
}

TEST(ThreadTopology, UnknownOsIdIsAnError) {
  const auto t = topology("core2_quad.dump");
  EXPECT_THROW(t.thread(4), topo::TopologyError);
}

TEST(CacheTopology, WestmereLevelsMatchListing) {
  const auto t = topology("westmere_ep.dump");
  const auto caches = data_caches(t);
  ASSERT_EQ(caches.size(), 3u);
  ASSERT_EQ(t.caches.size(), 4u);
  const auto& l1 = caches[0];
  EXPECT_EQ(l1.level, 1u);
  EXPECT_EQ(l1.kind, topo::CacheKind::Data);
  EXPECT_EQ(l1.size_bytes, 32u * 1024);
  EXPECT_EQ(l1.associativity, 8u);
  EXPECT_EQ(l1.sets, 64u);
  EXPECT_EQ(l1.line_size, 64u);
  EXPECT_TRUE(l1.inclusive);
  EXPECT_EQ(l1.threads_sharing, 2u);
  EXPECT_EQ(l1.groups.front(), (std::vector<topo::OsId>{0, 12}));
  const auto& l2 = caches[1];
  EXPECT_EQ(l2.size_bytes, 256u * 1024);
  EXPECT_EQ(l2.sets, 512u);
  const auto& l3 = caches[2];
  EXPECT_EQ(l3.level, 3u);
  EXPECT_EQ(l3.size_bytes, 12u * 1024 * 1024);
  EXPECT_EQ(l3.associativity, 16u);
  EXPECT_EQ(l3.sets, 12288u);
  EXPECT_FALSE(l3.inclusive);
  EXPECT_EQ(l3.threads_sharing, 12u);
  EXPECT_EQ(l3.groups.front(), (std::vector<topo::OsId>{0, 12, 1, 13, 2, 14, 3, 15, 4, 16, 5, 17}));
}

TEST(CacheTopology, SingleWaySingleSetSubleafIsOneLine) {
  auto dump = topo::load_dump(fixture("minimal.dump"));
  auto& recs = dump.threads[0];
  for (auto& r : recs) {
    if (r.leaf == 0) r.regs.a = 4;
  }
  // Level 1 data cache, 1 way, 1 partition, 64-byte lines, 1 set.
  recs.push_back({0x4, 0, {0x21, 63, 0, 0}});
  recs.push_back({0x4, 1, {0, 0, 0, 0}});
  const auto caches = topo::decode_cache_topology(dump).caches;
  ASSERT_EQ(caches.size(), 1u);
  EXPECT_EQ(caches[0].size_bytes, 64u);
}

TEST(CacheTopology, LegacyDescriptorsDecode) {
  const auto caches = data_caches(topology("pentium_m.dump"));
  ASSERT_EQ(caches.size(), 2u);
  EXPECT_EQ(caches[0].size_bytes, 32u * 1024);
  EXPECT_EQ(caches[1].size_bytes, 2u * 1024 * 1024);
}

TEST(CacheTopology, CapacitiesAgreeWithRegisterFields) {
  for (const auto* name : {"westmere_ep.dump", "nehalem_ep.dump", "core2_quad.dump"}) {
    const auto dump = topo::load_dump(fixture(name));
    const auto expected = leaf4_capacities(dump);
    for (const auto& c : topo::build_topology(dump).caches) {
      const unsigned type = c.kind == topo::CacheKind::Data ? 1 : c.kind == topo::CacheKind::Instruction ? 2 : 3;
      ASSERT_TRUE(expected.count({c.level, type})) << name;
      EXPECT_EQ(c.size_bytes, expected.at({c.level, type})) << name << " L" << c.level;
    }
  }
}

TEST(TopologyProperties, CacheIdentityHoldsForEveryFixture) {
  std::size_t checked = 0;
  for (const auto& name : kDumps) {
    for (const auto& c : topology(name).caches) {
      EXPECT_EQ(std::uint64_t{c.associativity} * c.sets * c.line_size, c.size_bytes) << name << " L" << c.level;
      ++checked;
    }
  }
  EXPECT_GE(checked, 10u);
}

TEST(TopologyProperties, ApicDecompositionRoundTrips) {
  for (const auto& name : kDumps) {
    const auto t = topology(name);
    for (const auto& th : t.threads) {
      EXPECT_EQ(t.layout.compose(th.socket_id, th.core_id, th.smt_id), th.apic_id) << name << " os " << th.os_id;
    }
  }
}

TEST(TopologyProperties, CacheGroupsPartitionTheThreads) {
  for (const auto& name : kDumps) {
    const auto t = topology(name);
    for (const auto& c : t.caches) {
      std::multiset<topo::OsId> seen;
      for (const auto& g : c.groups) {
        EXPECT_EQ(g.size(), c.threads_sharing) << name;
        seen.insert(g.begin(), g.end());
      }
      EXPECT_EQ(seen.size(), t.threads.size()) << name << " L" << c.level;
      for (const auto& th : t.threads) EXPECT_EQ(seen.count(th.os_id), 1u) << name;
    }
  }
}

TEST(TopologyProperties, DecodingIsDeterministic) {
  for (const auto& name : kDumps) {
    const auto dump = topo::load_dump(fixture(name));
    EXPECT_EQ(topo::build_topology(dump), topo::build_topology(dump)) << name;
  }
}

TEST(TopologyProperties, HeterogeneousShiftsAreRejected) {
  auto dump = topo::load_dump(fixture("westmere_ep.dump"));
  for (auto& r : dump.threads[5]) {
    if (r.leaf == 0xB && r.subleaf == 0) r.regs.a = 2;  // SMT shift differs from thread 0
  }
  EXPECT_THROW(topo::build_topology(dump), topo::TopologyError);
}

TEST(RenderText, WestmereExtendedMatchesGolden) {
  const auto text = topo::render_text(topology("westmere_ep.dump"), true);
  EXPECT_EQ(text, read_file(golden_path("westmere_extended.txt")));
  EXPECT_NE(text.find("Threads per core:       2\n"), std::string::npos);
}

TEST(RenderText, NonExtendedOmitsCacheParameters) {
  const auto text = topo::render_text(topology("westmere_ep.dump"), false);
  EXPECT_EQ(text, read_file(golden_path("westmere_basic.txt")));
  EXPECT_EQ(text.find("Associativity:"), std::string::npos);
  EXPECT_EQ(text.find("Number of sets:"), std::string::npos);
  EXPECT_EQ(text.find("Cache line size:"), std::string::npos);
  EXPECT_NE(text.find("Size:    12 MB"), std::string::npos);
}

TEST(RenderText, SingleThreadTable) {
  const auto text = topo::render_text(topology("minimal.dump"), false);
  EXPECT_NE(text.find("\n0               0               0               0\n"), std::string::npos) << text;
}

TEST(RenderArt, WestmereFirstSocketMatchesListing) {
  const auto art = topo::render_ascii_art(topology("westmere_ep.dump"));
  const auto expected = read_file(golden_path("westmere_art_socket0.txt"));
  EXPECT_EQ(art.substr(0, expected.size()), expected);
  EXPECT_EQ(art, read_file(golden_path("westmere_art.txt")));
}

TEST(RenderArt, SingleCoreBox) {
  const auto art = topo::render_ascii_art(topology("minimal.dump"));
  EXPECT_NE(art.find("| 0 |"), std::string::npos) << art;
}

TEST(RenderArt, NehalemHasTwoSocketsWithFourColumns) {
  const auto art = topo::render_ascii_art(topology("nehalem_ep.dump"));
  const auto rows = lines(art);
  std::size_t outer = 0;
  std::size_t l3 = 0;
  for (const auto& r : rows) {
    if (r.rfind("+-", 0) == 0) ++outer;
    if (r.find("8MB") != std::string::npos) ++l3;
  }
  EXPECT_EQ(outer, 4u);  // top and bottom border of two sockets
  EXPECT_EQ(l3, 2u);
  const auto l1_row = std::find_if(rows.begin(), rows.end(), [](const std::string& r) { return r.find("32kB") != std::string::npos; });
  ASSERT_NE(l1_row, rows.end());
  std::size_t boxes = 0;
  for (std::size_t p = l1_row->find("32kB"); p != std::string::npos; p = l1_row->find("32kB", p + 1)) ++boxes;
  EXPECT_EQ(boxes, 4u);
}

TEST(RenderText, CacheSizes) {
  EXPECT_EQ(topo::format_cache_size(32 * 1024), "32 kB");
  EXPECT_EQ(topo::format_cache_size(12 * 1024 * 1024), "12 MB");
  EXPECT_EQ(topo::format_cache_size(256 * 1024, false), "256kB");
}
