#include "support.hpp"

#include <perfkit/marker.hpp>

#include <gtest/gtest.h>

using namespace perfkit;
using namespace perfkit::testing;
using marker::MarkerError;
using marker::MarkerSession;
using marker::RegionFile;
using msr::CellBehavior;

namespace {

CellBehavior rate(double r) {
  CellBehavior b;
  b.kind = CellBehavior::Kind::FreeRunning;
  b.rate = r;
  return b;
}

// Core 2 with every FLOPS_DP counter free-running on all four cores.
struct Core2Rig {
  FixtureMachine m{"core2_quad.dump", events::core2().register_map()};
  events::ProgramHandle handle;

  explicit Core2Rig(const std::string& set = "FLOPS_DP")
      : handle(events::program(events::parse_event_string(set, events::core2()), {0, 1, 2, 3}, m.topo, *m.msr)) {
    for (msr::OsId c = 0; c < 4; ++c) {
      m.msr->set(c, 0x309, rate(1e9));
      m.msr->set(c, 0x30a, rate(2e9));
      m.msr->set(c, 0xc1, rate(5e8));
      m.msr->set(c, 0xc2, rate(1e6));
    }
  }
  MarkerSession session(std::uint32_t threads, std::uint32_t regions,
                        std::optional<std::filesystem::path> file = std::nullopt) {
    return MarkerSession(threads, regions, handle, *m.msr, std::move(file));
  }
};

std::map<std::string, std::string> marker_env(const std::filesystem::path& result, const std::string& events,
                                              const std::string& cores) {
  BackendConfig cfg;
  cfg.kind = BackendConfig::Kind::Fixture;
  cfg.cpuid_dump = fixture("core2_quad.dump");
  cfg.msr_fixture = fixture("core2_marker.msr");
  auto env = backend_environment(cfg);
  env[marker::kEnvResultFile] = result.string();
  env[marker::kEnvEvents] = events;
  env[marker::kEnvCores] = cores;
  return env;
}

}  // namespace

TEST(MarkerSession, RegionIdsAreDense) {
  Core2Rig rig;
  auto s = rig.session(1, 2);
  EXPECT_EQ(s.register_region("Main"), 0u);
  EXPECT_EQ(s.register_region("Accum"), 1u);
}

TEST(MarkerSession, CapacityAndDuplicates) {
  Core2Rig rig;
  auto s = rig.session(1, 1);
  s.register_region("Main");
  EXPECT_THROW(s.register_region("Main"), MarkerError);
  try {
    s.register_region("Other");
    FAIL();
  } catch (const MarkerError& e) {
    EXPECT_NE(std::string(e.what()).find("capacity of 1 regions exhausted"), std::string::npos);
  }
}

TEST(MarkerSession, MisuseIsRejected) {
  Core2Rig rig;
  auto s = rig.session(2, 2);
  const auto id = s.register_region("Main");
  EXPECT_THROW(s.stop_region(0, 0, id), MarkerError);
  EXPECT_THROW(s.start_region(2, 0), MarkerError);
  EXPECT_THROW(s.start_region(0, 7), MarkerError);
  s.start_region(0, 0);
  EXPECT_THROW(s.start_region(0, 0), MarkerError);
  EXPECT_THROW(s.stop_region(0, 1, id), MarkerError);
  EXPECT_THROW(s.stop_region(0, 0, 9), MarkerError);
  s.stop_region(0, 0, id);
  s.close();
  EXPECT_THROW(s.start_region(0, 0), MarkerError);
  EXPECT_THROW(s.close(), MarkerError);
}

TEST(MarkerSession, ThreadsAccumulateIndependently) {
  Core2Rig rig;
  auto s = rig.session(2, 1);
  const auto id = s.register_region("Main");
  s.start_region(0, 0);
  rig.m.msr->advance(0.001);
  s.stop_region(0, 0, id);
  s.start_region(1, 1);
  rig.m.msr->advance(0.002);
  s.stop_region(1, 1, id);
  const auto f = s.close();
  ASSERT_EQ(f.blocks.size(), 1u);
  ASSERT_EQ(f.blocks[0].rows.size(), 2u);
  const auto& r0 = f.blocks[0].rows[0];
  const auto& r1 = f.blocks[0].rows[1];
  EXPECT_EQ(r0.thread_id, 0u);
  EXPECT_EQ(r1.thread_id, 1u);
  EXPECT_EQ(r0.count("INSTR_RETIRED_ANY"), 1000000u);
  EXPECT_EQ(r1.count("INSTR_RETIRED_ANY"), 2000000u);
  EXPECT_EQ(r0.cycles, 2000000u);
  EXPECT_EQ(r1.cycles, 4000000u);
}

TEST(MarkerSession, TwoRegionsFourThreads) {
  Core2Rig rig;
  auto s = rig.session(4, 2);
  const auto a = s.register_region("A");
  const auto b = s.register_region("B");
  for (std::uint32_t t = 0; t < 4; ++t) {
    for (const auto r : {a, b}) {
      s.start_region(t, t);
      rig.m.msr->advance(0.001);
      s.stop_region(t, t, r);
    }
  }
  const auto f = s.close();
  ASSERT_EQ(f.blocks.size(), 2u);
  EXPECT_EQ(f.blocks[0].name, "A");
  EXPECT_EQ(f.blocks[1].name, "B");
  for (const auto& blk : f.blocks) {
    ASSERT_EQ(blk.rows.size(), 4u);
    for (std::uint32_t t = 0; t < 4; ++t) {
      EXPECT_EQ(blk.rows[t].thread_id, t);
      EXPECT_EQ(blk.rows[t].os_id, t);
      EXPECT_EQ(blk.rows[t].calls, 1u);
    }
  }
}

TEST(MarkerSession, NoRegionsGiveEmptyResult) {
  Core2Rig rig;
  auto s = rig.session(1, 0);
  const auto f = s.close();
  EXPECT_TRUE(f.blocks.empty());
  EXPECT_TRUE(f.warnings.empty());
}

TEST(MarkerSession, OpenRegionIsReported) {
  Core2Rig rig;
  auto s = rig.session(2, 1);
  s.register_region("Main");
  s.start_region(1, 3);
  const auto f = s.close();
  EXPECT_TRUE(f.blocks.empty());
  ASSERT_EQ(f.warnings.size(), 1u);
  EXPECT_EQ(f.warnings[0], "open-region thread 1 core 3");
}

TEST(MarkerSession, AccumulationIsLinear) {
  Core2Rig rig;
  auto single = rig.session(1, 1);
  single.register_region("R");
  single.start_region(0, 0);
  rig.m.msr->advance(0.0005);
  single.stop_region(0, 0, 0);
  const auto one = single.close().blocks.at(0).rows.at(0);

  auto many = rig.session(1, 1);
  many.register_region("R");
  for (int i = 0; i < 100; ++i) {
    many.start_region(0, 0);
    rig.m.msr->advance(0.0005);
    many.stop_region(0, 0, 0);
    rig.m.msr->advance(0.0003);
  }
  const auto hundred = many.close().blocks.at(0).rows.at(0);
  EXPECT_EQ(hundred.calls, 100u);
  EXPECT_EQ(hundred.cycles, 100 * one.cycles);
  ASSERT_EQ(hundred.counts.size(), one.counts.size());
  for (std::size_t i = 0; i < one.counts.size(); ++i) {
    EXPECT_EQ(hundred.counts[i].second, 100 * one.counts[i].second) << one.counts[i].first;
  }
}

TEST(MarkerSession, InactiveRecordsNothing) {
  MarkerSession s(2, 2);
  EXPECT_FALSE(s.active());
  EXPECT_EQ(s.register_region("Main"), 0u);
  EXPECT_EQ(s.register_region("Main"), 0u);
  s.start_region(0, 0);
  s.start_region(0, 0);
  s.stop_region(5, 5, 9);
  const auto f = s.close();
  EXPECT_TRUE(f.blocks.empty());
}

TEST(RegionFile, RoundTrip) {
  RegionFile f;
  f.threads = 2;
  f.regions = 2;
  f.warnings = {"open-region thread 1 core 1"};
  f.blocks.push_back({0, "Init", {{0, 0, 1, 217578, {{"INSTR_RETIRED_ANY", 313742}, {"CPU_CLK_UNHALTED_CORE", 217578}}}}});
  f.blocks.push_back({1, "Bench", {{1, 1, 50, 99, {{"X", 7}}}}});
  EXPECT_EQ(marker::parse_region_file(marker::format_region_file(f)), f);
}

TEST(RegionFile, Errors) {
  EXPECT_THROW(marker::parse_region_file(""), MarkerError);
  EXPECT_THROW(marker::parse_region_file("threads x regions 1\n"), MarkerError);
  EXPECT_THROW(marker::parse_region_file("threads 1 regions 1\nthread 0 core 0 calls 1 cycles 1\n"), MarkerError);
  EXPECT_THROW(marker::parse_region_file("threads 1 regions 1\nregion 0 A\nthread 0 core 0 calls 1\n"), MarkerError);
  EXPECT_THROW(marker::parse_region_file("threads 1 regions 1\nbogus\n"), MarkerError);
  try {
    marker::parse_region_file("threads 1 regions 1\nregion 0 A\nthread 0 core 0 calls 1 cycles 2 E=zz\n");
    FAIL();
  } catch (const MarkerError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
}

TEST(ProcessorId, InjectedProvider) {
  marker::set_processor_id_provider([] { return marker::OsId{5}; });
  EXPECT_EQ(marker::get_processor_id(), 5u);
  marker::set_processor_id_provider({});
  EXPECT_LT(marker::get_processor_id(), 4096u);
}

TEST(MarkerApi, NoOpWithoutEnvironment) {
  const auto r = run_process({bin("marker_app").string(), "4", "3"});
  EXPECT_EQ(r.status, 0);
  EXPECT_EQ(r.out, "marker_app done\n");
  EXPECT_EQ(r.err, "");
}

TEST(MarkerApi, CallsBeforeInit) {
  const auto r = run_process({bin("marker_app").string(), "1", "1", "before-init"});
  EXPECT_EQ(r.status, 0);
  EXPECT_EQ(r.out, "rc -1 error marker not initialized\n");
}

TEST(MarkerApi, InitTwice) {
  const auto r = run_process({bin("marker_app").string(), "1", "1", "init-twice"});
  EXPECT_EQ(r.status, 0);
  EXPECT_EQ(r.out, "rc -1 error marker initialized twice\n");
}

TEST(MarkerApi, EnvironmentDrivenResultFile) {
  TempDir dir;
  const auto result = dir.path() / "regions.txt";
  const auto r = run_process({bin("marker_app").string(), "4", "1"}, marker_env(result, "FLOPS_DP", "0-3"));
  ASSERT_EQ(r.status, 0) << r.err;
  const auto f = marker::load_region_file(result);
  EXPECT_EQ(f.threads, 4u);
  ASSERT_EQ(f.blocks.size(), 2u);
  EXPECT_EQ(f.blocks[0].name, "Init");
  EXPECT_EQ(f.blocks[1].name, "Benchmark");
  EXPECT_EQ(f.blocks[0].rows.at(0).count("INSTR_RETIRED_ANY"), 313742u);
  EXPECT_EQ(f.blocks[0].rows.at(3).count("CPU_CLK_UNHALTED_CORE"), 459276u);
  EXPECT_EQ(f.blocks[1].rows.at(0).count("INSTR_RETIRED_ANY"), 18802350u);
  EXPECT_EQ(f.blocks[1].rows.at(0).count("SIMD_COMP_INST_RETIRED_PACKED_DOUBLE"), 8192000u);
}

TEST(MarkerApi, MissingEventsVariable) {
  TempDir dir;
  auto env = marker_env(dir.path() / "r.txt", "", "0-3");
  env.erase(marker::kEnvEvents);
  const auto r = run_process({bin("marker_app").string(), "1"}, env);
  EXPECT_EQ(r.status, 1);
  EXPECT_NE(r.err.find(marker::kEnvEvents), std::string::npos) << r.err;
}
