#include "support.hpp"

#include <perfkit/features.hpp>

#include <gtest/gtest.h>

#include <bit>

using namespace perfkit;
using namespace perfkit::testing;
using features::FeatureError;
using features::State;

namespace {

constexpr std::uint64_t kMiscEnable = 0x4000850089;

msr::RegisterMap feature_registers() {
  msr::RegisterMap m;
  m.add(features::core2_table().reg, features::core2_table().name);
  return m;
}

struct Core2Features {
  FixtureMachine m{"core2_quad.dump", feature_registers()};
  const features::FeatureTable& table = features::core2_table();

  explicit Core2Features(std::uint64_t value = kMiscEnable) {
    msr::CellBehavior b;
    b.value = value;
    for (msr::OsId c = 0; c < 4; ++c) m.msr->set(c, table.reg, b);
  }
  State state(const std::string& key) {
    for (const auto& s : features::report(0, *m.msr, table)) {
      if (s.flag->key == key) return s.state;
    }
    throw std::runtime_error("no flag " + key);
  }
};

}  // namespace

TEST(Features, TableLayout) {
  const auto& t = features::core2_table();
  EXPECT_EQ(t.reg, 0x1a0u);
  EXPECT_EQ(t.flags.size(), 14u);
  ASSERT_TRUE(t.find("CL_PREFETCHER"));
  EXPECT_EQ(t.find("CL_PREFETCHER")->bit, 19u);
  EXPECT_EQ(t.find("Adjacent Cache Line Prefetch"), t.find("CL_PREFETCHER"));
  EXPECT_EQ(t.find("nonsense"), nullptr);
}

TEST(Features, DecodesRecordedRegister) {
  Core2Features f;
  EXPECT_EQ(f.state("FAST_STRINGS"), State::Enabled);
  EXPECT_EQ(f.state("HW_PREFETCHER"), State::Enabled);
  EXPECT_EQ(f.state("BTS"), State::Supported);
  EXPECT_EQ(f.state("MONITOR"), State::Supported);
  EXPECT_EQ(f.state("CPUID_MAX"), State::Disabled);
  EXPECT_EQ(f.state("DYN_ACCEL"), State::Disabled);
  EXPECT_EQ(f.state("IP_PREFETCHER"), State::Enabled);
}

TEST(Features, AllZeroRegister) {
  Core2Features f(0);
  EXPECT_EQ(f.state("FAST_STRINGS"), State::Disabled);
  EXPECT_EQ(f.state("HW_PREFETCHER"), State::Enabled);
  EXPECT_EQ(f.state("PEBS"), State::Supported);
  EXPECT_EQ(f.state("MONITOR"), State::NotSupported);
}

TEST(Features, UnsupportedProcessor) {
  for (const char* dump : {"nehalem_ep.dump", "amd_istanbul.dump", "pentium_m.dump"}) {
    try {
      features::table_for(topology(dump).signature);
      FAIL() << dump;
    } catch (const FeatureError& e) {
      EXPECT_NE(std::string(e.what()).find("unsupported"), std::string::npos);
    }
  }
  EXPECT_EQ(&features::table_for(topology("core2_quad.dump").signature), &features::core2_table());
}

TEST(Features, DisableFlipsExactlyOneBit) {
  Core2Features f;
  EXPECT_EQ(features::toggle(0, "CL_PREFETCHER", false, *f.m.msr, f.table), State::Disabled);
  const auto after = f.m.msr->read(0, 0x1a0);
  EXPECT_EQ(std::popcount(after ^ kMiscEnable), 1);
  EXPECT_EQ(after ^ kMiscEnable, std::uint64_t{1} << 19);
  EXPECT_EQ(f.state("CL_PREFETCHER"), State::Disabled);
  EXPECT_EQ(f.m.msr->read(1, 0x1a0), kMiscEnable);
  EXPECT_EQ(features::toggle(0, "CL_PREFETCHER", true, *f.m.msr, f.table), State::Enabled);
  EXPECT_EQ(f.m.msr->read(0, 0x1a0), kMiscEnable);
}

TEST(Features, NoWriteWhenAlreadyInState) {
  Core2Features f;
  f.m.msr->clear_writes();
  EXPECT_EQ(features::toggle(0, "DCU_PREFETCHER", true, *f.m.msr, f.table), State::Enabled);
  EXPECT_TRUE(f.m.msr->writes().empty());
}

TEST(Features, ReadOnlyAndUnknownFlags) {
  Core2Features f;
  EXPECT_THROW(features::toggle(0, "PEBS", false, *f.m.msr, f.table), FeatureError);
  EXPECT_THROW(features::toggle(0, "FAST_STRINGS", false, *f.m.msr, f.table), FeatureError);
  EXPECT_THROW(features::toggle(0, "TURBO", false, *f.m.msr, f.table), FeatureError);
  EXPECT_EQ(f.m.msr->read(0, 0x1a0), kMiscEnable);
}

TEST(Features, ReportMatchesGolden) {
  Core2Features f;
  const auto text = features::render_report("CPU", 0, features::report(0, *f.m.msr, f.table));
  EXPECT_EQ(drop_lines(text, "CPU name:"), drop_lines(read_file(golden_path("core2_features.txt")), "CPU name:"));
}

TEST(Features, ReportAfterToggle) {
  Core2Features f;
  features::toggle(0, "IP_PREFETCHER", false, *f.m.msr, f.table);
  const auto text = features::render_report("CPU", 0, features::report(0, *f.m.msr, f.table));
  EXPECT_NE(text.find("IP Prefetcher:                  disabled"), std::string::npos) << text;
}
