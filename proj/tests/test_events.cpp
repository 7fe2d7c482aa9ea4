#include "support.hpp"

#include <perfkit/events.hpp>

#include <gtest/gtest.h>

using namespace perfkit;
using namespace perfkit::events;

namespace {

std::string error_of(const std::string& s, const Architecture& arch) {
  try {
    parse_event_string(s, arch);
  } catch (const EventError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(ParseEventString, RawEventListOnCore2) {
  const auto set = parse_event_string(
      "SIMD_COMP_INST_RETIRED_PACKED_DOUBLE:PMC0,SIMD_COMP_INST_RETIRED_SCALAR_DOUBLE:PMC1", core2());
  ASSERT_EQ(set.assignments.size(), 2u);
  EXPECT_EQ(set.assignments[0].event.name, "SIMD_COMP_INST_RETIRED_PACKED_DOUBLE");
  EXPECT_EQ(set.assignments[0].slot.id, "PMC0");
  EXPECT_EQ(set.assignments[1].slot.id, "PMC1");
  EXPECT_EQ(set.group, nullptr);
}

TEST(ParseEventString, GroupIncludesFixedCounters) {
  const auto set = parse_event_string("FLOPS_DP", core2());
  ASSERT_NE(set.group, nullptr);
  std::vector<std::string> names;
  for (const auto& a : set.assignments) names.push_back(a.event.name + ":" + a.slot.id);
  EXPECT_EQ(names, (std::vector<std::string>{"INSTR_RETIRED_ANY:FIXC0", "CPU_CLK_UNHALTED_CORE:FIXC1",
                                             "SIMD_COMP_INST_RETIRED_PACKED_DOUBLE:PMC0",
                                             "SIMD_COMP_INST_RETIRED_SCALAR_DOUBLE:PMC1"}));
  EXPECT_EQ(set.label(), "FLOPS_DP");
}

TEST(ParseEventString, Errors) {
  EXPECT_NE(error_of("FOO:PMC0", core2()).find("unknown event"), std::string::npos);
  EXPECT_NE(error_of("INSTR_RETIRED_ANY:PMC9", core2()).find("unknown counter slot"), std::string::npos);
  EXPECT_NE(error_of("NOPE", core2()).find("unknown group"), std::string::npos);
  EXPECT_NE(error_of("SIMD_COMP_INST_RETIRED_PACKED_DOUBLE:PMC0,SIMD_COMP_INST_RETIRED_SCALAR_DOUBLE:PMC0", core2())
                .find("assigned twice"),
            std::string::npos);
  EXPECT_NE(error_of("SIMD_COMP_INST_RETIRED_PACKED_DOUBLE:PMC0,SIMD_COMP_INST_RETIRED_PACKED_DOUBLE:PMC1", core2())
                .find("listed twice"),
            std::string::npos);
  EXPECT_NE(error_of("INSTR_RETIRED_ANY:PMC0", core2()).find("cannot be counted"), std::string::npos);
  EXPECT_NE(error_of("SIMD_COMP_INST_RETIRED_PACKED_DOUBLE", core2()).find("unknown group"), std::string::npos);
  EXPECT_NE(error_of("SIMD_COMP_INST_RETIRED_PACKED_DOUBLE:PMC0,,SIMD_COMP_INST_RETIRED_SCALAR_DOUBLE:PMC1", core2()).find("malformed"), std::string::npos);
  EXPECT_NE(error_of("", core2()).find("empty"), std::string::npos);
  EXPECT_NE(error_of("UNC_L3_LINES_IN_ANY:UPMC0", core2()).find("unknown event"), std::string::npos);
}

TEST(Architectures, ShippedGroups) {
  for (const auto* g : {"FLOPS_DP", "FLOPS_SP", "L2", "MEM", "CACHE", "L2CACHE", "DATA", "BRANCH", "TLB"}) {
    EXPECT_NE(core2().find_group(g), nullptr) << g;
    EXPECT_NE(nehalem().find_group(g), nullptr) << g;
  }
  for (const auto* g : {"L3", "L3CACHE", "MEM_L3"}) {
    EXPECT_NE(nehalem().find_group(g), nullptr) << g;
    EXPECT_EQ(core2().find_group(g), nullptr) << g;
  }
}

TEST(Architectures, EveryGroupMetricStartsWithRuntimeAndCpi) {
  for (const auto* arch : {&core2(), &nehalem()}) {
    for (const auto& g : arch->groups) {
      ASSERT_GE(g.metrics.size(), 2u) << g.name;
      EXPECT_EQ(g.metrics[0].name, "Runtime [s]");
      EXPECT_EQ(g.metrics[1].name, "CPI");
      EXPECT_EQ(g.uses[0].slot.id, "FIXC0");
      EXPECT_EQ(g.uses[1].slot.id, "FIXC1");
    }
  }
}

TEST(Architectures, RegisterLayout) {
  const auto& c2 = core2();
  const auto* pmc1 = c2.find_slot("PMC1");
  ASSERT_NE(pmc1, nullptr);
  EXPECT_EQ(pmc1->counter_register, 0xC2u);
  EXPECT_EQ(pmc1->config_register, 0x187u);
  EXPECT_EQ(pmc1->width_bits, 40u);
  const auto* fix1 = c2.find_slot("FIXC1");
  ASSERT_NE(fix1, nullptr);
  EXPECT_EQ(fix1->counter_register, 0x30Au);
  EXPECT_EQ(fix1->index, 33u);
  const auto* upmc7 = nehalem().find_slot("UPMC7");
  ASSERT_NE(upmc7, nullptr);
  EXPECT_EQ(upmc7->counter_register, 0x3B7u);
  EXPECT_EQ(upmc7->config_register, 0x3C7u);
  EXPECT_EQ(upmc7->width_bits, 48u);
  const auto map = nehalem().register_map();
  EXPECT_EQ(map.scope_of(0x391), msr::Scope::Socket);
  EXPECT_EQ(map.scope_of(0x3B0), msr::Scope::Socket);
  EXPECT_EQ(map.scope_of(0xC1), msr::Scope::Core);
  ASSERT_NE(map.find(0x38E), nullptr);
  EXPECT_FALSE(map.find(0x38E)->writable);
  EXPECT_FALSE(core2().has_uncore());
  EXPECT_TRUE(nehalem().has_uncore());
}

TEST(Architectures, SelectionBySignature) {
  EXPECT_EQ(&architecture_for(perfkit::testing::topology("core2_quad.dump").signature), &core2());
  EXPECT_EQ(&architecture_for(perfkit::testing::topology("westmere_ep.dump").signature), &nehalem());
  EXPECT_EQ(&architecture_for(perfkit::testing::topology("nehalem_ep.dump").signature), &nehalem());
  EXPECT_THROW(architecture_for(perfkit::testing::topology("amd_istanbul.dump").signature), EventError);
  EXPECT_THROW(architecture_for(perfkit::testing::topology("pentium_m.dump").signature), EventError);
}

TEST(BuildArchitecture, TableErrorsNameTheLine) {
  const std::vector<CounterSlot> slots{{"FIXC0", SlotKind::Fixed, 32, 0x38D, 0x309, 40},
                                       {"PMC0", SlotKind::Programmable, 0, 0x186, 0xC1, 40}};
  const auto events = "event INSTR code 0xC0 umask 0x00 scope core counters FIXC0\n"
                      "event LOADS code 0x43 umask 0x01 scope core counters PMC0\n";
  EXPECT_NO_THROW(build_architecture("t", slots, events, "group G\nuse LOADS:PMC0\nmetric m = LOADS / INSTR\n", 0x38D,
                                     0x38F, std::nullopt));
  try {
    build_architecture("t", slots, events, "group G\nuse LOADS:PMC0\nmetric m = STORES\n", 0x38D, 0x38F, std::nullopt);
    FAIL();
  } catch (const EventError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(build_architecture("t", slots, "event X code 0xZZ umask 0 scope core counters PMC0\n", "", 0x38D, 0x38F,
                                  std::nullopt),
               EventError);
  EXPECT_THROW(build_architecture("t", slots, "event X code 0x1 umask 0 scope uncore counters PMC0\n", "", 0x38D,
                                  0x38F, std::nullopt),
               EventError);
  EXPECT_THROW(build_architecture("t", slots, events, "use LOADS:PMC0\n", 0x38D, 0x38F, std::nullopt), EventError);
}
