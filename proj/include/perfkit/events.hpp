#pragma once

#include <perfkit/formula.hpp>
#include <perfkit/msr.hpp>
#include <perfkit/topology.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace perfkit::events {

class EventError : public Error {
 public:
  using Error::Error;
};

enum class EventScope { Core, Uncore };
enum class SlotKind { Programmable, Fixed, Uncore };

struct CounterSlot {
  std::string id;  // PMC0, FIXC1, UPMC3
  SlotKind kind = SlotKind::Programmable;
  unsigned index = 0;                 // bit position in the global control register
  msr::Address config_register = 0;   // event select; fixed slots share FIXED_CTR_CTRL
  msr::Address counter_register = 0;
  unsigned width_bits = 40;

  std::uint64_t mask() const { return width_bits >= 64 ? ~0ull : (1ull << width_bits) - 1; }
};

struct EventDefinition {
  std::string name;
  std::uint32_t event_code = 0;
  std::uint32_t umask = 0;
  EventScope scope = EventScope::Core;
  std::vector<std::string> allowed_counters;

  bool allows(std::string_view slot) const;
};

struct Assignment {
  EventDefinition event;
  CounterSlot slot;
};

struct Metric {
  std::string name;
  Formula formula;
};

struct EventGroup {
  std::string name;
  std::string description;
  std::vector<Assignment> uses;
  std::vector<Metric> metrics;
};

struct Architecture;

struct EventSetSpec {
  const Architecture* arch = nullptr;
  std::vector<Assignment> assignments;
  const EventGroup* group = nullptr;  // set when expanded from a group name
  std::string source;

  std::string label() const;
  bool has_uncore() const;
};

struct Architecture {
  std::string name;
  std::vector<CounterSlot> slots;
  std::vector<EventDefinition> events;
  std::vector<EventGroup> groups;
  msr::Address fixed_ctr_ctrl = 0;
  msr::Address global_ctrl = 0;
  std::optional<msr::Address> uncore_global_ctrl;

  bool has_uncore() const { return uncore_global_ctrl.has_value(); }
  const CounterSlot* find_slot(std::string_view id) const;
  const EventDefinition* find_event(std::string_view name) const;
  const EventGroup* find_group(std::string_view name) const;
  // Assignments for the wired events of every fixed slot.
  std::vector<Assignment> fixed_assignments() const;
  msr::RegisterMap register_map() const;
};

// Builds an architecture from its counter slots and the two text tables:
//
//   event <NAME> code <hex> umask <hex> scope <core|uncore> counters <slot,...>
//
//   group <NAME> [description...]
//   use <EVENT>:<SLOT>
//   metric <name> = <formula>
//
// Group assignments implicitly include the fixed counters, and formulas may
// reference any assigned event, `runtime` and `clock`.
Architecture build_architecture(std::string name, std::vector<CounterSlot> slots, std::string_view event_table,
                                std::string_view group_table, msr::Address fixed_ctr_ctrl, msr::Address global_ctrl,
                                std::optional<msr::Address> uncore_global_ctrl);

const Architecture& core2();
const Architecture& nehalem();

// Core 2 and Nehalem/Westmere; anything else is unsupported.
const Architecture& architecture_for(const topo::CpuSignature& signature);
bool is_core2(const topo::CpuSignature& signature);

// "NAME:SLOT,NAME:SLOT,..." yields exactly the listed assignments; a bare
// group name yields the group's assignments.
EventSetSpec parse_event_string(std::string_view s, const Architecture& arch);

// Metrics reported for a raw event list: runtime and CPI.
std::vector<Metric> default_metrics();

}  // namespace perfkit::events
