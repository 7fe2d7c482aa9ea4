#include <perfkit/events.hpp>

#include "text.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

namespace perfkit::events {

bool EventDefinition::allows(std::string_view slot) const {
  return std::find(allowed_counters.begin(), allowed_counters.end(), slot) != allowed_counters.end();
}

std::string EventSetSpec::label() const { return group ? group->name : source; }

bool EventSetSpec::has_uncore() const {
  return std::any_of(assignments.begin(), assignments.end(),
                     [](const Assignment& a) { return a.slot.kind == SlotKind::Uncore; });
}

const CounterSlot* Architecture::find_slot(std::string_view id) const {
  for (const auto& s : slots) {
    if (s.id == id) return &s;
  }
  return nullptr;
}

const EventDefinition* Architecture::find_event(std::string_view name) const {
  for (const auto& e : events) {
    if (e.name == name) return &e;
  }
  return nullptr;
}

const EventGroup* Architecture::find_group(std::string_view name) const {
  for (const auto& g : groups) {
    if (g.name == name) return &g;
  }
  return nullptr;
}

std::vector<Assignment> Architecture::fixed_assignments() const {
  std::vector<Assignment> out;
  for (const auto& slot : slots) {
    if (slot.kind != SlotKind::Fixed) continue;
    for (const auto& e : events) {
      if (e.allows(slot.id)) {
        out.push_back({e, slot});
        break;
      }
    }
  }
  return out;
}

msr::RegisterMap Architecture::register_map() const {
  msr::RegisterMap map;
  for (const auto& s : slots) {
    const auto scope = s.kind == SlotKind::Uncore ? msr::Scope::Socket : msr::Scope::Core;
    map.add(s.counter_register, s.id, scope);
    if (s.kind != SlotKind::Fixed) map.add(s.config_register, s.id + "_CONFIG", scope);
  }
  map.add(fixed_ctr_ctrl, "FIXED_CTR_CTRL");
  map.add(global_ctrl, "PERF_GLOBAL_CTRL");
  map.add(global_ctrl - 1, "PERF_GLOBAL_STATUS", msr::Scope::Core, false);
  map.add(global_ctrl + 1, "PERF_GLOBAL_OVF_CTRL");
  if (uncore_global_ctrl) {
    map.add(*uncore_global_ctrl, "UNCORE_PERF_GLOBAL_CTRL", msr::Scope::Socket);
    map.add(*uncore_global_ctrl + 1, "UNCORE_PERF_GLOBAL_STATUS", msr::Scope::Socket, false);
    map.add(*uncore_global_ctrl + 2, "UNCORE_PERF_GLOBAL_OVF_CTRL", msr::Scope::Socket);
  }
  map.add(0x1A0, "IA32_MISC_ENABLE");
  return map;
}

namespace {

[[noreturn]] void table_fail(const std::string& arch, std::size_t line_no, const std::string& what) {
  throw EventError(arch + " table line " + std::to_string(line_no) + ": " + what);
}

std::uint32_t table_hex(const std::string& arch, std::size_t line_no, std::string_view w) {
  const auto v = text::parse_hex(w);
  if (!v || *v > 0xFFFFFFFF) table_fail(arch, line_no, "bad hex value '" + std::string(w) + "'");
  return static_cast<std::uint32_t>(*v);
}

Assignment resolve(const Architecture& arch, std::string_view event_name, std::string_view slot_id) {
  const auto* event = arch.find_event(event_name);
  if (!event) throw EventError("unknown event '" + std::string(event_name) + "'");
  const auto* slot = arch.find_slot(slot_id);
  if (!slot) throw EventError("unknown counter slot '" + std::string(slot_id) + "'");
  if (!event->allows(slot_id)) {
    throw EventError("event " + event->name + " cannot be counted on " + slot->id);
  }
  return {*event, *slot};
}

void append_checked(std::vector<Assignment>& set, Assignment a) {
  for (const auto& existing : set) {
    if (existing.slot.id == a.slot.id) throw EventError("counter slot " + a.slot.id + " assigned twice");
    if (existing.event.name == a.event.name) throw EventError("event " + a.event.name + " listed twice");
  }
  set.push_back(std::move(a));
}

}  // namespace

Architecture build_architecture(std::string name, std::vector<CounterSlot> slots, std::string_view event_table,
                                std::string_view group_table, msr::Address fixed_ctr_ctrl, msr::Address global_ctrl,
                                std::optional<msr::Address> uncore_global_ctrl) {
  Architecture arch;
  arch.name = std::move(name);
  arch.slots = std::move(slots);
  arch.fixed_ctr_ctrl = fixed_ctr_ctrl;
  arch.global_ctrl = global_ctrl;
  arch.uncore_global_ctrl = uncore_global_ctrl;

  std::size_t line_no = 0;
  for (const auto raw : text::split_lines(event_table)) {
    ++line_no;
    const auto line = text::strip_comment(raw);
    if (line.empty()) continue;
    const auto w = text::split_words(line);
    if (w.size() != 10 || w[0] != "event" || w[2] != "code" || w[4] != "umask" || w[6] != "scope" ||
        w[8] != "counters") {
      table_fail(arch.name, line_no, "malformed event line");
    }
    EventDefinition e;
    e.name = std::string(w[1]);
    e.event_code = table_hex(arch.name, line_no, w[3]);
    e.umask = table_hex(arch.name, line_no, w[5]);
    if (w[7] == "core") {
      e.scope = EventScope::Core;
    } else if (w[7] == "uncore") {
      e.scope = EventScope::Uncore;
      if (!arch.has_uncore()) table_fail(arch.name, line_no, "uncore event on an architecture without uncore");
    } else {
      table_fail(arch.name, line_no, "scope must be core or uncore");
    }
    for (const auto id : text::split(w[9], ',')) {
      const auto* slot = arch.find_slot(id);
      if (!slot) table_fail(arch.name, line_no, "unknown counter slot '" + std::string(id) + "'");
      if ((slot->kind == SlotKind::Uncore) != (e.scope == EventScope::Uncore)) {
        table_fail(arch.name, line_no, "event scope does not match slot " + slot->id);
      }
      e.allowed_counters.emplace_back(id);
    }
    if (arch.find_event(e.name)) table_fail(arch.name, line_no, "duplicate event " + e.name);
    arch.events.push_back(std::move(e));
  }

  const auto fixed = arch.fixed_assignments();
  line_no = 0;
  EventGroup* current = nullptr;
  for (const auto raw : text::split_lines(group_table)) {
    ++line_no;
    const auto line = text::strip_comment(raw);
    if (line.empty()) continue;
    const auto space = line.find(' ');
    const auto keyword = line.substr(0, space);
    const auto rest = space == std::string_view::npos ? std::string_view{} : text::trim(line.substr(space + 1));
    if (keyword == "group") {
      const auto w = text::split_words(rest);
      if (w.empty()) table_fail(arch.name, line_no, "group without a name");
      if (arch.find_group(w[0])) table_fail(arch.name, line_no, "duplicate group " + std::string(w[0]));
      EventGroup g;
      g.name = std::string(w[0]);
      g.description = std::string(text::trim(rest.substr(w[0].size())));
      g.uses = fixed;
      arch.groups.push_back(std::move(g));
      current = &arch.groups.back();
    } else if (!current) {
      table_fail(arch.name, line_no, "'" + std::string(keyword) + "' before any group");
    } else if (keyword == "use") {
      const auto colon = rest.find(':');
      if (colon == std::string_view::npos) table_fail(arch.name, line_no, "expected 'use EVENT:SLOT'");
      try {
        append_checked(current->uses, resolve(arch, rest.substr(0, colon), rest.substr(colon + 1)));
      } catch (const EventError& e) {
        table_fail(arch.name, line_no, e.what());
      }
    } else if (keyword == "metric") {
      const auto eq = rest.find('=');
      if (eq == std::string_view::npos) table_fail(arch.name, line_no, "expected 'metric NAME = FORMULA'");
      Metric m{std::string(text::trim(rest.substr(0, eq))), Formula::parse(text::trim(rest.substr(eq + 1)))};
      for (const auto& id : m.formula.identifiers()) {
        if (id == "runtime" || id == "clock") continue;
        const bool known = std::any_of(current->uses.begin(), current->uses.end(),
                                       [&](const Assignment& a) { return a.event.name == id; });
        if (!known) table_fail(arch.name, line_no, "metric references " + id + " which group " + current->name +
                                                        " does not count");
      }
      current->metrics.push_back(std::move(m));
    } else {
      table_fail(arch.name, line_no, "unknown keyword '" + std::string(keyword) + "'");
    }
  }
  return arch;
}

bool is_core2(const topo::CpuSignature& sig) {
  if (sig.vendor != topo::Vendor::Intel || sig.family != 6) return false;
  switch (sig.model) {
    case 0x0F:
    case 0x16:
    case 0x17:
    case 0x1D:
      return true;
    default:
      return false;
  }
}

namespace {

bool is_nehalem_or_westmere(const topo::CpuSignature& sig) {
  if (sig.vendor != topo::Vendor::Intel || sig.family != 6) return false;
  switch (sig.model) {
    case 0x1A:
    case 0x1E:
    case 0x1F:
    case 0x2E:
    case 0x25:
    case 0x2C:
    case 0x2F:
      return true;
    default:
      return false;
  }
}

}  // namespace

const Architecture& architecture_for(const topo::CpuSignature& sig) {
  if (is_core2(sig)) return core2();
  if (is_nehalem_or_westmere(sig)) return nehalem();
  char buf[96];
  std::snprintf(buf, sizeof buf, "unsupported processor for event counting (family 0x%x model 0x%x)", sig.family,
                sig.model);
  throw EventError(buf);
}

EventSetSpec parse_event_string(std::string_view s, const Architecture& arch) {
  s = text::trim(s);
  EventSetSpec spec;
  spec.arch = &arch;
  spec.source = std::string(s);
  if (s.empty()) throw EventError("empty event string");
  if (s.find(':') == std::string_view::npos && s.find(',') == std::string_view::npos) {
    const auto* group = arch.find_group(s);
    if (!group) throw EventError("unknown group '" + std::string(s) + "' for " + arch.name);
    spec.group = group;
    spec.assignments = group->uses;
    return spec;
  }
  for (const auto raw : text::split(s, ',')) {
    const auto token = text::trim(raw);
    const auto colon = token.find(':');
    if (token.empty() || colon == std::string_view::npos) {
      throw EventError("malformed event token '" + std::string(token) + "', expected NAME:SLOT");
    }
    append_checked(spec.assignments, resolve(arch, text::trim(token.substr(0, colon)), text::trim(token.substr(colon + 1))));
  }
  return spec;
}

std::vector<Metric> default_metrics() {
  return {Metric{"Runtime [s]", Formula::parse("runtime")},
          Metric{"CPI", Formula::parse("CPU_CLK_UNHALTED_CORE / INSTR_RETIRED_ANY")}};
}

}  // namespace perfkit::events
