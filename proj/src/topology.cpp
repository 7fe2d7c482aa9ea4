#include <perfkit/topology.hpp>

#include <algorithm>
#include <array>
#include <cstdio>
#include <map>
#include <optional>
#include <set>

namespace perfkit::topo {

namespace {

constexpr std::uint32_t kIntelVendor[3] = {0x756E6547, 0x49656E69, 0x6C65746E};  // b, d, c
constexpr std::uint32_t kAmdVendor[3] = {0x68747541, 0x69746E65, 0x444D4163};

unsigned ceil_log2(std::uint64_t n) {
  unsigned w = 0;
  while ((std::uint64_t{1} << w) < n) ++w;
  return w;
}

std::uint32_t field(std::uint32_t value, unsigned low, unsigned width) {
  return (value >> low) & ((width >= 32) ? 0xFFFFFFFFu : ((1u << width) - 1));
}

std::string hex(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "0x%x", v);
  return buf;
}

Registers require(const CpuidDump& dump, std::size_t os_id, std::uint32_t leaf, std::uint32_t sub = 0) {
  if (auto r = dump.query(os_id, leaf, sub)) return *r;
  throw TopologyError("cpuid leaf " + hex(leaf) + " subleaf " + hex(sub) + " missing for thread " +
                      std::to_string(os_id));
}

std::uint32_t max_leaf(const CpuidDump& dump, std::size_t os_id) { return require(dump, os_id, 0x0).a; }

std::uint32_t max_extended_leaf(const CpuidDump& dump, std::size_t os_id) {
  const auto r = dump.query(os_id, 0x80000000);
  return (r && r->a >= 0x80000000) ? r->a : 0;
}

struct ApicInfo {
  std::uint32_t apic = 0;
  ApicLayout layout;
};

ApicInfo extended_topology(const CpuidDump& dump, std::size_t t) {
  unsigned smt_shift = 0;
  std::optional<unsigned> package_shift;
  for (std::uint32_t sub = 0;; ++sub) {
    const auto r = dump.query(t, 0xB, sub);
    if (!r) {
      if (sub == 0) throw TopologyError("cpuid leaf 0xb missing for thread " + std::to_string(t));
      break;
    }
    const auto type = field(r->c, 8, 8);
    if (type == 0) break;
    const auto shift = field(r->a, 0, 5);
    if (type == 1) {
      smt_shift = shift;
    } else {
      // Core level, or a module/die level above it; the widest one bounds the package.
      package_shift = std::max(package_shift.value_or(0), shift);
    }
  }
  const auto apic = require(dump, t, 0xB, 0).d;
  const unsigned pkg = package_shift.value_or(smt_shift);
  if (pkg < smt_shift) throw TopologyError("contradictory shift widths in leaf 0xb for thread " + std::to_string(t));
  return {apic, ApicLayout{smt_shift, pkg - smt_shift}};
}

ApicInfo legacy_intel(const CpuidDump& dump, std::size_t t) {
  const auto r1 = require(dump, t, 0x1);
  const std::uint32_t apic = field(r1.b, 24, 8);
  const bool htt = field(r1.d, 28, 1) != 0;
  std::uint32_t logical = htt ? field(r1.b, 16, 8) : 1;
  if (logical == 0) logical = 1;
  std::uint32_t cores = 1;
  if (max_leaf(dump, t) >= 0x4) {
    if (const auto r4 = dump.query(t, 0x4, 0); r4 && field(r4->a, 0, 5) != 0) cores = field(r4->a, 26, 6) + 1;
  }
  const std::uint32_t per_core = std::max<std::uint32_t>(1, logical / cores);
  return {apic, ApicLayout{ceil_log2(per_core), ceil_log2(cores)}};
}

ApicInfo legacy_amd(const CpuidDump& dump, std::size_t t) {
  const auto r1 = require(dump, t, 0x1);
  const std::uint32_t apic = field(r1.b, 24, 8);
  unsigned core_bits = 0;
  if (max_extended_leaf(dump, t) >= 0x80000008) {
    const auto r = require(dump, t, 0x80000008);
    const auto size = field(r.c, 12, 4);
    core_bits = size ? size : ceil_log2(field(r.c, 0, 8) + 1);
  } else {
    const bool htt = field(r1.d, 28, 1) != 0;
    core_bits = htt ? ceil_log2(std::max<std::uint32_t>(1, field(r1.b, 16, 8))) : 0;
  }
  return {apic, ApicLayout{0, core_bits}};
}

ThreadStrategy choose_strategy(const CpuidDump& dump, Vendor vendor) {
  if (vendor == Vendor::Amd) return ThreadStrategy::LegacyAmd;
  if (max_leaf(dump, 0) >= 0xB) {
    if (const auto r = dump.query(0, 0xB, 0); r && field(r->b, 0, 16) != 0) return ThreadStrategy::ExtendedTopologyLeaf;
  }
  return ThreadStrategy::LegacyIntel;
}

// --- cache decoding -------------------------------------------------------

struct RawCache {
  unsigned level = 0;
  CacheKind kind = CacheKind::Data;
  std::uint64_t ways = 0;
  std::uint64_t sets = 0;
  std::uint64_t line = 0;
  bool inclusive = false;
  unsigned sharing_shift = 0;  // APIC IDs agreeing above this bit share one instance

  friend bool operator==(const RawCache&, const RawCache&) = default;
};

std::vector<RawCache> deterministic_caches(const CpuidDump& dump, std::size_t t, std::vector<std::string>& warnings) {
  std::vector<RawCache> out;
  for (std::uint32_t sub = 0; sub < 64; ++sub) {
    const auto r = dump.query(t, 0x4, sub);
    if (!r) break;
    const auto type = field(r->a, 0, 5);
    if (type == 0) break;
    RawCache c;
    c.level = field(r->a, 5, 3);
    const auto partitions = std::uint64_t{field(r->b, 12, 10)} + 1;
    c.ways = std::uint64_t{field(r->b, 22, 10)} + 1;
    c.line = std::uint64_t{field(r->b, 0, 12)} + 1;
    // Physical line partitions are folded into the set count so that
    // ways * sets * line stays the capacity.
    c.sets = (std::uint64_t{r->c} + 1) * partitions;
    c.inclusive = field(r->d, 1, 1) != 0;
    c.sharing_shift = ceil_log2(std::uint64_t{field(r->a, 14, 12)} + 1);
    switch (type) {
      case 1: c.kind = CacheKind::Data; break;
      case 2: c.kind = CacheKind::Instruction; break;
      case 3: c.kind = CacheKind::Unified; break;
      default:
        warnings.push_back("thread " + std::to_string(t) + ": leaf 0x4 subleaf " + hex(sub) + " has unknown cache type " +
                           std::to_string(type));
        continue;
    }
    out.push_back(c);
  }
  return out;
}

struct Leaf2Entry {
  std::uint8_t descriptor;
  bool is_cache;
  unsigned level;
  CacheKind kind;
  std::uint64_t size_kb;
  std::uint64_t ways;
  std::uint64_t line;
};

// Only the descriptor bytes that occur in shipped fixtures. TLB and prefetch
// descriptors are listed so that they are recognized and skipped silently.
constexpr std::array<Leaf2Entry, 8> kLeaf2Table{{
    {0x2C, true, 1, CacheKind::Data, 32, 8, 64},
    {0x30, true, 1, CacheKind::Instruction, 32, 8, 64},
    {0x7D, true, 2, CacheKind::Unified, 2048, 8, 64},
    {0x02, false, 0, CacheKind::Data, 0, 0, 0},
    {0x04, false, 0, CacheKind::Data, 0, 0, 0},
    {0xB0, false, 0, CacheKind::Data, 0, 0, 0},
    {0xB3, false, 0, CacheKind::Data, 0, 0, 0},
    {0xF0, false, 0, CacheKind::Data, 0, 0, 0},
}};

std::vector<RawCache> descriptor_caches(const CpuidDump& dump, std::size_t t, const ApicLayout& layout,
                                        std::vector<std::string>& warnings) {
  std::vector<RawCache> out;
  const auto r = dump.query(t, 0x2, 0);
  if (!r) return out;
  const std::array<std::uint32_t, 4> regs{r->a, r->b, r->c, r->d};
  for (std::size_t i = 0; i < regs.size(); ++i) {
    if (regs[i] & 0x80000000u) continue;  // register carries no descriptors
    for (unsigned byte = 0; byte < 4; ++byte) {
      if (i == 0 && byte == 0) continue;  // iteration count
      const auto desc = static_cast<std::uint8_t>(regs[i] >> (8 * byte));
      if (desc == 0) continue;
      const auto it = std::find_if(kLeaf2Table.begin(), kLeaf2Table.end(),
                                   [desc](const Leaf2Entry& e) { return e.descriptor == desc; });
      if (it == kLeaf2Table.end()) {
        warnings.push_back("thread " + std::to_string(t) + ": unknown leaf 0x2 cache descriptor " + hex(desc));
        continue;
      }
      if (!it->is_cache) continue;
      RawCache c;
      c.level = it->level;
      c.kind = it->kind;
      c.ways = it->ways;
      c.line = it->line;
      c.sets = it->size_kb * 1024 / (it->ways * it->line);
      c.inclusive = true;
      c.sharing_shift = layout.smt_bits;
      out.push_back(c);
    }
  }
  return out;
}

std::uint64_t amd_ways(std::uint32_t code, std::uint64_t size_bytes, std::uint64_t line) {
  switch (code) {
    case 0x1: return 1;
    case 0x2: return 2;
    case 0x4: return 4;
    case 0x6: return 8;
    case 0x8: return 16;
    case 0xA: return 32;
    case 0xB: return 48;
    case 0xC: return 64;
    case 0xD: return 96;
    case 0xE: return 128;
    case 0xF: return line ? size_bytes / line : 0;
    default: throw TopologyError("reserved AMD cache associativity code " + hex(code));
  }
}

std::vector<RawCache> amd_caches(const CpuidDump& dump, std::size_t t, const ApicLayout& layout) {
  std::vector<RawCache> out;
  const auto ext = max_extended_leaf(dump, t);
  auto add = [&](unsigned level, CacheKind kind, std::uint64_t size_bytes, std::uint64_t ways, std::uint64_t line,
                 unsigned shift) {
    if (size_bytes == 0) return;
    if (line == 0 || ways == 0) {
      throw TopologyError("zero line size or associativity in AMD cache descriptor for thread " + std::to_string(t));
    }
    RawCache c;
    c.level = level;
    c.kind = kind;
    c.ways = ways;
    c.line = line;
    c.sets = size_bytes / (ways * line);
    c.inclusive = false;
    c.sharing_shift = shift;
    out.push_back(c);
  };
  if (ext >= 0x80000005) {
    const auto r = require(dump, t, 0x80000005);
    for (const auto& [reg, kind] : {std::pair{r.c, CacheKind::Data}, std::pair{r.d, CacheKind::Instruction}}) {
      const std::uint64_t size = std::uint64_t{field(reg, 24, 8)} * 1024;
      const std::uint64_t line = field(reg, 0, 8);
      const auto assoc = field(reg, 16, 8);
      add(1, kind, size, assoc == 0xFF ? (line ? size / line : 0) : assoc, line, layout.smt_bits);
    }
  }
  if (ext >= 0x80000006) {
    const auto r = require(dump, t, 0x80000006);
    if (const auto code = field(r.c, 12, 4); code != 0) {
      const std::uint64_t size = std::uint64_t{field(r.c, 16, 16)} * 1024;
      const std::uint64_t line = field(r.c, 0, 8);
      add(2, CacheKind::Unified, size, amd_ways(code, size, line), line, layout.smt_bits);
    }
    if (const auto code = field(r.d, 12, 4); code != 0) {
      const std::uint64_t size = std::uint64_t{field(r.d, 18, 14)} * 512 * 1024;
      const std::uint64_t line = field(r.d, 0, 8);
      add(3, CacheKind::Unified, size, amd_ways(code, size, line), line, layout.package_shift());
    }
  }
  return out;
}

int kind_rank(CacheKind k) {
  switch (k) {
    case CacheKind::Data: return 0;
    case CacheKind::Instruction: return 1;
    case CacheKind::Unified: return 2;
  }
  return 3;
}

}  // namespace

std::string cache_kind_name(CacheKind kind) {
  switch (kind) {
    case CacheKind::Data: return "Data cache";
    case CacheKind::Instruction: return "Instruction cache";
    case CacheKind::Unified: return "Unified cache";
  }
  return "Unknown cache";
}

CpuSignature decode_signature(const CpuidDump& dump) {
  if (dump.hw_thread_count() == 0) throw TopologyError("cpuid dump has no hardware threads");
  const auto r0 = require(dump, 0, 0x0);
  CpuSignature sig;
  std::string decoded;
  if (r0.b == kIntelVendor[0] && r0.d == kIntelVendor[1] && r0.c == kIntelVendor[2]) {
    sig.vendor = Vendor::Intel;
    decoded = "GenuineIntel";
  } else if (r0.b == kAmdVendor[0] && r0.d == kAmdVendor[1] && r0.c == kAmdVendor[2]) {
    sig.vendor = Vendor::Amd;
    decoded = "AuthenticAMD";
  } else {
    throw TopologyError("unsupported vendor string in cpuid leaf 0x0");
  }
  if (!dump.vendor.empty() && dump.vendor != decoded) {
    throw TopologyError("dump header vendor '" + dump.vendor + "' contradicts cpuid leaf 0x0 ('" + decoded + "')");
  }
  const auto a = require(dump, 0, 0x1).a;
  const auto base_family = field(a, 8, 4);
  sig.stepping = field(a, 0, 4);
  sig.family = base_family == 0xF ? base_family + field(a, 20, 8) : base_family;
  sig.model = (base_family == 0x6 || base_family == 0xF) ? (field(a, 16, 4) << 4) | field(a, 4, 4) : field(a, 4, 4);
  return sig;
}

ThreadTopology decode_thread_topology(const CpuidDump& dump) {
  const auto sig = decode_signature(dump);
  ThreadTopology result;
  result.strategy = choose_strategy(dump, sig.vendor);

  std::set<std::uint32_t> seen_apic;
  for (std::size_t t = 0; t < dump.hw_thread_count(); ++t) {
    ApicInfo info;
    switch (result.strategy) {
      case ThreadStrategy::ExtendedTopologyLeaf: info = extended_topology(dump, t); break;
      case ThreadStrategy::LegacyIntel: info = legacy_intel(dump, t); break;
      case ThreadStrategy::LegacyAmd: info = legacy_amd(dump, t); break;
    }
    if (t == 0) {
      result.layout = info.layout;
    } else if (info.layout != result.layout) {
      throw TopologyError("contradictory shift widths: thread " + std::to_string(t) + " disagrees with thread 0");
    }
    if (!seen_apic.insert(info.apic).second) {
      throw TopologyError("duplicate APIC id " + std::to_string(info.apic) + " on thread " + std::to_string(t));
    }
    const auto& l = result.layout;
    result.threads.push_back(HWThread{
        static_cast<OsId>(t), info.apic, info.apic & ((1u << l.smt_bits) - 1),
        (info.apic >> l.smt_bits) & ((1u << l.core_bits) - 1), info.apic >> l.package_shift()});
  }
  return result;
}

CacheTopology decode_cache_topology(const CpuidDump& dump) {
  const auto sig = decode_signature(dump);
  const auto threads = decode_thread_topology(dump);
  CacheTopology result;

  bool leaf4 = false;
  auto raw_for = [&](std::size_t t, std::vector<std::string>& warnings) {
    if (sig.vendor == Vendor::Amd) return amd_caches(dump, t, threads.layout);
    const auto max = max_leaf(dump, t);
    if (max >= 0x4) {
      if (const auto r = dump.query(t, 0x4, 0); r && field(r->a, 0, 5) != 0) {
        leaf4 = true;
        return deterministic_caches(dump, t, warnings);
      }
    }
    if (max >= 0x2) return descriptor_caches(dump, t, threads.layout, warnings);
    return std::vector<RawCache>{};
  };

  auto raw = raw_for(0, result.warnings);
  for (std::size_t t = 1; t < dump.hw_thread_count(); ++t) {
    std::vector<std::string> ignored;
    if (raw_for(t, ignored) != raw) {
      throw TopologyError("contradictory cache parameters: thread " + std::to_string(t) + " disagrees with thread 0");
    }
  }
  if (!leaf4) {
    std::stable_sort(raw.begin(), raw.end(), [](const RawCache& x, const RawCache& y) {
      return std::pair{x.level, kind_rank(x.kind)} < std::pair{y.level, kind_rank(y.kind)};
    });
  }

  for (const auto& c : raw) {
    if (c.line == 0 || c.sets == 0) {
      throw TopologyError("zero line size or zero sets in level " + std::to_string(c.level) + " cache descriptor");
    }
    CacheDescriptor d;
    d.level = c.level;
    d.kind = c.kind;
    d.associativity = static_cast<std::uint32_t>(c.ways);
    d.sets = c.sets;
    d.line_size = static_cast<std::uint32_t>(c.line);
    d.size_bytes = c.ways * c.sets * c.line;
    d.inclusive = c.inclusive;

    std::map<std::uint32_t, std::vector<const HWThread*>> by_key;
    for (const auto& th : threads.threads) by_key[th.apic_id >> c.sharing_shift].push_back(&th);
    for (auto& [key, members] : by_key) {
      std::sort(members.begin(), members.end(), [](auto* x, auto* y) { return x->apic_id < y->apic_id; });
      std::vector<OsId> group;
      for (const auto* m : members) group.push_back(m->os_id);
      d.threads_sharing = std::max<std::uint32_t>(d.threads_sharing, static_cast<std::uint32_t>(group.size()));
      d.groups.push_back(std::move(group));
    }
    result.caches.push_back(std::move(d));
  }
  return result;
}

const HWThread& TopologyMap::thread(OsId os_id) const {
  if (os_id >= threads.size()) throw TopologyError("unknown os_id " + std::to_string(os_id));
  return threads[os_id];
}

std::vector<OsId> TopologyMap::socket_members(std::uint32_t socket_id) const {
  std::vector<const HWThread*> members;
  for (const auto& t : threads) {
    if (t.socket_id == socket_id) members.push_back(&t);
  }
  std::sort(members.begin(), members.end(), [](auto* x, auto* y) { return x->apic_id < y->apic_id; });
  std::vector<OsId> out;
  for (const auto* m : members) out.push_back(m->os_id);
  return out;
}

std::vector<std::uint32_t> TopologyMap::socket_of_os() const {
  std::vector<std::uint32_t> out;
  out.reserve(threads.size());
  for (const auto& t : threads) out.push_back(t.socket_id);
  return out;
}

TopologyMap build_topology(const CpuidDump& dump) {
  TopologyMap map;
  map.cpu_name = dump.cpu_name;
  map.clock_hz = dump.clock_hz;
  map.signature = decode_signature(dump);
  auto threads = decode_thread_topology(dump);
  auto caches = decode_cache_topology(dump);
  map.layout = threads.layout;
  map.threads = std::move(threads.threads);
  map.caches = std::move(caches.caches);
  map.warnings = std::move(caches.warnings);

  std::map<std::uint32_t, std::map<std::uint32_t, std::uint32_t>> cores;  // socket -> core -> thread count
  for (const auto& t : map.threads) ++cores[t.socket_id][t.core_id];
  map.sockets = static_cast<std::uint32_t>(cores.size());
  map.cores_per_socket = static_cast<std::uint32_t>(cores.begin()->second.size());
  map.threads_per_core = cores.begin()->second.begin()->second;
  for (const auto& [socket, per_core] : cores) {
    if (per_core.size() != map.cores_per_socket) {
      throw TopologyError("heterogeneous topology: socket " + std::to_string(socket) + " has " +
                          std::to_string(per_core.size()) + " cores, socket " +
                          std::to_string(cores.begin()->first) + " has " + std::to_string(map.cores_per_socket));
    }
    for (const auto& [core, n] : per_core) {
      if (n != map.threads_per_core) {
        throw TopologyError("heterogeneous topology: core " + std::to_string(core) + " on socket " +
                            std::to_string(socket) + " has " + std::to_string(n) + " threads");
      }
    }
  }
  return map;
}

}  // namespace perfkit::topo
