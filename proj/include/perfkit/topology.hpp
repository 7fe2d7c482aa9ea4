#pragma once

#include <perfkit/cpuid.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace perfkit::topo {

class TopologyError : public Error {
 public:
  using Error::Error;
};

using OsId = std::uint32_t;

struct HWThread {
  OsId os_id = 0;
  std::uint32_t apic_id = 0;
  std::uint32_t smt_id = 0;
  std::uint32_t core_id = 0;
  std::uint32_t socket_id = 0;

  friend bool operator==(const HWThread&, const HWThread&) = default;
};

// Bit widths of the SMT and core fields inside an APIC ID. The package
// number occupies everything above smt_bits + core_bits.
struct ApicLayout {
  unsigned smt_bits = 0;
  unsigned core_bits = 0;

  unsigned package_shift() const { return smt_bits + core_bits; }
  std::uint32_t compose(std::uint32_t socket, std::uint32_t core, std::uint32_t smt) const {
    return (socket << package_shift()) | (core << smt_bits) | smt;
  }

  friend bool operator==(const ApicLayout&, const ApicLayout&) = default;
};

enum class Vendor { Intel, Amd };

enum class ThreadStrategy {
  ExtendedTopologyLeaf,  // leaf 0xB shift widths
  LegacyIntel,           // leaf 0x1 logical count + leaf 0x4 core count
  LegacyAmd,             // extended leaf 0x80000008 core count
};

struct CpuSignature {
  Vendor vendor = Vendor::Intel;
  unsigned family = 0;
  unsigned model = 0;
  unsigned stepping = 0;

  friend bool operator==(const CpuSignature&, const CpuSignature&) = default;
};

struct ThreadTopology {
  ThreadStrategy strategy = ThreadStrategy::LegacyIntel;
  ApicLayout layout;
  std::vector<HWThread> threads;  // indexed by os_id
};

enum class CacheKind { Data, Instruction, Unified };

struct CacheDescriptor {
  unsigned level = 0;
  CacheKind kind = CacheKind::Data;
  std::uint64_t size_bytes = 0;
  std::uint32_t associativity = 0;
  std::uint64_t sets = 0;
  std::uint32_t line_size = 0;
  bool inclusive = false;
  std::uint32_t threads_sharing = 0;
  // Each inner list holds the os_ids sharing one instance, ordered by APIC ID.
  std::vector<std::vector<OsId>> groups;

  friend bool operator==(const CacheDescriptor&, const CacheDescriptor&) = default;
};

struct CacheTopology {
  std::vector<CacheDescriptor> caches;
  // Non-fatal findings, e.g. leaf 0x2 descriptor bytes with no table entry.
  std::vector<std::string> warnings;
};

struct TopologyMap {
  std::string cpu_name;
  double clock_hz = 0.0;
  CpuSignature signature;
  std::uint32_t sockets = 0;
  std::uint32_t cores_per_socket = 0;
  std::uint32_t threads_per_core = 0;
  ApicLayout layout;
  std::vector<HWThread> threads;
  std::vector<CacheDescriptor> caches;
  std::vector<std::string> warnings;

  const HWThread& thread(OsId os_id) const;
  // os_ids on one package ordered by APIC ID.
  std::vector<OsId> socket_members(std::uint32_t socket_id) const;
  std::vector<std::uint32_t> socket_of_os() const;

  friend bool operator==(const TopologyMap&, const TopologyMap&) = default;
};

CpuSignature decode_signature(const CpuidDump& dump);
ThreadTopology decode_thread_topology(const CpuidDump& dump);
CacheTopology decode_cache_topology(const CpuidDump& dump);

// Full machine model. Rejects machines whose sockets or cores differ in size.
TopologyMap build_topology(const CpuidDump& dump);

std::string cache_kind_name(CacheKind kind);

}  // namespace perfkit::topo
