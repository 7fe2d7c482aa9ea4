#pragma once

#include <perfkit/error.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace perfkit::topo {

class DumpError : public Error {
 public:
  using Error::Error;
};

struct Registers {
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  std::uint32_t c = 0;
  std::uint32_t d = 0;

  friend bool operator==(const Registers&, const Registers&) = default;
};

// One raw cpuid result as returned by the hardware for (leaf, subleaf).
struct CpuidRecord {
  std::uint32_t leaf = 0;
  std::uint32_t subleaf = 0;
  Registers regs;

  friend bool operator==(const CpuidRecord&, const CpuidRecord&) = default;
};

// cpuid results for every hardware thread of a machine, indexed by OS
// processor id. Header fields are declared by whoever recorded the dump.
struct CpuidDump {
  std::string vendor;
  std::string cpu_name;
  double clock_hz = 0.0;
  std::vector<std::vector<CpuidRecord>> threads;

  std::size_t hw_thread_count() const { return threads.size(); }

  // Looks up the record for (leaf, subleaf) on one thread.
  std::optional<Registers> query(std::size_t os_id, std::uint32_t leaf,
                                 std::uint32_t subleaf = 0) const;

  friend bool operator==(const CpuidDump&, const CpuidDump&) = default;
};

// Parses the line-oriented dump format:
//
//   hw_threads: N
//   clock_hz: F
//   vendor: STRING
//   cpu_name: STRING
//   thread <os_id> leaf <hex> subleaf <hex> a <hex> b <hex> c <hex> d <hex>
//
// '#' starts a comment. Every thread must carry leaves 0x0 and 0x1.
CpuidDump parse_dump(std::string_view text);
CpuidDump load_dump(const std::filesystem::path& path);
std::string format_dump(const CpuidDump& dump);

// Where cpuid data comes from. The dump source replays a recorded file; the
// live source executes the instruction on every online hardware thread.
class CpuidSource {
 public:
  virtual ~CpuidSource() = default;
  virtual CpuidDump collect() = 0;
};

class DumpCpuidSource final : public CpuidSource {
 public:
  explicit DumpCpuidSource(std::filesystem::path path) : path_(std::move(path)) {}
  CpuidDump collect() override { return load_dump(path_); }

 private:
  std::filesystem::path path_;
};

class LiveCpuidSource final : public CpuidSource {
 public:
  // Migrates the calling thread to each online processor in turn and
  // restores its original affinity afterwards.
  CpuidDump collect() override;
};

}  // namespace perfkit::topo
