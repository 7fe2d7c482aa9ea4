#pragma once

#include <perfkit/measure.hpp>

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace perfkit::marker {

class MarkerError : public Error {
 public:
  using Error::Error;
};

using OsId = std::uint32_t;

inline constexpr const char* kEnvResultFile = "PERFKIT_MARKER_FILE";
inline constexpr const char* kEnvEvents = "PERFKIT_MARKER_EVENTS";
inline constexpr const char* kEnvCores = "PERFKIT_MARKER_CORES";

struct RegionRow {
  std::uint32_t thread_id = 0;
  OsId os_id = 0;
  std::uint64_t calls = 0;
  std::uint64_t cycles = 0;
  // Only events counted on this core; uncore events appear on owners only.
  std::vector<std::pair<std::string, std::uint64_t>> counts;

  std::optional<std::uint64_t> count(std::string_view event) const;
  friend bool operator==(const RegionRow&, const RegionRow&) = default;
};

struct RegionBlock {
  std::uint32_t id = 0;
  std::string name;
  std::vector<RegionRow> rows;

  friend bool operator==(const RegionBlock&, const RegionBlock&) = default;
};

// Result file:
//
//   threads N regions M
//   warning <text>
//   region <id> <name>
//   thread <tid> core <os_id> calls <n> cycles <c> <EVENT>=<count> ...
struct RegionFile {
  std::uint32_t threads = 0;
  std::uint32_t regions = 0;
  std::vector<std::string> warnings;
  std::vector<RegionBlock> blocks;

  friend bool operator==(const RegionFile&, const RegionFile&) = default;
};

RegionFile parse_region_file(std::string_view text);
RegionFile load_region_file(const std::filesystem::path& path);
std::string format_region_file(const RegionFile& file);

// Marker bookkeeping for one process. An inactive session accepts every
// call and records nothing.
class MarkerSession {
 public:
  // Inactive session.
  MarkerSession(std::uint32_t threads, std::uint32_t regions);
  // Active session reading counters through `handle`; the handle must
  // outlive the session. close() writes `result_file` when it is set.
  MarkerSession(std::uint32_t threads, std::uint32_t regions, const events::ProgramHandle& handle,
                msr::Timeline& timeline, std::optional<std::filesystem::path> result_file);

  bool active() const { return handle_ != nullptr; }

  std::uint32_t register_region(std::string_view name);
  void start_region(std::uint32_t thread_id, OsId os_id);
  void stop_region(std::uint32_t thread_id, OsId os_id, std::uint32_t region_id);
  // Writes the result file. Open regions are reported as warnings.
  RegionFile close();
  bool closed() const { return closed_; }

  RegionFile snapshot() const;

 private:
  struct ThreadState {
    bool open = false;
    OsId os_id = 0;
    double started_at = 0;
    std::vector<std::optional<std::uint64_t>> start;
    // (region, os_id) -> accumulated row
    std::map<std::pair<std::uint32_t, OsId>, RegionRow> rows;
  };

  ThreadState& thread(std::uint32_t thread_id);

  std::uint32_t threads_;
  std::uint32_t capacity_;
  std::vector<std::string> names_;
  std::vector<ThreadState> state_;
  const events::ProgramHandle* handle_ = nullptr;
  msr::Timeline* timeline_ = nullptr;
  std::optional<std::filesystem::path> result_file_;
  std::optional<std::size_t> cycles_index_;
  bool closed_ = false;
};

// Everything an environment-configured session owns: the machine model,
// the counter backend and the programmed handle.
class EnvironmentSession {
 public:
  // Inactive unless the result-file variable is set.
  EnvironmentSession(std::uint32_t threads, std::uint32_t regions);
  ~EnvironmentSession();
  MarkerSession& session() { return *session_; }

 private:
  struct Resources;
  std::unique_ptr<Resources> resources_;
  std::unique_ptr<MarkerSession> session_;
};

// Returns the processor the calling thread runs on, or the injected value.
OsId get_processor_id();
void set_processor_id_provider(std::function<OsId()> provider);

}  // namespace perfkit::marker
