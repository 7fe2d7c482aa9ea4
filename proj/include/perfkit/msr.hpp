#pragma once

#include <perfkit/error.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace perfkit::msr {

using Address = std::uint32_t;
using OsId = std::uint32_t;

enum class ErrorCode { UnknownOsId, NotWhitelisted, PermissionDenied, BackendUnavailable, Io, Fixture };

class MsrError : public Error {
 public:
  MsrError(ErrorCode code, const std::string& what) : Error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

enum class Scope { Core, Socket };

struct RegisterInfo {
  std::string name;
  Scope scope = Scope::Core;
  bool writable = true;
};

// Registers an architecture exposes. Writes outside this map are refused by
// every backend; socket-scoped entries alias across the cores of a package.
class RegisterMap {
 public:
  void add(Address addr, std::string name, Scope scope = Scope::Core, bool writable = true);
  const RegisterInfo* find(Address addr) const;
  Scope scope_of(Address addr) const;
  const std::map<Address, RegisterInfo>& entries() const { return entries_; }

 private:
  std::map<Address, RegisterInfo> entries_;
};

class MsrBackend {
 public:
  virtual ~MsrBackend() = default;
  virtual std::uint64_t read(OsId os_id, Address addr) = 0;
  virtual void write(OsId os_id, Address addr, std::uint64_t value) = 0;
  virtual std::size_t thread_count() const = 0;
};

// Elapsed-time source used by measurement loops. The fixture backend
// supplies a simulated one that only moves when wait() is called.
class Timeline {
 public:
  virtual ~Timeline() = default;
  virtual double now() = 0;
  virtual void wait(double seconds) = 0;
};

class WallTimeline final : public Timeline {
 public:
  double now() override;
  void wait(double seconds) override;
};

// Per-processor MSR device files, /dev/cpu/<N>/msr.
class DeviceMsrBackend final : public MsrBackend {
 public:
  DeviceMsrBackend(RegisterMap map, std::size_t threads,
                   std::filesystem::path root = "/dev/cpu");
  ~DeviceMsrBackend() override;

  std::uint64_t read(OsId os_id, Address addr) override;
  void write(OsId os_id, Address addr, std::uint64_t value) override;
  std::size_t thread_count() const override { return threads_; }

  // Returns nothing when device files can be opened for reading, else the
  // reason they cannot.
  static std::optional<std::string> probe(const std::filesystem::path& root = "/dev/cpu");

 private:
  int fd_for(OsId os_id);

  RegisterMap map_;
  std::size_t threads_;
  std::filesystem::path root_;
  std::mutex mutex_;
  std::map<OsId, int> fds_;
};

struct CellBehavior {
  enum class Kind { Static, FreeRunning, Scripted };
  Kind kind = Kind::Static;
  std::uint64_t value = 0;           // static value, or free-running base
  double rate = 0.0;                 // counts per simulated second
  double accel = 0.0;                // counts per second squared
  std::vector<std::uint64_t> script; // one entry consumed per read
};

struct CellKey {
  bool socket = false;  // true: `id` is a socket number, else an os_id
  std::uint32_t id = 0;
  Address addr = 0;

  friend auto operator<=>(const CellKey&, const CellKey&) = default;
};

struct WriteRecord {
  OsId os_id = 0;
  Address addr = 0;
  std::uint64_t value = 0;
  std::optional<std::uint32_t> socket;  // set for socket-scoped registers
};

// Recorded register state plus a simulated clock. Free-running cells grow
// with simulated time; scripted cells return their sequence one step per
// read and stick at the last entry. Unset registers read as 0.
class FixtureMsrBackend final : public MsrBackend, public Timeline {
 public:
  FixtureMsrBackend(RegisterMap map, std::vector<std::uint32_t> socket_of_os);

  std::uint64_t read(OsId os_id, Address addr) override;
  void write(OsId os_id, Address addr, std::uint64_t value) override;
  std::size_t thread_count() const override { return socket_of_os_.size(); }

  void set(OsId os_id, Address addr, CellBehavior behavior);
  void set_socket(std::uint32_t socket, Address addr, CellBehavior behavior);

  double now() override;
  void wait(double seconds) override { advance(seconds); }
  void advance(double seconds);

  std::vector<WriteRecord> writes() const;
  void clear_writes();
  std::vector<CellKey> cold_reads() const;

 private:
  struct Cell {
    CellBehavior behavior;
    std::int64_t origin_ns = 0;
    std::size_t cursor = 0;
    // Last write; the event stream keeps following origin_ns.
    std::int64_t rebased_ns = 0;
  };

  CellKey key_for(OsId os_id, Address addr) const;
  std::uint64_t value_of(const Cell& cell) const;
  void check_os(OsId os_id) const;

  RegisterMap map_;
  std::vector<std::uint32_t> socket_of_os_;
  mutable std::mutex mutex_;
  std::map<CellKey, Cell> cells_;
  std::int64_t now_ns_ = 0;
  std::vector<WriteRecord> writes_;
  std::vector<CellKey> cold_reads_;
};

// Fixture file lines:
//
//   msr <os_id|socket:N> <addr hex> <value hex> [rate <per-second>] [accel <per-second^2>]
//   msr <os_id|socket:N> <addr hex> seq <hex>,<hex>,...
//
// '#' starts a comment.
void load_fixture(FixtureMsrBackend& backend, std::string_view text);
void load_fixture_file(FixtureMsrBackend& backend, const std::filesystem::path& path);

}  // namespace perfkit::msr
