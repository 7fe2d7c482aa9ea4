#include <perfkit/msr.hpp>

#include "text.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <thread>

namespace perfkit::msr {

namespace {

std::string hex(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(v));
  return buf;
}

[[noreturn]] void unknown_os(OsId os_id) {
  throw MsrError(ErrorCode::UnknownOsId, "unknown os_id " + std::to_string(os_id));
}

void check_writable(const RegisterMap& map, Address addr) {
  const auto* info = map.find(addr);
  if (!info) throw MsrError(ErrorCode::NotWhitelisted, "register " + hex(addr) + " is not whitelisted");
  if (!info->writable) {
    throw MsrError(ErrorCode::NotWhitelisted, "register " + hex(addr) + " (" + info->name + ") is read-only");
  }
}

}  // namespace

void RegisterMap::add(Address addr, std::string name, Scope scope, bool writable) {
  entries_[addr] = RegisterInfo{std::move(name), scope, writable};
}

const RegisterInfo* RegisterMap::find(Address addr) const {
  const auto it = entries_.find(addr);
  return it == entries_.end() ? nullptr : &it->second;
}

Scope RegisterMap::scope_of(Address addr) const {
  const auto* info = find(addr);
  return info ? info->scope : Scope::Core;
}

double WallTimeline::now() {
  using namespace std::chrono;
  return duration<double>(steady_clock::now().time_since_epoch()).count();
}

void WallTimeline::wait(double seconds) {
  if (seconds > 0) std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
}

// --- device files ---------------------------------------------------------

DeviceMsrBackend::DeviceMsrBackend(RegisterMap map, std::size_t threads, std::filesystem::path root)
    : map_(std::move(map)), threads_(threads), root_(std::move(root)) {}

DeviceMsrBackend::~DeviceMsrBackend() {
  for (const auto& [os, fd] : fds_) ::close(fd);
}

std::optional<std::string> DeviceMsrBackend::probe(const std::filesystem::path& root) {
  const auto path = root / "0" / "msr";
  const int fd = ::open(path.c_str(), O_RDONLY);
  if (fd >= 0) {
    ::close(fd);
    return std::nullopt;
  }
  if (errno == ENOENT || errno == ENXIO || errno == ENODEV) {
    return "msr device " + path.string() + " not present (is the msr kernel module loaded?)";
  }
  return "cannot open " + path.string() + ": " + std::strerror(errno);
}

int DeviceMsrBackend::fd_for(OsId os_id) {
  if (os_id >= threads_) unknown_os(os_id);
  if (const auto it = fds_.find(os_id); it != fds_.end()) return it->second;
  const auto path = root_ / std::to_string(os_id) / "msr";
  int fd = ::open(path.c_str(), O_RDWR);
  if (fd < 0 && (errno == EACCES || errno == EPERM)) fd = ::open(path.c_str(), O_RDONLY);
  if (fd < 0) {
    const int err = errno;
    if (err == ENOENT || err == ENXIO || err == ENODEV) {
      throw MsrError(ErrorCode::BackendUnavailable, "msr device " + path.string() + " not present");
    }
    if (err == EACCES || err == EPERM) {
      throw MsrError(ErrorCode::PermissionDenied, "permission denied opening " + path.string());
    }
    throw MsrError(ErrorCode::Io, "cannot open " + path.string() + ": " + std::strerror(err));
  }
  fds_[os_id] = fd;
  return fd;
}

std::uint64_t DeviceMsrBackend::read(OsId os_id, Address addr) {
  std::lock_guard lock(mutex_);
  const int fd = fd_for(os_id);
  std::uint64_t value = 0;
  if (::pread(fd, &value, sizeof value, addr) != sizeof value) {
    const int err = errno;
    if (err == EACCES || err == EPERM) {
      throw MsrError(ErrorCode::PermissionDenied, "permission denied reading " + hex(addr));
    }
    throw MsrError(ErrorCode::Io, "read of " + hex(addr) + " on os_id " + std::to_string(os_id) + " failed: " +
                                      std::strerror(err));
  }
  return value;
}

void DeviceMsrBackend::write(OsId os_id, Address addr, std::uint64_t value) {
  check_writable(map_, addr);
  std::lock_guard lock(mutex_);
  const int fd = fd_for(os_id);
  if (::pwrite(fd, &value, sizeof value, addr) != sizeof value) {
    const int err = errno;
    if (err == EACCES || err == EPERM || err == EBADF) {
      throw MsrError(ErrorCode::PermissionDenied, "permission denied writing " + hex(addr));
    }
    throw MsrError(ErrorCode::Io, "write of " + hex(addr) + " on os_id " + std::to_string(os_id) + " failed: " +
                                      std::strerror(err));
  }
}

// --- fixture --------------------------------------------------------------

FixtureMsrBackend::FixtureMsrBackend(RegisterMap map, std::vector<std::uint32_t> socket_of_os)
    : map_(std::move(map)), socket_of_os_(std::move(socket_of_os)) {}

void FixtureMsrBackend::check_os(OsId os_id) const {
  if (os_id >= socket_of_os_.size()) unknown_os(os_id);
}

CellKey FixtureMsrBackend::key_for(OsId os_id, Address addr) const {
  if (map_.scope_of(addr) == Scope::Socket) return CellKey{true, socket_of_os_[os_id], addr};
  return CellKey{false, os_id, addr};
}

namespace {

// Whole events a free-running cell has produced `ns` after its origin.
std::uint64_t events_until(const CellBehavior& b, std::int64_t ns) {
  // Scale after multiplying so whole counts stay exact.
  const auto t = static_cast<long double>(ns);
  const long double grown = static_cast<long double>(b.rate) * t / 1e9L + static_cast<long double>(b.accel) * t * t / 2e18L;
  return static_cast<std::uint64_t>(std::floor(grown));
}

}  // namespace

std::uint64_t FixtureMsrBackend::value_of(const Cell& cell) const {
  const auto& b = cell.behavior;
  switch (b.kind) {
    case CellBehavior::Kind::Static:
      return b.value;
    case CellBehavior::Kind::Scripted:
      if (b.script.empty()) return 0;
      return b.script[std::min(cell.cursor, b.script.size() - 1)];
    case CellBehavior::Kind::FreeRunning:
      return b.value + events_until(b, now_ns_ - cell.origin_ns) - events_until(b, cell.rebased_ns - cell.origin_ns);
  }
  return 0;
}

std::uint64_t FixtureMsrBackend::read(OsId os_id, Address addr) {
  std::lock_guard lock(mutex_);
  check_os(os_id);
  const auto key = key_for(os_id, addr);
  const auto it = cells_.find(key);
  if (it == cells_.end()) {
    cold_reads_.push_back(key);
    return 0;
  }
  const auto value = value_of(it->second);
  if (it->second.behavior.kind == CellBehavior::Kind::Scripted) ++it->second.cursor;
  return value;
}

void FixtureMsrBackend::write(OsId os_id, Address addr, std::uint64_t value) {
  std::lock_guard lock(mutex_);
  check_os(os_id);
  check_writable(map_, addr);
  const auto key = key_for(os_id, addr);
  writes_.push_back(WriteRecord{os_id, addr, value, key.socket ? std::optional(key.id) : std::nullopt});
  auto& cell = cells_[key];
  switch (cell.behavior.kind) {
    case CellBehavior::Kind::Static:
      cell.behavior.value = value;
      break;
    case CellBehavior::Kind::FreeRunning:
      cell.behavior.value = value;
      cell.rebased_ns = now_ns_;
      break;
    case CellBehavior::Kind::Scripted:
      break;
  }
}

void FixtureMsrBackend::set(OsId os_id, Address addr, CellBehavior behavior) {
  std::lock_guard lock(mutex_);
  check_os(os_id);
  cells_[key_for(os_id, addr)] = Cell{std::move(behavior), now_ns_, 0, now_ns_};
}

void FixtureMsrBackend::set_socket(std::uint32_t socket, Address addr, CellBehavior behavior) {
  std::lock_guard lock(mutex_);
  if (map_.scope_of(addr) != Scope::Socket) {
    throw MsrError(ErrorCode::Fixture, "register " + hex(addr) + " is not socket-scoped");
  }
  cells_[CellKey{true, socket, addr}] = Cell{std::move(behavior), now_ns_, 0, now_ns_};
}

double FixtureMsrBackend::now() {
  std::lock_guard lock(mutex_);
  return static_cast<double>(now_ns_) / 1e9;
}

void FixtureMsrBackend::advance(double seconds) {
  if (!(seconds >= 0)) throw MsrError(ErrorCode::Fixture, "simulated time cannot move backwards");
  std::lock_guard lock(mutex_);
  now_ns_ += static_cast<std::int64_t>(std::llround(seconds * 1e9));
}

std::vector<WriteRecord> FixtureMsrBackend::writes() const {
  std::lock_guard lock(mutex_);
  return writes_;
}

void FixtureMsrBackend::clear_writes() {
  std::lock_guard lock(mutex_);
  writes_.clear();
}

std::vector<CellKey> FixtureMsrBackend::cold_reads() const {
  std::lock_guard lock(mutex_);
  return cold_reads_;
}

namespace {

[[noreturn]] void fixture_fail(std::size_t line_no, const std::string& what) {
  throw MsrError(ErrorCode::Fixture, "msr fixture line " + std::to_string(line_no) + ": " + what);
}

std::uint64_t hex_or_fail(std::string_view w, std::size_t line_no) {
  const auto v = text::parse_hex(w);
  if (!v) fixture_fail(line_no, "bad hex value '" + std::string(w) + "'");
  return *v;
}

double number_or_fail(std::string_view w, std::size_t line_no) {
  const auto v = text::parse_double(w);
  if (!v) fixture_fail(line_no, "bad number '" + std::string(w) + "'");
  return *v;
}

}  // namespace

void load_fixture(FixtureMsrBackend& backend, std::string_view input) {
  std::size_t line_no = 0;
  for (const auto raw : text::split_lines(input)) {
    ++line_no;
    const auto line = text::strip_comment(raw);
    if (line.empty()) continue;
    const auto w = text::split_words(line);
    if (w.size() < 4 || w[0] != "msr") fixture_fail(line_no, "expected 'msr <target> <addr> <value>'");

    std::optional<std::uint32_t> socket;
    std::optional<std::uint32_t> os_id;
    if (text::starts_with(w[1], "socket:")) {
      const auto n = text::parse_uint(w[1].substr(7));
      if (!n) fixture_fail(line_no, "bad socket target '" + std::string(w[1]) + "'");
      socket = static_cast<std::uint32_t>(*n);
    } else {
      const auto n = text::parse_uint(w[1]);
      if (!n) fixture_fail(line_no, "bad os_id '" + std::string(w[1]) + "'");
      os_id = static_cast<std::uint32_t>(*n);
    }
    const auto addr = static_cast<Address>(hex_or_fail(w[2], line_no));

    CellBehavior behavior;
    if (w[3] == "seq") {
      if (w.size() != 5) fixture_fail(line_no, "expected 'seq <hex>,<hex>,...'");
      behavior.kind = CellBehavior::Kind::Scripted;
      for (const auto item : text::split(w[4], ',')) behavior.script.push_back(hex_or_fail(item, line_no));
    } else {
      behavior.value = hex_or_fail(w[3], line_no);
      for (std::size_t i = 4; i < w.size(); i += 2) {
        if (i + 1 >= w.size()) fixture_fail(line_no, "missing value after '" + std::string(w[i]) + "'");
        if (w[i] == "rate") {
          behavior.rate = number_or_fail(w[i + 1], line_no);
        } else if (w[i] == "accel") {
          behavior.accel = number_or_fail(w[i + 1], line_no);
        } else {
          fixture_fail(line_no, "unknown attribute '" + std::string(w[i]) + "'");
        }
        behavior.kind = CellBehavior::Kind::FreeRunning;
      }
    }
    if (socket) {
      backend.set_socket(*socket, addr, std::move(behavior));
    } else {
      backend.set(*os_id, addr, std::move(behavior));
    }
  }
}

void load_fixture_file(FixtureMsrBackend& backend, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MsrError(ErrorCode::Fixture, "cannot open msr fixture '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  load_fixture(backend, ss.str());
}

}  // namespace perfkit::msr
