#include <perfkit/marker.hpp>

#include <perfkit/backend.hpp>
#include <perfkit/pin.hpp>

#include "text.hpp"

#include <sched.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>

namespace perfkit::marker {

std::optional<std::uint64_t> RegionRow::count(std::string_view event) const {
  for (const auto& [name, value] : counts) {
    if (name == event) return value;
  }
  return std::nullopt;
}

// --- result file ------------------------------------------------------------

namespace {

[[noreturn]] void file_fail(std::size_t line_no, const std::string& what) {
  throw MarkerError("marker result line " + std::to_string(line_no) + ": " + what);
}

std::uint64_t number(std::string_view w, std::size_t line_no) {
  const auto v = text::parse_uint(w);
  if (!v) file_fail(line_no, "expected a number, got '" + std::string(w) + "'");
  return *v;
}

}  // namespace

RegionFile parse_region_file(std::string_view input) {
  RegionFile file;
  bool header = false;
  std::size_t line_no = 0;
  for (const auto raw : text::split_lines(input)) {
    ++line_no;
    const auto line = text::trim(raw);
    if (line.empty()) continue;
    const auto w = text::split_words(line);
    if (!header) {
      if (w.size() != 4 || w[0] != "threads" || w[2] != "regions") file_fail(line_no, "expected 'threads N regions M'");
      file.threads = static_cast<std::uint32_t>(number(w[1], line_no));
      file.regions = static_cast<std::uint32_t>(number(w[3], line_no));
      header = true;
    } else if (w[0] == "warning") {
      file.warnings.emplace_back(text::trim(line.substr(7)));
    } else if (w[0] == "region") {
      if (w.size() < 3) file_fail(line_no, "expected 'region <id> <name>'");
      RegionBlock block;
      block.id = static_cast<std::uint32_t>(number(w[1], line_no));
      block.name = std::string(text::trim(line.substr(static_cast<std::size_t>(w[1].data() + w[1].size() - line.data()))));
      file.blocks.push_back(std::move(block));
    } else if (w[0] == "thread") {
      if (file.blocks.empty()) file_fail(line_no, "row before any region");
      if (w.size() < 8 || w[2] != "core" || w[4] != "calls" || w[6] != "cycles") {
        file_fail(line_no, "expected 'thread <tid> core <os_id> calls <n> cycles <c> ...'");
      }
      RegionRow row;
      row.thread_id = static_cast<std::uint32_t>(number(w[1], line_no));
      row.os_id = static_cast<OsId>(number(w[3], line_no));
      row.calls = number(w[5], line_no);
      row.cycles = number(w[7], line_no);
      for (std::size_t i = 8; i < w.size(); ++i) {
        const auto eq = w[i].find('=');
        if (eq == std::string_view::npos || eq == 0) file_fail(line_no, "expected EVENT=count, got '" + std::string(w[i]) + "'");
        row.counts.emplace_back(std::string(w[i].substr(0, eq)), number(w[i].substr(eq + 1), line_no));
      }
      file.blocks.back().rows.push_back(std::move(row));
    } else {
      file_fail(line_no, "unknown record '" + std::string(w[0]) + "'");
    }
  }
  if (!header) throw MarkerError("marker result file is empty");
  return file;
}

RegionFile load_region_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MarkerError("cannot open marker result file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_region_file(ss.str());
}

std::string format_region_file(const RegionFile& file) {
  std::ostringstream out;
  out << "threads " << file.threads << " regions " << file.regions << '\n';
  for (const auto& w : file.warnings) out << "warning " << w << '\n';
  for (const auto& b : file.blocks) {
    out << "region " << b.id << ' ' << b.name << '\n';
    for (const auto& r : b.rows) {
      out << "thread " << r.thread_id << " core " << r.os_id << " calls " << r.calls << " cycles " << r.cycles;
      for (const auto& [name, value] : r.counts) out << ' ' << name << '=' << value;
      out << '\n';
    }
  }
  return out.str();
}

// --- session ----------------------------------------------------------------

MarkerSession::MarkerSession(std::uint32_t threads, std::uint32_t regions)
    : threads_(threads), capacity_(regions), state_(threads) {}

MarkerSession::MarkerSession(std::uint32_t threads, std::uint32_t regions, const events::ProgramHandle& handle,
                             msr::Timeline& timeline, std::optional<std::filesystem::path> result_file)
    : threads_(threads),
      capacity_(regions),
      state_(threads),
      handle_(&handle),
      timeline_(&timeline),
      result_file_(std::move(result_file)) {
  if (threads == 0) throw MarkerError("marker session needs at least one thread");
  const auto& a = handle.assignments();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].event.name == "CPU_CLK_UNHALTED_CORE") cycles_index_ = i;
  }
}

MarkerSession::ThreadState& MarkerSession::thread(std::uint32_t thread_id) {
  if (thread_id >= threads_) {
    throw MarkerError("thread id " + std::to_string(thread_id) + " out of range; session has " +
                      std::to_string(threads_) + " threads");
  }
  return state_[thread_id];
}

std::uint32_t MarkerSession::register_region(std::string_view name) {
  if (closed_) throw MarkerError("marker session is closed");
  if (std::find(names_.begin(), names_.end(), name) != names_.end()) {
    if (!active()) return static_cast<std::uint32_t>(std::find(names_.begin(), names_.end(), name) - names_.begin());
    throw MarkerError("region '" + std::string(name) + "' registered twice");
  }
  if (names_.size() >= capacity_ && active()) {
    throw MarkerError("cannot register region '" + std::string(name) + "': capacity of " + std::to_string(capacity_) +
                      " regions exhausted");
  }
  names_.emplace_back(name);
  return static_cast<std::uint32_t>(names_.size() - 1);
}

void MarkerSession::start_region(std::uint32_t thread_id, OsId os_id) {
  if (!active()) return;
  if (closed_) throw MarkerError("marker session is closed");
  auto& st = thread(thread_id);
  if (st.open) {
    throw MarkerError("thread " + std::to_string(thread_id) +
                      " already has an open region; nesting and overlap are not allowed");
  }
  const auto& cores = handle_->cores();
  if (std::find(cores.begin(), cores.end(), os_id) == cores.end()) {
    throw MarkerError("core " + std::to_string(os_id) + " is not among the measured cores");
  }
  st.start = handle_->read_counters(os_id);
  st.started_at = timeline_->now();
  st.os_id = os_id;
  st.open = true;
}

void MarkerSession::stop_region(std::uint32_t thread_id, OsId os_id, std::uint32_t region_id) {
  if (!active()) return;
  if (closed_) throw MarkerError("marker session is closed");
  auto& st = thread(thread_id);
  if (!st.open) throw MarkerError("stop without start on thread " + std::to_string(thread_id));
  if (region_id >= names_.size()) throw MarkerError("unknown region id " + std::to_string(region_id));
  if (os_id != st.os_id) {
    throw MarkerError("region stopped on core " + std::to_string(os_id) + " but started on core " +
                      std::to_string(st.os_id));
  }
  const auto end = handle_->read_counters(os_id);
  const double elapsed = timeline_->now() - st.started_at;
  st.open = false;

  auto& row = st.rows[{region_id, os_id}];
  row.thread_id = thread_id;
  row.os_id = os_id;
  const auto& a = handle_->assignments();
  if (row.counts.empty()) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (end[i]) row.counts.emplace_back(a[i].event.name, 0);
    }
  }
  std::size_t slot = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!end[i]) continue;
    const auto d = handle_->delta(i, st.start[i].value_or(0), *end[i]);
    row.counts[slot++].second += d;
    if (cycles_index_ == i) row.cycles += d;
  }
  if (!cycles_index_) row.cycles += static_cast<std::uint64_t>(elapsed * handle_->clock_hz());
  ++row.calls;
}

RegionFile MarkerSession::snapshot() const {
  RegionFile file;
  file.threads = threads_;
  file.regions = capacity_;
  if (!active()) return file;
  for (std::uint32_t t = 0; t < threads_; ++t) {
    if (state_[t].open) {
      file.warnings.push_back("open-region thread " + std::to_string(t) + " core " + std::to_string(state_[t].os_id));
    }
  }
  for (std::uint32_t r = 0; r < names_.size(); ++r) {
    RegionBlock block{r, names_[r], {}};
    for (std::uint32_t t = 0; t < threads_; ++t) {
      for (const auto& [key, row] : state_[t].rows) {
        if (key.first == r) block.rows.push_back(row);
      }
    }
    if (!block.rows.empty()) file.blocks.push_back(std::move(block));
  }
  return file;
}

RegionFile MarkerSession::close() {
  if (closed_) throw MarkerError("marker session already closed");
  auto file = snapshot();
  closed_ = true;
  if (active() && result_file_) {
    std::ofstream out(*result_file_);
    if (!out) throw MarkerError("cannot write marker result file '" + result_file_->string() + "'");
    out << format_region_file(file);
    if (!out) throw MarkerError("failed writing marker result file '" + result_file_->string() + "'");
  }
  return file;
}

// --- environment --------------------------------------------------------------

struct EnvironmentSession::Resources {
  topo::TopologyMap topo;
  MsrAccess access;
  std::optional<events::ProgramHandle> handle;
};

EnvironmentSession::EnvironmentSession(std::uint32_t threads, std::uint32_t regions) {
  const char* path = std::getenv(kEnvResultFile);
  if (!path || !*path) {
    session_ = std::make_unique<MarkerSession>(threads, regions);
    return;
  }
  const char* event_string = std::getenv(kEnvEvents);
  const char* core_string = std::getenv(kEnvCores);
  if (!event_string || !core_string) {
    throw MarkerError(std::string("marker environment incomplete: ") + kEnvEvents + " and " + kEnvCores +
                      " must be set");
  }
  resources_ = std::make_unique<Resources>();
  auto& res = *resources_;
  const auto backend = backend_from_environment();
  res.topo = load_topology(backend);
  const auto& arch = events::architecture_for(res.topo.signature);
  res.access = open_msr(backend, res.topo, arch.register_map());
  const auto spec = events::parse_event_string(event_string, arch);
  const auto cores = pin::parse_core_list(core_string);
  res.handle = events::program(spec, cores, res.topo, *res.access.backend);
  for (const auto c : cores) res.handle->zero_counters(c);
  session_ = std::make_unique<MarkerSession>(threads, regions, *res.handle, *res.access.timeline,
                                             std::filesystem::path(path));
}

EnvironmentSession::~EnvironmentSession() = default;

namespace {

std::mutex g_provider_mutex;
std::function<OsId()> g_provider;

}  // namespace

OsId get_processor_id() {
  {
    std::lock_guard lock(g_provider_mutex);
    if (g_provider) return g_provider();
  }
  const int cpu = sched_getcpu();
  return cpu < 0 ? 0 : static_cast<OsId>(cpu);
}

void set_processor_id_provider(std::function<OsId()> provider) {
  std::lock_guard lock(g_provider_mutex);
  g_provider = std::move(provider);
}

}  // namespace perfkit::marker
