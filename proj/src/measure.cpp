#include <perfkit/measure.hpp>

#include <algorithm>
#include <cmath>
#include <set>

namespace perfkit::events {

namespace {

constexpr std::uint64_t kUsr = 1ull << 16;
constexpr std::uint64_t kOs = 1ull << 17;
constexpr std::uint64_t kEnable = 1ull << 22;
constexpr std::uint64_t kFixedUsrOs = 0x3;

std::uint64_t select_value(const Assignment& a) {
  const std::uint64_t base = a.event.event_code | (static_cast<std::uint64_t>(a.event.umask) << 8) | kEnable;
  return a.slot.kind == SlotKind::Uncore ? base : base | kUsr | kOs;
}

const std::vector<Metric>& default_metric_list() {
  static const std::vector<Metric> metrics = default_metrics();
  return metrics;
}

}  // namespace

std::size_t MeasurementResult::core_index(OsId os_id) const {
  const auto it = std::find(cores.begin(), cores.end(), os_id);
  if (it == cores.end()) throw EventError("core " + std::to_string(os_id) + " is not part of the measurement");
  return static_cast<std::size_t>(it - cores.begin());
}

std::optional<double> MeasurementResult::count(OsId os_id, std::string_view event) const {
  const auto c = core_index(os_id);
  const auto it = std::find(events.begin(), events.end(), event);
  if (it == events.end()) return std::nullopt;
  return counts[c][static_cast<std::size_t>(it - events.begin())];
}

std::optional<double> MeasurementResult::metric(OsId os_id, std::string_view name) const {
  const auto c = core_index(os_id);
  const auto it = std::find(metric_names.begin(), metric_names.end(), name);
  if (it == metric_names.end() || c >= metrics.size()) return std::nullopt;
  return metrics[c][static_cast<std::size_t>(it - metric_names.begin())];
}

bool ProgramHandle::owns_uncore(OsId os_id) const {
  const auto it = socket_of_.find(os_id);
  if (it == socket_of_.end()) return false;
  const auto owner = owners_.find(it->second);
  return owner != owners_.end() && owner->second == os_id;
}

bool ProgramHandle::counts_on(OsId os_id, std::size_t i) const {
  return assignments_[i].slot.kind != SlotKind::Uncore || owns_uncore(os_id);
}

void ProgramHandle::zero_counters(OsId os_id) const {
  for (std::size_t i = 0; i < assignments_.size(); ++i) {
    if (counts_on(os_id, i)) msr_->write(os_id, assignments_[i].slot.counter_register, 0);
  }
}

std::vector<std::optional<std::uint64_t>> ProgramHandle::read_counters(OsId os_id) const {
  std::vector<std::optional<std::uint64_t>> values(assignments_.size());
  for (std::size_t i = 0; i < assignments_.size(); ++i) {
    if (counts_on(os_id, i)) values[i] = msr_->read(os_id, assignments_[i].slot.counter_register) & assignments_[i].slot.mask();
  }
  return values;
}

std::uint64_t ProgramHandle::delta(std::size_t i, std::uint64_t start, std::uint64_t end) const {
  return (end - start) & assignments_[i].slot.mask();
}

ProgramHandle program(const EventSetSpec& set, const std::vector<OsId>& cores, const topo::TopologyMap& topo,
                      msr::MsrBackend& msr) {
  if (!set.arch) throw EventError("event set has no architecture");
  if (cores.empty()) throw EventError("empty core list");
  const auto& arch = *set.arch;
  if (set.has_uncore() && !arch.has_uncore()) {
    throw EventError("uncore event requested on " + arch.name + ", which has no uncore counters");
  }

  ProgramHandle h;
  h.arch_ = &arch;
  h.spec_ = set;
  h.cores_ = cores;
  h.clock_hz_ = topo.clock_hz;
  h.msr_ = &msr;

  std::set<OsId> seen;
  for (const auto c : cores) {
    if (c >= topo.threads.size()) throw EventError("core " + std::to_string(c) + " is not in the topology");
    if (!seen.insert(c).second) throw EventError("core " + std::to_string(c) + " selected twice");
    const auto socket = topo.thread(c).socket_id;
    h.socket_of_[c] = socket;
    auto [it, inserted] = h.owners_.emplace(socket, c);
    if (!inserted && c < it->second) it->second = c;
  }

  h.assignments_ = arch.fixed_assignments();
  for (const auto& a : set.assignments) {
    const bool present = std::any_of(h.assignments_.begin(), h.assignments_.end(),
                                     [&](const Assignment& x) { return x.slot.id == a.slot.id; });
    if (!present) h.assignments_.push_back(a);
  }

  for (const auto c : cores) {
    std::uint64_t global = 0;
    std::uint64_t fixed_ctrl = 0;
    std::uint64_t uncore_global = 0;
    for (const auto& a : h.assignments_) {
      switch (a.slot.kind) {
        case SlotKind::Programmable:
          msr.write(c, a.slot.config_register, select_value(a));
          global |= 1ull << a.slot.index;
          break;
        case SlotKind::Fixed:
          fixed_ctrl |= kFixedUsrOs << (4 * (a.slot.index - 32));
          global |= 1ull << a.slot.index;
          break;
        case SlotKind::Uncore:
          if (h.owns_uncore(c)) {
            msr.write(c, a.slot.config_register, select_value(a));
            uncore_global |= 1ull << a.slot.index;
          }
          break;
      }
    }
    msr.write(c, arch.fixed_ctr_ctrl, fixed_ctrl);
    msr.write(c, arch.global_ctrl, global);
    if (uncore_global) msr.write(c, *arch.uncore_global_ctrl, uncore_global);
  }
  return h;
}

void Measurement::start() {
  baseline_.clear();
  for (const auto c : handle_->cores()) {
    handle_->zero_counters(c);
    baseline_.push_back(handle_->read_counters(c));
  }
  started_at_ = timeline_->now();
}

MeasurementResult Measurement::stop() {
  const auto& h = *handle_;
  MeasurementResult r;
  r.cores = h.cores();
  for (const auto& a : h.assignments()) r.events.push_back(a.event.name);
  r.counts.assign(r.cores.size(), std::vector<std::optional<double>>(r.events.size()));
  for (std::size_t ci = 0; ci < r.cores.size(); ++ci) {
    try {
      const auto now = h.read_counters(r.cores[ci]);
      for (std::size_t e = 0; e < now.size(); ++e) {
        if (now[e] && baseline_[ci][e]) r.counts[ci][e] = static_cast<double>(h.delta(e, *baseline_[ci][e], *now[e]));
      }
    } catch (const msr::MsrError& err) {
      r.partial = true;
      if (r.error.empty()) r.error = err.what();
    }
  }
  r.runtime_s = runtimes(r, h.clock_hz(), timeline_->now() - started_at_);
  return r;
}

MeasurementResult measure(const ProgramHandle& handle, msr::Timeline& timeline, const std::function<void()>& body) {
  Measurement m(handle, timeline);
  m.start();
  if (body) body();
  return m.stop();
}

std::vector<double> runtimes(const MeasurementResult& raw, double clock_hz, double wall_seconds) {
  const auto it = std::find(raw.events.begin(), raw.events.end(), "CPU_CLK_UNHALTED_CORE");
  std::vector<double> out(raw.cores.size(), wall_seconds);
  if (it == raw.events.end()) return out;
  const auto e = static_cast<std::size_t>(it - raw.events.begin());
  for (std::size_t c = 0; c < raw.cores.size(); ++c) {
    const auto cycles = raw.counts[c][e];
    out[c] = cycles && clock_hz > 0 ? *cycles / clock_hz : 0.0;
  }
  return out;
}

MeasurementResult derive_metrics(const std::vector<Metric>& metrics, MeasurementResult raw, double clock_hz) {
  raw.metric_names.clear();
  for (const auto& m : metrics) raw.metric_names.push_back(m.name);
  raw.metrics.assign(raw.cores.size(), std::vector<std::optional<double>>(metrics.size()));
  for (std::size_t c = 0; c < raw.cores.size(); ++c) {
    const double runtime = c < raw.runtime_s.size() ? raw.runtime_s[c] : 0.0;
    const auto lookup = [&](std::string_view name) -> std::optional<double> {
      if (name == "runtime") return runtime > 0 ? std::optional(runtime) : std::nullopt;
      if (name == "clock") return clock_hz > 0 ? std::optional(clock_hz) : std::nullopt;
      const auto it = std::find(raw.events.begin(), raw.events.end(), name);
      if (it == raw.events.end()) return std::nullopt;
      return raw.counts[c][static_cast<std::size_t>(it - raw.events.begin())];
    };
    for (std::size_t m = 0; m < metrics.size(); ++m) {
      auto v = metrics[m].formula.evaluate(lookup);
      if (v && !std::isfinite(*v)) v.reset();
      raw.metrics[c][m] = v;
    }
  }
  return raw;
}

MeasurementResult derive_metrics(const EventGroup& group, MeasurementResult raw, double clock_hz) {
  return derive_metrics(group.metrics, std::move(raw), clock_hz);
}

const std::vector<Metric>& metrics_for(const EventSetSpec& set) {
  return set.group ? set.group->metrics : default_metric_list();
}

Multiplexer::Multiplexer(std::vector<EventSetSpec> sets, std::vector<OsId> cores, const topo::TopologyMap& topo,
                         msr::MsrBackend& msr, msr::Timeline& timeline)
    : sets_(std::move(sets)), cores_(std::move(cores)), topo_(&topo), msr_(&msr), timeline_(&timeline) {
  if (sets_.empty()) throw EventError("multiplexing needs at least one event set");
  auto note = [&](const Assignment& a) {
    if (std::find(events_.begin(), events_.end(), a.event.name) == events_.end()) events_.push_back(a.event.name);
  };
  for (const auto& s : sets_) {
    if (!s.arch) throw EventError("event set has no architecture");
    for (const auto& a : s.arch->fixed_assignments()) note(a);
    for (const auto& a : s.assignments) note(a);
  }
  sums_.assign(cores_.size(), std::vector<std::optional<double>>(events_.size()));
  active_.assign(events_.size(), 0.0);
}

void Multiplexer::step(double seconds) {
  const auto& set = sets_[next_];
  next_ = (next_ + 1) % sets_.size();
  const auto handle = program(set, cores_, *topo_, *msr_);
  Measurement m(handle, *timeline_);
  m.start();
  timeline_->wait(seconds);
  const auto r = m.stop();
  if (r.partial) {
    partial_ = true;
    if (error_.empty()) error_ = r.error;
  }
  for (std::size_t e = 0; e < r.events.size(); ++e) {
    const auto idx = static_cast<std::size_t>(std::find(events_.begin(), events_.end(), r.events[e]) - events_.begin());
    active_[idx] += seconds;
    for (std::size_t c = 0; c < cores_.size(); ++c) {
      if (const auto v = r.counts[c][e]) sums_[c][idx] = sums_[c][idx].value_or(0.0) + *v;
    }
  }
  elapsed_ += seconds;
}

MeasurementResult Multiplexer::result() const {
  MeasurementResult r;
  r.cores = cores_;
  r.events = events_;
  r.counts.assign(cores_.size(), std::vector<std::optional<double>>(events_.size()));
  for (std::size_t c = 0; c < cores_.size(); ++c) {
    for (std::size_t e = 0; e < events_.size(); ++e) {
      if (sums_[c][e] && active_[e] > 0) r.counts[c][e] = *sums_[c][e] * (elapsed_ / active_[e]);
    }
  }
  r.runtime_s = runtimes(r, topo_->clock_hz, elapsed_);
  r.multiplexed = sets_.size() > 1;
  r.partial = partial_;
  r.error = error_;
  return r;
}

MeasurementResult multiplex(const std::vector<EventSetSpec>& sets, const std::vector<OsId>& cores,
                            const topo::TopologyMap& topo, double slice_s, double total_s, msr::MsrBackend& msr,
                            msr::Timeline& timeline) {
  if (sets.empty()) throw EventError("multiplexing needs at least one event set");
  if (!(total_s > 0)) throw EventError("total duration must be positive");
  if (sets.size() == 1) {
    const auto handle = program(sets.front(), cores, topo, msr);
    return measure(handle, timeline, [&] { timeline.wait(total_s); });
  }
  if (!(slice_s > 0)) throw EventError("slice duration must be positive");
  const auto slice_ns = std::llround(slice_s * 1e9);
  const auto total_ns = std::llround(total_s * 1e9);
  if (slice_ns * static_cast<long long>(sets.size()) > total_ns) {
    throw EventError("slice duration times the number of event sets exceeds the total duration");
  }
  Multiplexer mux(sets, cores, topo, msr, timeline);
  for (long long t = 0; t < total_ns; t += slice_ns) {
    mux.step(static_cast<double>(std::min(slice_ns, total_ns - t)) / 1e9);
  }
  return mux.result();
}

}  // namespace perfkit::events
