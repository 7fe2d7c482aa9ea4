#pragma once

#include <perfkit/events.hpp>
#include <perfkit/msr.hpp>
#include <perfkit/topology.hpp>

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace perfkit::events {

using OsId = std::uint32_t;

struct MeasurementResult {
  std::vector<OsId> cores;
  std::vector<std::string> events;
  // counts[core][event]; absent for uncore events on non-owner cores and
  // for any core whose read failed.
  std::vector<std::vector<std::optional<double>>> counts;
  std::vector<double> runtime_s;
  std::vector<std::string> metric_names;
  std::vector<std::vector<std::optional<double>>> metrics;
  bool multiplexed = false;
  bool partial = false;
  std::string error;

  std::size_t core_index(OsId os_id) const;
  std::optional<double> count(OsId os_id, std::string_view event) const;
  std::optional<double> metric(OsId os_id, std::string_view name) const;

  friend bool operator==(const MeasurementResult&, const MeasurementResult&) = default;
};

// An event set programmed onto a list of cores. For uncore assignments the
// lowest selected core of each socket is the owner and the only core that
// programs and reads them.
class ProgramHandle {
 public:
  const Architecture& arch() const { return *arch_; }
  // The programmed set: fixed counters first, then the requested events.
  const std::vector<Assignment>& assignments() const { return assignments_; }
  const std::vector<OsId>& cores() const { return cores_; }
  const std::map<std::uint32_t, OsId>& uncore_owners() const { return owners_; }
  const EventSetSpec& spec() const { return spec_; }
  double clock_hz() const { return clock_hz_; }
  bool owns_uncore(OsId os_id) const;
  msr::MsrBackend& backend() const { return *msr_; }

  // Whether assignment i is counted on os_id at all.
  bool counts_on(OsId os_id, std::size_t i) const;
  void zero_counters(OsId os_id) const;
  std::vector<std::optional<std::uint64_t>> read_counters(OsId os_id) const;
  // Counter difference modulo the slot width.
  std::uint64_t delta(std::size_t i, std::uint64_t start, std::uint64_t end) const;

 private:
  friend ProgramHandle program(const EventSetSpec&, const std::vector<OsId>&, const topo::TopologyMap&,
                               msr::MsrBackend&);

  const Architecture* arch_ = nullptr;
  EventSetSpec spec_;
  std::vector<Assignment> assignments_;
  std::vector<OsId> cores_;
  std::map<std::uint32_t, OsId> owners_;
  std::map<OsId, std::uint32_t> socket_of_;
  double clock_hz_ = 0;
  msr::MsrBackend* msr_ = nullptr;
};

ProgramHandle program(const EventSetSpec& set, const std::vector<OsId>& cores, const topo::TopologyMap& topo,
                      msr::MsrBackend& msr);

// Start/stop measurement over a programmed handle. start() zeroes the
// counters and records a baseline; stop() reads them again.
class Measurement {
 public:
  Measurement(const ProgramHandle& handle, msr::Timeline& timeline) : handle_(&handle), timeline_(&timeline) {}
  void start();
  MeasurementResult stop();

 private:
  const ProgramHandle* handle_;
  msr::Timeline* timeline_;
  double started_at_ = 0;
  std::vector<std::vector<std::optional<std::uint64_t>>> baseline_;
};

// start, body, stop.
MeasurementResult measure(const ProgramHandle& handle, msr::Timeline& timeline, const std::function<void()>& body);

// Runtime per core: CPU_CLK_UNHALTED_CORE over the clock when the set counts
// it, else the supplied wall interval.
std::vector<double> runtimes(const MeasurementResult& raw, double clock_hz, double wall_seconds);

// Evaluates metrics per core. Pure: the same input gives identical output.
MeasurementResult derive_metrics(const std::vector<Metric>& metrics, MeasurementResult raw, double clock_hz);
MeasurementResult derive_metrics(const EventGroup& group, MeasurementResult raw, double clock_hz);

// Metrics for a set: its group's formulas, or runtime and CPI for raw lists.
const std::vector<Metric>& metrics_for(const EventSetSpec& set);

// Round-robin rotation of event sets in slices of simulated or wall time.
class Multiplexer {
 public:
  Multiplexer(std::vector<EventSetSpec> sets, std::vector<OsId> cores, const topo::TopologyMap& topo,
              msr::MsrBackend& msr, msr::Timeline& timeline);

  // Runs the next set for `seconds`.
  void step(double seconds);
  double elapsed() const { return elapsed_; }
  // Counts extrapolated to the elapsed time.
  MeasurementResult result() const;

 private:
  std::vector<EventSetSpec> sets_;
  std::vector<OsId> cores_;
  const topo::TopologyMap* topo_;
  msr::MsrBackend* msr_;
  msr::Timeline* timeline_;
  std::size_t next_ = 0;
  double elapsed_ = 0;
  std::vector<std::string> events_;
  std::vector<std::vector<std::optional<double>>> sums_;  // [core][event]
  std::vector<double> active_;                             // per event
  bool partial_ = false;
  std::string error_;
};

// Rotates `sets` in slices of slice_s until total_s has elapsed. A single
// set is measured once over the whole interval, unscaled.
MeasurementResult multiplex(const std::vector<EventSetSpec>& sets, const std::vector<OsId>& cores,
                            const topo::TopologyMap& topo, double slice_s, double total_s, msr::MsrBackend& msr,
                            msr::Timeline& timeline);

}  // namespace perfkit::events
