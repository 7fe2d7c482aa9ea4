#pragma once

#include <perfkit/marker.hpp>
#include <perfkit/measure.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace perfkit::cli {

// Environment override for the preload shim location.
inline constexpr const char* kEnvPinLibrary = "PERFKIT_PIN_LIB";

// Entry point shared by the executable and the tests. `args` excludes the
// program name. Returns the process exit status.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Report pieces, exposed for golden tests.
std::string perfctr_header(const topo::TopologyMap& topo);
std::string render_result(const events::MeasurementResult& result);
// Per-core counts of one region, aggregated over threads.
events::MeasurementResult region_result(const marker::RegionBlock& block, const events::EventSetSpec& set,
                                        const std::vector<events::OsId>& cores, double clock_hz);

}  // namespace perfkit::cli
