#pragma once

#include <perfkit/msr.hpp>
#include <perfkit/topology.hpp>

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

namespace perfkit {

// Where hardware state comes from: the running machine, or a recorded
// cpuid dump plus an optional MSR fixture.
struct BackendConfig {
  enum class Kind { Live, Fixture };
  Kind kind = Kind::Live;
  std::optional<std::filesystem::path> cpuid_dump;
  std::optional<std::filesystem::path> msr_fixture;
};

inline constexpr const char* kEnvBackend = "PERFKIT_BACKEND";
inline constexpr const char* kEnvCpuidDump = "PERFKIT_CPUID_DUMP";
inline constexpr const char* kEnvMsrFixture = "PERFKIT_MSR_FIXTURE";

BackendConfig backend_from_environment();
std::map<std::string, std::string> backend_environment(const BackendConfig& cfg);

topo::TopologyMap load_topology(const BackendConfig& cfg);

struct MsrAccess {
  std::unique_ptr<msr::MsrBackend> backend;
  std::unique_ptr<msr::WallTimeline> wall;
  msr::FixtureMsrBackend* fixture = nullptr;  // set for the fixture backend
  msr::Timeline* timeline = nullptr;
};

// The register map decides which addresses may be written.
MsrAccess open_msr(const BackendConfig& cfg, const topo::TopologyMap& topo, const msr::RegisterMap& registers);

}  // namespace perfkit
