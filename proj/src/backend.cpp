#include <perfkit/backend.hpp>

#include <cstdlib>

namespace perfkit {

BackendConfig backend_from_environment() {
  BackendConfig cfg;
  const char* kind = std::getenv(kEnvBackend);
  if (kind && std::string(kind) == "fixture") cfg.kind = BackendConfig::Kind::Fixture;
  if (const char* p = std::getenv(kEnvCpuidDump); p && *p) cfg.cpuid_dump = p;
  if (const char* p = std::getenv(kEnvMsrFixture); p && *p) cfg.msr_fixture = p;
  return cfg;
}

std::map<std::string, std::string> backend_environment(const BackendConfig& cfg) {
  std::map<std::string, std::string> env;
  env[kEnvBackend] = cfg.kind == BackendConfig::Kind::Fixture ? "fixture" : "live";
  if (cfg.cpuid_dump) env[kEnvCpuidDump] = std::filesystem::absolute(*cfg.cpuid_dump).string();
  if (cfg.msr_fixture) env[kEnvMsrFixture] = std::filesystem::absolute(*cfg.msr_fixture).string();
  return env;
}

topo::TopologyMap load_topology(const BackendConfig& cfg) {
  if (cfg.kind == BackendConfig::Kind::Fixture) {
    if (!cfg.cpuid_dump) throw Error("fixture backend needs a cpuid dump (--dump)");
    return topo::build_topology(topo::load_dump(*cfg.cpuid_dump));
  }
  if (cfg.cpuid_dump) return topo::build_topology(topo::load_dump(*cfg.cpuid_dump));
  topo::LiveCpuidSource live;
  return topo::build_topology(live.collect());
}

MsrAccess open_msr(const BackendConfig& cfg, const topo::TopologyMap& topo, const msr::RegisterMap& registers) {
  MsrAccess access;
  if (cfg.kind == BackendConfig::Kind::Fixture) {
    auto fixture = std::make_unique<msr::FixtureMsrBackend>(registers, topo.socket_of_os());
    if (cfg.msr_fixture) msr::load_fixture_file(*fixture, *cfg.msr_fixture);
    access.fixture = fixture.get();
    access.timeline = fixture.get();
    access.backend = std::move(fixture);
    return access;
  }
  if (const auto why = msr::DeviceMsrBackend::probe()) {
    throw msr::MsrError(msr::ErrorCode::BackendUnavailable, "live msr backend unavailable: " + *why);
  }
  access.backend = std::make_unique<msr::DeviceMsrBackend>(registers, topo.threads.size());
  access.wall = std::make_unique<msr::WallTimeline>();
  access.timeline = access.wall.get();
  return access;
}

}  // namespace perfkit
