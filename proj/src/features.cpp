#include <perfkit/features.hpp>

#include <perfkit/events.hpp>

#include <sstream>

namespace perfkit::features {

namespace {

constexpr msr::Address kMiscEnable = 0x1A0;

const std::string kRule(61, '-');

std::string pad_right(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

const FeatureFlag* FeatureTable::find(std::string_view wanted) const {
  for (const auto& f : flags) {
    if (f.key == wanted || f.name == wanted) return &f;
  }
  return nullptr;
}

const FeatureTable& core2_table() {
  using P = Polarity;
  using D = Display;
  static const FeatureTable table{
      "Intel Core 2",
      kMiscEnable,
      {
          {"FAST_STRINGS", "Fast-Strings", 0, P::SetMeansEnabled, D::Switch, false},
          {"THERMAL_CONTROL", "Automatic Thermal Control", 3, P::SetMeansEnabled, D::Switch, false},
          {"PERF_MON", "Performance monitoring", 7, P::SetMeansEnabled, D::Switch, false},
          {"HW_PREFETCHER", "Hardware Prefetcher", 9, P::SetMeansDisabled, D::Switch, true},
          {"BTS", "Branch Trace Storage", 11, P::SetMeansDisabled, D::Capability, false},
          {"PEBS", "PEBS", 12, P::SetMeansDisabled, D::Capability, false},
          {"SPEEDSTEP", "Intel Enhanced SpeedStep", 16, P::SetMeansEnabled, D::Switch, false},
          {"MONITOR", "MONITOR/MWAIT", 18, P::SetMeansEnabled, D::Capability, false},
          {"CL_PREFETCHER", "Adjacent Cache Line Prefetch", 19, P::SetMeansDisabled, D::Switch, true},
          {"CPUID_MAX", "Limit CPUID Maxval", 22, P::SetMeansEnabled, D::Switch, false},
          {"XD_BIT", "XD Bit Disable", 34, P::SetMeansDisabled, D::Switch, false},
          {"DCU_PREFETCHER", "DCU Prefetcher", 37, P::SetMeansDisabled, D::Switch, true},
          {"DYN_ACCEL", "Intel Dynamic Acceleration", 38, P::SetMeansDisabled, D::Switch, false},
          {"IP_PREFETCHER", "IP Prefetcher", 39, P::SetMeansDisabled, D::Switch, true},
      }};
  return table;
}

const FeatureTable& table_for(const topo::CpuSignature& signature) {
  if (events::is_core2(signature)) return core2_table();
  throw FeatureError("feature control is unsupported on this processor; only Intel Core 2 is supported");
}

State decode(const FeatureFlag& flag, std::uint64_t value) {
  const bool set = (value >> flag.bit) & 1;
  const bool on = flag.polarity == Polarity::SetMeansEnabled ? set : !set;
  if (flag.display == Display::Capability) return on ? State::Supported : State::NotSupported;
  return on ? State::Enabled : State::Disabled;
}

std::vector<FlagState> report(msr::OsId os_id, msr::MsrBackend& msr, const FeatureTable& table) {
  const auto value = msr.read(os_id, table.reg);
  std::vector<FlagState> out;
  for (const auto& f : table.flags) out.push_back({&f, decode(f, value)});
  return out;
}

State toggle(msr::OsId os_id, std::string_view name, bool enable, msr::MsrBackend& msr, const FeatureTable& table) {
  const auto* flag = table.find(name);
  if (!flag) throw FeatureError("unknown feature '" + std::string(name) + "'");
  if (!flag->writable) throw FeatureError("feature " + flag->key + " is read-only");

  const auto before = msr.read(os_id, table.reg);
  const bool set = enable == (flag->polarity == Polarity::SetMeansEnabled);
  const auto mask = 1ull << flag->bit;
  const auto wanted = set ? (before | mask) : (before & ~mask);
  if (wanted != before) {
    msr.write(os_id, table.reg, wanted);
    const auto after = msr.read(os_id, table.reg);
    if (after != wanted) {
      throw FeatureError("verification failed for " + flag->key + ": register did not take the new value");
    }
  }
  return decode(*flag, wanted);
}

std::string state_name(State state) {
  switch (state) {
    case State::Enabled:
      return "enabled";
    case State::Disabled:
      return "disabled";
    case State::Supported:
      return "supported";
    case State::NotSupported:
      return "not supported";
  }
  return "";
}

std::string render_report(const std::string& cpu_name, msr::OsId os_id, const std::vector<FlagState>& states) {
  std::ostringstream out;
  out << kRule << '\n';
  out << pad_right("CPU name:", 16) << cpu_name << '\n';
  out << pad_right("CPU core id:", 16) << os_id << '\n';
  out << kRule << '\n';
  for (const auto& s : states) out << pad_right(s.flag->name + ":", 32) << state_name(s.state) << '\n';
  out << kRule << '\n';
  return out.str();
}

}  // namespace perfkit::features
