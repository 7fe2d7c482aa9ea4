#pragma once

#include <perfkit/msr.hpp>
#include <perfkit/topology.hpp>

#include <string>
#include <string_view>
#include <vector>

namespace perfkit::features {

class FeatureError : public Error {
 public:
  using Error::Error;
};

enum class Polarity { SetMeansEnabled, SetMeansDisabled };
// Capability flags print supported/not supported instead of enabled/disabled.
enum class Display { Switch, Capability };

struct FeatureFlag {
  std::string key;   // CL_PREFETCHER
  std::string name;  // Adjacent Cache Line Prefetch
  unsigned bit = 0;
  Polarity polarity = Polarity::SetMeansEnabled;
  Display display = Display::Switch;
  bool writable = false;
};

struct FeatureTable {
  std::string name;
  msr::Address reg = 0;
  std::vector<FeatureFlag> flags;

  // Matches either the key or the display name.
  const FeatureFlag* find(std::string_view name) const;
};

enum class State { Enabled, Disabled, Supported, NotSupported };

struct FlagState {
  const FeatureFlag* flag = nullptr;
  State state = State::Disabled;
};

// IA32_MISC_ENABLE as documented for Core 2.
const FeatureTable& core2_table();
const FeatureTable& table_for(const topo::CpuSignature& signature);

State decode(const FeatureFlag& flag, std::uint64_t reg_value);
std::vector<FlagState> report(msr::OsId os_id, msr::MsrBackend& msr, const FeatureTable& table);

// Read-modify-write of the flag's bit, then a re-read to confirm. No write
// is issued when the flag is already in the requested state.
State toggle(msr::OsId os_id, std::string_view flag, bool enable, msr::MsrBackend& msr, const FeatureTable& table);

std::string state_name(State state);
std::string render_report(const std::string& cpu_name, msr::OsId os_id, const std::vector<FlagState>& states);

}  // namespace perfkit::features
