#pragma once

#include <perfkit/error.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace perfkit::pin {

class PinError : public Error {
 public:
  using Error::Error;
};

using OsId = std::uint32_t;

// Environment read by the preload shim.
inline constexpr const char* kEnvCores = "PERFKIT_PIN_CORES";
inline constexpr const char* kEnvSkip = "PERFKIT_PIN_SKIP";
inline constexpr const char* kEnvModel = "PERFKIT_PIN_MODEL";
inline constexpr const char* kEnvQuiet = "PERFKIT_PIN_QUIET";
inline constexpr const char* kEnvVerbose = "PERFKIT_PIN_VERBOSE";

enum class Model { None, Posix, IntelOpenMP, GnuOpenMP };

struct PinConfig {
  std::vector<OsId> core_list;
  std::uint64_t skip_mask = 0;
  Model model = Model::None;
};

struct PinState {
  std::uint64_t creation_counter = 0;
  // Number of creation events pinned so far, including the main thread
  // when pin_initial ran. Indexes core_list modulo its length.
  std::uint64_t assignment_cursor = 0;

  friend bool operator==(const PinState&, const PinState&) = default;
};

struct Decision {
  bool skip = false;
  OsId os_id = 0;
  bool wrapped = false;  // the core list was exhausted and reuse began

  friend bool operator==(const Decision&, const Decision&) = default;
};

// "0-3", "0,2,1", "0-1,4-5". Duplicates are kept and reported in warnings.
std::vector<OsId> parse_core_list(std::string_view s, std::vector<std::string>* warnings = nullptr);
std::string format_core_list(const std::vector<OsId>& list);

std::optional<Model> parse_model(std::string_view name);
std::string model_name(Model model);
std::uint64_t preset_skip_mask(Model model);
// "0x3" or "3", both hexadecimal.
std::uint64_t parse_skip_mask(std::string_view s);

// Explicit masks override the model preset.
PinConfig make_config(std::vector<OsId> cores, Model model, std::optional<std::uint64_t> explicit_mask);

// Bit event_index of the mask set means skip; bits beyond 63 are zero.
Decision decide(std::uint64_t event_index, const PinConfig& cfg, const PinState& st);
PinState advance(const PinState& st, const Decision& d);

// Binds the calling thread; returns an error message on failure.
std::optional<std::string> bind_current_thread(OsId os_id);

// Binds the main thread to core_list[0] and returns the state for the
// first creation event. Binding failures are reported through `warn`.
PinState pin_initial(const PinConfig& cfg, const std::function<void(const std::string&)>& warn);

PinConfig config_from_environment(const std::function<const char*(const char*)>& getenv_fn);
std::map<std::string, std::string> config_environment(const PinConfig& cfg);

// --- process launch --------------------------------------------------------

// Looks `name` up on PATH unless it contains a slash.
std::optional<std::filesystem::path> resolve_executable(const std::string& name);

// Whether an ELF file requests a program interpreter. Nothing for non-ELF
// files such as scripts.
std::optional<bool> is_dynamically_linked(const std::filesystem::path& path);

// Runs a command with extra environment variables and waits for it. Returns
// the exit status, 128 + signal number for a signalled child, or 127 when
// the command cannot be executed. `poll`, when given, is called repeatedly
// while the child runs and is expected to block for a while itself.
int run_command(const std::vector<std::string>& argv, const std::map<std::string, std::string>& env,
                const std::function<void()>& poll = {});

// Starts the command with the shim preloaded and native OpenMP affinity
// disabled. Throws when the executable cannot be found.
int launch(const PinConfig& cfg, const std::vector<std::string>& command, const std::filesystem::path& shim,
           const std::function<void(const std::string&)>& warn);

}  // namespace perfkit::pin
