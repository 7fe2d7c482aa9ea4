#include <perfkit/pin.hpp>

#include "text.hpp"

#include <pthread.h>
#include <sched.h>

#include <cstring>
#include <set>

namespace perfkit::pin {

std::vector<OsId> parse_core_list(std::string_view s, std::vector<std::string>* warnings) {
  std::vector<OsId> out;
  if (text::trim(s).empty()) throw PinError("empty core list");
  for (const auto raw : text::split(s, ',')) {
    const auto token = text::trim(raw);
    const auto dash = token.find('-');
    if (dash == std::string_view::npos) {
      const auto n = text::parse_uint(token);
      if (!n || *n > 0xFFFFFFFF) throw PinError("malformed core list token '" + std::string(token) + "'");
      out.push_back(static_cast<OsId>(*n));
      continue;
    }
    const auto a = text::parse_uint(text::trim(token.substr(0, dash)));
    const auto b = text::parse_uint(text::trim(token.substr(dash + 1)));
    if (!a || !b || *a > 0xFFFFFFFF || *b > 0xFFFFFFFF) {
      throw PinError("malformed core list token '" + std::string(token) + "'");
    }
    if (*b < *a) throw PinError("invalid core range '" + std::string(token) + "': end before start");
    for (auto c = *a; c <= *b; ++c) out.push_back(static_cast<OsId>(c));
  }
  if (warnings) {
    std::set<OsId> seen;
    std::set<OsId> reported;
    for (const auto c : out) {
      if (!seen.insert(c).second && reported.insert(c).second) {
        warnings->push_back("core " + std::to_string(c) + " listed more than once");
      }
    }
  }
  return out;
}

std::string format_core_list(const std::vector<OsId>& list) {
  std::string out;
  for (const auto c : list) out += (out.empty() ? "" : ",") + std::to_string(c);
  return out;
}

std::optional<Model> parse_model(std::string_view name) {
  if (name == "none") return Model::None;
  if (name == "posix") return Model::Posix;
  if (name == "intel") return Model::IntelOpenMP;
  if (name == "gnu") return Model::GnuOpenMP;
  return std::nullopt;
}

std::string model_name(Model model) {
  switch (model) {
    case Model::None:
      return "none";
    case Model::Posix:
      return "posix";
    case Model::IntelOpenMP:
      return "intel";
    case Model::GnuOpenMP:
      return "gnu";
  }
  return "none";
}

std::uint64_t preset_skip_mask(Model model) {
  // Intel's OpenMP runtime creates a shepherd thread first.
  return model == Model::IntelOpenMP ? 0x1 : 0x0;
}

std::uint64_t parse_skip_mask(std::string_view s) {
  const auto v = text::parse_hex(text::trim(s));
  if (!v) throw PinError("malformed skip mask '" + std::string(s) + "', expected hexadecimal");
  return *v;
}

PinConfig make_config(std::vector<OsId> cores, Model model, std::optional<std::uint64_t> explicit_mask) {
  if (cores.empty()) throw PinError("empty core list");
  return PinConfig{std::move(cores), explicit_mask.value_or(preset_skip_mask(model)), model};
}

Decision decide(std::uint64_t event_index, const PinConfig& cfg, const PinState& st) {
  if (event_index < 64 && ((cfg.skip_mask >> event_index) & 1)) return Decision{true, 0, false};
  if (cfg.core_list.empty()) return Decision{true, 0, false};
  const auto n = cfg.core_list.size();
  return Decision{false, cfg.core_list[st.assignment_cursor % n], st.assignment_cursor >= n};
}

PinState advance(const PinState& st, const Decision& d) {
  return PinState{st.creation_counter + 1, st.assignment_cursor + (d.skip ? 0 : 1)};
}

std::optional<std::string> bind_current_thread(OsId os_id) {
  if (os_id >= CPU_SETSIZE) return "core " + std::to_string(os_id) + " exceeds the affinity mask size";
  cpu_set_t set;
  CPU_ZERO(&set);
  CPU_SET(os_id, &set);
  const int rc = pthread_setaffinity_np(pthread_self(), sizeof set, &set);
  if (rc != 0) return "cannot bind to core " + std::to_string(os_id) + ": " + std::strerror(rc);
  return std::nullopt;
}

PinState pin_initial(const PinConfig& cfg, const std::function<void(const std::string&)>& warn) {
  if (cfg.core_list.empty()) throw PinError("empty core list");
  if (const auto err = bind_current_thread(cfg.core_list.front()); err && warn) warn("main thread: " + *err);
  return PinState{0, 1};
}

PinConfig config_from_environment(const std::function<const char*(const char*)>& getenv_fn) {
  PinConfig cfg;
  const char* cores = getenv_fn(kEnvCores);
  if (!cores || !*cores) return cfg;
  cfg.core_list = parse_core_list(cores);
  if (const char* model = getenv_fn(kEnvModel); model && *model) {
    const auto m = parse_model(model);
    if (!m) throw PinError(std::string("unknown threading model '") + model + "'");
    cfg.model = *m;
  }
  const char* mask = getenv_fn(kEnvSkip);
  cfg.skip_mask = mask && *mask ? parse_skip_mask(mask) : preset_skip_mask(cfg.model);
  return cfg;
}

std::map<std::string, std::string> config_environment(const PinConfig& cfg) {
  char mask[32];
  std::snprintf(mask, sizeof mask, "0x%llx", static_cast<unsigned long long>(cfg.skip_mask));
  return {{kEnvCores, format_core_list(cfg.core_list)}, {kEnvSkip, mask}, {kEnvModel, model_name(cfg.model)}};
}

}  // namespace perfkit::pin
