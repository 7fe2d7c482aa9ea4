#include <perfkit/cli.hpp>

#include <perfkit/backend.hpp>
#include <perfkit/features.hpp>
#include <perfkit/pin.hpp>
#include <perfkit/render.hpp>
#include <perfkit/table.hpp>

#include <CLI11.hpp>

#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <ostream>
#include <sstream>

#ifndef PERFKIT_PIN_LIB_PATH
#define PERFKIT_PIN_LIB_PATH ""
#endif

namespace perfkit::cli {

namespace {

const std::string kRule(61, '-');

std::string pad(const std::string& label, std::size_t width) {
  return label.size() >= width ? label : label + std::string(width - label.size(), ' ');
}

struct GlobalOptions {
  std::string backend;
  std::string dump;
  std::string msr;
  double sim_time = 1.0;
};

BackendConfig backend_config(const GlobalOptions& g) {
  auto cfg = backend_from_environment();
  if (g.backend == "fixture") cfg.kind = BackendConfig::Kind::Fixture;
  if (g.backend == "live") cfg.kind = BackendConfig::Kind::Live;
  if (!g.dump.empty()) cfg.cpuid_dump = g.dump;
  if (!g.msr.empty()) cfg.msr_fixture = g.msr;
  return cfg;
}

// Everything after "--", or the first positional and what follows it.
std::vector<std::string> command_of(const CLI::App& sub, bool separated, const std::vector<std::string>& tail) {
  auto cmd = sub.remaining();
  if (separated) {
    if (!cmd.empty()) throw CLI::ValidationError(sub.get_name(), "unexpected arguments before '--'");
    return tail;
  }
  return cmd;
}

std::vector<std::string> event_names(const events::EventSetSpec& set) {
  std::vector<std::string> names;
  std::vector<std::string> slots;
  auto add = [&](const events::Assignment& a) {
    if (std::find(slots.begin(), slots.end(), a.slot.id) != slots.end()) return;
    slots.push_back(a.slot.id);
    names.push_back(a.event.name);
  };
  for (const auto& a : set.arch->fixed_assignments()) add(a);
  for (const auto& a : set.assignments) add(a);
  return names;
}

events::MeasurementResult restrict_to(const events::MeasurementResult& r, const std::vector<std::string>& names) {
  events::MeasurementResult out;
  out.cores = r.cores;
  out.events = names;
  out.runtime_s = r.runtime_s;
  out.multiplexed = r.multiplexed;
  out.partial = r.partial;
  out.error = r.error;
  out.counts.assign(r.cores.size(), std::vector<std::optional<double>>(names.size()));
  for (std::size_t e = 0; e < names.size(); ++e) {
    const auto it = std::find(r.events.begin(), r.events.end(), names[e]);
    if (it == r.events.end()) continue;
    const auto src = static_cast<std::size_t>(it - r.events.begin());
    for (std::size_t c = 0; c < r.cores.size(); ++c) out.counts[c][e] = r.counts[c][src];
  }
  return out;
}

std::string format_clock(double hz) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f GHz", hz / 1e9);
  return buf;
}

std::filesystem::path find_pin_library() {
  if (const char* p = std::getenv(kEnvPinLibrary); p && *p) return p;
  std::error_code ec;
  const auto self = std::filesystem::read_symlink("/proc/self/exe", ec);
  if (!ec) {
    const auto beside = self.parent_path() / "libperfkit_pin.so";
    if (std::filesystem::exists(beside)) return beside;
  }
  return PERFKIT_PIN_LIB_PATH;
}

std::string make_result_path() {
  const char* tmp = std::getenv("TMPDIR");
  std::string templ = std::string(tmp && *tmp ? tmp : "/tmp") + "/perfkit-marker-XXXXXX";
  std::vector<char> buf(templ.begin(), templ.end());
  buf.push_back('\0');
  const int fd = mkstemp(buf.data());
  if (fd < 0) throw Error("cannot create marker result file in " + templ);
  ::close(fd);
  return buf.data();
}

// --- topology ---------------------------------------------------------------

int run_topology(const GlobalOptions& g, bool extended, bool art, std::ostream& out) {
  const auto topo = load_topology(backend_config(g));
  out << topo::render_text(topo, extended);
  if (art) out << topo::render_ascii_art(topo);
  for (const auto& w : topo.warnings) out << "warning: " << w << '\n';
  return 0;
}

// --- perfctr ----------------------------------------------------------------

struct PerfctrOptions {
  std::string cores;
  std::vector<std::string> groups;
  bool marker = false;
  double slice_ms = 0;
  std::vector<std::string> command;
};

void render_set(const events::EventSetSpec& set, const events::MeasurementResult& all, double clock_hz,
                std::ostream& out) {
  auto r = events::derive_metrics(events::metrics_for(set), restrict_to(all, event_names(set)), clock_hz);
  out << render_result(r);
}

int run_marker(const PerfctrOptions& o, const BackendConfig& backend, const topo::TopologyMap& topo,
               const events::EventSetSpec& set, const std::vector<events::OsId>& cores, std::ostream& out,
               std::ostream& err) {
  const auto path = make_result_path();
  std::filesystem::remove(path);
  auto env = backend_environment(backend);
  env[marker::kEnvResultFile] = path;
  env[marker::kEnvEvents] = o.groups.front();
  env[marker::kEnvCores] = pin::format_core_list(cores);
  out.flush();
  const int status = pin::run_command(o.command, env);
  if (!std::filesystem::exists(path)) {
    err << "perfctr: the target wrote no marker results\n";
    return status;
  }
  const auto file = marker::load_region_file(path);
  std::filesystem::remove(path);
  for (const auto& w : file.warnings) err << "warning: " << w << '\n';
  for (const auto& block : file.blocks) {
    out << "Region: " << block.name << '\n';
    out << render_result(region_result(block, set, cores, topo.clock_hz));
  }
  return status;
}

int run_perfctr(const GlobalOptions& g, const PerfctrOptions& o, std::ostream& out, std::ostream& err) {
  if (o.groups.empty()) throw CLI::ValidationError("perfctr", "an event group or event string is required (-g)");
  if (o.command.empty()) throw CLI::ValidationError("perfctr", "no command given");
  if (o.marker && o.slice_ms > 0) throw CLI::ValidationError("perfctr", "-m and -x cannot be combined");
  if (o.groups.size() > 1 && !(o.slice_ms > 0)) {
    throw CLI::ValidationError("perfctr", "several event sets need multiplexing (-x)");
  }
  if (o.marker && o.groups.size() > 1) throw CLI::ValidationError("perfctr", "marker mode takes one event set");

  const auto backend = backend_config(g);
  const auto topo = load_topology(backend);
  const auto& arch = events::architecture_for(topo.signature);
  std::vector<events::EventSetSpec> sets;
  for (const auto& s : o.groups) sets.push_back(events::parse_event_string(s, arch));
  const auto cores = pin::parse_core_list(o.cores);
  for (const auto c : cores) {
    if (c >= topo.threads.size()) throw events::EventError("core " + std::to_string(c) + " is not in the topology");
  }

  out << perfctr_header(topo);
  if (o.marker) {
    out << "Measuring group " << sets.front().label() << '\n' << kRule << '\n';
    return run_marker(o, backend, topo, sets.front(), cores, out, err);
  }

  auto access = open_msr(backend, topo, arch.register_map());
  const auto env = std::map<std::string, std::string>{};
  events::MeasurementResult result;
  int status = 0;
  out.flush();
  if (sets.size() == 1) {
    const auto handle = events::program(sets.front(), cores, topo, *access.backend);
    events::Measurement m(handle, *access.timeline);
    m.start();
    status = pin::run_command(o.command, env);
    if (access.fixture) access.fixture->advance(g.sim_time);
    result = m.stop();
  } else if (access.fixture) {
    status = pin::run_command(o.command, env);
    result = events::multiplex(sets, cores, topo, o.slice_ms / 1e3, g.sim_time, *access.backend, *access.timeline);
  } else {
    events::Multiplexer mux(sets, cores, topo, *access.backend, *access.timeline);
    status = pin::run_command(o.command, env, [&] { mux.step(o.slice_ms / 1e3); });
    if (mux.elapsed() == 0) mux.step(o.slice_ms / 1e3);
    result = mux.result();
  }
  if (result.partial) err << "warning: incomplete measurement: " << result.error << '\n';
  if (result.multiplexed) err << "warning: counts extrapolated from time-sliced measurement\n";
  for (const auto& set : sets) {
    out << "Measuring group " << set.label() << '\n' << kRule << '\n';
    render_set(set, result, topo.clock_hz, out);
  }
  return status;
}

// --- pin --------------------------------------------------------------------

int run_pin(const std::string& cores, const std::string& model, const std::string& mask,
            const std::vector<std::string>& command, std::ostream& err) {
  if (command.empty()) throw CLI::ValidationError("pin", "no command given");
  const auto m = model.empty() ? std::optional(pin::Model::None) : pin::parse_model(model);
  if (!m) throw CLI::ValidationError("pin", "unknown threading model '" + model + "'");
  std::vector<std::string> warnings;
  auto list = pin::parse_core_list(cores, &warnings);
  for (const auto& w : warnings) err << "warning: " << w << '\n';
  const auto explicit_mask = mask.empty() ? std::nullopt : std::optional(pin::parse_skip_mask(mask));
  const auto cfg = pin::make_config(std::move(list), *m, explicit_mask);
  try {
    return pin::launch(cfg, command, find_pin_library(), [&](const std::string& w) { err << "warning: " << w << '\n'; });
  } catch (const pin::PinError& e) {
    const std::string what = e.what();
    if (what.rfind("executable not found", 0) == 0) {
      err << "pin: " << what << '\n';
      return 127;
    }
    throw;
  }
}

// --- features ---------------------------------------------------------------

int run_features(const GlobalOptions& g, unsigned core, const std::string& enable, const std::string& disable,
                 std::ostream& out) {
  if (!enable.empty() && !disable.empty()) throw CLI::ValidationError("features", "-e and -d are exclusive");
  const auto backend = backend_config(g);
  const auto topo = load_topology(backend);
  const auto& table = features::table_for(topo.signature);
  if (core >= topo.threads.size()) throw features::FeatureError("core " + std::to_string(core) + " is not in the topology");
  msr::RegisterMap registers;
  registers.add(table.reg, table.name);
  auto access = open_msr(backend, topo, registers);
  std::optional<std::pair<std::string, features::State>> changed;
  if (!enable.empty() || !disable.empty()) {
    const auto& name = enable.empty() ? disable : enable;
    const auto* flag = table.find(name);
    const auto state = features::toggle(core, name, !enable.empty(), *access.backend, table);
    changed.emplace(flag ? flag->key : name, state);
  }
  out << features::render_report(topo.cpu_name, core, features::report(core, *access.backend, table));
  if (changed) out << changed->first << ":  " << features::state_name(changed->second) << '\n';
  return 0;
}

}  // namespace

std::string perfctr_header(const topo::TopologyMap& topo) {
  std::ostringstream out;
  out << kRule << '\n';
  out << pad("CPU type:", 16) << topo.cpu_name << '\n';
  out << pad("CPU clock:", 16) << format_clock(topo.clock_hz) << '\n';
  out << kRule << '\n';
  return out.str();
}

std::string render_result(const events::MeasurementResult& r) {
  std::vector<std::string> headers{"Event"};
  for (const auto c : r.cores) headers.push_back("core " + std::to_string(c));
  std::vector<std::vector<std::string>> rows;
  for (std::size_t e = 0; e < r.events.size(); ++e) {
    std::vector<std::string> row{r.events[e]};
    for (std::size_t c = 0; c < r.cores.size(); ++c) row.push_back(format_number(r.counts[c][e]));
    rows.push_back(std::move(row));
  }
  std::string text = render_table(headers, rows);
  if (!r.metric_names.empty()) {
    headers.front() = "Metric";
    rows.clear();
    for (std::size_t m = 0; m < r.metric_names.size(); ++m) {
      std::vector<std::string> row{r.metric_names[m]};
      for (std::size_t c = 0; c < r.cores.size(); ++c) row.push_back(format_number(r.metrics[c][m]));
      rows.push_back(std::move(row));
    }
    text += render_table(headers, rows);
  }
  return text;
}

events::MeasurementResult region_result(const marker::RegionBlock& block, const events::EventSetSpec& set,
                                        const std::vector<events::OsId>& cores, double clock_hz) {
  events::MeasurementResult r;
  r.cores = cores;
  r.events = event_names(set);
  r.counts.assign(cores.size(), std::vector<std::optional<double>>(r.events.size()));
  for (const auto& row : block.rows) {
    const auto it = std::find(cores.begin(), cores.end(), row.os_id);
    if (it == cores.end()) continue;
    auto& counts = r.counts[static_cast<std::size_t>(it - cores.begin())];
    for (std::size_t e = 0; e < r.events.size(); ++e) {
      if (const auto v = row.count(r.events[e])) counts[e] = counts[e].value_or(0.0) + static_cast<double>(*v);
    }
  }
  r.runtime_s = events::runtimes(r, clock_hz, 0.0);
  return events::derive_metrics(events::metrics_for(set), std::move(r), clock_hz);
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hardware performance counter, topology, pinning and feature tools", "perfkit"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--backend", g.backend, "Where hardware state comes from")
      ->check(CLI::IsMember({"live", "fixture"}));
  app.add_option("--dump", g.dump, "Recorded cpuid dump");
  app.add_option("--msr", g.msr, "MSR fixture for the fixture backend");
  app.add_option("--sim-time", g.sim_time, "Simulated seconds a wrapped command takes on the fixture backend")
      ->check(CLI::PositiveNumber);

  auto* topology = app.add_subcommand("topology", "Thread and cache topology");
  bool extended = false;
  bool art = false;
  topology->add_flag("-c", extended, "Extended cache parameters");
  topology->add_flag("-g", art, "ASCII art overview");

  auto* perfctr = app.add_subcommand("perfctr", "Count hardware events while a command runs");
  PerfctrOptions po;
  perfctr->prefix_command();
  perfctr->add_option("-c", po.cores, "Core list, e.g. 0-3")->required();
  perfctr->add_option("-g", po.groups, "Event group or event string; repeat for multiplexing")->allow_extra_args(false);
  perfctr->add_flag("-m", po.marker, "Marker mode: the command reports named regions itself");
  perfctr->add_option("-x", po.slice_ms, "Multiplex slice in milliseconds")->check(CLI::PositiveNumber);

  auto* pin_cmd = app.add_subcommand("pin", "Run a command with its threads pinned");
  std::string pin_cores;
  std::string pin_model;
  std::string pin_mask;
  pin_cmd->prefix_command();
  pin_cmd->add_option("-c", pin_cores, "Core list in pinning order")->required();
  pin_cmd->add_option("-t", pin_model, "Threading model: posix, intel or gnu");
  pin_cmd->add_option("-s", pin_mask, "Hexadecimal skip mask over thread creations");

  auto* feat = app.add_subcommand("features", "Show or toggle processor features");
  unsigned feature_core = 0;
  std::string enable;
  std::string disable;
  feat->add_option("-c", feature_core, "Core to inspect");
  feat->add_option("-e", enable, "Feature to enable");
  feat->add_option("-d", disable, "Feature to disable");

  const auto sep = std::find(args.begin(), args.end(), std::string("--"));
  const std::vector<std::string> tail(sep == args.end() ? sep : sep + 1, args.end());
  std::vector<std::string> reversed(std::make_reverse_iterator(sep), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "perfkit: " << e.what() << '\n';
    return 2;
  }

  try {
    if (topology->parsed()) return run_topology(g, extended, art, out);
    if (perfctr->parsed()) {
      po.command = command_of(*perfctr, sep != args.end(), tail);
      return run_perfctr(g, po, out, err);
    }
    if (pin_cmd->parsed()) return run_pin(pin_cores, pin_model, pin_mask, command_of(*pin_cmd, sep != args.end(), tail), err);
    if (feat->parsed()) return run_features(g, feature_core, enable, disable, out);
  } catch (const CLI::ParseError& e) {
    err << "perfkit: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    out.flush();
    err << "perfkit: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace perfkit::cli
