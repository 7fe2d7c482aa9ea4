#include <perfkit/marker.h>
#include <perfkit/marker.hpp>

#include <cstdio>
#include <memory>
#include <mutex>
#include <string>

namespace {

using perfkit::marker::EnvironmentSession;
using perfkit::marker::MarkerError;

std::mutex g_mutex;
std::unique_ptr<EnvironmentSession> g_session;
bool g_initialized = false;
thread_local std::string t_last_error;

template <typename F>
int guarded(F&& f) {
  try {
    t_last_error.clear();
    return f();
  } catch (const std::exception& e) {
    t_last_error = e.what();
    std::fprintf(stderr, "perfkit-marker: %s\n", e.what());
    return -1;
  }
}

perfkit::marker::MarkerSession& current() {
  if (!g_session) throw MarkerError(g_initialized ? "marker already closed" : "marker not initialized");
  return g_session->session();
}

int non_negative(int v, const char* what) {
  if (v < 0) throw MarkerError(std::string(what) + " must not be negative");
  return v;
}

}  // namespace

extern "C" {

int perfkit_marker_init(int number_of_threads, int number_of_regions) {
  return guarded([&] {
    std::lock_guard lock(g_mutex);
    if (g_initialized) throw MarkerError("marker initialized twice");
    const auto threads = static_cast<std::uint32_t>(non_negative(number_of_threads, "number of threads"));
    const auto regions = static_cast<std::uint32_t>(non_negative(number_of_regions, "number of regions"));
    g_initialized = true;
    g_session = std::make_unique<EnvironmentSession>(threads, regions);
    return 0;
  });
}

int perfkit_marker_register_region(const char* name) {
  return guarded([&] {
    if (!name) throw MarkerError("region name is null");
    std::lock_guard lock(g_mutex);
    return static_cast<int>(current().register_region(name));
  });
}

int perfkit_marker_start_region(int thread_id, int core_id) {
  return guarded([&] {
    std::lock_guard lock(g_mutex);
    current().start_region(static_cast<std::uint32_t>(non_negative(thread_id, "thread id")),
                           static_cast<std::uint32_t>(non_negative(core_id, "core id")));
    return 0;
  });
}

int perfkit_marker_stop_region(int thread_id, int core_id, int region_id) {
  return guarded([&] {
    std::lock_guard lock(g_mutex);
    current().stop_region(static_cast<std::uint32_t>(non_negative(thread_id, "thread id")),
                          static_cast<std::uint32_t>(non_negative(core_id, "core id")),
                          static_cast<std::uint32_t>(non_negative(region_id, "region id")));
    return 0;
  });
}

int perfkit_marker_close(void) {
  return guarded([&] {
    std::lock_guard lock(g_mutex);
    current().close();
    g_session.reset();
    return 0;
  });
}

int perfkit_get_processor_id(void) { return static_cast<int>(perfkit::marker::get_processor_id()); }

const char* perfkit_marker_last_error(void) { return t_last_error.c_str(); }

}
