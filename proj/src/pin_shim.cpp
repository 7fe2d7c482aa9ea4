// Preloaded into the target process. Binds the main thread at load time and
// every thread created through pthread_create afterwards, following the
// configuration the launcher placed in the environment.

#include <perfkit/pin.hpp>

#include <dlfcn.h>
#include <pthread.h>

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <mutex>

namespace {

using perfkit::pin::Decision;
using perfkit::pin::PinConfig;
using perfkit::pin::PinState;

using CreateFn = int (*)(pthread_t*, const pthread_attr_t*, void* (*)(void*), void*);

struct ShimState {
  PinConfig config;
  PinState state;
  bool active = false;
  bool quiet = false;
  bool verbose = false;
  std::mutex mutex;
};

// Function-local so it is constructed before the load-time constructor uses it.
ShimState& shim() {
  static ShimState s;
  return s;
}

void note(const char* kind, const std::string& msg) {
  std::fprintf(stderr, "perfkit-pin: %s%s\n", kind, msg.c_str());
}

void warn(const std::string& msg) {
  if (!shim().quiet) note("warning: ", msg);
}

CreateFn real_create() {
  static CreateFn fn = reinterpret_cast<CreateFn>(dlsym(RTLD_NEXT, "pthread_create"));
  return fn;
}

struct Trampoline {
  void* (*start)(void*);
  void* arg;
  unsigned core;
};

void* trampoline(void* p) {
  const auto t = *static_cast<Trampoline*>(p);
  delete static_cast<Trampoline*>(p);
  if (const auto err = perfkit::pin::bind_current_thread(t.core)) warn(*err);
  return t.start(t.arg);
}

__attribute__((constructor)) void perfkit_pin_init() {
  auto& s = shim();
  s.quiet = std::getenv(perfkit::pin::kEnvQuiet) != nullptr;
  s.verbose = std::getenv(perfkit::pin::kEnvVerbose) != nullptr;
  try {
    s.config = perfkit::pin::config_from_environment([](const char* k) { return std::getenv(k); });
  } catch (const std::exception& e) {
    warn(std::string("ignoring pin configuration: ") + e.what());
    return;
  }
  if (s.config.core_list.empty()) return;
  s.state = perfkit::pin::pin_initial(s.config, warn);
  s.active = true;
  if (s.verbose) note("", "main -> " + std::to_string(s.config.core_list.front()));
}

}  // namespace

extern "C" int pthread_create(pthread_t* thread, const pthread_attr_t* attr, void* (*start)(void*), void* arg) {
  const auto create = real_create();
  if (!create) return EAGAIN;
  auto& s = shim();
  if (!s.active) return create(thread, attr, start, arg);

  Decision d;
  std::uint64_t ordinal = 0;
  {
    std::lock_guard lock(s.mutex);
    ordinal = s.state.creation_counter;
    d = perfkit::pin::decide(ordinal, s.config, s.state);
    s.state = perfkit::pin::advance(s.state, d);
  }
  if (d.skip) {
    if (s.verbose) note("", "thread " + std::to_string(ordinal) + " skipped");
    return create(thread, attr, start, arg);
  }
  if (d.wrapped) warn("core list exhausted, thread " + std::to_string(ordinal) + " reuses core " + std::to_string(d.os_id));
  if (s.verbose) note("", "thread " + std::to_string(ordinal) + " -> " + std::to_string(d.os_id));
  auto* t = new Trampoline{start, arg, d.os_id};
  const int rc = create(thread, attr, trampoline, t);
  if (rc != 0) delete t;
  return rc;
}
