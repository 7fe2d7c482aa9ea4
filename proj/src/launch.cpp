#include <perfkit/pin.hpp>

#include <elf.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>

namespace perfkit::pin {

std::optional<std::filesystem::path> resolve_executable(const std::string& name) {
  if (name.empty()) return std::nullopt;
  if (name.find('/') != std::string::npos) {
    if (::access(name.c_str(), X_OK) == 0) return std::filesystem::path(name);
    return std::nullopt;
  }
  const char* path = std::getenv("PATH");
  std::string dirs = path ? path : "/usr/local/bin:/usr/bin:/bin";
  std::size_t start = 0;
  while (start <= dirs.size()) {
    auto end = dirs.find(':', start);
    if (end == std::string::npos) end = dirs.size();
    const auto dir = dirs.substr(start, end - start);
    const auto candidate = std::filesystem::path(dir.empty() ? "." : dir) / name;
    std::error_code ec;
    if (std::filesystem::is_regular_file(candidate, ec) && ::access(candidate.c_str(), X_OK) == 0) return candidate;
    start = end + 1;
  }
  return std::nullopt;
}

std::optional<bool> is_dynamically_linked(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) return std::nullopt;
  unsigned char ident[EI_NIDENT] = {};
  if (!f.read(reinterpret_cast<char*>(ident), EI_NIDENT)) return std::nullopt;
  if (std::memcmp(ident, ELFMAG, SELFMAG) != 0 || ident[EI_CLASS] != ELFCLASS64) return std::nullopt;

  f.seekg(0);
  Elf64_Ehdr eh{};
  if (!f.read(reinterpret_cast<char*>(&eh), sizeof eh)) return std::nullopt;
  for (unsigned i = 0; i < eh.e_phnum; ++i) {
    Elf64_Phdr ph{};
    f.seekg(static_cast<std::streamoff>(eh.e_phoff + static_cast<std::uint64_t>(i) * eh.e_phentsize));
    if (!f.read(reinterpret_cast<char*>(&ph), sizeof ph)) return std::nullopt;
    if (ph.p_type == PT_INTERP) return true;
  }
  return false;
}

int run_command(const std::vector<std::string>& argv, const std::map<std::string, std::string>& env,
                const std::function<void()>& poll) {
  if (argv.empty()) throw PinError("no command given");
  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);

  std::fflush(nullptr);
  const pid_t pid = ::fork();
  if (pid < 0) throw PinError(std::string("fork failed: ") + std::strerror(errno));
  if (pid == 0) {
    for (const auto& [k, v] : env) ::setenv(k.c_str(), v.c_str(), 1);
    ::execvp(args[0], args.data());
    const auto msg = "perfkit: cannot execute '" + argv[0] + "': " + std::strerror(errno) + "\n";
    [[maybe_unused]] auto n = ::write(STDERR_FILENO, msg.data(), msg.size());
    ::_exit(127);
  }

  int status = 0;
  while (true) {
    const pid_t r = ::waitpid(pid, &status, poll ? WNOHANG : 0);
    if (r == pid) break;
    if (r < 0 && errno != EINTR) throw PinError(std::string("waitpid failed: ") + std::strerror(errno));
    if (r == 0 && poll) poll();
  }
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
  return 1;
}

int launch(const PinConfig& cfg, const std::vector<std::string>& command, const std::filesystem::path& shim,
           const std::function<void(const std::string&)>& warn) {
  if (command.empty()) throw PinError("no command given");
  const auto exe = resolve_executable(command.front());
  if (!exe) throw PinError("executable not found: " + command.front());
  if (const auto dynamic = is_dynamically_linked(*exe); dynamic && !*dynamic && warn) {
    warn(exe->string() + " looks statically linked; the preload shim cannot pin its threads");
  }
  if (!std::filesystem::exists(shim)) throw PinError("pinning library not found at " + shim.string());

  auto env = config_environment(cfg);
  env["KMP_AFFINITY"] = "disabled";
  const char* preload = std::getenv("LD_PRELOAD");
  env["LD_PRELOAD"] = preload && *preload ? shim.string() + ":" + preload : shim.string();
  return run_command(command, env);
}

}  // namespace perfkit::pin
