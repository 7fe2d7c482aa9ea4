#include "support.hpp"

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace perfkit::testing {

std::filesystem::path fixture(const std::string& name) { return std::filesystem::path(PERFKIT_FIXTURE_DIR) / name; }
std::filesystem::path golden_path(const std::string& name) { return std::filesystem::path(PERFKIT_GOLDEN_DIR) / name; }
std::filesystem::path bin(const std::string& name) { return std::filesystem::path(PERFKIT_BIN_DIR) / name; }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

topo::TopologyMap topology(const std::string& dump_name) {
  return topo::build_topology(topo::load_dump(fixture(dump_name)));
}

namespace {

std::string drain(int fd) {
  std::string s;
  char buf[4096];
  for (;;) {
    const auto n = ::read(fd, buf, sizeof buf);
    if (n <= 0) break;
    s.append(buf, static_cast<std::size_t>(n));
  }
  return s;
}

}  // namespace

ProcessResult run_process(const std::vector<std::string>& argv, const std::map<std::string, std::string>& env) {
  TempDir dir;
  const auto out_path = dir.path() / "out";
  const auto err_path = dir.path() / "err";
  const pid_t pid = fork();
  if (pid < 0) throw std::runtime_error("fork failed");
  if (pid == 0) {
    const int out = ::open(out_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0600);
    const int err = ::open(err_path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0600);
    dup2(out, 1);
    dup2(err, 2);
    for (const auto& [k, v] : env) setenv(k.c_str(), v.c_str(), 1);
    std::vector<char*> args;
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);
    execvp(args[0], args.data());
    _exit(127);
  }
  int status = 0;
  waitpid(pid, &status, 0);
  ProcessResult r;
  r.status = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
  const int out = ::open(out_path.c_str(), O_RDONLY);
  const int err = ::open(err_path.c_str(), O_RDONLY);
  r.out = drain(out);
  r.err = drain(err);
  ::close(out);
  ::close(err);
  return r;
}

ProcessResult run_perfkit(const std::vector<std::string>& args, const std::map<std::string, std::string>& env) {
  std::vector<std::string> argv{bin("perfkit").string()};
  argv.insert(argv.end(), args.begin(), args.end());
  return run_process(argv, env);
}

FixtureMachine::FixtureMachine(const std::string& dump_name, const msr::RegisterMap& registers)
    : topo(topology(dump_name)), msr(std::make_unique<msr::FixtureMsrBackend>(registers, topo.socket_of_os())) {}

std::string drop_lines(const std::string& text, const std::string& prefix) {
  std::string out;
  for (const auto& l : lines(text)) {
    if (l.rfind(prefix, 0) != 0) out += l + '\n';
  }
  return out;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

double rel_error(double got, double want) { return std::fabs(got - want) / std::fabs(want); }

bool same_sig_figs(double got, double want, int n) { return rel_error(got, want) <= 5.0 * std::pow(10.0, -n); }

TempDir::TempDir() {
  std::string templ = (std::filesystem::temp_directory_path() / "perfkit-test-XXXXXX").string();
  if (!mkdtemp(templ.data())) throw std::runtime_error("mkdtemp failed");
  path_ = templ;
}

TempDir::~TempDir() {
  if (path_.empty()) return;
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

}  // namespace perfkit::testing
