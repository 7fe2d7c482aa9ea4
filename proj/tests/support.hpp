#pragma once

#include <perfkit/backend.hpp>
#include <perfkit/events.hpp>
#include <perfkit/msr.hpp>
#include <perfkit/topology.hpp>

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace perfkit::testing {

std::filesystem::path fixture(const std::string& name);
std::filesystem::path golden_path(const std::string& name);
std::filesystem::path bin(const std::string& name);
std::string read_file(const std::filesystem::path& path);

topo::TopologyMap topology(const std::string& dump_name);

struct ProcessResult {
  int status = -1;
  std::string out;
  std::string err;
};

// Runs argv with extra environment variables, capturing both streams.
ProcessResult run_process(const std::vector<std::string>& argv, const std::map<std::string, std::string>& env = {});

// The perfkit executable with --backend fixture and the given dump.
ProcessResult run_perfkit(const std::vector<std::string>& args, const std::map<std::string, std::string>& env = {});

// A fixture backend backed by the topology of a dump.
struct FixtureMachine {
  topo::TopologyMap topo;
  std::unique_ptr<msr::FixtureMsrBackend> msr;

  FixtureMachine(const std::string& dump_name, const msr::RegisterMap& registers);
};

// Removes every line starting with `prefix`.
std::string drop_lines(const std::string& text, const std::string& prefix);
std::vector<std::string> lines(const std::string& text);

// Relative error |got - want| / |want|.
double rel_error(double got, double want);
// Agreement to n significant figures: relative error at most 5 * 10^-n.
bool same_sig_figs(double got, double want, int n);

class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(TempDir&& other) noexcept : path_(std::move(other.path_)) { other.path_.clear(); }
  TempDir& operator=(TempDir&& other) noexcept {
    std::swap(path_, other.path_);
    return *this;
  }
  TempDir(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace perfkit::testing
