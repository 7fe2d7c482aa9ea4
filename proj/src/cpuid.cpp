#include <perfkit/cpuid.hpp>

#include "text.hpp"

#include <cpuid.h>
#include <sched.h>
#include <unistd.h>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace perfkit::topo {

std::optional<Registers> CpuidDump::query(std::size_t os_id, std::uint32_t leaf,
                                          std::uint32_t subleaf) const {
  if (os_id >= threads.size()) return std::nullopt;
  for (const auto& rec : threads[os_id]) {
    if (rec.leaf == leaf && rec.subleaf == subleaf) return rec.regs;
  }
  return std::nullopt;
}

namespace {

[[noreturn]] void fail(std::size_t line_no, const std::string& what) {
  throw DumpError("cpuid dump line " + std::to_string(line_no) + ": " + what);
}

std::uint32_t hex32(std::string_view word, std::size_t line_no) {
  const auto v = text::parse_hex(word);
  if (!v || *v > 0xFFFFFFFFull) fail(line_no, "malformed line: bad hex value '" + std::string(word) + "'");
  return static_cast<std::uint32_t>(*v);
}

}  // namespace

CpuidDump parse_dump(std::string_view input) {
  CpuidDump dump;
  std::optional<std::size_t> declared_threads;
  std::size_t line_no = 0;

  for (const auto raw : text::split_lines(input)) {
    ++line_no;
    const auto line = text::strip_comment(raw);
    if (line.empty()) continue;

    if (const auto colon = line.find(':'); colon != std::string_view::npos && !text::starts_with(line, "thread ")) {
      const auto key = text::trim(line.substr(0, colon));
      const auto value = std::string(text::trim(line.substr(colon + 1)));
      if (key == "hw_threads") {
        const auto n = text::parse_uint(value);
        if (!n || *n == 0) fail(line_no, "malformed line: hw_threads must be a positive integer");
        declared_threads = *n;
      } else if (key == "clock_hz") {
        const auto f = text::parse_double(value);
        if (!f || *f <= 0) fail(line_no, "malformed line: clock_hz must be positive");
        dump.clock_hz = *f;
      } else if (key == "vendor") {
        dump.vendor = value;
      } else if (key == "cpu_name") {
        dump.cpu_name = value;
      } else {
        fail(line_no, "malformed line: unknown header '" + std::string(key) + "'");
      }
      continue;
    }

    const auto w = text::split_words(line);
    if (w.size() != 14 || w[0] != "thread" || w[2] != "leaf" || w[4] != "subleaf" || w[6] != "a" ||
        w[8] != "b" || w[10] != "c" || w[12] != "d") {
      fail(line_no, "malformed line");
    }
    const auto os_id = text::parse_uint(w[1]);
    if (!os_id) fail(line_no, "malformed line: bad thread id");
    if (!declared_threads) fail(line_no, "malformed line: record before hw_threads header");
    if (*os_id >= *declared_threads) {
      fail(line_no, "inconsistent thread count: thread " + std::to_string(*os_id) + " but hw_threads is " +
                        std::to_string(*declared_threads));
    }
    if (dump.threads.size() <= *os_id) dump.threads.resize(*os_id + 1);
    dump.threads[*os_id].push_back(CpuidRecord{
        hex32(w[3], line_no), hex32(w[5], line_no),
        Registers{hex32(w[7], line_no), hex32(w[9], line_no), hex32(w[11], line_no), hex32(w[13], line_no)}});
  }

  if (!declared_threads) throw DumpError("cpuid dump: missing hw_threads header");
  if (dump.threads.size() != *declared_threads) {
    throw DumpError("cpuid dump: inconsistent thread count: hw_threads is " + std::to_string(*declared_threads) +
                    " but records cover " + std::to_string(dump.threads.size()) + " threads");
  }
  for (std::size_t t = 0; t < dump.threads.size(); ++t) {
    for (const std::uint32_t leaf : {0x0u, 0x1u}) {
      if (!dump.query(t, leaf)) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "cpuid dump: missing mandatory leaf 0x%x for thread %zu", leaf, t);
        throw DumpError(buf);
      }
    }
  }
  if (dump.clock_hz <= 0) throw DumpError("cpuid dump: missing clock_hz header");
  return dump;
}

CpuidDump load_dump(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DumpError("cannot open cpuid dump '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_dump(ss.str());
}

std::string format_dump(const CpuidDump& dump) {
  std::ostringstream out;
  out << "hw_threads: " << dump.threads.size() << '\n';
  char clock[64];
  std::snprintf(clock, sizeof clock, "%.0f", dump.clock_hz);
  out << "clock_hz: " << clock << '\n';
  out << "vendor: " << dump.vendor << '\n';
  out << "cpu_name: " << dump.cpu_name << '\n';
  for (std::size_t t = 0; t < dump.threads.size(); ++t) {
    for (const auto& r : dump.threads[t]) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "thread %zu leaf 0x%x subleaf 0x%x a 0x%08x b 0x%08x c 0x%08x d 0x%08x\n", t,
                    r.leaf, r.subleaf, r.regs.a, r.regs.b, r.regs.c, r.regs.d);
      out << buf;
    }
  }
  return out.str();
}

namespace {

Registers exec_cpuid(std::uint32_t leaf, std::uint32_t subleaf) {
  Registers r;
  __cpuid_count(leaf, subleaf, r.a, r.b, r.c, r.d);
  return r;
}

std::vector<CpuidRecord> probe_current_thread() {
  std::vector<CpuidRecord> records;
  auto add = [&](std::uint32_t leaf, std::uint32_t sub) {
    const auto regs = exec_cpuid(leaf, sub);
    records.push_back({leaf, sub, regs});
    return regs;
  };

  const auto max_leaf = add(0x0, 0).a;
  for (std::uint32_t leaf = 1; leaf <= max_leaf && leaf <= 0x1F; ++leaf) {
    if (leaf == 0x4) {
      for (std::uint32_t sub = 0; sub < 16; ++sub) {
        if ((add(leaf, sub).a & 0x1F) == 0) break;
      }
    } else if (leaf == 0xB || leaf == 0x1F) {
      for (std::uint32_t sub = 0; sub < 8; ++sub) {
        if (((add(leaf, sub).c >> 8) & 0xFF) == 0) break;
      }
    } else {
      add(leaf, 0);
    }
  }
  const auto max_ext = add(0x80000000, 0).a;
  for (std::uint32_t leaf = 0x80000001; leaf <= max_ext && leaf <= 0x80000008; ++leaf) add(leaf, 0);
  return records;
}

double declared_clock_hz() {
  if (std::ifstream f("/sys/devices/system/cpu/cpu0/cpufreq/cpuinfo_max_freq"); f) {
    double khz = 0;
    if (f >> khz && khz > 0) return khz * 1e3;
  }
  if (std::ifstream f("/proc/cpuinfo"); f) {
    std::string line;
    while (std::getline(f, line)) {
      if (text::starts_with(line, "cpu MHz")) {
        const auto colon = line.find(':');
        if (const auto mhz = text::parse_double(text::trim(std::string_view(line).substr(colon + 1))); mhz) {
          return *mhz * 1e6;
        }
      }
    }
  }
  return 1e9;
}

std::string vendor_string(const Registers& leaf0) {
  char v[13] = {};
  for (int i = 0; i < 4; ++i) {
    v[i] = static_cast<char>(leaf0.b >> (8 * i));
    v[4 + i] = static_cast<char>(leaf0.d >> (8 * i));
    v[8 + i] = static_cast<char>(leaf0.c >> (8 * i));
  }
  return v;
}

std::string brand_string(const std::vector<CpuidRecord>& records) {
  std::string brand;
  for (std::uint32_t leaf = 0x80000002; leaf <= 0x80000004; ++leaf) {
    for (const auto& r : records) {
      if (r.leaf != leaf) continue;
      for (const auto reg : {r.regs.a, r.regs.b, r.regs.c, r.regs.d}) {
        for (int i = 0; i < 4; ++i) {
          const char ch = static_cast<char>(reg >> (8 * i));
          if (ch) brand.push_back(ch);
        }
      }
    }
  }
  return std::string(text::trim(brand));
}

}  // namespace

CpuidDump LiveCpuidSource::collect() {
  cpu_set_t original;
  CPU_ZERO(&original);
  if (sched_getaffinity(0, sizeof original, &original) != 0) throw DumpError("live cpuid: cannot query affinity");

  // os_ids are the kernel's processor numbers, so every online processor
  // must be reachable from this thread.
  const long online = sysconf(_SC_NPROCESSORS_ONLN);
  CpuidDump dump;
  for (long cpu = 0; cpu < online && cpu < CPU_SETSIZE; ++cpu) {
    cpu_set_t one;
    CPU_ZERO(&one);
    CPU_SET(static_cast<int>(cpu), &one);
    if (sched_setaffinity(0, sizeof one, &one) != 0) {
      sched_setaffinity(0, sizeof original, &original);
      throw DumpError("live cpuid: cannot migrate to processor " + std::to_string(cpu));
    }
    dump.threads.push_back(probe_current_thread());
  }
  sched_setaffinity(0, sizeof original, &original);
  if (dump.threads.empty()) throw DumpError("live cpuid: no processor could be probed");

  dump.vendor = vendor_string(dump.threads.front().front().regs);
  dump.cpu_name = brand_string(dump.threads.front());
  if (dump.cpu_name.empty()) dump.cpu_name = "Unknown " + dump.vendor + " processor";
  dump.clock_hz = declared_clock_hz();
  return dump;
}

}  // namespace perfkit::topo
