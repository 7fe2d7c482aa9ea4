#include <perfkit/render.hpp>

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

namespace perfkit::topo {

namespace {

const std::string kRule(61, '-');
const std::string kStars(61, '*');

std::string pad_right(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::string centered(const std::string& s, std::size_t width) {
  if (s.size() >= width) return s;
  const auto pad = width - s.size();
  const auto left = (pad + 1) / 2;
  return std::string(left, ' ') + s + std::string(pad - left, ' ');
}

std::string id_list(const std::vector<OsId>& ids) {
  std::string out = "(";
  for (const auto id : ids) out += " " + std::to_string(id);
  return out + " )";
}

bool reported(const CacheDescriptor& c) { return c.kind != CacheKind::Instruction; }

}  // namespace

std::string format_cache_size(std::uint64_t bytes, bool with_space) {
  const char* sep = with_space ? " " : "";
  char buf[64];
  if (bytes >= 1024 * 1024) {
    if (bytes % (1024 * 1024) == 0) {
      std::snprintf(buf, sizeof buf, "%llu%sMB", static_cast<unsigned long long>(bytes / (1024 * 1024)), sep);
    } else {
      std::snprintf(buf, sizeof buf, "%.1f%sMB", static_cast<double>(bytes) / (1024.0 * 1024.0), sep);
    }
  } else if (bytes % 1024 == 0) {
    std::snprintf(buf, sizeof buf, "%llu%skB", static_cast<unsigned long long>(bytes / 1024), sep);
  } else {
    std::snprintf(buf, sizeof buf, "%llu%sB", static_cast<unsigned long long>(bytes), sep);
  }
  return buf;
}

std::string render_text(const TopologyMap& topo, bool extended) {
  std::ostringstream out;
  char clock[32];
  std::snprintf(clock, sizeof clock, "%.2f GHz", topo.clock_hz / 1e9);

  out << kRule << '\n';
  out << pad_right("CPU name:", 16) << topo.cpu_name << '\n';
  out << pad_right("CPU clock:", 16) << clock << '\n';
  out << '\n';
  out << kStars << '\n' << "Hardware Thread Topology\n" << kStars << '\n';
  out << pad_right("Sockets:", 24) << topo.sockets << '\n';
  out << pad_right("Cores per socket:", 24) << topo.cores_per_socket << '\n';
  out << pad_right("Threads per core:", 24) << topo.threads_per_core << '\n';
  out << kRule << '\n';
  out << pad_right("HWThread", 16) << pad_right("Thread", 16) << pad_right("Core", 16) << "Socket\n";
  for (const auto& t : topo.threads) {
    out << pad_right(std::to_string(t.os_id), 16) << pad_right(std::to_string(t.smt_id), 16)
        << pad_right(std::to_string(t.core_id), 16) << t.socket_id << '\n';
  }
  out << kRule << '\n';
  std::set<std::uint32_t> sockets;
  for (const auto& t : topo.threads) sockets.insert(t.socket_id);
  for (const auto s : sockets) out << "Socket " << s << ": " << id_list(topo.socket_members(s)) << '\n';
  out << kRule << '\n';
  out << '\n';
  out << kStars << '\n' << "Cache Topology\n" << kStars << '\n';
  for (const auto& c : topo.caches) {
    if (!reported(c)) continue;
    out << pad_right("Level:", 9) << c.level << '\n';
    out << pad_right("Size:", 9) << format_cache_size(c.size_bytes) << '\n';
    out << pad_right("Type:", 9) << cache_kind_name(c.kind) << '\n';
    if (extended) {
      out << pad_right("Associativity:", 17) << c.associativity << '\n';
      out << pad_right("Number of sets:", 17) << c.sets << '\n';
      out << pad_right("Cache line size:", 17) << c.line_size << '\n';
      out << (c.inclusive ? "Inclusive cache" : "Non Inclusive cache") << '\n';
    }
    out << "Shared among " << c.threads_sharing << " threads\n";
    out << pad_right("Cache groups:", 16);
    for (std::size_t g = 0; g < c.groups.size(); ++g) out << (g ? " " : "") << id_list(c.groups[g]);
    out << '\n';
    out << kRule << '\n';
  }
  return out.str();
}

std::string render_ascii_art(const TopologyMap& topo) {
  std::ostringstream out;
  std::set<std::uint32_t> sockets;
  for (const auto& t : topo.threads) sockets.insert(t.socket_id);

  for (const auto socket : sockets) {
    // Columns are physical cores in core-id order; each lists its threads by SMT id.
    std::map<std::uint32_t, std::vector<const HWThread*>> cores;
    for (const auto& t : topo.threads) {
      if (t.socket_id == socket) cores[t.core_id].push_back(&t);
    }
    std::vector<std::string> core_labels;
    std::map<std::uint32_t, std::size_t> column_of_core;
    for (auto& [core, members] : cores) {
      std::sort(members.begin(), members.end(), [](auto* x, auto* y) { return x->smt_id < y->smt_id; });
      std::string label;
      for (const auto* m : members) label += (label.empty() ? "" : "  ") + std::to_string(m->os_id);
      column_of_core[core] = core_labels.size();
      core_labels.push_back(label);
    }

    struct Span {
      std::size_t columns;
      std::string label;
    };
    std::vector<std::vector<Span>> cache_rows;
    for (const auto& c : topo.caches) {
      if (!reported(c)) continue;
      std::vector<std::pair<std::size_t, Span>> spans;
      for (const auto& group : c.groups) {
        std::set<std::size_t> cols;
        for (const auto os : group) {
          const auto& t = topo.thread(os);
          if (t.socket_id == socket) cols.insert(column_of_core.at(t.core_id));
        }
        if (cols.empty()) continue;
        spans.push_back({*cols.begin(), Span{cols.size(), format_cache_size(c.size_bytes, false)}});
      }
      std::sort(spans.begin(), spans.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
      std::vector<Span> row;
      for (auto& [first, span] : spans) row.push_back(std::move(span));
      cache_rows.push_back(std::move(row));
    }

    std::size_t inner = 0;
    for (const auto& l : core_labels) inner = std::max(inner, l.size());
    for (const auto& row : cache_rows) {
      for (const auto& s : row) {
        if (s.columns == 1) inner = std::max(inner, s.label.size());
      }
    }
    inner += 2;
    const std::size_t box = inner + 2;

    auto render_row = [&](const std::vector<Span>& row) {
      std::string top = "|";
      std::string mid = "|";
      for (const auto& s : row) {
        const auto width = s.columns * box + (s.columns - 1);
        top += " +" + std::string(width - 2, '-') + "+";
        mid += " |" + centered(s.label, width - 2) + "|";
      }
      top += " |";
      mid += " |";
      return top + '\n' + mid + '\n' + top + '\n';
    };

    std::vector<Span> thread_row;
    for (const auto& l : core_labels) thread_row.push_back(Span{1, l});
    const auto row_width = core_labels.size() * box + (core_labels.size() - 1) + 4;
    const std::string border = "+" + std::string(row_width - 2, '-') + "+";
    out << border << '\n';
    out << render_row(thread_row);
    for (const auto& row : cache_rows) out << render_row(row);
    out << border << '\n';
  }
  return out.str();
}

}  // namespace perfkit::topo
