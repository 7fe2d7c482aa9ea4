#include <perfkit/table.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace perfkit {

namespace {

std::string centered(const std::string& s, std::size_t width) {
  const auto pad = width - s.size();
  const auto left = pad / 2;
  return std::string(left, ' ') + s + std::string(pad - left, ' ');
}

}  // namespace

std::string render_table(const std::vector<std::string>& headers, const std::vector<std::vector<std::string>>& rows) {
  if (headers.empty()) throw TableError("table needs at least one column");
  std::vector<std::size_t> width(headers.size());
  for (std::size_t c = 0; c < headers.size(); ++c) width[c] = headers[c].size();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != headers.size()) {
      throw TableError("ragged table: row " + std::to_string(r) + " has " + std::to_string(rows[r].size()) +
                       " cells, expected " + std::to_string(headers.size()));
    }
    for (std::size_t c = 0; c < headers.size(); ++c) width[c] = std::max(width[c], rows[r][c].size());
  }
  for (auto& w : width) w += 2;

  std::string rule = "+";
  for (const auto w : width) rule += std::string(w, '-') + "+";
  rule += '\n';

  auto line = [&](const std::vector<std::string>& cells) {
    std::string out = "|";
    for (std::size_t c = 0; c < cells.size(); ++c) out += centered(cells[c], width[c]) + "|";
    return out + '\n';
  };

  std::string out = rule + line(headers) + rule;
  if (rows.empty()) return out;
  for (const auto& row : rows) out += line(row);
  return out + rule;
}

std::string format_number(double value) {
  if (!std::isfinite(value)) return "-";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", value);
  return buf;
}

std::string format_number(const std::optional<double>& value) { return value ? format_number(*value) : "-"; }

}  // namespace perfkit
