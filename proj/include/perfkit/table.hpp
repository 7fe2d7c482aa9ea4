#pragma once

#include <perfkit/error.hpp>

#include <optional>
#include <string>
#include <vector>

namespace perfkit {

class TableError : public Error {
 public:
  using Error::Error;
};

// Bordered table with every cell centered in a column two characters wider
// than its widest entry. Rows must have as many cells as there are headers.
std::string render_table(const std::vector<std::string>& headers, const std::vector<std::vector<std::string>>& rows);

// Six significant digits, "%g" style; undefined values render as "-".
std::string format_number(double value);
std::string format_number(const std::optional<double>& value);

}  // namespace perfkit
