#pragma once

#include <perfkit/error.hpp>

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace perfkit::events {

class FormulaError : public Error {
 public:
  using Error::Error;
};

// Arithmetic over numeric literals and identifiers. Operators: + - * /,
// the typographic forms × and ÷, unary minus and parentheses.
//
// Evaluation yields nothing when an identifier is unbound or a divisor is
// zero, so a metric over missing or idle counters is undefined rather than
// an error.
class Formula {
 public:
  using Lookup = std::function<std::optional<double>(std::string_view)>;

  static Formula parse(std::string_view source);

  std::optional<double> evaluate(const Lookup& lookup) const;
  const std::vector<std::string>& identifiers() const { return identifiers_; }
  const std::string& source() const { return source_; }

  struct Node;

 private:
  std::string source_;
  std::shared_ptr<const Node> root_;
  std::vector<std::string> identifiers_;
};

}  // namespace perfkit::events
