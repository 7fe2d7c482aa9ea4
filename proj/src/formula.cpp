#include <perfkit/formula.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>

namespace perfkit::events {

struct Formula::Node {
  enum class Kind { Number, Identifier, Negate, Add, Subtract, Multiply, Divide };
  Kind kind = Kind::Number;
  double number = 0;
  std::string name;
  std::shared_ptr<const Node> lhs;
  std::shared_ptr<const Node> rhs;
};

namespace {

using NodePtr = std::shared_ptr<const Formula::Node>;
using Kind = Formula::Node::Kind;

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  NodePtr parse() {
    auto node = expression();
    skip_space();
    if (pos_ != src_.size()) fail("unexpected '" + std::string(src_.substr(pos_, 1)) + "'");
    return node;
  }

  std::vector<std::string> identifiers;

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw FormulaError("formula '" + std::string(src_) + "' at offset " + std::to_string(pos_) + ": " + what);
  }

  void skip_space() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(std::string_view token) {
    skip_space();
    if (src_.substr(pos_, token.size()) == token) {
      pos_ += token.size();
      return true;
    }
    return false;
  }

  static NodePtr binary(Kind kind, NodePtr lhs, NodePtr rhs) {
    auto n = std::make_shared<Formula::Node>();
    n->kind = kind;
    n->lhs = std::move(lhs);
    n->rhs = std::move(rhs);
    return n;
  }

  NodePtr expression() {
    auto lhs = term();
    while (true) {
      if (accept("+")) {
        lhs = binary(Kind::Add, lhs, term());
      } else if (accept("-")) {
        lhs = binary(Kind::Subtract, lhs, term());
      } else {
        return lhs;
      }
    }
  }

  NodePtr term() {
    auto lhs = unary();
    while (true) {
      if (accept("*") || accept("×")) {
        lhs = binary(Kind::Multiply, lhs, unary());
      } else if (accept("/") || accept("÷")) {
        lhs = binary(Kind::Divide, lhs, unary());
      } else {
        return lhs;
      }
    }
  }

  NodePtr unary() {
    if (accept("-")) {
      auto n = std::make_shared<Formula::Node>();
      n->kind = Kind::Negate;
      n->lhs = unary();
      return n;
    }
    return primary();
  }

  NodePtr primary() {
    skip_space();
    if (pos_ >= src_.size()) fail("unexpected end of formula");
    if (accept("(")) {
      auto inner = expression();
      if (!accept(")")) fail("missing ')'");
      return inner;
    }
    const char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      double value = 0;
      const auto [ptr, ec] = std::from_chars(src_.data() + pos_, src_.data() + src_.size(), value);
      if (ec != std::errc{}) fail("bad number");
      pos_ = static_cast<std::size_t>(ptr - src_.data());
      auto n = std::make_shared<Formula::Node>();
      n->number = value;
      return n;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      const auto begin = pos_;
      while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) ++pos_;
      auto n = std::make_shared<Formula::Node>();
      n->kind = Kind::Identifier;
      n->name = std::string(src_.substr(begin, pos_ - begin));
      if (std::find(identifiers.begin(), identifiers.end(), n->name) == identifiers.end()) {
        identifiers.push_back(n->name);
      }
      return n;
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

std::optional<double> eval(const Formula::Node& n, const Formula::Lookup& lookup) {
  switch (n.kind) {
    case Kind::Number:
      return n.number;
    case Kind::Identifier:
      return lookup(n.name);
    case Kind::Negate: {
      const auto v = eval(*n.lhs, lookup);
      if (!v) return std::nullopt;
      return -*v;
    }
    default:
      break;
  }
  const auto a = eval(*n.lhs, lookup);
  const auto b = eval(*n.rhs, lookup);
  if (!a || !b) return std::nullopt;
  switch (n.kind) {
    case Kind::Add:
      return *a + *b;
    case Kind::Subtract:
      return *a - *b;
    case Kind::Multiply:
      return *a * *b;
    case Kind::Divide:
      if (*b == 0) return std::nullopt;
      return *a / *b;
    default:
      return std::nullopt;
  }
}

}  // namespace

Formula Formula::parse(std::string_view source) {
  Parser parser(source);
  Formula f;
  f.root_ = parser.parse();
  f.source_ = std::string(source);
  f.identifiers_ = std::move(parser.identifiers);
  return f;
}

std::optional<double> Formula::evaluate(const Lookup& lookup) const {
  if (!root_) return std::nullopt;
  return eval(*root_, lookup);
}

}  // namespace perfkit::events
