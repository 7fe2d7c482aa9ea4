#include <perfkit/formula.hpp>

#include <gtest/gtest.h>

#include <map>

using perfkit::events::Formula;
using perfkit::events::FormulaError;

namespace {

std::optional<double> eval(const std::string& src, const std::map<std::string, double>& vars = {}) {
  return Formula::parse(src).evaluate([&](std::string_view name) -> std::optional<double> {
    const auto it = vars.find(std::string(name));
    if (it == vars.end()) return std::nullopt;
    return it->second;
  });
}

}  // namespace

TEST(Formula, Precedence) {
  EXPECT_DOUBLE_EQ(*eval("1 + 2 * 3"), 7.0);
  EXPECT_DOUBLE_EQ(*eval("(1 + 2) * 3"), 9.0);
  EXPECT_DOUBLE_EQ(*eval("8 / 4 / 2"), 1.0);
  EXPECT_DOUBLE_EQ(*eval("10 - 4 - 3"), 3.0);
  EXPECT_DOUBLE_EQ(*eval("-2 * -3"), 6.0);
  EXPECT_DOUBLE_EQ(*eval("-(2 + 3)"), -5.0);
}

TEST(Formula, TypographicOperators) {
  EXPECT_DOUBLE_EQ(*eval("6 × 7"), 42.0);
  EXPECT_DOUBLE_EQ(*eval("84 ÷ 2"), 42.0);
}

TEST(Formula, ScientificLiterals) {
  EXPECT_DOUBLE_EQ(*eval("1.0E-06 * 2000000"), 2.0);
  EXPECT_DOUBLE_EQ(*eval("2.5e3"), 2500.0);
}

TEST(Formula, Identifiers) {
  const auto f = Formula::parse("CPU_CLK_UNHALTED_CORE / INSTR_RETIRED_ANY + runtime");
  EXPECT_EQ(f.identifiers(), (std::vector<std::string>{"CPU_CLK_UNHALTED_CORE", "INSTR_RETIRED_ANY", "runtime"}));
  EXPECT_DOUBLE_EQ(*eval("a / b", {{"a", 3}, {"b", 4}}), 0.75);
}

TEST(Formula, UndefinedResults) {
  EXPECT_FALSE(eval("1 / 0"));
  EXPECT_FALSE(eval("x + 1"));
  EXPECT_FALSE(eval("a / b", {{"a", 1}, {"b", 0}}));
}

TEST(Formula, SyntaxErrors) {
  for (const auto* bad : {"", "1 +", "(1 + 2", "1 2", "* 3", "1 $ 2", "a b"}) {
    EXPECT_THROW(Formula::parse(bad), FormulaError) << bad;
  }
}

TEST(Formula, KeepsSource) { EXPECT_EQ(Formula::parse("a+b").source(), "a+b"); }
