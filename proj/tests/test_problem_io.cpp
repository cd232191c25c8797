#include <gtest/gtest.h>

#include <string>

#include "fixtures.hpp"

using namespace opweigh;

namespace {

std::string input_error(const std::string& text) {
    try {
        parse_problem(text);
    } catch (const InputError& e) {
        return e.what();
    }
    return "";
}

} // namespace

TEST(ProblemIo, ParsesShippedWorkedInstance) {
    const Problem p = load_problem(OPWEIGH_PROBLEMS "/twod_worked.json");
    EXPECT_EQ(p.family, fixtures::Worked2D{}.family());
    EXPECT_EQ(p.R0.value(), 1.0);
    EXPECT_EQ(p.bracket.lo, -3.0);
    EXPECT_EQ(p.bracket.hi, -0.5);
}

TEST(ProblemIo, FlatAndNestedMatricesAgree) {
    const Problem nested = parse_problem(
        R"({"dim": 2, "L": [[[1, 2], [3, 4]]], "Q": [[1, 0]], "Qdag": [[0, 1]], "bracket": [0, 1]})");
    const Problem flat =
        parse_problem(R"({"dim": 2, "L": [[1, 2, 3, 4]], "Q": [[1, 0]], "Qdag": [[0, 1]], "bracket": [0, 1]})");
    EXPECT_EQ(nested.family, flat.family);
    EXPECT_EQ(nested.family.base()(0.0).L(0, 1), 2.0);
    EXPECT_TRUE(nested.family.pert().is_zero());
    EXPECT_EQ(nested.R0.value(), 1.0);
}

TEST(ProblemIo, SchemaErrors) {
    EXPECT_EQ(input_error("[1, 2]"), "problem must be a JSON object");
    EXPECT_EQ(input_error(R"({"dim": 0})"), "dim: expected a positive integer");
    EXPECT_EQ(input_error(R"({"dim": 1, "Q": [[1]], "Qdag": [[1]], "bracket": [0, 1]})"), "missing field 'L'");
    EXPECT_EQ(input_error(R"({"dim": 1, "L": [[[1]]], "Q": [[1]], "Qdag": [[1]]})"), "missing field 'bracket'");
    EXPECT_EQ(input_error(R"({"dim": 1, "L": [[[1]]], "Q": [[1]], "Qdag": [[1]], "bracket": [1, 0]})"),
              "bracket: expected lo < hi");
    EXPECT_EQ(input_error(R"({"dim": 2, "L": [[1, 2, 3]], "Q": [[1, 0]], "Qdag": [[0, 1]], "bracket": [0, 1]})"),
              "L[0]: expected 4 entries");
    EXPECT_EQ(input_error(R"({"dim": 1, "L": [[["x"]]], "Q": [[1]], "Qdag": [[1]], "bracket": [0, 1]})"),
              "L[0]: expected a number");
    EXPECT_EQ(input_error("{").rfind("malformed JSON", 0), 0u);
    EXPECT_THROW(parse_problem(R"({"dim": 1, "L": [[[1]]], "Q": [[1]], "Qdag": [[1]], "R0": 0, "bracket": [0, 1]})"),
                 InputError);
    EXPECT_THROW(load_problem("/nonexistent/problem.json"), InputError);
}
