#include <doctest.h>

#include <string>
#include <vector>

#include "mixplat/topology.hpp"

using namespace mixplat;

namespace {

Eigen::MatrixXi grid(int rows, int cols, std::vector<int> cells)
{
    Eigen::MatrixXi m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) {
            m(i, j) = cells[static_cast<std::size_t>(i * cols + j)];
        }
    }
    return m;
}

// Reference matrices, transcribed here independently of the library copies.
const Eigen::MatrixXi kC2 = grid(5, 5, {1, 0, 0, 0, 0,
                                        1, 1, 0, 0, 0,
                                        1, 1, 1, 0, 0,
                                        1, 0, 1, 1, 0,
                                        1, 0, 0, 1, 1});
const Eigen::MatrixXi kC4 = grid(5, 5, {1, 0, 0, 0, 0,
                                        1, 1, 1, 0, 0,
                                        1, 1, 1, 1, 0,
                                        0, 0, 1, 1, 0,
                                        0, 0, 1, 1, 1});
const Eigen::MatrixXi kGsbl5 = grid(5, 6, {1, 1, 1, 0, 0, 0,
                                           1, 1, 1, 1, 0, 0,
                                           1, 0, 1, 1, 1, 0,
                                           1, 0, 0, 1, 1, 1,
                                           1, 0, 0, 0, 1, 1});
const Eigen::MatrixXi kGgpppl = grid(6, 7, {1, 1, 1, 0, 0, 0, 0,
                                            1, 1, 1, 1, 0, 0, 0,
                                            0, 0, 1, 1, 0, 0, 0,
                                            0, 0, 1, 1, 1, 0, 0,
                                            0, 0, 1, 0, 1, 1, 0,
                                            0, 0, 0, 0, 0, 1, 1});

std::vector<std::string> leaders_text(const EgoLeaderMap& m)
{
    std::vector<std::string> out;
    for (const auto& r : m) {
        out.push_back(r.is_external() ? "ext" : std::to_string(r.index()));
    }
    return out;
}

}  // namespace

TEST_SUITE("topology") {

TEST_CASE("parse and format")
{
    const PlatoonConfig a = parse_config("-PLL");
    REQUIRE(a.size() == 4);
    CHECK(a[0] == Controller::Independent);
    CHECK(a[1] == Controller::Path);
    CHECK(a[2] == Controller::Ploeg);
    CHECK(a[3] == Controller::Ploeg);
    const PlatoonConfig b = parse_config("GGGL");
    CHECK(b[0] == Controller::Gsbl);
    CHECK(b[3] == Controller::Ploeg);
    for (const char* s : {"-PLL", "GGGL", "-A", "-PGGP", "GGPPPL"}) {
        CHECK(format_config(parse_config(s)) == s);
    }
}

TEST_CASE("parse errors name the offending position")
{
    try {
        parse_config("-P-L");
        FAIL("expected a parse error");
    } catch (const ConfigParseError& e) {
        CHECK(e.position() == 2);
    }
    try {
        parse_config("-PXL");
        FAIL("expected a parse error");
    } catch (const ConfigParseError& e) {
        CHECK(e.position() == 2);
    }
    CHECK_THROWS_AS(parse_config("P"), ConfigParseError);
    CHECK_THROWS_AS(parse_config(""), ConfigParseError);
}

TEST_CASE("egoLeader election")
{
    CHECK(leaders_text(elect_ego_leaders(parse_config("-PLPP"))) == std::vector<std::string>{"ext", "0", "1", "2", "2"});
    CHECK(leaders_text(elect_ego_leaders(parse_config("-PPPP"))) == std::vector<std::string>{"ext", "0", "0", "0", "0"});
    CHECK(leaders_text(elect_ego_leaders(parse_config("GGG"))) == std::vector<std::string>{"ext", "ext", "ext"});
    CHECK(leaders_text(elect_ego_leaders(parse_config("GGPPPL")))
          == std::vector<std::string>{"ext", "ext", "1", "1", "1", "4"});
    CHECK(leaders_text(head_only_leaders(parse_config("-PLPP"))) == std::vector<std::string>{"ext", "0", "0", "0", "0"});
}

TEST_CASE("the external reference is never vehicle 0")
{
    const LeaderRef ext = LeaderRef::external();
    const LeaderRef v0 = LeaderRef::vehicle(0);
    CHECK_FALSE(ext == v0);
    CHECK_THROWS(ext.index());
    CHECK(v0.index() == 0);
}

TEST_CASE("connectivity matrices against the reference grids")
{
    const ConnectivityMatrix c2 = connectivity_matrix(parse_config("-PPPP"));
    CHECK(diff_cells(kC2, c2.cells).empty());
    const ConnectivityMatrix g5 = extended_connectivity_matrix(parse_config("GGGGG"));
    CHECK(diff_cells(kGsbl5, g5.cells).empty());
    const ConnectivityMatrix gp = extended_connectivity_matrix(parse_config("GGPPPL"));
    CHECK(diff_cells(kGgpppl, gp.cells).empty());

    CHECK(reference_c2() == kC2);
    CHECK(reference_c4() == kC4);
    CHECK(reference_extended_gsbl5() == kGsbl5);
    CHECK(reference_extended_ggpppl() == kGgpppl);
}

TEST_CASE("-PGGP is built by rule and its differences to the printed C4 are reported")
{
    const ConnectivityMatrix c = connectivity_matrix(parse_config("-PGGP"));
    // rule oracle: P -> pred + egoLeader, G -> pred + egoLeader + successor
    const Eigen::MatrixXi rule = grid(5, 5, {1, 0, 0, 0, 0,
                                             1, 1, 0, 0, 0,
                                             0, 1, 1, 1, 0,
                                             0, 1, 1, 1, 1,
                                             0, 0, 0, 1, 1});
    CHECK(c.cells == rule);
    const auto diffs = diff_cells(kC4, c.cells);
    CHECK(diffs.size() == 5);
}

TEST_CASE("predecessor following is lower bidiagonal")
{
    const ConnectivityMatrix c = connectivity_matrix(parse_config("-LLLL"));
    for (Eigen::Index i = 0; i < 5; ++i) {
        for (Eigen::Index j = 0; j < 5; ++j) {
            const int expected = (j == i || (i > 0 && j == i - 1)) ? 1 : 0;
            CHECK(c.cells(i, j) == expected);
        }
    }
    const ConnectivityMatrix e = extended_connectivity_matrix(parse_config("-LLLL"));
    CHECK(e.cells.col(0).sum() == 0);
    CHECK(drop_external_column(e).cells == c.cells);
}

TEST_CASE("classification")
{
    CHECK(classify_matrix(connectivity_matrix(parse_config("-PPPP"))).lower_triangular);
    CHECK(classify_matrix(connectivity_matrix(parse_config("-PPPP"))).square);
    const MatrixClass g5 = classify_matrix(extended_connectivity_matrix(parse_config("GGGGG")));
    CHECK_FALSE(g5.square);
    CHECK_FALSE(g5.lower_triangular);
    CHECK_FALSE(classify_matrix(connectivity_matrix(parse_config("-PGP"))).lower_triangular);
}

TEST_CASE("text grid")
{
    const std::string text = to_text_grid(connectivity_matrix(parse_config("-LL")));
    CHECK(text == "1 0 0\n1 1 0\n0 1 1\n");
}

TEST_CASE("homogeneous configs")
{
    CHECK(format_config(homogeneous_config(Controller::Gsbl, 4)) == "-GGG");
    CHECK(format_config(homogeneous_config(Controller::Acc, 2)) == "-A");
}

}
