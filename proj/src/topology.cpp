#include "mixplat/topology.hpp"

#include <sstream>

#include <fmt/format.h>

namespace mixplat {

char to_char(Controller c)
{
    return static_cast<char>(c);
}

std::string_view controller_name(Controller c)
{
    switch (c) {
    case Controller::Independent: return "independent";
    case Controller::Acc: return "ACC";
    case Controller::Path: return "PATH";
    case Controller::Ploeg: return "PLOEG";
    case Controller::Gsbl: return "GSBL";
    }
    return "?";
}

PlatoonConfig parse_config(std::string_view text)
{
    if (text.size() < 2) {
        throw ConfigParseError(fmt::format("platoon config '{}' needs at least 2 vehicles", text), text.size());
    }
    PlatoonConfig cfg;
    cfg.controllers.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char ch = text[i];
        switch (ch) {
        case '-':
            if (i != 0) {
                throw ConfigParseError(
                    fmt::format("platoon config '{}': '-' only allowed at index 0, found at index {}", text, i), i);
            }
            cfg.controllers.push_back(Controller::Independent);
            break;
        case 'A': cfg.controllers.push_back(Controller::Acc); break;
        case 'P': cfg.controllers.push_back(Controller::Path); break;
        case 'L': cfg.controllers.push_back(Controller::Ploeg); break;
        case 'G': cfg.controllers.push_back(Controller::Gsbl); break;
        default:
            throw ConfigParseError(fmt::format("platoon config '{}': unknown controller '{}' at index {}", text, ch, i),
                                   i);
        }
    }
    return cfg;
}

std::string format_config(const PlatoonConfig& cfg)
{
    std::string out;
    out.reserve(cfg.size());
    for (Controller c : cfg.controllers) {
        out.push_back(to_char(c));
    }
    return out;
}

PlatoonConfig homogeneous_config(Controller follower, std::size_t n)
{
    PlatoonConfig cfg;
    cfg.controllers.assign(n, follower);
    cfg.controllers.front() = Controller::Independent;
    return cfg;
}

std::size_t LeaderRef::index() const
{
    if (!index_) {
        throw std::logic_error("LeaderRef: external reference has no vehicle index");
    }
    return *index_;
}

EgoLeaderMap elect_ego_leaders(const PlatoonConfig& cfg)
{
    EgoLeaderMap leaders(cfg.size(), LeaderRef::external());
    for (std::size_t i = 1; i < cfg.size(); ++i) {
        for (std::size_t j = i; j-- > 0;) {
            if (cfg[j] != cfg[i]) {
                leaders[i] = LeaderRef::vehicle(j);
                break;
            }
        }
    }
    return leaders;
}

EgoLeaderMap head_only_leaders(const PlatoonConfig& cfg)
{
    EgoLeaderMap leaders(cfg.size(), LeaderRef::vehicle(0));
    leaders[0] = LeaderRef::external();
    return leaders;
}

namespace {

ConnectivityMatrix build(const PlatoonConfig& cfg, bool with_external)
{
    const auto n = static_cast<Eigen::Index>(cfg.size());
    const Eigen::Index off = with_external ? 1 : 0;
    ConnectivityMatrix m;
    m.external_column = with_external;
    m.cells = Eigen::MatrixXi::Zero(n, n + off);
    const EgoLeaderMap leaders = elect_ego_leaders(cfg);

    for (Eigen::Index i = 0; i < n; ++i) {
        const Controller c = cfg[static_cast<std::size_t>(i)];
        m.cells(i, i + off) = 1;
        const bool has_pred = i > 0;
        const LeaderRef& leader = leaders[static_cast<std::size_t>(i)];

        switch (c) {
        case Controller::Independent:
            break;
        case Controller::Acc:
        case Controller::Ploeg:
            if (has_pred) {
                m.cells(i, i - 1 + off) = 1;
            }
            break;
        case Controller::Path:
            if (has_pred) {
                m.cells(i, i - 1 + off) = 1;
                if (!leader.is_external()) {
                    m.cells(i, static_cast<Eigen::Index>(leader.index()) + off) = 1;
                }
            }
            break;
        case Controller::Gsbl:
            if (has_pred) {
                m.cells(i, i - 1 + off) = 1;
            }
            if (!leader.is_external()) {
                m.cells(i, static_cast<Eigen::Index>(leader.index()) + off) = 1;
            } else if (with_external) {
                m.cells(i, 0) = 1;
            }
            if (i + 1 < n) {
                m.cells(i, i + 1 + off) = 1;
            }
            break;
        }
    }
    return m;
}

}  // namespace

ConnectivityMatrix connectivity_matrix(const PlatoonConfig& cfg)
{
    return build(cfg, false);
}

ConnectivityMatrix extended_connectivity_matrix(const PlatoonConfig& cfg)
{
    return build(cfg, true);
}

MatrixClass classify_matrix(const ConnectivityMatrix& m)
{
    MatrixClass out;
    out.square = m.cells.rows() == m.cells.cols();
    if (out.square) {
        out.lower_triangular = m.cells.isLowerTriangular();
    }
    return out;
}

ConnectivityMatrix drop_external_column(const ConnectivityMatrix& m)
{
    if (!m.external_column) {
        return m;
    }
    ConnectivityMatrix out;
    out.cells = m.cells.rightCols(m.cells.cols() - 1);
    return out;
}

std::vector<CellDiff> diff_cells(const Eigen::MatrixXi& expected, const Eigen::MatrixXi& actual)
{
    if (expected.rows() != actual.rows() || expected.cols() != actual.cols()) {
        throw std::invalid_argument(fmt::format("diff_cells: shape {}x{} vs {}x{}", expected.rows(), expected.cols(),
                                                actual.rows(), actual.cols()));
    }
    std::vector<CellDiff> diffs;
    for (Eigen::Index i = 0; i < expected.rows(); ++i) {
        for (Eigen::Index j = 0; j < expected.cols(); ++j) {
            if (expected(i, j) != actual(i, j)) {
                diffs.push_back({i, j, expected(i, j), actual(i, j)});
            }
        }
    }
    return diffs;
}

Eigen::MatrixXi reference_c2()
{
    Eigen::MatrixXi m(5, 5);
    m << 1, 0, 0, 0, 0,
         1, 1, 0, 0, 0,
         1, 1, 1, 0, 0,
         1, 0, 1, 1, 0,
         1, 0, 0, 1, 1;
    return m;
}

Eigen::MatrixXi reference_c4()
{
    Eigen::MatrixXi m(5, 5);
    m << 1, 0, 0, 0, 0,
         1, 1, 1, 0, 0,
         1, 1, 1, 1, 0,
         0, 0, 1, 1, 0,
         0, 0, 1, 1, 1;
    return m;
}

Eigen::MatrixXi reference_extended_gsbl5()
{
    Eigen::MatrixXi m(5, 6);
    m << 1, 1, 1, 0, 0, 0,
         1, 1, 1, 1, 0, 0,
         1, 0, 1, 1, 1, 0,
         1, 0, 0, 1, 1, 1,
         1, 0, 0, 0, 1, 1;
    return m;
}

Eigen::MatrixXi reference_extended_ggpppl()
{
    Eigen::MatrixXi m(6, 7);
    m << 1, 1, 1, 0, 0, 0, 0,
         1, 1, 1, 1, 0, 0, 0,
         0, 0, 1, 1, 0, 0, 0,
         0, 0, 1, 1, 1, 0, 0,
         0, 0, 1, 0, 1, 1, 0,
         0, 0, 0, 0, 0, 1, 1;
    return m;
}

std::string to_text_grid(const ConnectivityMatrix& m)
{
    std::ostringstream os;
    for (Eigen::Index i = 0; i < m.cells.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cells.cols(); ++j) {
            if (j > 0) {
                os << ' ';
            }
            os << m.cells(i, j);
        }
        os << '\n';
    }
    return os.str();
}

}  // namespace mixplat
