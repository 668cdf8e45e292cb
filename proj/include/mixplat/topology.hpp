#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace mixplat {

/// Per-vehicle controller label. The character values are the configuration
/// string alphabet.
enum class Controller : char {
    Independent = '-',
    Acc = 'A',
    Path = 'P',
    Ploeg = 'L',
    Gsbl = 'G',
};

char to_char(Controller c);
std::string_view controller_name(Controller c);

class ConfigParseError : public std::invalid_argument {
public:
    ConfigParseError(const std::string& what, std::size_t position)
        : std::invalid_argument(what), position_(position) {}
    std::size_t position() const { return position_; }

private:
    std::size_t position_;
};

/// Ordered controller assignment of a platoon, e.g. "-PLL".
struct PlatoonConfig {
    std::vector<Controller> controllers;

    std::size_t size() const { return controllers.size(); }
    Controller operator[](std::size_t i) const { return controllers[i]; }
    bool operator==(const PlatoonConfig&) const = default;
};

PlatoonConfig parse_config(std::string_view text);
std::string format_config(const PlatoonConfig& cfg);

/// Homogeneous "-XXX..." platoon of `n` vehicles.
PlatoonConfig homogeneous_config(Controller follower, std::size_t n);

/// Index of a vehicle's egoLeader, or the external reference when no vehicle
/// ahead runs a different controller. Never confusable with vehicle 0.
class LeaderRef {
public:
    static LeaderRef vehicle(std::size_t index) { return LeaderRef(index); }
    static LeaderRef external() { return LeaderRef(); }

    bool is_external() const { return !index_.has_value(); }
    std::size_t index() const;

    bool operator==(const LeaderRef&) const = default;

private:
    LeaderRef() = default;
    explicit LeaderRef(std::size_t i) : index_(i) {}
    std::optional<std::size_t> index_;
};

/// Entry i is the egoLeader of vehicle i; entry 0 is always external.
using EgoLeaderMap = std::vector<LeaderRef>;

/// Nearest preceding vehicle with a different controller label.
EgoLeaderMap elect_ego_leaders(const PlatoonConfig& cfg);

/// Every follower references vehicle 0 (the variant without egoLeader
/// election, used for comparison runs).
EgoLeaderMap head_only_leaders(const PlatoonConfig& cfg);

/// Which vehicles' information each vehicle uses. With `external_column`
/// set, column 0 is the virtual leader and vehicle j sits in column j + 1.
struct ConnectivityMatrix {
    Eigen::MatrixXi cells;
    bool external_column = false;

    Eigen::Index vehicles() const { return cells.rows(); }
    /// Cell for vehicle row `i` and vehicle column `j`, ignoring the external column.
    int at(Eigen::Index i, Eigen::Index j) const { return cells(i, j + (external_column ? 1 : 0)); }
};

ConnectivityMatrix connectivity_matrix(const PlatoonConfig& cfg);
ConnectivityMatrix extended_connectivity_matrix(const PlatoonConfig& cfg);

struct MatrixClass {
    bool lower_triangular = false;
    bool square = false;
};

MatrixClass classify_matrix(const ConnectivityMatrix& m);

/// Drops the external-reference column (no-op for a plain C).
ConnectivityMatrix drop_external_column(const ConnectivityMatrix& m);

struct CellDiff {
    Eigen::Index row = 0;
    Eigen::Index col = 0;
    int expected = 0;
    int actual = 0;
};

std::vector<CellDiff> diff_cells(const Eigen::MatrixXi& expected, const Eigen::MatrixXi& actual);

/// Reference matrices for -PPPP, -PGGP, GGGGG and GGPPPL.
Eigen::MatrixXi reference_c2();
Eigen::MatrixXi reference_c4();
Eigen::MatrixXi reference_extended_gsbl5();
Eigen::MatrixXi reference_extended_ggpppl();

std::string to_text_grid(const ConnectivityMatrix& m);

}  // namespace mixplat
