#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ash/errors.hpp"

namespace ash {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Triplet {
    Index row = 0;
    Index col = 0;
    double value = 0.0;

    friend bool operator==(const Triplet&, const Triplet&) = default;
};

/// Sparse rectangular matrix with both row (CSR) and column (CSC) access.
/// Entries are kept sorted by (row, col); duplicate coordinates are rejected
/// at construction rather than summed.
class SparseMatrix {
public:
    SparseMatrix() = default;
    SparseMatrix(Index rows, Index cols, std::vector<Triplet> entries);

    static SparseMatrix identity(Index n);

    Index rows() const noexcept { return rows_; }
    Index cols() const noexcept { return cols_; }
    Index nonzeros() const noexcept { return static_cast<Index>(entries_.size()); }

    /// Entries sorted by (row, col).
    const std::vector<Triplet>& entries() const noexcept { return entries_; }

    void multiply(const VectorXd& x, VectorXd& y) const;
    void multiply_transpose(const VectorXd& x, VectorXd& y) const;
    VectorXd multiply(const VectorXd& x) const;
    VectorXd multiply_transpose(const VectorXd& x) const;

    /// Entries of row r as a span into the sorted entry array.
    std::span<const Triplet> row(Index r) const;

    /// Column access: pairs (row, value) of column c, ascending row.
    struct ColEntry {
        Index row;
        double value;
    };
    std::span<const ColEntry> col(Index c) const;

    VectorXd column_sums() const;
    VectorXd row_sums() const;
    std::vector<Index> column_counts() const;

    double min_value() const;

    /// Max absolute column sum.
    double one_norm() const;
    /// Max absolute row sum.
    double inf_norm() const;
    double trace() const;

    MatrixXd dense() const;

    friend bool operator==(const SparseMatrix& a, const SparseMatrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.entries_ == b.entries_;
    }

private:
    Index rows_ = 0;
    Index cols_ = 0;
    std::vector<Triplet> entries_;       // sorted by (row, col)
    std::vector<Index> row_ptr_;         // size rows_+1, offsets into entries_
    std::vector<ColEntry> col_entries_;  // sorted by (col, row)
    std::vector<Index> col_ptr_;         // size cols_+1, offsets into col_entries_
};

/// Endogenous network dynamics: sparse nonnegative influence matrix A
/// (a(u,u') boosts user u when u' emits an event), exponential kernel
/// decay rate omega.
struct HawkesNetwork {
    Index m = 0;
    SparseMatrix A;
    double omega = 0.0;

    friend bool operator==(const HawkesNetwork&, const HawkesNetwork&) = default;
};

enum class NetworkIssueCode {
    NegativeEntry,
    NonpositiveOmega,
    DimensionMismatch,
    DuplicateEntry,
};

struct NetworkIssue {
    NetworkIssueCode code;
    Index row = -1;
    Index col = -1;
    std::string message;
};

/// Checks raw network data before construction; returns the first violation.
std::optional<NetworkIssue> validate_network_data(Index m,
                                                  std::span<const Triplet> entries,
                                                  double omega);

/// Re-checks the invariants of a constructed network.
std::optional<NetworkIssue> validate_network(const HawkesNetwork& net);

/// Builds a validated network; throws std::invalid_argument on violation.
HawkesNetwork make_network(Index m, std::vector<Triplet> entries, double omega);

constexpr int kUnknownGeneration = -1;
constexpr Index kNoParent = -1;

struct Event {
    int user = 0;
    double time = 0.0;
    int generation = kUnknownGeneration;
    Index parent = kNoParent;  // index within the cascade

    friend bool operator==(const Event&, const Event&) = default;
};

struct Cascade {
    double horizon = 0.0;
    std::vector<Event> events;

    friend bool operator==(const Cascade&, const Cascade&) = default;
};

struct EventLog {
    std::vector<Cascade> cascades;

    std::size_t total_events() const;
    bool labeled() const;  // every event carries a generation label

    friend bool operator==(const EventLog&, const EventLog&) = default;
};

/// Returns a description of the first invariant violation, if any.
std::optional<std::string> validate_event_log(const EventLog& log, Index m);

/// Feasible-set parameters: per-user cost of a unit of exogenous intensity
/// and the total budget.
struct BudgetSpec {
    VectorXd costs;
    double total = 0.0;

    static BudgetSpec uniform(Index m, double total);
};

std::optional<std::string> validate_budget(const BudgetSpec& budget, Index m);

enum class TaskKind {
    CappedActivityMax,   // sum_u min(mu_u, cap_u)
    MinimaxShaping,      // min_u mu_u
    LeastSquaresShaping, // -|B mu - target|^2
    Homogenization,      // -sum_u mu_u ln mu_u
};

std::string task_kind_name(TaskKind kind);
std::optional<TaskKind> task_kind_from_name(const std::string& name);

/// Shaping objective descriptor. Parameters are present iff the kind
/// requires them; gamma is the l1 sparsity weight shared by all kinds.
struct ShapingTask {
    TaskKind kind = TaskKind::CappedActivityMax;
    VectorXd caps;        // CappedActivityMax
    SparseMatrix weights; // LeastSquaresShaping (B)
    VectorXd target;      // LeastSquaresShaping (v)
    double gamma = 0.0;

    static ShapingTask capped_activity_max(VectorXd caps, double gamma = 0.0);
    static ShapingTask minimax(double gamma = 0.0);
    static ShapingTask least_squares(SparseMatrix weights, VectorXd target, double gamma = 0.0);
    static ShapingTask homogenization(double gamma = 0.0);

    ShapingTask with_gamma(double g) const;
};

std::optional<std::string> validate_task(const ShapingTask& task, Index m);

/// Piecewise-constant per-user rate estimate over contiguous windows of
/// equal width; values(u, j) is user u's rate in [j*window, (j+1)*window).
struct IntensityCurve {
    double window = 0.0;
    MatrixXd values;  // m x num_windows

    Index users() const { return values.rows(); }
    Index windows() const { return values.cols(); }
    double midpoint(Index j) const { return (static_cast<double>(j) + 0.5) * window; }
};

} // namespace ash
