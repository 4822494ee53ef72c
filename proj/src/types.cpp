#include "ash/types.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ash {

namespace {

bool triplet_order(const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
}

} // namespace

SparseMatrix::SparseMatrix(Index rows, Index cols, std::vector<Triplet> entries)
    : rows_(rows), cols_(cols), entries_(std::move(entries)) {
    if (rows_ < 0 || cols_ < 0) {
        throw std::invalid_argument("SparseMatrix: negative dimensions");
    }
    std::sort(entries_.begin(), entries_.end(), triplet_order);
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const Triplet& e = entries_[i];
        if (e.row < 0 || e.row >= rows_ || e.col < 0 || e.col >= cols_) {
            throw std::invalid_argument("SparseMatrix: entry (" + std::to_string(e.row) + "," +
                                        std::to_string(e.col) + ") out of range for " +
                                        std::to_string(rows_) + "x" + std::to_string(cols_));
        }
        if (i > 0 && entries_[i - 1].row == e.row && entries_[i - 1].col == e.col) {
            throw std::invalid_argument("SparseMatrix: duplicate entry at (" +
                                        std::to_string(e.row) + "," + std::to_string(e.col) + ")");
        }
        if (!std::isfinite(e.value)) {
            throw std::invalid_argument("SparseMatrix: non-finite value at (" +
                                        std::to_string(e.row) + "," + std::to_string(e.col) + ")");
        }
    }

    row_ptr_.assign(static_cast<std::size_t>(rows_) + 1, 0);
    for (const Triplet& e : entries_) {
        ++row_ptr_[static_cast<std::size_t>(e.row) + 1];
    }
    for (Index r = 0; r < rows_; ++r) {
        row_ptr_[static_cast<std::size_t>(r) + 1] += row_ptr_[static_cast<std::size_t>(r)];
    }

    // Column-major view: counting sort of the entries by column.
    col_ptr_.assign(static_cast<std::size_t>(cols_) + 1, 0);
    for (const Triplet& e : entries_) {
        ++col_ptr_[static_cast<std::size_t>(e.col) + 1];
    }
    for (Index c = 0; c < cols_; ++c) {
        col_ptr_[static_cast<std::size_t>(c) + 1] += col_ptr_[static_cast<std::size_t>(c)];
    }
    col_entries_.resize(entries_.size());
    std::vector<Index> next(col_ptr_.begin(), col_ptr_.end() - 1);
    for (const Triplet& e : entries_) {
        col_entries_[static_cast<std::size_t>(next[static_cast<std::size_t>(e.col)]++)] =
            ColEntry{e.row, e.value};
    }
}

SparseMatrix SparseMatrix::identity(Index n) {
    std::vector<Triplet> entries;
    entries.reserve(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        entries.push_back({i, i, 1.0});
    }
    return SparseMatrix(n, n, std::move(entries));
}

void SparseMatrix::multiply(const VectorXd& x, VectorXd& y) const {
    if (x.size() != cols_) {
        throw std::invalid_argument("SparseMatrix::multiply: size mismatch");
    }
    y.setZero(rows_);
    for (Index r = 0; r < rows_; ++r) {
        double acc = 0.0;
        const Index lo = row_ptr_[static_cast<std::size_t>(r)];
        const Index hi = row_ptr_[static_cast<std::size_t>(r) + 1];
        for (Index k = lo; k < hi; ++k) {
            const Triplet& e = entries_[static_cast<std::size_t>(k)];
            acc += e.value * x[e.col];
        }
        y[r] = acc;
    }
}

void SparseMatrix::multiply_transpose(const VectorXd& x, VectorXd& y) const {
    if (x.size() != rows_) {
        throw std::invalid_argument("SparseMatrix::multiply_transpose: size mismatch");
    }
    y.setZero(cols_);
    for (Index c = 0; c < cols_; ++c) {
        double acc = 0.0;
        const Index lo = col_ptr_[static_cast<std::size_t>(c)];
        const Index hi = col_ptr_[static_cast<std::size_t>(c) + 1];
        for (Index k = lo; k < hi; ++k) {
            const ColEntry& e = col_entries_[static_cast<std::size_t>(k)];
            acc += e.value * x[e.row];
        }
        y[c] = acc;
    }
}

VectorXd SparseMatrix::multiply(const VectorXd& x) const {
    VectorXd y;
    multiply(x, y);
    return y;
}

VectorXd SparseMatrix::multiply_transpose(const VectorXd& x) const {
    VectorXd y;
    multiply_transpose(x, y);
    return y;
}

std::span<const Triplet> SparseMatrix::row(Index r) const {
    const Index lo = row_ptr_[static_cast<std::size_t>(r)];
    const Index hi = row_ptr_[static_cast<std::size_t>(r) + 1];
    return {entries_.data() + lo, static_cast<std::size_t>(hi - lo)};
}

std::span<const SparseMatrix::ColEntry> SparseMatrix::col(Index c) const {
    const Index lo = col_ptr_[static_cast<std::size_t>(c)];
    const Index hi = col_ptr_[static_cast<std::size_t>(c) + 1];
    return {col_entries_.data() + lo, static_cast<std::size_t>(hi - lo)};
}

VectorXd SparseMatrix::column_sums() const {
    VectorXd s = VectorXd::Zero(cols_);
    for (const Triplet& e : entries_) {
        s[e.col] += e.value;
    }
    return s;
}

VectorXd SparseMatrix::row_sums() const {
    VectorXd s = VectorXd::Zero(rows_);
    for (const Triplet& e : entries_) {
        s[e.row] += e.value;
    }
    return s;
}

std::vector<Index> SparseMatrix::column_counts() const {
    std::vector<Index> counts(static_cast<std::size_t>(cols_), 0);
    for (const Triplet& e : entries_) {
        ++counts[static_cast<std::size_t>(e.col)];
    }
    return counts;
}

double SparseMatrix::min_value() const {
    double v = 0.0;
    for (const Triplet& e : entries_) {
        v = std::min(v, e.value);
    }
    return v;
}

double SparseMatrix::one_norm() const {
    VectorXd s = VectorXd::Zero(cols_);
    for (const Triplet& e : entries_) {
        s[e.col] += std::abs(e.value);
    }
    return cols_ == 0 ? 0.0 : s.maxCoeff();
}

double SparseMatrix::inf_norm() const {
    VectorXd s = VectorXd::Zero(rows_);
    for (const Triplet& e : entries_) {
        s[e.row] += std::abs(e.value);
    }
    return rows_ == 0 ? 0.0 : s.maxCoeff();
}

double SparseMatrix::trace() const {
    double t = 0.0;
    for (const Triplet& e : entries_) {
        if (e.row == e.col) {
            t += e.value;
        }
    }
    return t;
}

MatrixXd SparseMatrix::dense() const {
    MatrixXd d = MatrixXd::Zero(rows_, cols_);
    for (const Triplet& e : entries_) {
        d(e.row, e.col) = e.value;
    }
    return d;
}

std::optional<NetworkIssue> validate_network_data(Index m,
                                                  std::span<const Triplet> entries,
                                                  double omega) {
    if (m <= 0) {
        return NetworkIssue{NetworkIssueCode::DimensionMismatch, -1, -1,
                            "user count must be positive"};
    }
    if (!(omega > 0.0) || !std::isfinite(omega)) {
        return NetworkIssue{NetworkIssueCode::NonpositiveOmega, -1, -1,
                            "omega must be a positive finite number"};
    }
    std::vector<Triplet> sorted(entries.begin(), entries.end());
    std::sort(sorted.begin(), sorted.end(), triplet_order);
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const Triplet& e = sorted[i];
        if (e.row < 0 || e.row >= m || e.col < 0 || e.col >= m) {
            return NetworkIssue{NetworkIssueCode::DimensionMismatch, e.row, e.col,
                                "influence entry out of range"};
        }
        if (i > 0 && sorted[i - 1].row == e.row && sorted[i - 1].col == e.col) {
            return NetworkIssue{NetworkIssueCode::DuplicateEntry, e.row, e.col,
                                "duplicate influence entry"};
        }
        if (!(e.value >= 0.0) || !std::isfinite(e.value)) {
            return NetworkIssue{NetworkIssueCode::NegativeEntry, e.row, e.col,
                                "influence entries must be nonnegative and finite"};
        }
    }
    return std::nullopt;
}

std::optional<NetworkIssue> validate_network(const HawkesNetwork& net) {
    if (net.A.rows() != net.m || net.A.cols() != net.m) {
        return NetworkIssue{NetworkIssueCode::DimensionMismatch, net.A.rows(), net.A.cols(),
                            "influence matrix shape does not match user count"};
    }
    return validate_network_data(net.m, net.A.entries(), net.omega);
}

HawkesNetwork make_network(Index m, std::vector<Triplet> entries, double omega) {
    if (auto issue = validate_network_data(m, entries, omega)) {
        throw std::invalid_argument("invalid network: " + issue->message);
    }
    return HawkesNetwork{m, SparseMatrix(m, m, std::move(entries)), omega};
}

std::size_t EventLog::total_events() const {
    std::size_t n = 0;
    for (const Cascade& c : cascades) {
        n += c.events.size();
    }
    return n;
}

bool EventLog::labeled() const {
    for (const Cascade& c : cascades) {
        for (const Event& e : c.events) {
            if (e.generation < 0) {
                return false;
            }
        }
    }
    return true;
}

std::optional<std::string> validate_event_log(const EventLog& log, Index m) {
    for (std::size_t ci = 0; ci < log.cascades.size(); ++ci) {
        const Cascade& c = log.cascades[ci];
        if (!(c.horizon >= 0.0) || !std::isfinite(c.horizon)) {
            return "cascade " + std::to_string(ci) + ": invalid horizon";
        }
        double prev = 0.0;
        for (std::size_t i = 0; i < c.events.size(); ++i) {
            const Event& e = c.events[i];
            const std::string where =
                "cascade " + std::to_string(ci) + " event " + std::to_string(i);
            if (e.user < 0 || static_cast<Index>(e.user) >= m) {
                return where + ": user id out of range";
            }
            if (!(e.time >= 0.0) || e.time > c.horizon) {
                return where + ": time outside [0, horizon]";
            }
            if (e.time < prev) {
                return where + ": events not sorted by time";
            }
            prev = e.time;
            if (e.parent >= static_cast<Index>(i)) {
                return where + ": parent must precede the event";
            }
            if (e.parent < kNoParent) {
                return where + ": invalid parent index";
            }
            if (e.generation >= 0) {
                const bool exogenous = e.generation == 0;
                if (exogenous != (e.parent == kNoParent)) {
                    return where + ": generation 0 must coincide with no parent";
                }
                if (e.parent != kNoParent) {
                    const Event& p = c.events[static_cast<std::size_t>(e.parent)];
                    if (p.generation >= 0 && p.generation + 1 != e.generation) {
                        return where + ": generation must be parent generation + 1";
                    }
                }
            } else if (e.parent != kNoParent) {
                return where + ": unlabeled events cannot carry a parent";
            }
        }
    }
    return std::nullopt;
}

BudgetSpec BudgetSpec::uniform(Index m, double total) {
    return BudgetSpec{VectorXd::Ones(m), total};
}

std::optional<std::string> validate_budget(const BudgetSpec& budget, Index m) {
    if (budget.costs.size() != m) {
        return "cost vector length does not match user count";
    }
    for (Index i = 0; i < m; ++i) {
        if (!(budget.costs[i] > 0.0) || !std::isfinite(budget.costs[i])) {
            return "costs must be positive and finite";
        }
    }
    if (!(budget.total > 0.0) || !std::isfinite(budget.total)) {
        return "total budget must be positive and finite";
    }
    return std::nullopt;
}

std::string task_kind_name(TaskKind kind) {
    switch (kind) {
        case TaskKind::CappedActivityMax: return "cam";
        case TaskKind::MinimaxShaping: return "mmash";
        case TaskKind::LeastSquaresShaping: return "lsash";
        case TaskKind::Homogenization: return "hom";
    }
    return "unknown";
}

std::optional<TaskKind> task_kind_from_name(const std::string& name) {
    if (name == "cam") return TaskKind::CappedActivityMax;
    if (name == "mmash") return TaskKind::MinimaxShaping;
    if (name == "lsash") return TaskKind::LeastSquaresShaping;
    if (name == "hom") return TaskKind::Homogenization;
    return std::nullopt;
}

ShapingTask ShapingTask::capped_activity_max(VectorXd caps, double gamma) {
    ShapingTask t;
    t.kind = TaskKind::CappedActivityMax;
    t.caps = std::move(caps);
    t.gamma = gamma;
    return t;
}

ShapingTask ShapingTask::minimax(double gamma) {
    ShapingTask t;
    t.kind = TaskKind::MinimaxShaping;
    t.gamma = gamma;
    return t;
}

ShapingTask ShapingTask::least_squares(SparseMatrix weights, VectorXd target, double gamma) {
    ShapingTask t;
    t.kind = TaskKind::LeastSquaresShaping;
    t.weights = std::move(weights);
    t.target = std::move(target);
    t.gamma = gamma;
    return t;
}

ShapingTask ShapingTask::homogenization(double gamma) {
    ShapingTask t;
    t.kind = TaskKind::Homogenization;
    t.gamma = gamma;
    return t;
}

ShapingTask ShapingTask::with_gamma(double g) const {
    ShapingTask t = *this;
    t.gamma = g;
    return t;
}

std::optional<std::string> validate_task(const ShapingTask& task, Index m) {
    if (!(task.gamma >= 0.0) || !std::isfinite(task.gamma)) {
        return "gamma must be nonnegative and finite";
    }
    switch (task.kind) {
        case TaskKind::CappedActivityMax:
            if (task.caps.size() != m) {
                return "cap vector length does not match user count";
            }
            if ((task.caps.array() < 0.0).any()) {
                return "caps must be nonnegative";
            }
            break;
        case TaskKind::LeastSquaresShaping:
            if (task.weights.cols() != m) {
                return "weight matrix column count does not match user count";
            }
            if (task.target.size() != task.weights.rows()) {
                return "target length does not match weight matrix row count";
            }
            break;
        case TaskKind::MinimaxShaping:
        case TaskKind::Homogenization:
            break;
    }
    return std::nullopt;
}

} // namespace ash
