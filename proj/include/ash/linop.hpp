#pragma once

#include <cmath>
#include <functional>

#include "ash/types.hpp"

namespace ash {

/// Square linear map y = Op x exposed matrix-free. Implementations also
/// report the exact 1-norm and trace, used for substep selection and the
/// diagonal shift in the exponential action.
class LinearOperator {
public:
    virtual ~LinearOperator() = default;

    virtual Index size() const = 0;
    virtual void apply(const VectorXd& x, VectorXd& y) const = 0;
    virtual double one_norm() const = 0;
    virtual double trace() const = 0;

    /// 1-norm of (Op - mu*I); the default is a safe upper bound.
    virtual double one_norm_shifted(double mu) const { return one_norm() + std::abs(mu); }

    VectorXd apply(const VectorXd& x) const {
        VectorXd y;
        apply(x, y);
        return y;
    }
};

/// M = A - omega*I (or its transpose) without materializing M.
class ShiftedOperator : public LinearOperator {
public:
    ShiftedOperator(const HawkesNetwork& net, bool transposed = false);

    Index size() const override { return net_.m; }
    void apply(const VectorXd& x, VectorXd& y) const override;
    double one_norm() const override { return transposed_ ? inf_norm_ : one_norm_; }
    double trace() const override { return trace_; }
    double one_norm_shifted(double mu) const override;

    bool transposed() const noexcept { return transposed_; }
    const HawkesNetwork& network() const noexcept { return net_; }

private:
    const HawkesNetwork& net_;
    bool transposed_;
    double one_norm_ = 0.0;  // of A - omega*I
    double inf_norm_ = 0.0;
    double trace_ = 0.0;
};

/// Explicit dense matrix as an operator (small problems and tests).
class DenseOperator : public LinearOperator {
public:
    explicit DenseOperator(MatrixXd matrix);

    Index size() const override { return matrix_.rows(); }
    void apply(const VectorXd& x, VectorXd& y) const override { y.noalias() = matrix_ * x; }
    double one_norm() const override;
    double trace() const override { return matrix_.trace(); }
    double one_norm_shifted(double mu) const override;

    const MatrixXd& matrix() const noexcept { return matrix_; }

private:
    MatrixXd matrix_;
};

/// Operator defined by a callable; norm and trace supplied by the caller.
class FunctionOperator : public LinearOperator {
public:
    using Apply = std::function<void(const VectorXd&, VectorXd&)>;

    FunctionOperator(Index size, Apply apply, double one_norm, double trace)
        : size_(size), apply_(std::move(apply)), one_norm_(one_norm), trace_(trace) {}

    Index size() const override { return size_; }
    void apply(const VectorXd& x, VectorXd& y) const override { apply_(x, y); }
    double one_norm() const override { return one_norm_; }
    double trace() const override { return trace_; }

private:
    Index size_;
    Apply apply_;
    double one_norm_;
    double trace_;
};

} // namespace ash
