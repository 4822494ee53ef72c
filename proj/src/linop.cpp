#include "ash/linop.hpp"

#include <cmath>
#include <stdexcept>

namespace ash {

ShiftedOperator::ShiftedOperator(const HawkesNetwork& net, bool transposed)
    : net_(net), transposed_(transposed) {
    const SparseMatrix& A = net_.A;
    VectorXd col_abs = VectorXd::Zero(net_.m);
    VectorXd row_abs = VectorXd::Zero(net_.m);
    VectorXd diag = VectorXd::Zero(net_.m);
    for (const Triplet& e : A.entries()) {
        if (e.row == e.col) {
            diag[e.row] = e.value;
        } else {
            col_abs[e.col] += std::abs(e.value);
            row_abs[e.row] += std::abs(e.value);
        }
    }
    double n1 = 0.0;
    double ninf = 0.0;
    for (Index i = 0; i < net_.m; ++i) {
        n1 = std::max(n1, col_abs[i] + std::abs(diag[i] - net_.omega));
        ninf = std::max(ninf, row_abs[i] + std::abs(diag[i] - net_.omega));
    }
    one_norm_ = n1;
    inf_norm_ = ninf;
    trace_ = A.trace() - static_cast<double>(net_.m) * net_.omega;
}

void ShiftedOperator::apply(const VectorXd& x, VectorXd& y) const {
    if (transposed_) {
        net_.A.multiply_transpose(x, y);
    } else {
        net_.A.multiply(x, y);
    }
    y.noalias() -= net_.omega * x;
}

double ShiftedOperator::one_norm_shifted(double mu) const {
    const SparseMatrix& A = net_.A;
    VectorXd off_abs = VectorXd::Zero(net_.m);
    VectorXd diag = VectorXd::Zero(net_.m);
    for (const Triplet& e : A.entries()) {
        if (e.row == e.col) {
            diag[e.row] = e.value;
        } else {
            // 1-norm of M^T is the inf-norm of M, so sum rows when transposed.
            off_abs[transposed_ ? e.row : e.col] += std::abs(e.value);
        }
    }
    double n = 0.0;
    for (Index i = 0; i < net_.m; ++i) {
        n = std::max(n, off_abs[i] + std::abs(diag[i] - net_.omega - mu));
    }
    return n;
}

DenseOperator::DenseOperator(MatrixXd matrix) : matrix_(std::move(matrix)) {
    if (matrix_.rows() != matrix_.cols()) {
        throw std::invalid_argument("DenseOperator: matrix must be square");
    }
}

double DenseOperator::one_norm() const {
    return matrix_.cols() == 0 ? 0.0 : matrix_.cwiseAbs().colwise().sum().maxCoeff();
}

double DenseOperator::one_norm_shifted(double mu) const {
    if (matrix_.cols() == 0) {
        return 0.0;
    }
    MatrixXd shifted = matrix_;
    shifted.diagonal().array() -= mu;
    return shifted.cwiseAbs().colwise().sum().maxCoeff();
}

} // namespace ash
