#pragma once

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "drbf/errors.hpp"
#include "drbf/types.hpp"

namespace drbf {

/// Default ridge parameter for coefficient solves.
inline constexpr double default_ridge = 1e-4;

/// Condition number of Phi above which front ends warn.
inline constexpr double phi_condition_limit = 1e12;

/// Gaussian radial function exp(-r^2 / (2 sigma^2)).
struct RbfKernel {
    double sigma = 1.0;

    explicit RbfKernel(double s = 1.0) : sigma(s)
    {
        detail::require(std::isfinite(s) && s > 0.0, "RBF shape parameter must be positive");
    }

    double operator()(double r) const { return std::exp(-r * r / (2.0 * sigma * sigma)); }

    /// d phi / d sigma at distance r.
    double dsigma(double r) const { return (*this)(r) * r * r / (sigma * sigma * sigma); }

    /// Closed-form Laplacian of phi(|x - c|) in d dimensions.
    double laplacian(double r, int d) const
    {
        const double s2 = sigma * sigma;
        return (*this)(r) * (r * r - d * s2) / (s2 * s2);
    }
};

inline double kernel_value(const RbfKernel& k, double r) { return k(r); }

namespace detail {

inline void check_same_dim(const PointMatrix& a, const PointMatrix& b, const char* what)
{
    if (a.cols() != b.cols())
        throw ValidationError(std::string(what) + ": dimension mismatch (" + std::to_string(a.cols()) + " vs " +
                              std::to_string(b.cols()) + ")");
}

inline Matrix pairwise_distances(const PointMatrix& rows, const PointMatrix& cols)
{
    check_same_dim(rows, cols, "pairwise_distances");
    Matrix r(rows.rows(), cols.rows());
    for (Eigen::Index j = 0; j < cols.rows(); ++j)
        for (Eigen::Index i = 0; i < rows.rows(); ++i) r(i, j) = (rows.row(i) - cols.row(j)).norm();
    return r;
}

} // namespace detail

/// Phi(i, j) = phi(|eval_i - center_j|).
inline Matrix assemble_phi(const RbfKernel& kernel, const PointMatrix& eval_points, const PointMatrix& centers)
{
    detail::check_same_dim(eval_points, centers, "assemble_phi");
    return detail::pairwise_distances(eval_points, centers).unaryExpr([&](double r) { return kernel(r); });
}

/// Elementwise d Phi / d sigma.
inline Matrix assemble_phi_dsigma(const RbfKernel& kernel, const PointMatrix& eval_points, const PointMatrix& centers)
{
    return detail::pairwise_distances(eval_points, centers).unaryExpr([&](double r) { return kernel.dsigma(r); });
}

/// Factorised ridge solve c = argmin |Phi c - u|^2 + lambda |c|^2.
///
/// lambda > 0 goes through the normal equations (Phi^T Phi + lambda I) with
/// Cholesky, falling back to column-pivoted QR on the stacked system
/// [Phi; sqrt(lambda) I]. lambda == 0 factorises Phi itself with
/// column-pivoted QR and reports rank deficiency as a solver failure.
class RidgeSolver {
public:
    RidgeSolver(const Matrix& phi, double lambda) : phi_(phi), lambda_(lambda)
    {
        detail::require(lambda >= 0.0 && std::isfinite(lambda), "ridge parameter must be finite and non-negative");
        if (!phi.allFinite()) throw ValidationError("ridge solve: interpolation matrix has non-finite entries");
        if (lambda > 0.0) {
            Matrix normal = phi.transpose() * phi;
            normal.diagonal().array() += lambda;
            llt_.compute(normal);
            use_llt_ = llt_.info() == Eigen::Success;
            if (!use_llt_) {
                Matrix stacked(phi.rows() + phi.cols(), phi.cols());
                stacked.topRows(phi.rows()) = phi;
                stacked.bottomRows(phi.cols()) = std::sqrt(lambda) * Matrix::Identity(phi.cols(), phi.cols());
                qr_.compute(stacked);
            }
        } else {
            qr_.compute(phi);
            if (qr_.rank() < phi.cols()) throw NumericalError("ridge solve: singular interpolation matrix with lambda = 0");
        }
    }

    /// Coefficients for one or more right-hand sides (one column each).
    Matrix solve(const Matrix& values) const
    {
        if (values.rows() != phi_.rows())
            throw ValidationError("ridge solve: " + std::to_string(values.rows()) + " values for " +
                                  std::to_string(phi_.rows()) + " rows");
        if (!values.allFinite()) throw ValidationError("ridge solve: non-finite values");
        Matrix c;
        if (lambda_ > 0.0 && use_llt_) {
            c = llt_.solve(phi_.transpose() * values);
        } else if (lambda_ > 0.0) {
            Matrix rhs = Matrix::Zero(phi_.rows() + phi_.cols(), values.cols());
            rhs.topRows(phi_.rows()) = values;
            c = qr_.solve(rhs);
        } else {
            c = qr_.solve(values);
        }
        if (!c.allFinite()) throw NumericalError("ridge solve produced non-finite coefficients");
        return c;
    }

    /// Solves (Phi^T Phi + lambda I) w = g, the adjoint system of `solve`.
    Matrix solve_normal(const Matrix& g) const
    {
        if (lambda_ > 0.0 && use_llt_) return llt_.solve(g);
        const auto& qr = qr_;
        const Eigen::Index n = phi_.cols();
        Matrix pg = qr.colsPermutation().transpose() * g;
        const Matrix r = qr.matrixQR().topLeftCorner(n, n).template triangularView<Eigen::Upper>();
        const Matrix y = r.transpose().template triangularView<Eigen::Lower>().solve(pg);
        const Matrix z = r.template triangularView<Eigen::Upper>().solve(y);
        return qr.colsPermutation() * z;
    }

    /// Reverse-mode step: given dL/dC for C = solve(U), returns dL/dPhi and
    /// (optionally) dL/dU.
    void backward(const Matrix& values, const Matrix& coeffs, const Matrix& grad_coeffs, Matrix& grad_phi,
                  Matrix* grad_values = nullptr) const
    {
        const Matrix w = solve_normal(grad_coeffs);
        const Matrix residual = values - phi_ * coeffs;
        const Matrix phi_w = phi_ * w;
        grad_phi = residual * w.transpose() - phi_w * coeffs.transpose();
        if (grad_values) *grad_values = phi_w;
    }

    const Matrix& phi() const { return phi_; }
    double lambda() const { return lambda_; }

private:
    Matrix phi_;
    double lambda_;
    bool use_llt_ = false;
    Eigen::LLT<Matrix> llt_;
    Eigen::ColPivHouseholderQR<Matrix> qr_;
};

inline Matrix solve_coefficients(const Matrix& phi, const Matrix& values, double lambda)
{
    return RidgeSolver(phi, lambda).solve(values);
}

inline Vector solve_coefficients(const Matrix& phi, const Vector& values, double lambda)
{
    return RidgeSolver(phi, lambda).solve(values);
}

/// Sum_j c_j phi(|x - x_j|), one value per coefficient column.
inline Vector eval_interpolant(const RbfKernel& kernel, const PointMatrix& centers, const Matrix& coeffs, const Point& x)
{
    if (centers.cols() != x.size()) throw ValidationError("eval_interpolant: dimension mismatch");
    if (coeffs.rows() != centers.rows()) throw ValidationError("eval_interpolant: coefficient count differs from centre count");
    Vector phi_row(centers.rows());
    for (Eigen::Index j = 0; j < centers.rows(); ++j) phi_row[j] = kernel((centers.row(j).transpose() - x).norm());
    return coeffs.transpose() * phi_row;
}

inline double eval_interpolant(const RbfKernel& kernel, const PointMatrix& centers, const Vector& coeffs, const Point& x)
{
    return eval_interpolant(kernel, centers, Matrix(coeffs), x)[0];
}

/// Spectral condition number of a symmetric interpolation matrix; infinity
/// when it is numerically singular.
inline double phi_condition(const Matrix& phi)
{
    if (phi.rows() != phi.cols()) throw ValidationError("phi_condition: matrix is not square");
    if (phi.size() == 0) return 1.0;
    const Eigen::SelfAdjointEigenSolver<Matrix> es(phi, Eigen::EigenvaluesOnly);
    const Vector mag = es.eigenvalues().cwiseAbs();
    const double lo = mag.minCoeff();
    return lo > 0.0 ? mag.maxCoeff() / lo : std::numeric_limits<double>::infinity();
}

/// Mean nearest-neighbour distance times two; the default initial shape parameter.
inline double initial_sigma(const PointMatrix& sites)
{
    detail::require(sites.rows() >= 2, "initial_sigma: need at least two sites");
    double total = 0.0;
    for (Eigen::Index i = 0; i < sites.rows(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < sites.rows(); ++j)
            if (j != i) best = std::min(best, (sites.row(i) - sites.row(j)).norm());
        total += best;
    }
    return 2.0 * total / static_cast<double>(sites.rows());
}

} // namespace drbf
