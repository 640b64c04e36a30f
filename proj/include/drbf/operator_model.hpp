#pragma once

#include <algorithm>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "drbf/adam.hpp"
#include "drbf/errors.hpp"
#include "drbf/mlp.hpp"
#include "drbf/rbf.hpp"
#include "drbf/types.hpp"

namespace drbf {

/// Smallest shape parameter an optimiser step may produce.
inline constexpr double min_sigma = 1e-4;

/// Learned stepper: L_net maps (x_i, x_j, phi_ij) to h derivative features of
/// the kernel; F_net (absent for the linear variant) maps the M*h features
/// of the field at a site to the M right-hand-side values.
struct OperatorModel {
    int dim = 2;
    int variables = 1; // M
    int features = 1;  // h
    int order = 1;     // p
    Mlp lnet;
    std::optional<Mlp> fnet;
    RbfKernel kernel{1.0};
    double lambda = default_ridge;

    bool is_linear() const { return !fnet.has_value(); }

    void validate() const
    {
        detail::require(dim >= 1 && variables >= 1 && features >= 1 && order >= 1,
                        "model: dimension, M, h and p must all be positive");
        detail::require(lnet.depth() > 0, "model: L_net has no layers");
        detail::require(lnet.input_width() == 2 * dim + 1, "model: L_net input width must be 2d+1");
        detail::require(lnet.output_width() == features, "model: L_net output width must equal h");
        if (fnet) {
            detail::require(fnet->input_width() == variables * features, "model: F_net input width must be M*h");
            detail::require(fnet->output_width() == variables, "model: F_net output width must be M");
        } else {
            detail::require(features == 1 && variables == 1, "model: the linear variant requires h = 1 and M = 1");
        }
        detail::require(kernel.sigma > 0.0, "model: sigma must be positive");
        detail::require(lambda >= 0.0, "model: ridge parameter must be non-negative");
    }

    /// Fresh model with Glorot-initialised networks. Hidden widths default to
    /// 64-32 for L_net and 128-64-32 for F_net.
    static OperatorModel create(int dim, int variables, int features, int order, bool linear, double sigma,
                                std::mt19937_64& rng, std::vector<int> lnet_hidden = {64, 32},
                                std::vector<int> fnet_hidden = {128, 64, 32}, double lambda = default_ridge)
    {
        OperatorModel m;
        m.dim = dim;
        m.variables = variables;
        m.features = features;
        m.order = order;
        m.kernel = RbfKernel(sigma);
        m.lambda = lambda;
        std::vector<int> ls{2 * dim + 1};
        ls.insert(ls.end(), lnet_hidden.begin(), lnet_hidden.end());
        ls.push_back(features);
        m.lnet = Mlp::glorot(ls, rng);
        if (!linear) {
            std::vector<int> fs{variables * features};
            fs.insert(fs.end(), fnet_hidden.begin(), fnet_hidden.end());
            fs.push_back(variables);
            m.fnet = Mlp::glorot(fs, rng);
        }
        m.validate();
        return m;
    }

    /// Trainable parameters as one flat vector; sigma is the last entry.
    std::vector<double> pack() const
    {
        std::vector<double> out;
        lnet.pack(out);
        if (fnet) fnet->pack(out);
        out.push_back(kernel.sigma);
        return out;
    }

    void unpack(std::span<const double> in)
    {
        std::size_t k = lnet.unpack(in);
        if (fnet) k += fnet->unpack(in.subspan(k));
        kernel.sigma = in[k];
    }

    std::size_t parameter_count() const { return lnet.parameter_count() + (fnet ? fnet->parameter_count() : 0) + 1; }

    bool operator==(const OperatorModel& o) const
    {
        return dim == o.dim && variables == o.variables && features == o.features && order == o.order &&
               lnet == o.lnet && fnet == o.fnet && kernel.sigma == o.kernel.sigma && lambda == o.lambda;
    }
};

struct ModelGradient {
    MlpGradient lnet;
    std::optional<MlpGradient> fnet;
    double sigma = 0.0;

    static ModelGradient zero(const OperatorModel& m)
    {
        ModelGradient g;
        g.lnet = m.lnet.zero_gradient();
        if (m.fnet) g.fnet = m.fnet->zero_gradient();
        return g;
    }

    std::vector<double> pack() const
    {
        std::vector<double> out;
        Mlp::pack(lnet, out);
        if (fnet) Mlp::pack(*fnet, out);
        out.push_back(sigma);
        return out;
    }
};

/// Adam over (theta, vartheta, sigma); sigma is clamped to stay >= min_sigma.
inline void adam_step(AdamState& state, OperatorModel& model, const ModelGradient& grad)
{
    std::vector<double> params = model.pack();
    const std::vector<double> g = grad.pack();
    if (state.m.empty()) state = AdamState(params.size(), state.config);
    adam_step(state, std::span<double>(params), std::span<const double>(g));
    params.back() = std::max(params.back(), min_sigma);
    model.unpack(params);
}

/// h matrices of learned derivative features, each rows x cols.
struct DerivativeTensor {
    std::vector<Matrix> slices;

    int features() const { return static_cast<int>(slices.size()); }
    Eigen::Index rows() const { return slices.empty() ? 0 : slices.front().rows(); }
    Eigen::Index cols() const { return slices.empty() ? 0 : slices.front().cols(); }
};

/// L_net input columns [x_i; x_j; phi(|x_i - x_j|)] for every pair, with
/// column index i + rows * j.
inline Matrix pair_inputs(const RbfKernel& kernel, const PointMatrix& rows, const PointMatrix& cols)
{
    detail::check_same_dim(rows, cols, "pair_inputs");
    const Eigen::Index d = rows.cols();
    Matrix in(2 * d + 1, rows.rows() * cols.rows());
    for (Eigen::Index j = 0; j < cols.rows(); ++j) {
        for (Eigen::Index i = 0; i < rows.rows(); ++i) {
            auto col = in.col(i + rows.rows() * j);
            col.head(d) = rows.row(i).transpose();
            col.segment(d, d) = cols.row(j).transpose();
            col[2 * d] = kernel((rows.row(i) - cols.row(j)).norm());
        }
    }
    return in;
}

inline Vector derivative_features(const OperatorModel& model, const Point& xi, const Point& xj)
{
    if (xi.size() != model.dim || xj.size() != model.dim)
        throw ValidationError("derivative_features: coordinates must have dimension " + std::to_string(model.dim));
    Vector in(2 * model.dim + 1);
    in << xi, xj, model.kernel((xi - xj).norm());
    return model.lnet.forward(in);
}

/// Reshapes h x (rows*cols) network output into per-feature matrices.
inline DerivativeTensor unflatten_features(const Matrix& out, Eigen::Index rows, Eigen::Index cols)
{
    DerivativeTensor d;
    for (Eigen::Index r = 0; r < out.rows(); ++r) {
        Matrix s(rows, cols);
        for (Eigen::Index j = 0; j < cols; ++j)
            for (Eigen::Index i = 0; i < rows; ++i) s(i, j) = out(r, i + rows * j);
        d.slices.push_back(std::move(s));
    }
    return d;
}

inline Matrix flatten_features(const DerivativeTensor& d)
{
    const Eigen::Index rows = d.rows(), cols = d.cols();
    Matrix out(d.features(), rows * cols);
    for (int r = 0; r < d.features(); ++r)
        for (Eigen::Index j = 0; j < cols; ++j)
            for (Eigen::Index i = 0; i < rows; ++i) out(r, i + rows * j) = d.slices[r](i, j);
    return out;
}

/// Removes column `col` from a matrix.
inline Matrix drop_column(const Matrix& m, Eigen::Index col)
{
    Matrix out(m.rows(), m.cols() - 1);
    out.leftCols(col) = m.leftCols(col);
    out.rightCols(m.cols() - col - 1) = m.rightCols(m.cols() - col - 1);
    return out;
}

/// Removes row `row` from a matrix.
inline Matrix drop_row(const Matrix& m, Eigen::Index row)
{
    Matrix out(m.rows() - 1, m.cols());
    out.topRows(row) = m.topRows(row);
    out.bottomRows(m.rows() - row - 1) = m.bottomRows(m.rows() - row - 1);
    return out;
}

/// D(r, i, j) = L_net(x_i, x_j, phi_ij)_r. With `left_out`, that centre's
/// column is omitted.
inline DerivativeTensor assemble_d_tensor(const OperatorModel& model, const PointMatrix& eval_sites,
                                          const PointMatrix& centers, std::optional<int> left_out = std::nullopt)
{
    DerivativeTensor d = unflatten_features(model.lnet.forward(pair_inputs(model.kernel, eval_sites, centers)),
                                            eval_sites.rows(), centers.rows());
    if (left_out) {
        detail::require(*left_out >= 0 && *left_out < centers.rows(), "assemble_d_tensor: left-out index out of range");
        for (auto& s : d.slices) s = drop_column(s, *left_out);
    }
    return d;
}

/// Per-site feature matrix: column m*h + r holds (D_r C)(:, m).
inline Matrix contract_features(const DerivativeTensor& d, const Matrix& coeffs)
{
    const int h = d.features();
    const auto variables = coeffs.cols();
    Matrix z(d.rows(), h * variables);
    for (int r = 0; r < h; ++r) {
        const Matrix dc = d.slices[r] * coeffs;
        for (Eigen::Index m = 0; m < variables; ++m) z.col(m * h + r) = dc.col(m);
    }
    return z;
}

/// F(D Phi^-1 u), one row per evaluation site; D C itself for the linear variant.
inline Matrix rhs_features(const OperatorModel& model, const DerivativeTensor& d, const Matrix& phi, const Matrix& u,
                           double lambda)
{
    if (d.features() != model.features) throw ValidationError("rhs_features: D has the wrong feature count");
    if (d.cols() != phi.cols()) throw ValidationError("rhs_features: D and Phi disagree on the number of centres");
    if (u.cols() != model.variables) throw ValidationError("rhs_features: u has the wrong number of variables");
    const Matrix coeffs = solve_coefficients(phi, u, lambda);
    const Matrix z = contract_features(d, coeffs);
    if (model.is_linear()) return z;
    return model.fnet->forward(Matrix(z.transpose())).transpose();
}

/// Signed weights of the backward-difference extrapolation,
/// w_q = C(p, q) (-1)^(q+1) for q = 1..p.
inline std::vector<double> extrapolation_weights(int p)
{
    detail::require(p >= 1, "temporal order must be positive");
    std::vector<double> w;
    double binom = 1.0;
    for (int q = 1; q <= p; ++q) {
        binom = binom * (p - q + 1) / q;
        w.push_back((q % 2 == 1) ? binom : -binom);
    }
    return w;
}

/// u(t+dt) = sum_q w_q u(t-(q-1)dt) + dt * rhs. `history` is newest first.
inline Matrix temporal_update(std::span<const Matrix> history, const Matrix& rhs, int p, double dt)
{
    if (static_cast<int>(history.size()) != p)
        throw ValidationError("temporal_update: expected " + std::to_string(p) + " history frames, got " +
                              std::to_string(history.size()));
    const auto w = extrapolation_weights(p);
    Matrix next = dt * rhs;
    for (int q = 0; q < p; ++q) next += w[static_cast<std::size_t>(q)] * history[static_cast<std::size_t>(q)];
    return next;
}

/// Closed-form operator coef * Laplacian applied to the Gaussian kernel.
struct AnalyticLaplacian {
    double coefficient = 1.0;

    Matrix derivative_matrix(const RbfKernel& kernel, const PointMatrix& rows, const PointMatrix& cols) const
    {
        const auto d = static_cast<int>(rows.cols());
        return detail::pairwise_distances(rows, cols).unaryExpr(
            [&](double r) { return coefficient * kernel.laplacian(r, d); });
    }
};

/// One-step transition matrix H: interior rows of I + dt D Phi^-1 (ridge),
/// the last `boundary_count` rows zero.
inline Matrix build_h_matrix(const Matrix& d, const Matrix& phi, int boundary_count, double dt, double lambda)
{
    detail::require(d.rows() == d.cols() && phi.rows() == phi.cols() && d.rows() == phi.rows(),
                    "build_h_matrix: D and Phi must be square and of equal size");
    detail::require(boundary_count >= 0 && boundary_count <= d.rows(), "build_h_matrix: bad boundary count");
    const auto n = d.rows();
    const Matrix phi_inv = solve_coefficients(phi, Matrix(Matrix::Identity(n, n)), lambda);
    Matrix h = Matrix::Identity(n, n) + dt * d * phi_inv;
    h.bottomRows(boundary_count).setZero();
    return h;
}

inline Matrix build_h_matrix(const OperatorModel& model, const PointMatrix& sites, int boundary_count, double dt,
                             double lambda)
{
    if (!model.is_linear() || model.order != 1)
        throw ValidationError("build_h_matrix: only the linear first-order variant has a transition matrix");
    const DerivativeTensor d = assemble_d_tensor(model, sites, sites);
    return build_h_matrix(d.slices[0], assemble_phi(model.kernel, sites, sites), boundary_count, dt, lambda);
}

inline Matrix build_h_matrix(const AnalyticLaplacian& op, const RbfKernel& kernel, const PointMatrix& sites,
                             int boundary_count, double dt, double lambda)
{
    return build_h_matrix(op.derivative_matrix(kernel, sites, sites), assemble_phi(kernel, sites, sites), boundary_count,
                          dt, lambda);
}

/// Largest eigenvalue modulus (Hessenberg reduction + shifted QR).
inline double spectral_radius(const Matrix& h)
{
    if (h.rows() != h.cols()) throw ValidationError("spectral_radius: matrix is not square");
    if (!h.allFinite()) throw ValidationError("spectral_radius: non-finite entries");
    if (h.size() == 0) return 0.0;
    Eigen::EigenSolver<Matrix> es(h, false);
    if (es.info() != Eigen::Success) throw NumericalError("spectral_radius: eigenvalue iteration did not converge");
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

} // namespace drbf
