#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "drbf/errors.hpp"
#include "drbf/operator_model.hpp"
#include "drbf/rbf.hpp"

namespace drbf {

/// Frames of one sequence at the training sites, each N x M, oldest first.
using Frames = std::vector<Matrix>;

/// Which sites contribute residuals when a site is left out of the inputs.
enum class ResidualSites { all, left_out_only };

/// One training sample: predict frames[step + 1] from frames[step], ...,
/// frames[step - p + 1].
struct Transition {
    const Frames* frames = nullptr;
    int step = 0;
    std::optional<int> left_out;
};

/// Accumulates the squared one-step residual and its exact gradient for any
/// number of transitions that share one site configuration.
///
/// D and Phi are evaluated once for all site pairs; a left-out site only
/// removes its column, so every transition reuses the same network pass.
class TransitionLoss {
public:
    TransitionLoss(const OperatorModel& model, const PointMatrix& sites, double dt, double lambda,
                   ResidualSites residual_sites = ResidualSites::all, bool with_gradient = true)
        : model_(model), sites_(sites), dt_(dt), lambda_(lambda), residual_sites_(residual_sites),
          with_gradient_(with_gradient)
    {
        model.validate();
        detail::require(sites.cols() == model.dim, "loss: site dimension differs from the model dimension");
        detail::require(sites.rows() >= 1, "loss: need at least one site");
        inputs_ = pair_inputs(model.kernel, sites, sites);
        d_ = unflatten_features(model.lnet.forward(inputs_, with_gradient ? &cache_ : nullptr), sites.rows(),
                                sites.rows());
        phi_ = assemble_phi(model.kernel, sites, sites);
        if (with_gradient) {
            grad_ = ModelGradient::zero(model);
            grad_d_.assign(static_cast<std::size_t>(model.features), Matrix::Zero(sites.rows(), sites.rows()));
            grad_phi_ = Matrix::Zero(sites.rows(), sites.rows());
        }
    }

    /// Adds weight * |residual|^2 for one transition; returns the unweighted value.
    double add(const Transition& t, double weight)
    {
        const Frames& frames = *t.frames;
        const int p = model_.order;
        const auto n = sites_.rows();
        if (t.step < p - 1 || t.step + 1 >= static_cast<int>(frames.size()))
            throw ValidationError("loss: step " + std::to_string(t.step) + " lacks the required history frames");
        for (const auto& f : frames)
            if (f.rows() != n || f.cols() != model_.variables)
                throw ValidationError("loss: frame shape does not match sites x variables");

        std::vector<int> keep;
        for (int i = 0; i < n; ++i)
            if (!t.left_out || i != *t.left_out) keep.push_back(i);
        if (t.left_out) detail::require(*t.left_out >= 0 && *t.left_out < n, "loss: left-out index out of range");

        const Matrix phi_s = phi_(keep, keep);
        const Matrix u = frames[static_cast<std::size_t>(t.step)](keep, Eigen::all);
        DerivativeTensor ds;
        for (const auto& s : d_.slices) ds.slices.push_back(s(Eigen::all, keep));

        const RidgeSolver solver(phi_s, lambda_);
        const Matrix coeffs = solver.solve(u);
        const Matrix z = contract_features(ds, coeffs);
        MlpCache fcache;
        Matrix rhs;
        if (model_.is_linear())
            rhs = z;
        else
            rhs = model_.fnet->forward(Matrix(z.transpose()), with_gradient_ ? &fcache : nullptr).transpose();

        const auto w = extrapolation_weights(p);
        Matrix residual = frames[static_cast<std::size_t>(t.step + 1)] - dt_ * rhs;
        for (int q = 0; q < p; ++q)
            residual -= w[static_cast<std::size_t>(q)] * frames[static_cast<std::size_t>(t.step - q)];
        if (t.left_out && residual_sites_ == ResidualSites::left_out_only) {
            const Eigen::RowVectorXd keep_row = residual.row(*t.left_out);
            residual.setZero();
            residual.row(*t.left_out) = keep_row;
        }
        const double value = residual.squaredNorm();
        if (!std::isfinite(value)) throw NumericalError("loss: non-finite residual");
        loss_ += weight * value;
        if (!with_gradient_) return value;

        const Matrix grad_rhs = (-2.0 * weight * dt_) * residual;
        Matrix grad_z;
        if (model_.is_linear()) {
            grad_z = grad_rhs;
        } else {
            Matrix grad_in;
            *grad_.fnet += model_.fnet->backward(fcache, grad_rhs.transpose(), &grad_in);
            grad_z = grad_in.transpose();
        }

        const int h = model_.features;
        Matrix grad_c = Matrix::Zero(coeffs.rows(), coeffs.cols());
        for (int r = 0; r < h; ++r) {
            Matrix gzr(n, model_.variables);
            for (int m = 0; m < model_.variables; ++m) gzr.col(m) = grad_z.col(m * h + r);
            grad_d_[static_cast<std::size_t>(r)](Eigen::all, keep) += gzr * coeffs.transpose();
            grad_c += ds.slices[static_cast<std::size_t>(r)].transpose() * gzr;
        }
        Matrix grad_phi_s;
        solver.backward(u, coeffs, grad_c, grad_phi_s);
        grad_phi_(keep, keep) += grad_phi_s;
        return value;
    }

    double loss() const { return loss_; }

    /// Back-propagates the accumulated D and Phi gradients into L_net and sigma.
    ModelGradient gradient()
    {
        detail::require(with_gradient_, "loss: gradient requested from a value-only evaluation");
        ModelGradient g = grad_;
        const Matrix dphi = assemble_phi_dsigma(model_.kernel, sites_, sites_);
        g.sigma += grad_phi_.cwiseProduct(dphi).sum();

        Matrix grad_in;
        DerivativeTensor gd{grad_d_};
        g.lnet = model_.lnet.backward(cache_, flatten_features(gd), &grad_in);
        const auto n = sites_.rows();
        const int last = 2 * model_.dim;
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index i = 0; i < n; ++i) g.sigma += grad_in(last, i + n * j) * dphi(i, j);
        return g;
    }

    const DerivativeTensor& derivative_tensor() const { return d_; }
    const Matrix& phi() const { return phi_; }

private:
    const OperatorModel& model_;
    PointMatrix sites_;
    double dt_;
    double lambda_;
    ResidualSites residual_sites_;
    bool with_gradient_;

    Matrix inputs_;
    MlpCache cache_;
    DerivativeTensor d_;
    Matrix phi_;

    double loss_ = 0.0;
    ModelGradient grad_;
    std::vector<Matrix> grad_d_;
    Matrix grad_phi_;
};

namespace detail {

inline void check_sequence(const OperatorModel& model, const Frames& frames)
{
    const int k = static_cast<int>(frames.size()) - 1;
    if (k < model.order)
        throw ValidationError("sequence_loss: " + std::to_string(frames.size()) + " frames are insufficient for order " +
                              std::to_string(model.order));
}

} // namespace detail

/// (1/K) sum_k |u(k+1) - sum_q w_q u(k-q+1) - dt F(D Phi^-1 u(k))|^2 over
/// every k with a full history, for K+1 frames.
inline double sequence_loss(const OperatorModel& model, const PointMatrix& sites, const Frames& frames, double dt,
                            double lambda, std::optional<int> left_out = std::nullopt,
                            ResidualSites residual_sites = ResidualSites::all)
{
    detail::check_sequence(model, frames);
    const int k_total = static_cast<int>(frames.size()) - 1;
    TransitionLoss acc(model, sites, dt, lambda, residual_sites, false);
    for (int k = model.order - 1; k < k_total; ++k) acc.add({&frames, k, left_out}, 1.0 / k_total);
    return acc.loss();
}

struct LossAndGradient {
    double loss = 0.0;
    ModelGradient gradient;
};

inline LossAndGradient sequence_loss_gradient(const OperatorModel& model, const PointMatrix& sites, const Frames& frames,
                                              double dt, double lambda, std::optional<int> left_out = std::nullopt,
                                              ResidualSites residual_sites = ResidualSites::all)
{
    detail::check_sequence(model, frames);
    const int k_total = static_cast<int>(frames.size()) - 1;
    TransitionLoss acc(model, sites, dt, lambda, residual_sites, true);
    for (int k = model.order - 1; k < k_total; ++k) acc.add({&frames, k, left_out}, 1.0 / k_total);
    return {acc.loss(), acc.gradient()};
}

} // namespace drbf
