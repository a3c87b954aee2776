#pragma once

#include <span>
#include <stdexcept>
#include <string>

#include "ggnscore/losses.hpp"
#include "ggnscore/models.hpp"
#include "ggnscore/regularizers.hpp"
#include "ggnscore/types.hpp"

namespace ggnscore {

inline constexpr Eigen::Index kDefaultMSizeCap = 8192;

/// The augmented least-squares system a GGN-SCORE step is computed from.
/// For a batch of m samples with d outputs each, M = d m + 1:
///   rows 1..dm of `jacobian` are the loss-scaled model Jacobians,
///   row M is lambda * grad h(theta)';
///   `residual` stacks the per-sample residuals with a trailing 1;
///   `curvature_diag` stacks the per-sample curvatures with a trailing 0.
/// With that trailing block, jacobian' * residual is exactly the gradient of
/// the batch objective (fit term + lambda h).
struct AugmentedSystem {
    Matrix jacobian;        // M x n_w
    Vector residual;        // M
    Vector curvature_diag;  // M, nonnegative
    Vector reg_hess_diag;   // n_w, strictly positive
    Vector reg_gradient;    // n_w
    double lambda = 1.0;
    Eigen::Index m_size = 0;

    Vector gradient() const { return jacobian.transpose() * residual; }
};

/// Builds the augmented system at `theta` over the given batch of sample
/// indices. `model(theta, x_i)` must return a ModelEval whose output dimension
/// matches the dataset's target width; `loss(y_i, yhat_i)` a FitLossEval; and
/// `reg.eval(theta)` a RegularizerBundle.
template <class Model, class Loss, class Reg>
AugmentedSystem assemble_augmented(const Eigen::Ref<const Vector>& theta, const Dataset& data,
                                   std::span<const Eigen::Index> batch, const Model& model,
                                   const Loss& loss, const Reg& reg, double lambda,
                                   Eigen::Index m_size_cap = kDefaultMSizeCap) {
    if (batch.empty()) throw std::invalid_argument("assemble_augmented: batch is empty");
    if (!(lambda > 0.0)) throw std::invalid_argument("assemble_augmented: lambda must be positive");
    require_finite(theta, "theta");

    const Eigen::Index d = data.n_targets();
    const Eigen::Index n_w = theta.size();
    const Eigen::Index m = static_cast<Eigen::Index>(batch.size());
    const Eigen::Index M = d * m + 1;
    if (M > m_size_cap)
        throw std::invalid_argument("assemble_augmented: augmented size d*m+1 = " +
                                    std::to_string(M) + " exceeds cap " +
                                    std::to_string(m_size_cap));

    RegularizerBundle bundle = reg.eval(theta);
    if (bundle.gradient.size() != n_w || bundle.hess_diag.size() != n_w)
        throw ShapeError("assemble_augmented: regularizer dimension mismatch");
    if ((bundle.hess_diag.array() <= 0.0).any())
        throw NumericError("assemble_augmented: regularizer Hessian diagonal not positive");

    AugmentedSystem sys;
    sys.jacobian.resize(M, n_w);
    sys.residual.resize(M);
    sys.curvature_diag.resize(M);

    for (Eigen::Index k = 0; k < m; ++k) {
        const Eigen::Index i = batch[k];
        if (i < 0 || i >= data.n())
            throw std::out_of_range("assemble_augmented: sample index out of range");
        const ModelEval ev = model(theta, data.features.row(i).transpose());
        if (ev.prediction.size() != d || ev.jacobian.rows() != d || ev.jacobian.cols() != n_w)
            throw ShapeError("assemble_augmented: model output shape mismatch");
        if (!ev.prediction.allFinite() || !ev.jacobian.allFinite())
            throw NumericError("assemble_augmented: non-finite model output at sample " +
                               std::to_string(i));
        const FitLossEval fl = loss(data.targets.row(i).transpose(), ev.prediction);
        sys.jacobian.middleRows(k * d, d) =
            fl.residual_jacobian_scale.asDiagonal() * ev.jacobian;
        sys.residual.segment(k * d, d) = fl.residual;
        sys.curvature_diag.segment(k * d, d) = fl.curvature;
    }
    sys.jacobian.row(M - 1) = lambda * bundle.gradient.transpose();
    sys.residual[M - 1] = 1.0;
    sys.curvature_diag[M - 1] = 0.0;
    sys.reg_hess_diag = std::move(bundle.hess_diag);
    sys.reg_gradient = std::move(bundle.gradient);
    sys.lambda = lambda;
    sys.m_size = M;
    return sys;
}

/// Gradient of the batch objective (fit surrogate + lambda h) at theta,
/// accumulated sample by sample without materializing the augmented Jacobian.
template <class Model, class Loss, class Reg>
Vector batch_gradient(const Eigen::Ref<const Vector>& theta, const Dataset& data,
                      std::span<const Eigen::Index> batch, const Model& model, const Loss& loss,
                      const Reg& reg, double lambda) {
    if (batch.empty()) throw std::invalid_argument("batch_gradient: batch is empty");
    require_finite(theta, "theta");
    Vector g = Vector::Zero(theta.size());
    for (const Eigen::Index i : batch) {
        if (i < 0 || i >= data.n())
            throw std::out_of_range("batch_gradient: sample index out of range");
        const ModelEval ev = model(theta, data.features.row(i).transpose());
        const FitLossEval fl = loss(data.targets.row(i).transpose(), ev.prediction);
        g.noalias() += ev.jacobian.transpose() *
                       (fl.residual_jacobian_scale.cwiseProduct(fl.residual));
    }
    g += lambda * reg.eval(theta).gradient;
    return g;
}

/// Value of the batch objective whose gradient batch_gradient returns.
template <class Model, class Loss, class Reg>
double batch_objective(const Eigen::Ref<const Vector>& theta, const Dataset& data,
                       std::span<const Eigen::Index> batch, const Model& model, const Loss& loss,
                       const Reg& reg, double lambda) {
    double value = 0.0;
    for (const Eigen::Index i : batch) {
        const ModelEval ev = model(theta, data.features.row(i).transpose());
        value += loss.surrogate(loss(data.targets.row(i).transpose(), ev.prediction));
    }
    return value + lambda * reg.eval(theta).value;
}

/// Sum of the plain per-sample losses over the whole dataset (no regularizer,
/// no residual-mode surrogacy).
template <class Model, class Loss>
double dataset_fit_loss(const Eigen::Ref<const Vector>& theta, const Dataset& data,
                        const Model& model, const Loss& loss) {
    double value = 0.0;
    for (Eigen::Index i = 0; i < data.n(); ++i) {
        const ModelEval ev = model(theta, data.features.row(i).transpose());
        value += loss(data.targets.row(i).transpose(), ev.prediction).loss;
    }
    return value;
}

}  // namespace ggnscore
