#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ggnscore/types.hpp"

namespace ggnscore {

// Predicted probabilities are clamped into [kProbClip, 1 - kProbClip] before
// any logarithm is taken.
inline constexpr double kProbClip = 1e-12;

/// How a fit loss is folded into the Gauss-Newton residual.
///
/// LossGradient: residual = dl/dyhat with unit Jacobian scaling; the
/// curvature entries are the second derivatives d2l/dyhat2, so J'QJ uses true
/// loss curvature and J'e is the exact gradient of sum_n l_n.
///
/// Deviance: residual = signed square root of the unit deviance, unit
/// curvature, and the Jacobian rows are scaled by de/dyhat so that J'e is the
/// exact gradient of (1/2) sum_n e_n^2.
enum class ResidualMode { LossGradient, Deviance };

/// Per-sample loss evaluation: scalar loss, the length-d residual and
/// curvature used in the augmented system, and the factor multiplying the
/// model Jacobian rows. residual, curvature and residual_jacobian_scale are
/// aligned per output coordinate.
struct FitLossEval {
    double loss = 0.0;
    Vector residual;
    Vector curvature;                // nonnegative
    Vector residual_jacobian_scale;  // de/dyhat
};

/// Squared loss (1/2)|yhat - y|^2. Residual is the plain misfit, curvature
/// and Jacobian scale are 1, so both residual modes coincide.
inline FitLossEval squared_loss(const Eigen::Ref<const Vector>& y,
                                const Eigen::Ref<const Vector>& yhat) {
    if (y.size() != yhat.size())
        throw ShapeError("squared_loss: y and yhat differ in length");
    require_finite(y, "y");
    require_finite(yhat, "yhat");
    FitLossEval out;
    out.residual = yhat - y;
    out.loss = 0.5 * out.residual.squaredNorm();
    out.curvature = Vector::Ones(y.size());
    out.residual_jacobian_scale = Vector::Ones(y.size());
    return out;
}

/// Halved cross-entropy for binary targets,
///   l = (1/2) [ y log(1/yhat) + (1-y) log(1/(1-yhat)) ],
/// summed over output coordinates.
///
/// LossGradient mode returns dl/dyhat and d2l/dyhat2 per coordinate.
/// Deviance mode returns e = (-1)^{y+1} sqrt(-2 [y log yhat + (1-y) log(1-yhat)])
/// (positive for y = 1, negative for y = 0) with unit curvature; the Jacobian
/// scale de/dyhat is -1/(yhat e) for y = 1 and 1/((1-yhat) e) for y = 0.
/// Clamping keeps |e| >= sqrt(-2 log(1 - kProbClip)) > 0, so the scale is finite.
inline FitLossEval cross_entropy_loss(const Eigen::Ref<const Vector>& y,
                                      const Eigen::Ref<const Vector>& yhat,
                                      ResidualMode mode) {
    if (y.size() != yhat.size())
        throw ShapeError("cross_entropy_loss: y and yhat differ in length");
    const Eigen::Index d = y.size();
    FitLossEval out;
    out.residual.resize(d);
    out.curvature.resize(d);
    out.residual_jacobian_scale.resize(d);
    out.loss = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
        if (!is_binary_label(y[j]))
            throw std::invalid_argument("cross_entropy_loss: target not in {0, 1}");
        const double raw = yhat[j];
        if (!std::isfinite(raw) || raw < 0.0 || raw > 1.0)
            throw NumericError("cross_entropy_loss: prediction outside [0, 1]");
        const double p = std::clamp(raw, kProbClip, 1.0 - kProbClip);
        const bool one = y[j] == 1.0;
        out.loss += one ? -0.5 * std::log(p) : -0.5 * std::log(1.0 - p);
        if (mode == ResidualMode::LossGradient) {
            out.residual[j] = one ? -0.5 / p : 0.5 / (1.0 - p);
            out.curvature[j] = one ? 0.5 / (p * p) : 0.5 / ((1.0 - p) * (1.0 - p));
            out.residual_jacobian_scale[j] = 1.0;
        } else {
            const double unit_dev = one ? -2.0 * std::log(p) : -2.0 * std::log(1.0 - p);
            const double e = one ? std::sqrt(unit_dev) : -std::sqrt(unit_dev);
            out.residual[j] = e;
            out.curvature[j] = 1.0;
            out.residual_jacobian_scale[j] = one ? -1.0 / (p * e) : 1.0 / ((1.0 - p) * e);
        }
    }
    return out;
}

/// Loss functors with a uniform call surface for assembly, plus the value of
/// the objective term the residual actually linearizes: sum_n l_n in
/// LossGradient mode, (1/2) sum_n e_n^2 in Deviance mode.

struct SquaredLoss {
    FitLossEval operator()(const Eigen::Ref<const Vector>& y,
                           const Eigen::Ref<const Vector>& yhat) const {
        return squared_loss(y, yhat);
    }
    double surrogate(const FitLossEval& ev) const { return ev.loss; }
};

struct CrossEntropyLoss {
    ResidualMode mode = ResidualMode::Deviance;

    FitLossEval operator()(const Eigen::Ref<const Vector>& y,
                           const Eigen::Ref<const Vector>& yhat) const {
        return cross_entropy_loss(y, yhat, mode);
    }
    double surrogate(const FitLossEval& ev) const {
        return mode == ResidualMode::Deviance ? 0.5 * ev.residual.squaredNorm() : ev.loss;
    }
};

}  // namespace ggnscore
