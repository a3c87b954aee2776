#pragma once

#include <cmath>
#include <stdexcept>

#include "ggnscore/types.hpp"

namespace ggnscore {

/// Separable regularizer h(theta) evaluated at a point: value, gradient and the
/// diagonal of the (diagonal) Hessian, together with the self-concordance
/// constant M_h declared by the regularizer. `lambda` is the weight the caller
/// applies when forming lambda * h; it stays 1 until the augmented system is
/// assembled.
struct RegularizerBundle {
    double value = 0.0;
    Vector gradient;   // n_w
    Vector hess_diag;  // n_w, strictly positive
    double M_h = 1.0;
    double lambda = 1.0;
};

/// Pseudo-Huber penalty h_mu(theta) = sum_j (sqrt(mu^2 + theta_j^2) - mu).
///
/// Smooth l1 surrogate: quadratic near zero, slope 1 in the tails. Per
/// coordinate,
///   h'   = theta / sqrt(mu^2 + theta^2)
///   h''  = mu^2 / (mu^2 + theta^2)^{3/2}
/// so h'' lies in (0, 1/mu]. The scalar self-concordance bound
/// |h'''| <= 2 M_h h''^{3/2} with the scaled constant M_h = 1 holds on the
/// working region |theta_j| <= 0.744 mu (the ratio |h'''| / h''^{3/2} equals
/// 3|t|/mu (mu^2+t^2)^{-1/4}, which crosses 2 there and grows unboundedly, so
/// no global constant exists).
class PseudoHuber {
public:
    explicit PseudoHuber(double mu, double M_h = 1.0) : mu_(mu), M_h_(M_h) {
        if (!(mu > 0.0)) throw std::invalid_argument("PseudoHuber: mu must be positive");
        if (!(M_h >= 0.0)) throw std::invalid_argument("PseudoHuber: M_h must be nonnegative");
    }

    double mu() const { return mu_; }
    double M_h() const { return M_h_; }

    RegularizerBundle eval(const Eigen::Ref<const Vector>& theta) const {
        require_finite(theta, "theta");
        const Eigen::ArrayXd root = (theta.array().square() + mu_ * mu_).sqrt();
        RegularizerBundle b;
        b.value = (root - mu_).sum();
        b.gradient = (theta.array() / root).matrix();
        b.hess_diag = (mu_ * mu_ / (root * root * root)).matrix();
        b.M_h = M_h_;
        return b;
    }

private:
    double mu_;
    double M_h_;
};

/// Squared l2 penalty h(theta) = theta' theta, with gradient 2 theta and
/// constant Hessian diagonal 2.
class L2Penalty {
public:
    explicit L2Penalty(double M_h = 1.0) : M_h_(M_h) {
        if (!(M_h >= 0.0)) throw std::invalid_argument("L2Penalty: M_h must be nonnegative");
    }

    double M_h() const { return M_h_; }

    RegularizerBundle eval(const Eigen::Ref<const Vector>& theta) const {
        require_finite(theta, "theta");
        RegularizerBundle b;
        b.value = theta.squaredNorm();
        b.gradient = 2.0 * theta;
        b.hess_diag = Vector::Constant(theta.size(), 2.0);
        b.M_h = M_h_;
        return b;
    }

private:
    double M_h_;
};

inline RegularizerBundle pseudo_huber(const Eigen::Ref<const Vector>& theta, double mu,
                                      double M_h = 1.0) {
    return PseudoHuber(mu, M_h).eval(theta);
}

inline RegularizerBundle l2_regularizer(const Eigen::Ref<const Vector>& theta,
                                        double M_h = 1.0) {
    return L2Penalty(M_h).eval(theta);
}

}  // namespace ggnscore
