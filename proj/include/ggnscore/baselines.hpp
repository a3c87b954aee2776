#pragma once

#include <cmath>
#include <cstddef>
#include <deque>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ggnscore/types.hpp"

namespace ggnscore {

inline Vector sgd_step(const Eigen::Ref<const Vector>& theta,
                       const Eigen::Ref<const Vector>& gradient, double lr) {
    if (!(lr > 0.0)) throw std::invalid_argument("sgd_step: lr must be positive");
    if (theta.size() != gradient.size())
        throw ShapeError("sgd_step: theta and gradient differ in length");
    require_finite(gradient, "gradient");
    return theta - lr * gradient;
}

struct SgdOptimizer {
    double lr = 0.01;
    Vector step(const Eigen::Ref<const Vector>& theta,
                const Eigen::Ref<const Vector>& gradient) const {
        return sgd_step(theta, gradient, lr);
    }
};

/// Adam with bias-corrected first and second moments. Moment buffers are
/// sized on the first step.
class AdamOptimizer {
public:
    explicit AdamOptimizer(double lr, double beta1 = 0.9, double beta2 = 0.999,
                           double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
        if (!(lr > 0.0)) throw std::invalid_argument("AdamOptimizer: lr must be positive");
        if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
            throw std::invalid_argument("AdamOptimizer: betas must lie in [0, 1)");
        if (!(eps > 0.0)) throw std::invalid_argument("AdamOptimizer: eps must be positive");
    }

    Vector step(const Eigen::Ref<const Vector>& theta,
                const Eigen::Ref<const Vector>& gradient) {
        if (theta.size() != gradient.size())
            throw ShapeError("AdamOptimizer: theta and gradient differ in length");
        require_finite(gradient, "gradient");
        if (t_ == 0) {
            m_ = Vector::Zero(theta.size());
            v_ = Vector::Zero(theta.size());
        } else if (m_.size() != theta.size()) {
            throw ShapeError("AdamOptimizer: parameter dimension changed between steps");
        }
        ++t_;
        m_ = beta1_ * m_ + (1.0 - beta1_) * gradient;
        v_ = beta2_ * v_ + (1.0 - beta2_) * gradient.cwiseAbs2();
        const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        const Vector m_hat = m_ / c1;
        const Vector v_hat = v_ / c2;
        return theta - lr_ * (m_hat.array() / (v_hat.array().sqrt() + eps_)).matrix();
    }

    long timestep() const { return t_; }
    const Vector& first_moment() const { return m_; }
    const Vector& second_moment() const { return v_; }

private:
    double lr_, beta1_, beta2_, eps_;
    Vector m_, v_;
    long t_ = 0;
};

/// Limited-memory BFGS with two-loop recursion and a fixed learning rate.
/// Intended for full-batch gradients only; curvature pairs with s'y below the
/// floor are discarded rather than stored.
class LbfgsOptimizer {
public:
    explicit LbfgsOptimizer(double lr, std::size_t memory = 10)
        : lr_(lr), memory_(memory) {
        if (!(lr > 0.0)) throw std::invalid_argument("LbfgsOptimizer: lr must be positive");
        if (memory == 0) throw std::invalid_argument("LbfgsOptimizer: memory must be positive");
    }

    /// Two-loop recursion applied to the stored pairs. Empty memory returns
    /// the gradient itself (steepest descent).
    Vector direction(const Eigen::Ref<const Vector>& gradient) const {
        Vector q = gradient;
        std::vector<double> alpha(pairs_.size());
        for (std::size_t i = pairs_.size(); i-- > 0;) {
            const auto& [s, y] = pairs_[i];
            const double rho = 1.0 / y.dot(s);
            alpha[i] = rho * s.dot(q);
            q -= alpha[i] * y;
        }
        if (!pairs_.empty()) {
            const auto& [s, y] = pairs_.back();
            q *= s.dot(y) / y.dot(y);
        }
        for (std::size_t i = 0; i < pairs_.size(); ++i) {
            const auto& [s, y] = pairs_[i];
            const double rho = 1.0 / y.dot(s);
            const double beta = rho * y.dot(q);
            q += (alpha[i] - beta) * s;
        }
        return q;
    }

    Vector step(const Eigen::Ref<const Vector>& theta,
                const Eigen::Ref<const Vector>& gradient) {
        if (theta.size() != gradient.size())
            throw ShapeError("LbfgsOptimizer: theta and gradient differ in length");
        require_finite(gradient, "gradient");
        if (has_prev_) {
            Vector s = theta - prev_theta_;
            Vector y = gradient - prev_grad_;
            if (s.dot(y) > kCurvatureFloor) {
                pairs_.emplace_back(std::move(s), std::move(y));
                if (pairs_.size() > memory_) pairs_.pop_front();
            }
        }
        Vector theta_next = theta - lr_ * direction(gradient);
        prev_theta_ = theta;
        prev_grad_ = gradient;
        has_prev_ = true;
        return theta_next;
    }

    std::size_t stored_pairs() const { return pairs_.size(); }

    static constexpr double kCurvatureFloor = 1e-10;

private:
    double lr_;
    std::size_t memory_;
    std::deque<std::pair<Vector, Vector>> pairs_;
    Vector prev_theta_, prev_grad_;
    bool has_prev_ = false;
};

inline Vector adam_step(AdamOptimizer& state, const Eigen::Ref<const Vector>& theta,
                        const Eigen::Ref<const Vector>& gradient) {
    return state.step(theta, gradient);
}

inline Vector lbfgs_step(LbfgsOptimizer& state, const Eigen::Ref<const Vector>& theta,
                         const Eigen::Ref<const Vector>& gradient) {
    return state.step(theta, gradient);
}

}  // namespace ggnscore
