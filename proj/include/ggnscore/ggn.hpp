#pragma once

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

#include "ggnscore/augmented.hpp"
#include "ggnscore/types.hpp"

namespace ggnscore {

/// Which linear system produces the step direction.
///
/// Identity: solve the M x M system (lambda I + Q J Hh^{-1} J') b = e and set
/// G = Hh^{-1} J' b. Products with Hh^{-1} are diagonal scalings, so nothing
/// of size n_w x n_w is ever formed; cost is dominated by the M x M solve.
///
/// Direct: solve the n_w x n_w normal equations (J' Q J + lambda Hh) G = J' e.
/// Algebraically identical (a Duncan-Guttman push-through of the inverse),
/// kept as the cubic-in-n_w reference path.
enum class SolverForm { Identity, Direct };

struct GgnScoreConfig {
    double alpha = 0.5;   // step-size numerator, in (0, 1]
    double lambda = 0.1;  // regularization weight, positive
    double M_h = 1.0;     // self-concordance constant used in the step law
    Eigen::Index batch_size = 0;  // 0 means full batch
    SolverForm solver = SolverForm::Identity;
    Eigen::Index m_size_cap = kDefaultMSizeCap;
    double solve_tol = 1e-8;  // relative residual bound for the linear solve

    void validate() const {
        if (!(alpha > 0.0) || alpha > 1.0)
            throw std::invalid_argument("GgnScoreConfig: alpha must lie in (0, 1]");
        if (!(lambda > 0.0)) throw std::invalid_argument("GgnScoreConfig: lambda must be positive");
        if (!(M_h >= 0.0)) throw std::invalid_argument("GgnScoreConfig: M_h must be nonnegative");
        if (batch_size < 0) throw std::invalid_argument("GgnScoreConfig: batch_size must be >= 0");
        if (!(solve_tol > 0.0)) throw std::invalid_argument("GgnScoreConfig: solve_tol must be positive");
    }
};

/// Per-step diagnostics. rho * (1 + M_h * eta) == alpha by construction.
struct StepReport {
    double loss_before = std::numeric_limits<double>::quiet_NaN();
    double loss_after = std::numeric_limits<double>::quiet_NaN();
    double grad_norm = 0.0;            // |J' e|
    double eta = 0.0;                  // regularizer Newton decrement
    double rho = 0.0;                  // applied step size
    double step_norm = 0.0;            // |theta_next - theta|
    double solve_residual_norm = 0.0;  // |A b - e| of the inner solve
    double wall_time = 0.0;            // seconds spent in the step
};

/// eta = sqrt(g_h' Hh^{-1} g_h) for diagonal Hh.
inline double newton_decrement(const Eigen::Ref<const Vector>& reg_gradient,
                               const Eigen::Ref<const Vector>& reg_hess_diag) {
    if (reg_gradient.size() != reg_hess_diag.size())
        throw ShapeError("newton_decrement: gradient and Hessian diagonal differ in length");
    if ((reg_hess_diag.array() <= 0.0).any())
        throw NumericError("newton_decrement: Hessian diagonal must be positive");
    return std::sqrt((reg_gradient.array().square() / reg_hess_diag.array()).sum());
}

/// rho = alpha / (1 + M_h * eta).
inline double step_size(double alpha, double M_h, double eta) {
    if (!(alpha > 0.0) || alpha > 1.0)
        throw std::invalid_argument("step_size: alpha must lie in (0, 1]");
    if (!(M_h >= 0.0)) throw std::invalid_argument("step_size: M_h must be nonnegative");
    if (!(eta >= 0.0)) throw std::invalid_argument("step_size: eta must be nonnegative");
    return alpha / (1.0 + M_h * eta);
}

namespace detail {

// Unit-step direction G (so that theta_next = theta - rho * G) plus the
// residual norm of the inner linear solve.
inline std::pair<Vector, double> unit_direction(const AugmentedSystem& sys, SolverForm form,
                                                double solve_tol) {
    const Eigen::Index M = sys.m_size;
    const Eigen::Index n_w = sys.jacobian.cols();
    if (sys.jacobian.rows() != M || sys.residual.size() != M || sys.curvature_diag.size() != M)
        throw ShapeError("ggn_score_step: augmented system sizes disagree with m_size");
    if (sys.reg_hess_diag.size() != n_w)
        throw ShapeError("ggn_score_step: regularizer Hessian diagonal has wrong length");
    if ((sys.reg_hess_diag.array() <= 0.0).any())
        throw NumericError("ggn_score_step: regularizer Hessian diagonal must be positive");
    if ((sys.curvature_diag.array() < 0.0).any())
        throw NumericError("ggn_score_step: curvature diagonal must be nonnegative");

    if (form == SolverForm::Identity) {
        const Vector h_inv = sys.reg_hess_diag.cwiseInverse();
        // J Hh^{-1} J' via column scaling; M x n_w and M x M temporaries only.
        const Matrix JHinv = sys.jacobian * h_inv.asDiagonal();
        Matrix A = sys.curvature_diag.asDiagonal() * (JHinv * sys.jacobian.transpose());
        A.diagonal().array() += sys.lambda;
        const Eigen::PartialPivLU<Matrix> lu(A);
        const Vector b = lu.solve(sys.residual);
        const double resid = (A * b - sys.residual).norm();
        if (!b.allFinite() || resid > solve_tol * sys.residual.norm())
            throw SolverError("ggn_score_step: inner solve residual " + std::to_string(resid) +
                              " exceeds tolerance; the system may be near singular");
        Vector G = h_inv.cwiseProduct(sys.jacobian.transpose() * b);
        return {std::move(G), resid};
    }

    // Direct form: SPD normal equations in parameter space.
    Matrix B = sys.jacobian.transpose() *
               (sys.curvature_diag.asDiagonal() * sys.jacobian);
    B.diagonal() += sys.lambda * sys.reg_hess_diag;
    const Vector rhs = sys.jacobian.transpose() * sys.residual;
    const Eigen::LLT<Matrix> llt(B);
    if (llt.info() != Eigen::Success)
        throw SolverError("ggn_score_step: Cholesky factorization failed; "
                          "increase lambda or check the curvature diagonal");
    const Vector G = llt.solve(rhs);
    const double resid = (B * G - rhs).norm();
    if (!G.allFinite() || resid > solve_tol * std::max(rhs.norm(), 1.0))
        throw SolverError("ggn_score_step: normal-equation solve residual " +
                          std::to_string(resid) + " exceeds tolerance");
    return {G, resid};
}

}  // namespace detail

/// One GGN-SCORE update from theta using an assembled augmented system:
///   eta  = sqrt(g_h' Hh^{-1} g_h)
///   rho  = alpha / (1 + M_h * eta)
///   G    = Hh^{-1} J' (lambda I + Q J Hh^{-1} J')^{-1} e   (identity form)
///   theta_next = theta - rho * G,
/// which equals the direct form G = (J'QJ + lambda Hh)^{-1} J'e exactly.
inline std::pair<Vector, StepReport> ggn_score_step(const Eigen::Ref<const Vector>& theta,
                                                    const AugmentedSystem& sys,
                                                    const GgnScoreConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    cfg.validate();
    require_finite(theta, "theta");
    if (theta.size() != sys.jacobian.cols())
        throw ShapeError("ggn_score_step: theta length disagrees with the augmented system");
    if (cfg.lambda != sys.lambda)
        throw std::invalid_argument("ggn_score_step: config lambda differs from the assembled system");

    StepReport rep;
    rep.eta = newton_decrement(sys.reg_gradient, sys.reg_hess_diag);
    rep.rho = step_size(cfg.alpha, cfg.M_h, rep.eta);
    rep.grad_norm = sys.gradient().norm();

    auto [G, resid] = detail::unit_direction(sys, cfg.solver, cfg.solve_tol);
    rep.solve_residual_norm = resid;

    Vector theta_next = theta - rep.rho * G;
    rep.step_norm = rep.rho * G.norm();
    rep.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {std::move(theta_next), rep};
}

/// Full (rho = 1) direct-form update theta - (J'QJ + lambda Hh)^{-1} J'e.
inline Vector direct_step(const Eigen::Ref<const Vector>& theta, const AugmentedSystem& sys,
                          const GgnScoreConfig& cfg) {
    cfg.validate();
    require_finite(theta, "theta");
    if (theta.size() != sys.jacobian.cols())
        throw ShapeError("direct_step: theta length disagrees with the augmented system");
    auto [G, resid] = detail::unit_direction(sys, SolverForm::Direct, cfg.solve_tol);
    (void)resid;
    return theta - G;
}

/// True when the step direction descends the batch objective: delta' J'e < 0,
/// with the degenerate near-stationary case (|J'e| <= 1e-10) passed through.
inline bool descent_check(const AugmentedSystem& sys, const Eigen::Ref<const Vector>& delta) {
    const Vector g = sys.gradient();
    if (g.norm() <= 1e-10) return true;
    return delta.dot(g) < 0.0;
}

}  // namespace ggnscore
