#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <numeric>
#include <random>
#include <span>

#include "ggnscore/ggn.hpp"
#include "oracles.hpp"

using namespace ggnscore;
using Catch::Approx;

namespace {

std::vector<Eigen::Index> full_batch(Eigen::Index n) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    return idx;
}

// Random classification instance assembled through the real pipeline.
AugmentedSystem random_system(std::uint64_t seed, Eigen::Index n_w, Eigen::Index m,
                              double lambda, Vector& theta_out) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nrm(0.0, 1.0);
    Dataset data;
    data.features.resize(m, n_w - 1);
    data.targets.resize(m, 1);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j + 1 < n_w; ++j) data.features(i, j) = 0.4 * nrm(rng);
        data.targets(i, 0) = static_cast<double>((seed + static_cast<std::uint64_t>(i)) % 2);
    }
    theta_out = oracles::random_vector(n_w, seed + 1000, 0.5);
    const auto batch = full_batch(m);
    const SigmoidLinear model{n_w - 1};
    const CrossEntropyLoss loss{seed % 2 ? ResidualMode::Deviance : ResidualMode::LossGradient};
    if (seed % 3 == 0)
        return assemble_augmented(theta_out, data, std::span<const Eigen::Index>(batch), model,
                                  loss, L2Penalty(), lambda);
    return assemble_augmented(theta_out, data, std::span<const Eigen::Index>(batch), model, loss,
                              PseudoHuber(1.0), lambda);
}

}  // namespace

TEST_CASE("newton decrement", "[ggn]") {
    Vector g(2), h(2);
    g << 1.0, 2.0;
    h << 1.0, 4.0;
    CHECK(newton_decrement(g, h) == Approx(std::sqrt(2.0)).epsilon(1e-14));
    CHECK(newton_decrement(Vector::Zero(3), Vector::Ones(3)) == 0.0);

    Vector bad(2);
    bad << 1.0, 0.0;
    CHECK_THROWS_AS(newton_decrement(g, bad), NumericError);
    CHECK_THROWS_AS(newton_decrement(g, Vector::Ones(3)), ShapeError);
}

TEST_CASE("step-size law", "[ggn]") {
    CHECK(step_size(0.5, 1.0, 1.0) == Approx(0.25).epsilon(1e-15));
    CHECK(step_size(1.0, 0.0, 123.0) == 1.0);
    CHECK(step_size(1.0, 1.0, 0.0) == 1.0);
    CHECK_THROWS_AS(step_size(0.0, 1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(step_size(1.5, 1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(step_size(0.5, -1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(step_size(0.5, 1.0, -1.0), std::invalid_argument);

    // rho * (1 + M_h * eta) == alpha to machine precision.
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int rep = 0; rep < 200; ++rep) {
        const double alpha = 0.01 + 0.99 * unif(rng);
        const double M_h = 5.0 * unif(rng);
        const double eta = 10.0 * unif(rng);
        const double rho = step_size(alpha, M_h, eta);
        REQUIRE(rho * (1.0 + M_h * eta) == Approx(alpha).epsilon(1e-14));
        REQUIRE(rho > 0.0);
        REQUIRE(rho <= alpha);
    }
}

TEST_CASE("identity and direct forms agree with each other and a dense oracle", "[ggn]") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (std::uint64_t rep = 0; rep < 40; ++rep) {
        const Eigen::Index n_w = 3 + static_cast<Eigen::Index>(rep % 40);
        const Eigen::Index m = 1 + static_cast<Eigen::Index>(rep % 9);
        const double lambda = std::pow(10.0, -3.0 + 4.0 * unif(rng));
        Vector theta;
        const AugmentedSystem sys = random_system(rep, n_w, m, lambda, theta);

        GgnScoreConfig cfg;
        cfg.alpha = 1.0;
        cfg.M_h = 0.0;
        cfg.lambda = lambda;
        cfg.solver = SolverForm::Identity;
        const auto [t_id, rep_id] = ggn_score_step(theta, sys, cfg);
        cfg.solver = SolverForm::Direct;
        const auto [t_dir, rep_dir] = ggn_score_step(theta, sys, cfg);

        const double denom = std::max(1e-12, (t_dir - theta).norm());
        REQUIRE((t_id - t_dir).norm() / denom <= 1e-8);

        const Vector d_oracle = oracles::dense_gn_direction(
            sys.jacobian, sys.residual, sys.curvature_diag, sys.reg_hess_diag, lambda);
        REQUIRE((t_id - (theta + d_oracle)).norm() / denom <= 1e-8);

        // direct_step is the rho = 1 direct update.
        const Vector ds = direct_step(theta, sys, cfg);
        REQUIRE((ds - t_dir).norm() <= 1e-12 * std::max(1.0, t_dir.norm()));
    }
}

TEST_CASE("with unit curvature and unit regularizer Hessian the step is Levenberg-Marquardt",
          "[ggn]") {
    const Eigen::Index m = 7, n_w = 5;
    const Matrix J_fit = oracles::random_matrix(m, n_w, 70);
    const Vector e_fit = oracles::random_vector(m, 71);

    AugmentedSystem sys;
    sys.m_size = m + 1;
    sys.lambda = 1.0;
    sys.jacobian.resize(m + 1, n_w);
    sys.jacobian.topRows(m) = J_fit;
    sys.jacobian.row(m).setZero();  // lambda * grad h with grad h = 0
    sys.residual.resize(m + 1);
    sys.residual.head(m) = e_fit;
    sys.residual[m] = 1.0;
    sys.curvature_diag = Vector::Ones(m + 1);
    sys.curvature_diag[m] = 0.0;
    sys.reg_hess_diag = Vector::Ones(n_w);
    sys.reg_gradient = Vector::Zero(n_w);

    GgnScoreConfig cfg;
    cfg.alpha = 1.0;
    cfg.M_h = 0.0;
    cfg.lambda = 1.0;
    const Vector lm = oracles::dense_lm_step(J_fit, e_fit, 1.0);
    const Vector theta = Vector::Zero(n_w);
    for (SolverForm form : {SolverForm::Identity, SolverForm::Direct}) {
        cfg.solver = form;
        const auto [t_next, rep] = ggn_score_step(theta, sys, cfg);
        REQUIRE((t_next - lm).norm() <= 1e-10 * std::max(1.0, lm.norm()));
        REQUIRE(rep.rho == 1.0);
        REQUIRE(rep.eta == 0.0);
    }
}

TEST_CASE("huge lambda collapses the step onto the regularizer Newton direction", "[ggn]") {
    const double lambda = 1e8;
    Vector theta;
    const AugmentedSystem sys = random_system(8, 9, 6, lambda, theta);
    GgnScoreConfig cfg;
    cfg.alpha = 1.0;
    cfg.M_h = 0.0;
    cfg.lambda = lambda;
    const Vector ds = direct_step(theta, sys, cfg);
    const Vector ref =
        theta - (sys.gradient().array() / (lambda * sys.reg_hess_diag.array())).matrix();
    CHECK((ds - ref).norm() <= 1e-4 * std::max(1.0, (ref - theta).norm()));
}

TEST_CASE("rho = 1 solves the regularized quadratic in one step", "[ggn]") {
    for (std::uint64_t seed : {90ull, 91ull, 92ull}) {
        const auto prob = QuadraticProblem::random(40, 40, 0.1, seed);
        const Dataset data = prob.dataset();
        const auto batch = full_batch(40);
        const Vector theta = oracles::random_vector(40, seed + 5);
        const AugmentedSystem sys =
            assemble_augmented(theta, data, std::span<const Eigen::Index>(batch), prob.model(),
                               SquaredLoss{}, L2Penalty(), 0.1);
        GgnScoreConfig cfg;
        cfg.alpha = 1.0;
        cfg.M_h = 0.0;  // rho = alpha / (1 + 0) = 1
        cfg.lambda = 0.1;
        const auto [t_next, rep] = ggn_score_step(theta, sys, cfg);
        REQUIRE(rep.rho == 1.0);
        REQUIRE(t_next.norm() <= 1e-8);
    }
}

TEST_CASE("step report fields are consistent", "[ggn]") {
    Vector theta;
    const AugmentedSystem sys = random_system(15, 12, 5, 0.2, theta);
    GgnScoreConfig cfg;
    cfg.alpha = 0.7;
    cfg.M_h = 1.3;
    cfg.lambda = 0.2;
    const auto [t_next, rep] = ggn_score_step(theta, sys, cfg);
    CHECK(rep.grad_norm == Approx(sys.gradient().norm()).epsilon(1e-14));
    CHECK(rep.eta ==
          Approx(newton_decrement(sys.reg_gradient, sys.reg_hess_diag)).epsilon(1e-14));
    CHECK(rep.rho * (1.0 + cfg.M_h * rep.eta) == Approx(cfg.alpha).epsilon(1e-13));
    CHECK(rep.step_norm == Approx((t_next - theta).norm()).epsilon(1e-12));
    CHECK(rep.solve_residual_norm <= cfg.solve_tol * sys.residual.norm());
    CHECK(rep.wall_time >= 0.0);
}

TEST_CASE("GGN-SCORE directions are descent directions", "[ggn]") {
    for (std::uint64_t seed = 20; seed < 30; ++seed) {
        Vector theta;
        const AugmentedSystem sys = random_system(seed, 10, 6, 0.1, theta);
        GgnScoreConfig cfg;
        cfg.alpha = 0.5;
        cfg.lambda = 0.1;
        const auto [t_next, rep] = ggn_score_step(theta, sys, cfg);
        const Vector delta = t_next - theta;
        REQUIRE(descent_check(sys, delta));
        REQUIRE_FALSE(descent_check(sys, -delta));
    }
    // Near a stationary point any direction passes (the gradient is ~0).
    const auto prob = QuadraticProblem::random(5, 5, 0.1, 33);
    const Dataset data = prob.dataset();
    const auto batch = full_batch(5);
    const AugmentedSystem sys =
        assemble_augmented(Vector::Zero(5), data, std::span<const Eigen::Index>(batch),
                           prob.model(), SquaredLoss{}, L2Penalty(), 0.1);
    CHECK(descent_check(sys, Vector::Ones(5)));
}

TEST_CASE("config and system validation", "[ggn]") {
    Vector theta;
    const AugmentedSystem sys = random_system(44, 8, 4, 0.1, theta);
    GgnScoreConfig cfg;
    cfg.lambda = 0.1;

    GgnScoreConfig bad = cfg;
    bad.alpha = 0.0;
    CHECK_THROWS_AS(ggn_score_step(theta, sys, bad), std::invalid_argument);
    bad.alpha = 1.2;
    CHECK_THROWS_AS(ggn_score_step(theta, sys, bad), std::invalid_argument );
    bad = cfg;
    bad.M_h = -1.0;
    CHECK_THROWS_AS(ggn_score_step(theta, sys, bad), std::invalid_argument);
    bad = cfg;
    bad.lambda = 0.25;  // disagrees with the assembled system
    CHECK_THROWS_AS(ggn_score_step(theta, sys, bad), std::invalid_argument);
    CHECK_THROWS_AS(ggn_score_step(Vector::Ones(9), sys, cfg), ShapeError);

    AugmentedSystem broken = sys;
    broken.reg_hess_diag[0] = 0.0;
    CHECK_THROWS_AS(ggn_score_step(theta, broken, cfg), NumericError);
    broken = sys;
    broken.curvature_diag[0] = -1.0;
    CHECK_THROWS_AS(ggn_score_step(theta, broken, cfg), NumericError);
}

TEST_CASE("identity form scales to wide parameter vectors", "[ggn]") {
    // n_w large enough that any n_w x n_w intermediate would be ~3 GB; the
    // identity path only touches M x n_w pieces, so this must run instantly.
    const Eigen::Index n_w = 20000, m = 2;
    Dataset data;
    data.features = oracles::random_matrix(m, n_w, 55, 0.05);
    data.targets = Matrix::Zero(m, 1);
    const Vector theta = oracles::random_vector(n_w, 56, 0.1);
    const auto batch = full_batch(m);
    const AugmentedSystem sys =
        assemble_augmented(theta, data, std::span<const Eigen::Index>(batch), ScaledLinear{1.0},
                           SquaredLoss{}, PseudoHuber(1.0), 0.1);
    GgnScoreConfig cfg;
    cfg.alpha = 0.5;
    cfg.lambda = 0.1;
    const auto [t_next, rep] = ggn_score_step(theta, sys, cfg);
    CHECK(t_next.allFinite());
    CHECK(rep.solve_residual_norm <= cfg.solve_tol * sys.residual.norm());
    CHECK(descent_check(sys, t_next - theta));
}
