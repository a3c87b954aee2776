#include <catch2/catch_amalgamated.hpp>
#include <numeric>
#include <random>
#include <span>

#include "ggnscore/augmented.hpp"
#include "oracles.hpp"

using namespace ggnscore;
using Catch::Approx;

namespace {

std::vector<Eigen::Index> full_batch(Eigen::Index n) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    return idx;
}

// Test-only multi-output model: prediction = (1 + x_0 / 4) * A theta.
struct MultiAffine {
    Matrix A;  // d x n_w

    ModelEval operator()(const Eigen::Ref<const Vector>& theta,
                         const Eigen::Ref<const Vector>& x) const {
        const double s = 1.0 + 0.25 * x[0];
        ModelEval out;
        out.prediction = s * (A * theta);
        out.jacobian = s * A;
        return out;
    }
};

}  // namespace

TEST_CASE("augmented system layout", "[augmented]") {
    const auto prob = QuadraticProblem::random(6, 4, 0.1, 1);
    const Dataset data = prob.dataset();
    const Vector theta = oracles::random_vector(4, 2);
    const auto batch = full_batch(6);
    const double lambda = 0.3;
    const PseudoHuber reg(1.0);

    const AugmentedSystem sys = assemble_augmented(
        theta, data, std::span<const Eigen::Index>(batch), prob.model(), SquaredLoss{}, reg, lambda);

    REQUIRE(sys.m_size == 7);
    REQUIRE(sys.jacobian.rows() == 7);
    REQUIRE(sys.jacobian.cols() == 4);
    REQUIRE(sys.residual.size() == 7);
    REQUIRE(sys.curvature_diag.size() == 7);
    CHECK(sys.residual[6] == 1.0);
    CHECK(sys.curvature_diag[6] == 0.0);
    CHECK((sys.curvature_diag.head(6).array() == 1.0).all());
    CHECK(sys.lambda == lambda);

    const RegularizerBundle b = reg.eval(theta);
    CHECK((sys.jacobian.row(6).transpose() - lambda * b.gradient).norm() <= 1e-15);
    CHECK((sys.reg_gradient - b.gradient).norm() == 0.0);
    CHECK((sys.reg_hess_diag - b.hess_diag).norm() == 0.0);

    // Row k is the loss-scaled model Jacobian of sample batch[k].
    for (Eigen::Index k = 0; k < 6; ++k) {
        const ModelEval ev = prob.row_eval(theta, batch[static_cast<std::size_t>(k)]);
        CHECK((sys.jacobian.row(k) - ev.jacobian.row(0)).norm() <= 1e-15);
        CHECK(sys.residual[k] ==
              Approx(ev.prediction[0] - data.targets(k, 0)).epsilon(1e-14));
    }
}

TEST_CASE("J'e is the exact batch gradient for every model family", "[augmented]") {
    // Quadratic rows with squared loss.
    {
        const auto prob = QuadraticProblem::random(10, 6, 0.1, 3);
        const Dataset data = prob.dataset();
        const auto batch = full_batch(10);
        const PseudoHuber reg(1.0);
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const Vector theta = oracles::random_vector(6, seed);
            const AugmentedSystem sys =
                assemble_augmented(theta, data, std::span<const Eigen::Index>(batch),
                                   prob.model(), SquaredLoss{}, reg, 0.1);
            const Vector g_fd = oracles::fd_gradient(
                [&](const Vector& th) {
                    return batch_objective(th, data, std::span<const Eigen::Index>(batch),
                                           prob.model(), SquaredLoss{}, reg, 0.1);
                },
                theta);
            REQUIRE((sys.gradient() - g_fd).norm() <= 1e-5 * std::max(1.0, g_fd.norm()));
        }
    }
    // Sigmoid-linear with cross-entropy, both residual modes.
    {
        Dataset data;
        data.features = oracles::random_matrix(8, 3, 5);
        data.targets.resize(8, 1);
        for (Eigen::Index i = 0; i < 8; ++i) data.targets(i, 0) = i % 2;
        const SigmoidLinear model{3};
        const auto batch = full_batch(8);
        const L2Penalty reg;
        for (ResidualMode mode : {ResidualMode::LossGradient, ResidualMode::Deviance}) {
            const CrossEntropyLoss loss{mode};
            for (std::uint64_t seed = 10; seed < 15; ++seed) {
                const Vector theta = oracles::random_vector(4, seed, 0.5);
                const AugmentedSystem sys = assemble_augmented(
                    theta, data, std::span<const Eigen::Index>(batch), model, loss, reg, 0.05);
                const Vector g_fd = oracles::fd_gradient(
                    [&](const Vector& th) {
                        return batch_objective(th, data, std::span<const Eigen::Index>(batch),
                                               model, loss, reg, 0.05);
                    },
                    theta);
                REQUIRE((sys.gradient() - g_fd).norm() <= 1e-5 * std::max(1.0, g_fd.norm()));
                REQUIRE((sys.gradient() -
                         batch_gradient(theta, data, std::span<const Eigen::Index>(batch), model,
                                        loss, reg, 0.05))
                            .norm() <= 1e-12);
            }
        }
    }
}

TEST_CASE("multi-output targets occupy contiguous row blocks", "[augmented]") {
    const Eigen::Index d = 3, n_w = 5, n = 4;
    Dataset data;
    data.features = oracles::random_matrix(n, 2, 30);
    data.targets = oracles::random_matrix(n, d, 31);
    const MultiAffine model{oracles::random_matrix(d, n_w, 32)};
    const L2Penalty reg;
    const Vector theta = oracles::random_vector(n_w, 33);
    const auto batch = full_batch(n);

    const AugmentedSystem sys = assemble_augmented(
        theta, data, std::span<const Eigen::Index>(batch), model, SquaredLoss{}, reg, 0.2);
    REQUIRE(sys.m_size == d * n + 1);
    for (Eigen::Index k = 0; k < n; ++k) {
        const ModelEval ev = model(theta, data.features.row(k).transpose());
        CHECK((sys.jacobian.middleRows(k * d, d) - ev.jacobian).norm() <= 1e-15);
        CHECK((sys.residual.segment(k * d, d) -
               (ev.prediction - data.targets.row(k).transpose()))
                  .norm() <= 1e-15);
    }
    const Vector g_fd = oracles::fd_gradient(
        [&](const Vector& th) {
            return batch_objective(th, data, std::span<const Eigen::Index>(batch), model,
                                   SquaredLoss{}, reg, 0.2);
        },
        theta);
    CHECK((sys.gradient() - g_fd).norm() <= 1e-5 * std::max(1.0, g_fd.norm()));
}

TEST_CASE("stationary point of the quadratic with l2 gives a zero gradient", "[augmented]") {
    const auto prob = QuadraticProblem::random(5, 5, 0.1, 40);
    const Dataset data = prob.dataset();
    const auto batch = full_batch(5);
    const AugmentedSystem sys =
        assemble_augmented(Vector::Zero(5), data, std::span<const Eigen::Index>(batch),
                           prob.model(), SquaredLoss{}, L2Penalty(), 0.1);
    CHECK(sys.gradient().norm() == 0.0);
}

TEST_CASE("subset batches pick out the right samples", "[augmented]") {
    const auto prob = QuadraticProblem::random(9, 4, 0.1, 50);
    const Dataset data = prob.dataset();
    const Vector theta = oracles::random_vector(4, 51);
    const std::vector<Eigen::Index> batch{7, 2, 4};
    const AugmentedSystem sys =
        assemble_augmented(theta, data, std::span<const Eigen::Index>(batch), prob.model(),
                           SquaredLoss{}, L2Penalty(), 0.1);
    REQUIRE(sys.m_size == 4);
    for (std::size_t k = 0; k < batch.size(); ++k) {
        const ModelEval ev = prob.row_eval(theta, batch[k]);
        CHECK(sys.residual[static_cast<Eigen::Index>(k)] == Approx(ev.prediction[0]));
    }
}

TEST_CASE("assembly validation", "[augmented]") {
    const auto prob = QuadraticProblem::random(5, 3, 0.1, 60);
    const Dataset data = prob.dataset();
    const Vector theta = Vector::Ones(3);
    const std::vector<Eigen::Index> empty;
    const std::vector<Eigen::Index> batch{0, 1};
    const std::vector<Eigen::Index> oob{0, 5};
    const L2Penalty reg;

    CHECK_THROWS_AS(assemble_augmented(theta, data, std::span<const Eigen::Index>(empty),
                                       prob.model(), SquaredLoss{}, reg, 0.1),
                    std::invalid_argument);
    CHECK_THROWS_AS(assemble_augmented(theta, data, std::span<const Eigen::Index>(oob),
                                       prob.model(), SquaredLoss{}, reg, 0.1),
                    std::out_of_range);
    CHECK_THROWS_AS(assemble_augmented(theta, data, std::span<const Eigen::Index>(batch),
                                       prob.model(), SquaredLoss{}, reg, 0.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(assemble_augmented(theta, data, std::span<const Eigen::Index>(batch),
                                       prob.model(), SquaredLoss{}, reg, -1.0),
                    std::invalid_argument);
    // d * m + 1 = 3 exceeds a cap of 2.
    CHECK_THROWS_AS(assemble_augmented(theta, data, std::span<const Eigen::Index>(batch),
                                       prob.model(), SquaredLoss{}, reg, 0.1, 2),
                    std::invalid_argument);
    Vector bad = theta;
    bad[0] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(assemble_augmented(bad, data, std::span<const Eigen::Index>(batch),
                                       prob.model(), SquaredLoss{}, reg, 0.1),
                    NumericError);
}
