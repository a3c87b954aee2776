#pragma once

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "ggnscore/losses.hpp"
#include "ggnscore/types.hpp"

namespace ggnscore {

/// One sample pushed through a model: the d-dimensional prediction and the
/// d x n_w Jacobian of the prediction with respect to the parameters.
struct ModelEval {
    Vector prediction;
    Matrix jacobian;
};

// Numerically stable logistic function, kept strictly inside (0, 1).
inline double sigmoid(double t) {
    const double s = t >= 0.0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
    return std::clamp(s, kProbClip, 1.0 - kProbClip);
}

/// Row model for least-squares problems: prediction sqrt_scale * x' theta.
struct ScaledLinear {
    double sqrt_scale = 1.0;

    ModelEval operator()(const Eigen::Ref<const Vector>& theta,
                         const Eigen::Ref<const Vector>& x) const {
        if (theta.size() != x.size())
            throw ShapeError("ScaledLinear: feature row and theta differ in length");
        ModelEval out;
        out.prediction = Vector::Constant(1, sqrt_scale * x.dot(theta));
        out.jacobian = sqrt_scale * x.transpose();
        return out;
    }
};

/// Regularized quadratic test problem
///   g(theta) = (1/2) theta' Qhat theta - p' theta,  Qhat = scale * M' M,
/// posed as least squares over the rows of M: sample i has prediction
/// sqrt(scale) * m_i' theta and target t_i, where t solves
/// sqrt(scale) * M' t = p in the least-squares sense (t = 0 when p = 0).
/// Then sum_i (1/2)(pred_i - t_i)^2 = g(theta) + (1/2)|t|^2, so batching over
/// rows optimizes g up to a constant.
class QuadraticProblem {
public:
    QuadraticProblem(Matrix M, double scale, Vector p)
        : M_(std::move(M)), scale_(scale), p_(std::move(p)) {
        if (!(scale > 0.0)) throw std::invalid_argument("QuadraticProblem: scale must be positive");
        if (p_.size() != M_.cols())
            throw ShapeError("QuadraticProblem: p length must equal the column count of M");
        if (M_.rows() == 0 || M_.cols() == 0)
            throw ShapeError("QuadraticProblem: M must be nonempty");
        if (p_.isZero(0.0)) {
            targets_ = Vector::Zero(M_.rows());
        } else {
            targets_ = M_.transpose()
                           .colPivHouseholderQr()
                           .solve(p_ / std::sqrt(scale_));
        }
    }

    /// M with independent uniform [0, 1] entries.
    static QuadraticProblem random(Eigen::Index n_rows, Eigen::Index n_w, double scale,
                                   std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        Matrix M(n_rows, n_w);
        for (Eigen::Index i = 0; i < n_rows; ++i)
            for (Eigen::Index j = 0; j < n_w; ++j) M(i, j) = unif(rng);
        return QuadraticProblem(std::move(M), scale, Vector::Zero(n_w));
    }

    const Matrix& data_matrix() const { return M_; }
    double scale() const { return scale_; }
    const Vector& p() const { return p_; }
    const Vector& row_targets() const { return targets_; }
    Eigen::Index n_rows() const { return M_.rows(); }
    Eigen::Index n_parameters() const { return M_.cols(); }

    ScaledLinear model() const { return ScaledLinear{std::sqrt(scale_)}; }

    Dataset dataset() const { return Dataset{M_, targets_}; }

    ModelEval row_eval(const Eigen::Ref<const Vector>& theta, Eigen::Index row) const {
        if (row < 0 || row >= M_.rows())
            throw std::out_of_range("QuadraticProblem: row index out of range");
        return model()(theta, M_.row(row).transpose());
    }

    /// g(theta) itself, without the least-squares constant.
    double objective(const Eigen::Ref<const Vector>& theta) const {
        return 0.5 * scale_ * (M_ * theta).squaredNorm() - p_.dot(theta);
    }

private:
    Matrix M_;
    double scale_;
    Vector p_;
    Vector targets_;
};

inline ModelEval quadratic_row_eval(const QuadraticProblem& problem,
                                    const Eigen::Ref<const Vector>& theta, Eigen::Index row) {
    return problem.row_eval(theta, row);
}

/// Logistic model yhat = sigmoid(w' x + b) with theta = [w; b].
struct SigmoidLinear {
    Eigen::Index input_dim = 0;

    Eigen::Index parameter_count() const { return input_dim + 1; }

    ModelEval operator()(const Eigen::Ref<const Vector>& theta,
                         const Eigen::Ref<const Vector>& x) const {
        if (x.size() != input_dim)
            throw ShapeError("SigmoidLinear: feature row has wrong length");
        if (theta.size() != parameter_count())
            throw ShapeError("SigmoidLinear: theta must have length input_dim + 1");
        const double z = theta.head(input_dim).dot(x) + theta[input_dim];
        const double p = sigmoid(z);
        const double dp = p * (1.0 - p);
        ModelEval out;
        out.prediction = Vector::Constant(1, p);
        out.jacobian.resize(1, parameter_count());
        out.jacobian.leftCols(input_dim) = dp * x.transpose();
        out.jacobian(0, input_dim) = dp;
        return out;
    }
};

inline ModelEval sigmoid_linear_eval(const Eigen::Ref<const Vector>& theta,
                                     const Eigen::Ref<const Vector>& x) {
    return SigmoidLinear{x.size()}(theta, x);
}

/// Fully connected ReLU network with a single sigmoid output. Parameters are
/// packed layer by layer, weights first (row major, fan_out x fan_in), then
/// the bias.
struct MlpArchitecture {
    Eigen::Index input_dim = 0;
    std::vector<Eigen::Index> hidden;

    std::vector<Eigen::Index> widths() const {
        std::vector<Eigen::Index> w;
        w.push_back(input_dim);
        w.insert(w.end(), hidden.begin(), hidden.end());
        w.push_back(1);
        return w;
    }

    Eigen::Index parameter_count() const {
        const auto w = widths();
        Eigen::Index n = 0;
        for (std::size_t l = 1; l < w.size(); ++l) n += (w[l - 1] + 1) * w[l];
        return n;
    }

    void validate() const {
        if (input_dim <= 0) throw std::invalid_argument("MlpArchitecture: input_dim must be positive");
        for (auto h : hidden)
            if (h <= 0) throw std::invalid_argument("MlpArchitecture: hidden widths must be positive");
    }
};

class Mlp {
public:
    explicit Mlp(MlpArchitecture arch) : arch_(std::move(arch)) { arch_.validate(); }

    const MlpArchitecture& architecture() const { return arch_; }
    Eigen::Index parameter_count() const { return arch_.parameter_count(); }

    Vector gaussian_init(std::uint64_t seed, double stddev = 0.01) const {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> normal(0.0, stddev);
        Vector theta(parameter_count());
        for (Eigen::Index i = 0; i < theta.size(); ++i) theta[i] = normal(rng);
        return theta;
    }

    ModelEval operator()(const Eigen::Ref<const Vector>& theta,
                         const Eigen::Ref<const Vector>& x) const {
        if (x.size() != arch_.input_dim)
            throw ShapeError("Mlp: feature row has wrong length");
        if (theta.size() != parameter_count())
            throw ShapeError("Mlp: theta has wrong length");

        const auto w = arch_.widths();
        const std::size_t layers = w.size() - 1;

        // Forward pass, keeping pre-activations for the backward sweep.
        std::vector<Vector> activations(layers + 1);
        std::vector<Vector> preact(layers);
        std::vector<Eigen::Index> offsets(layers);
        activations[0] = x;
        Eigen::Index off = 0;
        for (std::size_t l = 0; l < layers; ++l) {
            offsets[l] = off;
            const Eigen::Index fan_in = w[l], fan_out = w[l + 1];
            const auto W = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                          Eigen::RowMajor>>(
                theta.data() + off, fan_out, fan_in);
            const auto b = theta.segment(off + fan_out * fan_in, fan_out);
            preact[l] = W * activations[l] + b;
            activations[l + 1] =
                l + 1 < layers ? preact[l].cwiseMax(0.0) : preact[l];
            off += (fan_in + 1) * fan_out;
        }
        const double p = sigmoid(preact[layers - 1][0]);

        ModelEval out;
        out.prediction = Vector::Constant(1, p);
        out.jacobian = Matrix::Zero(1, parameter_count());

        // Reverse sweep: delta_l = d yhat / d preact_l.
        Vector delta = Vector::Constant(1, p * (1.0 - p));
        for (std::size_t l = layers; l-- > 0;) {
            const Eigen::Index fan_in = w[l], fan_out = w[l + 1];
            auto grad_W = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                   Eigen::RowMajor>>(
                out.jacobian.data() + offsets[l], fan_out, fan_in);
            grad_W = delta * activations[l].transpose();
            out.jacobian.block(0, offsets[l] + fan_out * fan_in, 1, fan_out) = delta.transpose();
            if (l > 0) {
                const auto W = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic,
                                                              Eigen::Dynamic, Eigen::RowMajor>>(
                    theta.data() + offsets[l], fan_out, fan_in);
                delta = (W.transpose() * delta).cwiseProduct(
                    (preact[l - 1].array() > 0.0).cast<double>().matrix());
            }
        }
        return out;
    }

private:
    MlpArchitecture arch_;
};

inline ModelEval mlp_eval(const MlpArchitecture& arch, const Eigen::Ref<const Vector>& theta,
                          const Eigen::Ref<const Vector>& x) {
    return Mlp(arch)(theta, x);
}

}  // namespace ggnscore
