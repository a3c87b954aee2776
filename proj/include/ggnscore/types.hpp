#pragma once

#include <Eigen/Core>
#include <string>

#include "ggnscore/errors.hpp"

namespace ggnscore {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline void require_finite(const Eigen::Ref<const Vector>& v, const char* name) {
    if (!v.allFinite())
        throw NumericError(std::string(name) + " contains a non-finite entry");
}

inline bool is_binary_label(double y) { return y == 0.0 || y == 1.0; }

// A batch of samples: one feature row and one target row per sample.
struct Dataset {
    Matrix features;  // N x n_p
    Matrix targets;   // N x d

    Eigen::Index n() const { return features.rows(); }
    Eigen::Index n_features() const { return features.cols(); }
    Eigen::Index n_targets() const { return targets.cols(); }

    void validate(bool binary_targets = false) const {
        if (features.rows() != targets.rows())
            throw ShapeError("Dataset: features and targets disagree on sample count");
        if (features.rows() == 0)
            throw ShapeError("Dataset: empty");
        if (!features.allFinite() || !targets.allFinite())
            throw NumericError("Dataset contains a non-finite entry");
        if (binary_targets && !(targets.array() == 0.0 || targets.array() == 1.0).all())
            throw std::invalid_argument("Dataset: targets must lie in {0, 1}");
    }
};

}  // namespace ggnscore
