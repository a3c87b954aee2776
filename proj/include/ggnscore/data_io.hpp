#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ggnscore/types.hpp"

namespace ggnscore {

namespace detail {

// Labels are remapped once at parse time: {-1, +1} -> {0, 1}; {0, 1} pass
// through; anything else is rejected.
inline double remap_label(double raw, long line) {
    if (raw == -1.0 || raw == 0.0) return 0.0;
    if (raw == 1.0) return 1.0;
    throw ParseError("label must lie in {-1, 0, +1}", line);
}

inline bool parse_double(const std::string& tok, double& out) {
    try {
        std::size_t pos = 0;
        out = std::stod(tok, &pos);
        return pos == tok.size();
    } catch (const std::exception&) {
        return false;
    }
}

}  // namespace detail

/// Reads sparse LIBSVM records "label idx:value ...". Indices are 1-based and
/// must be strictly increasing within a line; absent features are zero. The
/// feature dimension is the maximum index seen unless `n_features_override`
/// (> 0) widens it.
inline Dataset parse_libsvm(std::istream& in, Eigen::Index n_features_override = 0) {
    std::vector<std::vector<std::pair<Eigen::Index, double>>> rows;
    std::vector<double> labels;
    Eigen::Index max_index = 0;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::string tok;
        if (!(ls >> tok)) continue;  // blank line
        double raw;
        if (!detail::parse_double(tok, raw))
            throw ParseError("malformed label '" + tok + "'", line_no);
        labels.push_back(detail::remap_label(raw, line_no));
        rows.emplace_back();
        Eigen::Index prev_index = 0;
        while (ls >> tok) {
            const auto colon = tok.find(':');
            if (colon == std::string::npos || colon == 0 || colon + 1 == tok.size())
                throw ParseError("malformed feature token '" + tok + "'", line_no);
            Eigen::Index idx;
            double value;
            try {
                std::size_t pos = 0;
                idx = static_cast<Eigen::Index>(std::stoll(tok.substr(0, colon), &pos));
                if (pos != colon) throw std::invalid_argument(tok);
            } catch (const std::exception&) {
                throw ParseError("malformed feature index in '" + tok + "'", line_no);
            }
            if (!detail::parse_double(tok.substr(colon + 1), value))
                throw ParseError("malformed feature value in '" + tok + "'", line_no);
            if (idx < 1) throw ParseError("feature index must be >= 1", line_no);
            if (idx <= prev_index)
                throw ParseError("feature indices must be strictly increasing", line_no);
            prev_index = idx;
            max_index = std::max(max_index, idx);
            rows.back().emplace_back(idx, value);
        }
    }
    if (rows.empty()) throw ParseError("no records found", line_no == 0 ? 1 : line_no);
    Eigen::Index n_features = max_index;
    if (n_features_override > 0) {
        if (n_features_override < max_index)
            throw ParseError("declared feature count " + std::to_string(n_features_override) +
                                 " is smaller than max index " + std::to_string(max_index),
                             line_no);
        n_features = n_features_override;
    }
    Dataset ds;
    ds.features = Matrix::Zero(static_cast<Eigen::Index>(rows.size()), n_features);
    ds.targets.resize(static_cast<Eigen::Index>(rows.size()), 1);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        ds.targets(static_cast<Eigen::Index>(i), 0) = labels[i];
        for (const auto& [idx, value] : rows[i])
            ds.features(static_cast<Eigen::Index>(i), idx - 1) = value;
    }
    return ds;
}

inline Dataset parse_libsvm_file(const std::string& path, Eigen::Index n_features_override = 0) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
    return parse_libsvm(in, n_features_override);
}

/// Writes single-target binary data back out in LIBSVM form; zero features
/// are omitted and values keep full precision, so parse(write(ds)) == ds.
inline void write_libsvm(const Dataset& ds, std::ostream& out) {
    if (ds.n_targets() != 1)
        throw ShapeError("write_libsvm: targets must have a single column");
    ds.validate(/*binary_targets=*/true);
    char buf[64];
    for (Eigen::Index i = 0; i < ds.n(); ++i) {
        out << static_cast<int>(ds.targets(i, 0));
        for (Eigen::Index j = 0; j < ds.n_features(); ++j) {
            const double v = ds.features(i, j);
            if (v == 0.0) continue;
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out << ' ' << (j + 1) << ':' << buf;
        }
        out << '\n';
    }
}

/// Reads dense delimited text (commas and/or whitespace). Lines starting with
/// '#' are skipped; a non-numeric first record is treated as a header. The
/// last column is the label (same remap rule as LIBSVM), the rest features.
inline Dataset parse_delimited(std::istream& in) {
    std::vector<std::vector<double>> rows;
    std::string line;
    long line_no = 0;
    bool first_record = true;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        for (char& c : line)
            if (c == ',') c = ' ';
        std::istringstream ls(line);
        std::vector<double> values;
        std::string tok;
        bool numeric = true;
        while (ls >> tok) {
            double v;
            if (!detail::parse_double(tok, v)) {
                numeric = false;
                break;
            }
            values.push_back(v);
        }
        if (values.empty() && numeric) continue;  // blank or comment-only line
        if (!numeric) {
            if (first_record) {  // header row
                first_record = false;
                continue;
            }
            throw ParseError("non-numeric field '" + tok + "'", line_no);
        }
        first_record = false;
        if (values.size() < 2)
            throw ParseError("need at least one feature column and a label", line_no);
        if (!rows.empty() && values.size() != rows.front().size())
            throw ParseError("inconsistent column count", line_no);
        values.back() = detail::remap_label(values.back(), line_no);
        rows.push_back(std::move(values));
    }
    if (rows.empty()) throw ParseError("no records found", line_no == 0 ? 1 : line_no);
    const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
    const Eigen::Index n_cols = static_cast<Eigen::Index>(rows.front().size());
    Dataset ds;
    ds.features.resize(n, n_cols - 1);
    ds.targets.resize(n, 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j + 1 < n_cols; ++j) ds.features(i, j) = rows[i][j];
        ds.targets(i, 0) = rows[i][n_cols - 1];
    }
    return ds;
}

/// Gaussian kernel features: out(i, j) = exp(-gamma |x_i - landmark_j|^2).
/// Entries lie in (0, 1].
inline Matrix rbf_feature_map(const Matrix& rows, const Matrix& landmarks, double gamma) {
    if (!(gamma > 0.0)) throw std::invalid_argument("rbf_feature_map: gamma must be positive");
    if (rows.cols() != landmarks.cols())
        throw ShapeError("rbf_feature_map: rows and landmarks differ in feature dimension");
    if (landmarks.rows() == 0) throw ShapeError("rbf_feature_map: no landmarks");
    const Vector r2 = rows.rowwise().squaredNorm();
    const Vector l2 = landmarks.rowwise().squaredNorm();
    Matrix d2 = -2.0 * rows * landmarks.transpose();
    d2.colwise() += r2;
    d2.rowwise() += l2.transpose();
    // Rounding can leave tiny negative distances; clamp so entries stay <= 1.
    return (-gamma * d2.cwiseMax(0.0)).array().exp();
}

struct SplitSpec {
    double train_fraction = 0.8;
    std::uint64_t seed = 0;
};

/// Seeded random split. The shuffled first ceil(train_fraction * N) samples
/// form the training set; both sides are kept nonempty.
inline std::pair<Dataset, Dataset> train_test_split(const Dataset& ds, const SplitSpec& spec) {
    if (ds.n() < 2) throw std::invalid_argument("train_test_split: need at least two samples");
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0))
        throw std::invalid_argument("train_test_split: train_fraction must lie in (0, 1)");
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(ds.n()));
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    std::mt19937_64 rng(spec.seed);
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto n_train = std::clamp<Eigen::Index>(
        static_cast<Eigen::Index>(std::ceil(spec.train_fraction * static_cast<double>(ds.n()))),
        1, ds.n() - 1);
    Dataset train, test;
    train.features.resize(n_train, ds.n_features());
    train.targets.resize(n_train, ds.n_targets());
    test.features.resize(ds.n() - n_train, ds.n_features());
    test.targets.resize(ds.n() - n_train, ds.n_targets());
    for (Eigen::Index i = 0; i < ds.n(); ++i) {
        if (i < n_train) {
            train.features.row(i) = ds.features.row(perm[i]);
            train.targets.row(i) = ds.targets.row(perm[i]);
        } else {
            test.features.row(i - n_train) = ds.features.row(perm[i]);
            test.targets.row(i - n_train) = ds.targets.row(perm[i]);
        }
    }
    return {std::move(train), std::move(test)};
}

/// Uniform minibatches without replacement; every epoch is a fresh shuffled
/// partition of 0..N-1 into ceil(N/m) batches (the last may be short).
class BatchSampler {
public:
    BatchSampler(Eigen::Index n, Eigen::Index batch_size, std::uint64_t seed)
        : n_(n), m_(batch_size), rng_(seed) {
        if (n <= 0) throw std::invalid_argument("BatchSampler: n must be positive");
        if (batch_size < 1 || batch_size > n)
            throw std::invalid_argument("BatchSampler: batch_size must lie in [1, n]");
    }

    std::vector<std::vector<Eigen::Index>> next_epoch() {
        std::vector<Eigen::Index> perm(static_cast<std::size_t>(n_));
        std::iota(perm.begin(), perm.end(), Eigen::Index{0});
        std::shuffle(perm.begin(), perm.end(), rng_);
        std::vector<std::vector<Eigen::Index>> batches;
        for (Eigen::Index start = 0; start < n_; start += m_) {
            const Eigen::Index len = std::min(m_, n_ - start);
            batches.emplace_back(perm.begin() + start, perm.begin() + start + len);
        }
        return batches;
    }

    Eigen::Index steps_per_epoch() const { return (n_ + m_ - 1) / m_; }

private:
    Eigen::Index n_, m_;
    std::mt19937_64 rng_;
};

inline std::vector<std::vector<Eigen::Index>> sample_batches(Eigen::Index n,
                                                             Eigen::Index batch_size,
                                                             std::uint64_t seed) {
    return BatchSampler(n, batch_size, seed).next_epoch();
}

/// Two well-separated Gaussian blobs in the plane, labels 0/1, N/2 samples
/// each (N even required). Centers (-1.5, -1.5) and (1.5, 1.5), stddev 0.5.
inline Dataset make_two_clusters(Eigen::Index n, std::uint64_t seed) {
    if (n < 4 || n % 2 != 0)
        throw std::invalid_argument("make_two_clusters: n must be even and >= 4");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.5);
    Dataset ds;
    ds.features.resize(n, 2);
    ds.targets.resize(n, 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double label = i < n / 2 ? 0.0 : 1.0;
        const double cx = label == 0.0 ? -1.5 : 1.5;
        ds.features(i, 0) = cx + noise(rng);
        ds.features(i, 1) = cx + noise(rng);
        ds.targets(i, 0) = label;
    }
    return ds;
}

/// Column-wise standardization fit on `train` and applied to both sets.
/// Constant columns are left centered but unscaled.
inline void standardize_columns(Dataset& train, Dataset& test) {
    if (train.n_features() != test.n_features())
        throw ShapeError("standardize_columns: feature dimensions differ");
    const Eigen::RowVectorXd mean = train.features.colwise().mean();
    Eigen::RowVectorXd stddev =
        ((train.features.rowwise() - mean).array().square().colwise().sum() /
         static_cast<double>(train.n()))
            .sqrt();
    stddev = stddev.cwiseMax(1e-12);
    train.features = (train.features.rowwise() - mean).array().rowwise() / stddev.array();
    test.features = (test.features.rowwise() - mean).array().rowwise() / stddev.array();
}

}  // namespace ggnscore
