#pragma once

#include <chrono>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "ggnscore/augmented.hpp"
#include "ggnscore/baselines.hpp"
#include "ggnscore/data_io.hpp"
#include "ggnscore/ggn.hpp"
#include "ggnscore/losses.hpp"
#include "ggnscore/models.hpp"
#include "ggnscore/regularizers.hpp"
#include "ggnscore/types.hpp"

namespace ggnscore {

enum class ProblemKind { Quadratic, Classifier, Mlp };
enum class OptimizerKind { GgnScore, Sgd, Adam, Lbfgs };
enum class RegularizerKind { PseudoHuber, L2 };
enum class InitKind { Auto, Zero, Gaussian };

/// Full description of one benchmark run. Synthetic data is used whenever
/// `data_path` is empty: a random least-squares design for the quadratic
/// problem, two Gaussian clusters for the classifier and MLP problems.
struct ExperimentConfig {
    ProblemKind problem = ProblemKind::Quadratic;
    OptimizerKind optimizer = OptimizerKind::GgnScore;
    RegularizerKind regularizer = RegularizerKind::PseudoHuber;
    std::string data_path;  // empty -> synthetic
    std::string out_path;   // empty -> no CSV written

    double lambda = 0.1;
    double alpha = 0.5;
    double mu = 1.0;
    double M_h = 1.0;
    double lr = 0.01;
    double gamma = 0.1;
    double train_fraction = 0.8;
    Eigen::Index batch_size = 0;  // 0 means full batch
    Eigen::Index epochs = 10;
    std::uint64_t seed = 0;
    ResidualMode mode = ResidualMode::Deviance;
    SolverForm solver = SolverForm::Identity;

    Eigen::Index n_parameters = 200;  // synthetic quadratic width
    Eigen::Index n_samples = 200;     // synthetic sample count
    double quad_scale = 0.1;
    Eigen::Index landmark_cap = 500;
    std::vector<Eigen::Index> hidden = {4, 16};
    Eigen::Index lbfgs_memory = 10;
    Eigen::Index m_size_cap = kDefaultMSizeCap;
    bool standardize = false;
    // Measured step times make runs non-reproducible byte for byte, so the
    // wall_time_s column is written as 0 unless explicitly requested.
    bool wall_clock = false;
    InitKind init = InitKind::Auto;

    void validate() const {
        if (!(lambda > 0.0)) throw std::invalid_argument("ExperimentConfig: lambda must be positive");
        if (!(alpha > 0.0) || alpha > 1.0)
            throw std::invalid_argument("ExperimentConfig: alpha must lie in (0, 1]");
        if (!(mu > 0.0)) throw std::invalid_argument("ExperimentConfig: mu must be positive");
        if (!(M_h >= 0.0)) throw std::invalid_argument("ExperimentConfig: M_h must be nonnegative");
        if (!(lr > 0.0)) throw std::invalid_argument("ExperimentConfig: lr must be positive");
        if (!(gamma > 0.0)) throw std::invalid_argument("ExperimentConfig: gamma must be positive");
        if (!(train_fraction > 0.0 && train_fraction < 1.0))
            throw std::invalid_argument("ExperimentConfig: train_fraction must lie in (0, 1)");
        if (batch_size < 0) throw std::invalid_argument("ExperimentConfig: batch_size must be >= 0");
        if (epochs < 1) throw std::invalid_argument("ExperimentConfig: epochs must be >= 1");
        if (n_parameters < 1 || n_samples < 1)
            throw std::invalid_argument("ExperimentConfig: synthetic sizes must be positive");
        if (!(quad_scale > 0.0)) throw std::invalid_argument("ExperimentConfig: quad_scale must be positive");
        if (landmark_cap < 1) throw std::invalid_argument("ExperimentConfig: landmark_cap must be >= 1");
        if (lbfgs_memory < 1) throw std::invalid_argument("ExperimentConfig: lbfgs_memory must be >= 1");
    }
};

/// One CSV row. Every optimizer step produces a record; eta and rho are only
/// present for GGN-SCORE steps, test metrics only on epoch-boundary rows of
/// problems that carry a test split.
struct RunRecord {
    Eigen::Index epoch = 0;  // 1-based
    Eigen::Index step = 0;   // 1-based within the epoch
    double train_loss = 0.0;
    double grad_norm = 0.0;
    std::optional<double> eta;
    std::optional<double> rho;
    double step_norm = 0.0;
    double wall_time_s = 0.0;
    std::optional<double> test_loss;
    std::optional<double> test_accuracy;
};

struct RunLog {
    std::vector<RunRecord> rows;
};

inline constexpr const char* kCsvHeader =
    "epoch,step,train_loss,grad_norm,eta,rho,step_norm,wall_time_s,test_loss,test_accuracy";

/// Fraction of correct 0/1 predictions after thresholding probabilities at
/// 0.5 (>= 0.5 predicts 1), computed as mean(2 y yhat - y - yhat + 1).
inline double binary_accuracy(const Eigen::Ref<const Vector>& y,
                              const Eigen::Ref<const Vector>& prob) {
    if (y.size() != prob.size())
        throw ShapeError("binary_accuracy: y and prob differ in length");
    if (y.size() == 0) throw std::invalid_argument("binary_accuracy: empty input");
    double acc = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (!is_binary_label(y[i]))
            throw std::invalid_argument("binary_accuracy: target not in {0, 1}");
        const double yhat = prob[i] >= 0.5 ? 1.0 : 0.0;
        acc += 2.0 * y[i] * yhat - y[i] - yhat + 1.0;
    }
    return acc / static_cast<double>(y.size());
}

namespace detail {

inline std::string csv_number(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline std::string csv_field(const std::optional<double>& v) {
    return v ? csv_number(*v) : std::string{};
}

}  // namespace detail

inline void emit_csv(const RunLog& log, std::ostream& out) {
    out << kCsvHeader << '\n';
    for (const RunRecord& r : log.rows) {
        out << r.epoch << ',' << r.step << ',' << detail::csv_number(r.train_loss) << ','
            << detail::csv_number(r.grad_norm) << ',' << detail::csv_field(r.eta) << ','
            << detail::csv_field(r.rho) << ',' << detail::csv_number(r.step_norm) << ','
            << detail::csv_number(r.wall_time_s) << ',' << detail::csv_field(r.test_loss)
            << ',' << detail::csv_field(r.test_accuracy) << '\n';
    }
}

inline void emit_csv(const RunLog& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    emit_csv(log, out);
    out.flush();
    if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

inline RunLog parse_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty CSV", 1);
    if (line == std::string(kCsvHeader) + "\r") line.pop_back();
    if (line != kCsvHeader) throw ParseError("unexpected CSV header", 1);
    RunLog log;
    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::string::size_type start = 0;
        while (true) {
            const auto comma = line.find(',', start);
            fields.push_back(line.substr(start, comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (fields.size() != 10) throw ParseError("expected 10 CSV fields", line_no);
        auto num = [&](const std::string& s) -> double {
            double v;
            if (!detail::parse_double(s, v)) throw ParseError("malformed number '" + s + "'", line_no);
            return v;
        };
        auto opt = [&](const std::string& s) -> std::optional<double> {
            if (s.empty()) return std::nullopt;
            return num(s);
        };
        RunRecord r;
        r.epoch = static_cast<Eigen::Index>(num(fields[0]));
        r.step = static_cast<Eigen::Index>(num(fields[1]));
        r.train_loss = num(fields[2]);
        r.grad_norm = num(fields[3]);
        r.eta = opt(fields[4]);
        r.rho = opt(fields[5]);
        r.step_norm = num(fields[6]);
        r.wall_time_s = num(fields[7]);
        r.test_loss = opt(fields[8]);
        r.test_accuracy = opt(fields[9]);
        log.rows.push_back(std::move(r));
    }
    return log;
}

namespace detail {

// Baseline optimizers follow the exact gradient of the plain-loss objective,
// independent of the residual mode configured for GGN-SCORE.
inline SquaredLoss gradient_mode(const SquaredLoss& l) { return l; }
inline CrossEntropyLoss gradient_mode(const CrossEntropyLoss& l) {
    CrossEntropyLoss out = l;
    out.mode = ResidualMode::LossGradient;
    return out;
}

inline Dataset load_dataset_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
    std::stringstream buffer;
    buffer << in.rdbuf();
    // Sniff the format: LIBSVM records carry index:value pairs.
    std::string probe = buffer.str();
    std::istringstream first_pass(probe);
    std::string line;
    bool libsvm = false;
    while (std::getline(first_pass, line)) {
        if (line.empty() || line[0] == '#') continue;
        libsvm = line.find(':') != std::string::npos;
        break;
    }
    std::istringstream data(std::move(probe));
    return libsvm ? parse_libsvm(data) : parse_delimited(data);
}

template <class Model, class Loss, class Reg>
RunLog run_loop(const ExperimentConfig& cfg, const Dataset& train, const Dataset* test,
                const Model& model, const Loss& loss, const Reg& reg, Vector theta,
                bool convex) {
    const Eigen::Index n = train.n();
    const Eigen::Index m = cfg.batch_size == 0 ? n : std::min(cfg.batch_size, n);
    if (cfg.optimizer == OptimizerKind::Lbfgs && m != n)
        throw std::invalid_argument("run_experiment: L-BFGS is full-batch only; leave batch_size at 0");

    GgnScoreConfig gcfg;
    gcfg.alpha = cfg.alpha;
    gcfg.lambda = cfg.lambda;
    gcfg.M_h = cfg.M_h;
    gcfg.batch_size = m;
    gcfg.solver = cfg.solver;
    gcfg.m_size_cap = cfg.m_size_cap;
    gcfg.validate();

    const auto grad_loss = gradient_mode(loss);
    SgdOptimizer sgd{cfg.lr};
    AdamOptimizer adam(cfg.lr);
    LbfgsOptimizer lbfgs(cfg.lr, static_cast<std::size_t>(cfg.lbfgs_memory));

    BatchSampler sampler(n, m, cfg.seed + 2);
    RunLog log;
    log.rows.reserve(static_cast<std::size_t>(cfg.epochs * sampler.steps_per_epoch()));

    auto record_train_loss = [&](const Vector& th) {
        return dataset_fit_loss(th, train, model, loss) + cfg.lambda * reg.eval(th).value;
    };

    double cumulative = 0.0;
    try {
    for (Eigen::Index epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto batches = sampler.next_epoch();
        Eigen::Index step_idx = 0;
        for (const auto& batch : batches) {
            ++step_idx;
            const std::span<const Eigen::Index> bsp(batch.data(), batch.size());
            RunRecord rec;
            rec.epoch = epoch;
            rec.step = step_idx;
            if (cfg.optimizer == OptimizerKind::GgnScore) {
                const AugmentedSystem sys = assemble_augmented(theta, train, bsp, model, loss,
                                                               reg, cfg.lambda, cfg.m_size_cap);
                auto [theta_next, rep] = ggn_score_step(theta, sys, gcfg);
                if (convex && !descent_check(sys, theta_next - theta))
                    throw NumericError("run_experiment: descent check failed at epoch " +
                                       std::to_string(epoch) + ", step " +
                                       std::to_string(step_idx));
                rec.grad_norm = rep.grad_norm;
                rec.eta = rep.eta;
                rec.rho = rep.rho;
                rec.step_norm = rep.step_norm;
                cumulative += rep.wall_time;
                theta = std::move(theta_next);
            } else {
                const auto t0 = std::chrono::steady_clock::now();
                const Vector g =
                    batch_gradient(theta, train, bsp, model, grad_loss, reg, cfg.lambda);
                Vector theta_next;
                switch (cfg.optimizer) {
                    case OptimizerKind::Sgd: theta_next = sgd.step(theta, g); break;
                    case OptimizerKind::Adam: theta_next = adam.step(theta, g); break;
                    default: theta_next = lbfgs.step(theta, g); break;
                }
                rec.grad_norm = g.norm();
                rec.step_norm = (theta_next - theta).norm();
                cumulative +=
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                theta = std::move(theta_next);
            }
            rec.train_loss = record_train_loss(theta);
            rec.wall_time_s = cfg.wall_clock ? cumulative : 0.0;
            log.rows.push_back(std::move(rec));
        }
        if (test != nullptr && !log.rows.empty()) {
            RunRecord& boundary = log.rows.back();
            boundary.test_loss =
                dataset_fit_loss(theta, *test, model, loss) / static_cast<double>(test->n());
            Vector prob(test->n());
            for (Eigen::Index i = 0; i < test->n(); ++i)
                prob[i] = model(theta, test->features.row(i).transpose()).prediction[0];
            boundary.test_accuracy = binary_accuracy(test->targets.col(0), prob);
        }
    }
    } catch (...) {
        // Abort mid-run: flush whatever was logged so the failure is inspectable.
        if (!cfg.out_path.empty()) {
            try {
                emit_csv(log, cfg.out_path);
            } catch (...) {  // the original error matters more
            }
        }
        throw;
    }
    return log;
}

template <class Model, class Loss>
RunLog run_with_regularizer(const ExperimentConfig& cfg, const Dataset& train,
                            const Dataset* test, const Model& model, const Loss& loss,
                            Vector theta, bool convex) {
    if (cfg.regularizer == RegularizerKind::PseudoHuber)
        return run_loop(cfg, train, test, model, loss, PseudoHuber(cfg.mu, cfg.M_h),
                        std::move(theta), convex);
    return run_loop(cfg, train, test, model, loss, L2Penalty(cfg.M_h), std::move(theta), convex);
}

inline Vector gaussian_vector(Eigen::Index n, std::uint64_t seed, double stddev) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, stddev);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal(rng);
    return v;
}

}  // namespace detail

/// Runs one configured experiment and returns the step log. When
/// `cfg.out_path` is set the log is also written there as CSV; if the run
/// aborts with a solver or numeric error, the rows produced so far are
/// flushed before the exception propagates.
inline RunLog run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();

    auto finish = [&](RunLog&& log) {
        if (!cfg.out_path.empty()) emit_csv(log, cfg.out_path);
        return std::move(log);
    };

    {
        if (cfg.problem == ProblemKind::Quadratic) {
            const QuadraticProblem prob = QuadraticProblem::random(
                cfg.n_samples, cfg.n_parameters, cfg.quad_scale, cfg.seed);
            const Dataset train = prob.dataset();
            Vector theta0 = cfg.init == InitKind::Zero
                                ? Vector::Zero(cfg.n_parameters)
                                : detail::gaussian_vector(cfg.n_parameters, cfg.seed + 1, 0.01);
            return finish(detail::run_with_regularizer(cfg, train, nullptr, prob.model(),
                                                       SquaredLoss{}, std::move(theta0),
                                                       /*convex=*/true));
        }

        Dataset raw = cfg.data_path.empty() ? make_two_clusters(cfg.n_samples, cfg.seed)
                                            : detail::load_dataset_file(cfg.data_path);
        raw.validate(/*binary_targets=*/true);
        auto [train_raw, test_raw] =
            train_test_split(raw, SplitSpec{cfg.train_fraction, cfg.seed});
        if (cfg.standardize) standardize_columns(train_raw, test_raw);

        if (cfg.problem == ProblemKind::Classifier) {
            // Landmarks are training rows; a cap keeps the mapped width bounded.
            Matrix landmarks = train_raw.features;
            if (landmarks.rows() > cfg.landmark_cap) {
                std::vector<Eigen::Index> idx(static_cast<std::size_t>(landmarks.rows()));
                std::iota(idx.begin(), idx.end(), Eigen::Index{0});
                std::mt19937_64 rng(cfg.seed + 3);
                std::shuffle(idx.begin(), idx.end(), rng);
                idx.resize(static_cast<std::size_t>(cfg.landmark_cap));
                std::sort(idx.begin(), idx.end());
                Matrix capped(cfg.landmark_cap, landmarks.cols());
                for (Eigen::Index i = 0; i < cfg.landmark_cap; ++i)
                    capped.row(i) = landmarks.row(idx[static_cast<std::size_t>(i)]);
                landmarks = std::move(capped);
            }
            Dataset train{rbf_feature_map(train_raw.features, landmarks, cfg.gamma),
                          train_raw.targets};
            Dataset test{rbf_feature_map(test_raw.features, landmarks, cfg.gamma),
                         test_raw.targets};
            const SigmoidLinear model{train.n_features()};
            Vector theta0 = cfg.init == InitKind::Gaussian
                                ? detail::gaussian_vector(model.parameter_count(), cfg.seed + 1, 0.01)
                                : Vector::Zero(model.parameter_count());
            return finish(detail::run_with_regularizer(cfg, train, &test, model,
                                                       CrossEntropyLoss{cfg.mode},
                                                       std::move(theta0), /*convex=*/true));
        }

        // MLP consumes raw features directly.
        MlpArchitecture arch;
        arch.input_dim = train_raw.n_features();
        arch.hidden = cfg.hidden;
        const Mlp model(arch);
        Vector theta0 = cfg.init == InitKind::Zero
                            ? Vector::Zero(model.parameter_count())
                            : model.gaussian_init(cfg.seed + 1, 0.01);
        return finish(detail::run_with_regularizer(cfg, train_raw, &test_raw, model,
                                                   CrossEntropyLoss{cfg.mode}, std::move(theta0),
                                                   /*convex=*/false));
    }
}

}  // namespace ggnscore
