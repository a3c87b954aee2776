// Benchmark driver: runs one optimizer configuration on one problem and
// writes the per-step log as CSV.

#include <cstdio>
#include <exception>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ggnscore/ggnscore.hpp"

int main(int argc, char** argv) {
    using namespace ggnscore;

    CLI::App app{"GGN-SCORE benchmark runner"};
    app.option_defaults()->always_capture_default();
    ExperimentConfig cfg;

    std::map<std::string, ProblemKind> problems{{"quadratic", ProblemKind::Quadratic},
                                                {"classifier", ProblemKind::Classifier},
                                                {"mlp", ProblemKind::Mlp}};
    std::map<std::string, OptimizerKind> optimizers{{"ggn-score", OptimizerKind::GgnScore},
                                                    {"sgd", OptimizerKind::Sgd},
                                                    {"adam", OptimizerKind::Adam},
                                                    {"lbfgs", OptimizerKind::Lbfgs}};
    std::map<std::string, RegularizerKind> regularizers{
        {"pseudo-huber", RegularizerKind::PseudoHuber}, {"l2", RegularizerKind::L2}};
    std::map<std::string, SolverForm> solvers{{"identity", SolverForm::Identity},
                                              {"direct", SolverForm::Direct}};
    std::map<std::string, ResidualMode> modes{{"deviance", ResidualMode::Deviance},
                                              {"loss-gradient", ResidualMode::LossGradient}};
    std::map<std::string, InitKind> inits{{"auto", InitKind::Auto},
                                          {"zero", InitKind::Zero},
                                          {"gaussian", InitKind::Gaussian}};

    app.add_option("--problem", cfg.problem, "Problem family")
        ->transform(CLI::CheckedTransformer(problems, CLI::ignore_case))
        ->default_str("quadratic");
    app.add_option("--data", cfg.data_path,
                   "Dataset path (LIBSVM or delimited); omit for synthetic data");
    app.add_option("--optimizer", cfg.optimizer, "Optimizer")
        ->transform(CLI::CheckedTransformer(optimizers, CLI::ignore_case))
        ->default_str("ggn-score");
    app.add_option("--regularizer", cfg.regularizer, "Regularizer")
        ->transform(CLI::CheckedTransformer(regularizers, CLI::ignore_case))
        ->default_str("pseudo-huber");
    app.add_option("--lambda", cfg.lambda, "Regularization weight")
        ->check(CLI::PositiveNumber);
    app.add_option("--alpha", cfg.alpha, "GGN-SCORE step-size numerator in (0,1]");
    app.add_option("--mu", cfg.mu, "Pseudo-Huber smoothing parameter")
        ->check(CLI::PositiveNumber);
    app.add_option("--mh", cfg.M_h, "Self-concordance constant in the step law")
        ->check(CLI::NonNegativeNumber);
    app.add_option("--batch-size", cfg.batch_size, "Minibatch size (0 = full batch)")
        ->check(CLI::NonNegativeNumber);
    app.add_option("--epochs", cfg.epochs, "Number of epochs")
        ->check(CLI::PositiveNumber);
    app.add_option("--lr", cfg.lr, "Learning rate for SGD/Adam/L-BFGS")
        ->check(CLI::PositiveNumber);
    app.add_option("--gamma", cfg.gamma, "RBF kernel width")->check(CLI::PositiveNumber);
    app.add_option("--split", cfg.train_fraction, "Training fraction of the data");
    app.add_option("--seed", cfg.seed, "Random seed");
    app.add_option("--landmark-cap", cfg.landmark_cap, "Maximum number of RBF landmarks")
        ->check(CLI::PositiveNumber);
    app.add_option("--solver", cfg.solver, "Linear-solve form for GGN-SCORE")
        ->transform(CLI::CheckedTransformer(solvers, CLI::ignore_case))
        ->default_str("identity");
    app.add_option("--mode", cfg.mode, "Residual mode for classification losses")
        ->transform(CLI::CheckedTransformer(modes, CLI::ignore_case))
        ->default_str("deviance");
    app.add_option("--out", cfg.out_path, "CSV output path");
    app.add_option("--n-parameters", cfg.n_parameters, "Synthetic quadratic width")
        ->check(CLI::PositiveNumber);
    app.add_option("--n-samples", cfg.n_samples, "Synthetic sample count")
        ->check(CLI::PositiveNumber);
    app.add_option("--scale", cfg.quad_scale, "Quadratic curvature scale")
        ->check(CLI::PositiveNumber);
    app.add_option("--hidden", cfg.hidden, "MLP hidden widths, e.g. --hidden 4 16");
    app.add_option("--lbfgs-memory", cfg.lbfgs_memory, "L-BFGS history length")
        ->check(CLI::PositiveNumber);
    app.add_option("--init", cfg.init, "Parameter initialization")
        ->transform(CLI::CheckedTransformer(inits, CLI::ignore_case))
        ->default_str("auto");
    app.add_flag("--standardize", cfg.standardize, "Standardize features on the training split");
    app.add_flag("--wall-clock", cfg.wall_clock,
                 "Record measured step times (makes the CSV non-reproducible)");

    CLI11_PARSE(app, argc, argv);

    try {
        const RunLog log = run_experiment(cfg);
        const RunRecord& last = log.rows.back();
        std::printf("steps: %zu\n", log.rows.size());
        std::printf("final train loss: %.12g\n", last.train_loss);
        std::printf("final grad norm:  %.12g\n", last.grad_norm);
        if (last.test_loss) std::printf("final test loss:  %.12g\n", *last.test_loss);
        if (last.test_accuracy) std::printf("final test accuracy: %.12g\n", *last.test_accuracy);
        if (!cfg.out_path.empty()) std::printf("log written to %s\n", cfg.out_path.c_str());
    } catch (const std::exception& err) {
        std::fprintf(stderr, "error: %s\n", err.what());
        return 1;
    }
    return 0;
}
