#include "bspm/gp.hpp"

#include "bspm/errors.hpp"
#include "bspm/rng.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

namespace bspm {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr int kMaxJitterDoublings = 8;
constexpr double kLogParamClamp = 30.0;
constexpr double kOffsetClamp = 1e6;

std::string conditioning_note(const Eigen::MatrixXd& a) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
    std::ostringstream os;
    if (es.info() == Eigen::Success) {
        const double lo = es.eigenvalues().minCoeff();
        const double hi = es.eigenvalues().maxCoeff();
        os << "eigenvalue range [" << lo << ", " << hi << "]";
        if (lo > 0.0) os << ", condition ~" << hi / lo;
    } else {
        os << "eigenvalue estimate unavailable";
    }
    return os.str();
}

} // namespace

GpModel make_gp(Eigen::MatrixXd X, Eigen::VectorXd y, KernelSpec kernel, double noise_var) {
    const Eigen::Index n = X.rows();
    if (n == 0) throw ParamError("make_gp: empty training set");
    if (y.size() != n) {
        throw ParamError("make_gp: " + std::to_string(n) + " inputs but " + std::to_string(y.size()) +
                         " targets");
    }
    if (!(noise_var >= 0.0) || !std::isfinite(noise_var)) {
        throw ParamError("make_gp: noise_var must be finite and >= 0");
    }
    validate_kernel(kernel, static_cast<int>(X.cols()));

    Eigen::MatrixXd gram = kernel_eval(kernel, X, X);
    gram.diagonal().array() += noise_var;

    const double mean_diag = gram.diagonal().mean();
    const double base_jitter = 1e-10 * (mean_diag > 0.0 ? mean_diag : 1.0);

    GpModel model;
    model.X = std::move(X);
    model.y = std::move(y);
    model.kernel = std::move(kernel);
    model.noise_var = noise_var;

    double jitter = base_jitter;
    Eigen::LLT<Eigen::MatrixXd> llt;
    for (int attempt = 0; attempt <= kMaxJitterDoublings; ++attempt) {
        Eigen::MatrixXd a = gram;
        a.diagonal().array() += jitter;
        llt.compute(a);
        if (llt.info() == Eigen::Success) {
            model.jitter = jitter;
            model.chol_lower = llt.matrixL();
            model.alpha = llt.solve(model.y);
            return model;
        }
        if (attempt < kMaxJitterDoublings) jitter *= 2.0;
    }

    Eigen::MatrixXd a = gram;
    a.diagonal().array() += jitter;
    throw NumericalError("make_gp: Gram factorization failed after " +
                         std::to_string(kMaxJitterDoublings) + " jitter doublings (n=" +
                         std::to_string(n) + ", jitter=" + std::to_string(jitter) + "); " +
                         conditioning_note(a));
}

GpPrediction gp_predict(const GpModel& model, const Eigen::MatrixXd& x_star) {
    if (x_star.cols() != model.X.cols()) {
        throw ParamError("gp_predict: query dimension " + std::to_string(x_star.cols()) +
                         " != training dimension " + std::to_string(model.X.cols()));
    }
    Eigen::MatrixXd ks = kernel_eval(model.kernel, x_star, model.X);
    GpPrediction out;
    out.mean = ks * model.alpha;

    Eigen::MatrixXd v =
        model.chol_lower.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd(ks.transpose()));
    out.cov = kernel_eval(model.kernel, x_star, x_star);
    out.cov.noalias() -= v.transpose() * v;
    out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
    return out;
}

Eigen::VectorXd gp_predict_mean(const GpModel& model, const Eigen::MatrixXd& x_star) {
    if (x_star.cols() != model.X.cols()) {
        throw ParamError("gp_predict_mean: query dimension " + std::to_string(x_star.cols()) +
                         " != training dimension " + std::to_string(model.X.cols()));
    }
    return kernel_eval(model.kernel, x_star, model.X) * model.alpha;
}

double log_marginal_likelihood(const GpModel& model) {
    const double n = static_cast<double>(model.X.rows());
    const double fit = -0.5 * model.y.dot(model.alpha);
    const double logdet = model.chol_lower.diagonal().array().log().sum();
    return fit - logdet - 0.5 * n * kLog2Pi;
}

std::vector<double> lml_gradient(const GpModel& model, bool include_noise) {
    const Eigen::Index n = model.X.rows();
    // W = 1/2 (alpha alpha' - K_n^-1); dLML/dtheta = sum_ij W_ij dK_ij/dtheta
    Eigen::MatrixXd kinv = Eigen::MatrixXd::Identity(n, n);
    model.chol_lower.triangularView<Eigen::Lower>().solveInPlace(kinv);
    model.chol_lower.transpose().triangularView<Eigen::Upper>().solveInPlace(kinv);
    Eigen::MatrixXd w = 0.5 * (model.alpha * model.alpha.transpose() - kinv);

    std::vector<double> grads(static_cast<std::size_t>(n_params(model.kernel)), 0.0);
    kernel_eval_weighted_grads(model.kernel, model.X, model.X, w, grads);
    if (include_noise) grads.push_back(model.noise_var * w.trace());
    return grads;
}

namespace {

struct Evaluation {
    double lml = 0.0;
    GpModel model;
};

struct FitProblem {
    const GpModel* base;
    bool fit_noise;
    std::vector<bool> is_offset; // identity-packed entries, clamped wide

    std::vector<double> clamp(std::vector<double> theta) const {
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const double lim = is_offset[i] ? kOffsetClamp : kLogParamClamp;
            theta[i] = std::clamp(theta[i], -lim, lim);
        }
        return theta;
    }

    std::optional<Evaluation> evaluate(const std::vector<double>& theta) const {
        KernelSpec kernel = base->kernel;
        std::vector<double> kernel_theta = theta;
        double noise = base->noise_var;
        if (fit_noise) {
            noise = std::exp(kernel_theta.back());
            kernel_theta.pop_back();
        }
        try {
            unpack_params(kernel, kernel_theta);
            Evaluation ev;
            ev.model = make_gp(base->X, base->y, std::move(kernel), noise);
            ev.lml = log_marginal_likelihood(ev.model);
            if (!std::isfinite(ev.lml)) return std::nullopt;
            return ev;
        } catch (const Error&) {
            return std::nullopt;
        }
    }

    std::vector<double> gradient(const GpModel& m) const { return lml_gradient(m, fit_noise); }
};

} // namespace

GpModel fit_hyperparameters(const GpModel& model, const FitOptions& opts) {
    if (opts.budget < 1) throw ParamError("fit_hyperparameters: budget must be >= 1");
    if (opts.n_restarts < 0) throw ParamError("fit_hyperparameters: n_restarts must be >= 0");

    FitProblem problem;
    problem.base = &model;
    problem.fit_noise = model.noise_var > 0.0;

    std::vector<double> theta0 = pack_params(model.kernel);
    for (const std::string& name : param_names(model.kernel)) {
        problem.is_offset.push_back(name.size() >= 7 && name.compare(name.size() - 7, 7, ".offset") == 0);
    }
    if (problem.fit_noise) {
        theta0.push_back(std::log(model.noise_var));
        problem.is_offset.push_back(false);
    }
    const std::size_t p = theta0.size();

    const int n_starts = 1 + opts.n_restarts;
    const int per_start = std::max(1, opts.budget / n_starts);
    int evals_left = opts.budget;

    std::optional<Evaluation> best;
    // the winner must strictly beat the starting point; when nothing does, the
    // caller gets its parameters back untouched by the log/exp round-trip
    bool best_is_input = false;
    for (int s = 0; s < n_starts && evals_left > 0; ++s) {
        std::vector<double> theta = theta0;
        if (s > 0) {
            Rng rng(derive_seed(opts.seed, static_cast<std::uint64_t>(s)));
            for (std::size_t i = 0; i < p; ++i) theta[i] += rng.normal();
        }
        theta = problem.clamp(theta);

        int start_evals = std::min(per_start, evals_left);
        auto spend = [&]() {
            --start_evals;
            --evals_left;
        };

        auto cur = problem.evaluate(theta);
        spend();
        if (!cur) continue;
        if (!best || cur->lml > best->lml) {
            best = cur;
            best_is_input = s == 0 && theta == theta0;
        }

        std::vector<double> grad = problem.gradient(cur->model);
        double step0 = 1.0;
        while (start_evals > 0) {
            double gmax = 0.0;
            for (double g : grad) gmax = std::max(gmax, std::abs(g));
            if (gmax < 1e-7) break;
            const double scale = 1.0 / std::max(1.0, gmax);

            double slope = 0.0;
            for (double g : grad) slope += g * g * scale;

            bool accepted = false;
            double step = step0;
            std::vector<double> theta_try;
            std::optional<Evaluation> next;
            while (step >= 1e-6 && start_evals > 0) {
                theta_try = theta;
                for (std::size_t i = 0; i < p; ++i) theta_try[i] += step * scale * grad[i];
                theta_try = problem.clamp(theta_try);
                next = problem.evaluate(theta_try);
                spend();
                if (next && next->lml > cur->lml + 1e-4 * step * slope) {
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if (!accepted) break;

            theta = std::move(theta_try);
            cur = std::move(next);
            if (cur->lml > best->lml) {
                best = *cur;
                best_is_input = false;
            }
            grad = problem.gradient(cur->model);
            step0 = std::min(1.0, 2.0 * step);
        }
    }

    if (!best) {
        throw NumericalError("fit_hyperparameters: no start produced a finite log marginal likelihood");
    }
    if (best_is_input) return model;
    return std::move(best->model);
}

} // namespace bspm
