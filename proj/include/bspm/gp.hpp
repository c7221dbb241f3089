#pragma once

#include "bspm/kernels.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace bspm {

/// Exact GP regression state. Immutable once built: the Cholesky factor of
/// K(X,X) + (noise_var + jitter) I and the weight vector alpha = K_n^-1 y are
/// cached at construction and every prediction reuses them.
struct GpModel {
    Eigen::MatrixXd X; // n x D training inputs
    Eigen::VectorXd y; // n training targets
    KernelSpec kernel;
    double noise_var = 0.0;
    double jitter = 0.0; // diagonal boost that made the factorization succeed
    Eigen::MatrixXd chol_lower;
    Eigen::VectorXd alpha;
};

/// Factors K(X,X) + noise_var I with jitter 1e-10 * mean(diag), doubling the
/// jitter up to 8 times before giving up with a NumericalError that carries a
/// conditioning estimate.
GpModel make_gp(Eigen::MatrixXd X, Eigen::VectorXd y, KernelSpec kernel, double noise_var);

struct GpPrediction {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov; // posterior covariance of the latent function (no noise added)
};

GpPrediction gp_predict(const GpModel& model, const Eigen::MatrixXd& x_star);

/// Mean-only prediction, skips the posterior covariance.
Eigen::VectorXd gp_predict_mean(const GpModel& model, const Eigen::MatrixXd& x_star);

/// -1/2 y' K_n^-1 y - 1/2 log|K_n| - n/2 log(2 pi), via the cached factor.
double log_marginal_likelihood(const GpModel& model);

/// Gradient of the log marginal likelihood with respect to the packed kernel
/// parameters (log space). With include_noise, d/d log(noise_var) is appended.
std::vector<double> lml_gradient(const GpModel& model, bool include_noise = false);

struct FitOptions {
    int budget = 40;    // total Gram factorizations allowed across all starts
    int n_restarts = 5; // random perturbations of the initial parameters
    std::uint64_t seed = 0;
};

/// Gradient ascent on the LML in log-parameter space with backtracking line
/// search and multi-start. The initial parameters are always evaluated first,
/// so the returned LML never falls below the input model's. noise_var joins
/// the optimization unless it is exactly zero (jitter-only models stay that
/// way). Ties between starts go to the lower start index.
GpModel fit_hyperparameters(const GpModel& model, const FitOptions& opts);

} // namespace bspm
