#pragma once

#include "bspm/kernels.hpp"

#include <Eigen/Core>

#include <vector>

namespace bspm {

struct LagpConfig {
    int n0 = 6;      // seed neighborhood size
    int n_end = 50;  // final local design size
    int n_cand = 100; // candidate pool size (nearest-neighbor ranks)
};

/// Result of one local-design prediction. Indices are dataset rows, in
/// selection order: the n0 nearest seeds first, then greedy additions.
struct LocalDesign {
    Eigen::VectorXd query;
    std::vector<int> indices;
    double mean = 0.0;
    double variance = 0.0;
};

/// Local approximate GP prediction at one query point with fixed, already
/// fitted hyperparameters. Seeds the design with the n0 nearest neighbors of
/// the query (Euclidean after scaling every coordinate to unit standard
/// deviation over the dataset), then repeatedly adds the candidate whose
/// inclusion most reduces the posterior variance at the query, tracked with
/// rank-1 Cholesky extensions. Candidates live in the fixed pool of the
/// max(n_cand, n_end) nearest neighbors, so every selected index stays local.
/// Ties, both in neighbor ranking and in variance reduction, go to the
/// nearer point and then the lower row index.
LocalDesign lagp_predict(const Eigen::VectorXd& query, const Eigen::MatrixXd& inputs,
                         const Eigen::VectorXd& targets, const KernelSpec& kernel, double noise_var,
                         const LagpConfig& config);

/// lagp_predict over each row of `queries`, in row order. Queries are
/// independent; element i equals the single-call result exactly. Per-query
/// failures are rethrown with the query index prefixed.
std::vector<LocalDesign> lagp_batch(const Eigen::MatrixXd& queries, const Eigen::MatrixXd& inputs,
                                    const Eigen::VectorXd& targets, const KernelSpec& kernel,
                                    double noise_var, const LagpConfig& config);

} // namespace bspm
