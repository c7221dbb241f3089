#pragma once

#include <Eigen/Core>

#include <vector>

namespace bspm {

/// Pooled reconstruction quality over a (time x lead) grid.
struct Metrics {
    double r2_percent = 0.0; // 100 (1 - SS_res / SS_tot), grand mean baseline
    double mae = 0.0;        // mean absolute error, mV
    long n_values = 0;       // T x M entries pooled
    std::vector<double> per_lead_mae;
};

/// actual and predicted must share a non-empty shape, columns are leads.
/// Throws DataError on non-finite input or when actual has zero variance
/// (R^2 undefined).
Metrics compute_metrics(const Eigen::MatrixXd& actual, const Eigen::MatrixXd& predicted);

} // namespace bspm
