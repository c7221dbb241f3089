#include "bspm/metrics.hpp"

#include "bspm/errors.hpp"

#include <cmath>
#include <string>

namespace bspm {

Metrics compute_metrics(const Eigen::MatrixXd& actual, const Eigen::MatrixXd& predicted) {
    if (actual.rows() != predicted.rows() || actual.cols() != predicted.cols()) {
        throw ParamError("compute_metrics: shape mismatch, " + std::to_string(actual.rows()) + "x" +
                         std::to_string(actual.cols()) + " vs " + std::to_string(predicted.rows()) + "x" +
                         std::to_string(predicted.cols()));
    }
    if (actual.size() == 0) throw ParamError("compute_metrics: empty input");
    if (!actual.allFinite()) throw DataError("compute_metrics: non-finite actual value");
    if (!predicted.allFinite()) throw DataError("compute_metrics: non-finite predicted value");

    const double grand_mean = actual.mean();
    const double ss_tot = (actual.array() - grand_mean).square().sum();
    if (!(ss_tot > 0.0)) {
        throw DataError("compute_metrics: actual values have zero variance, R^2 undefined");
    }
    const double ss_res = (actual - predicted).array().square().sum();

    Metrics m;
    m.n_values = static_cast<long>(actual.size());
    m.r2_percent = 100.0 * (1.0 - ss_res / ss_tot);
    m.mae = (actual - predicted).array().abs().sum() / static_cast<double>(actual.size());
    m.per_lead_mae.reserve(static_cast<std::size_t>(actual.cols()));
    for (Eigen::Index l = 0; l < actual.cols(); ++l) {
        m.per_lead_mae.push_back((actual.col(l) - predicted.col(l)).array().abs().mean());
    }
    return m;
}

} // namespace bspm
