#include "bspm/gplmk.hpp"

#include "bspm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace bspm {

std::vector<double> gplmk_weights(const std::vector<VertexGeometry>& geometry, const GplmkConfig& config) {
    if (geometry.empty()) throw ParamError("gplmk_weights: empty geometry");
    if (!(config.lambda >= 0.0 && config.lambda <= 1.0)) {
        throw ParamError("gplmk_weights: lambda must be in [0,1], got " + std::to_string(config.lambda));
    }
    if (!(config.rho > 0.0)) {
        throw ParamError("gplmk_weights: rho must be > 0, got " + std::to_string(config.rho));
    }

    const std::size_t n = geometry.size();
    const double lambda = config.lambda, rho = config.rho;

    std::vector<double> gauss_term(n), mean_term(n);
    double gauss_denom = 0.0, mean_denom = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const VertexGeometry& g = geometry[i];
        if (!(g.area > 0.0)) {
            throw DataError("gplmk_weights: vertex " + std::to_string(i) + " has non-positive area");
        }
        gauss_term[i] = std::pow(std::abs(g.gauss_k), rho);
        mean_term[i] = std::pow(std::abs(g.mean_eta), rho);
        gauss_denom += gauss_term[i] * g.area;
        mean_denom += mean_term[i] * g.area;
    }

    if (lambda > 0.0 && gauss_denom == 0.0) {
        throw FlatGeometryError(
            "gplmk_weights: Gaussian-curvature term is active but vanishes everywhere; "
            "fall back to uniform weights");
    }
    if (lambda < 1.0 && mean_denom == 0.0) {
        throw FlatGeometryError(
            "gplmk_weights: mean-curvature term is active but vanishes everywhere; "
            "fall back to uniform weights");
    }

    std::vector<double> w(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (lambda > 0.0) w[i] += lambda * gauss_term[i] / gauss_denom;
        if (lambda < 1.0) w[i] += (1.0 - lambda) * mean_term[i] / mean_denom;
    }
    return w;
}

Eigen::MatrixXd reweighted_kernel(const HeatKernelMatrix& heat_half, const std::vector<double>& weights,
                                  const std::vector<double>& areas) {
    const Eigen::Index n = heat_half.entries.rows();
    if (heat_half.entries.cols() != n) throw ParamError("reweighted_kernel: heat kernel not square");
    if (static_cast<Eigen::Index>(weights.size()) != n || static_cast<Eigen::Index>(areas.size()) != n) {
        throw ParamError("reweighted_kernel: weights/areas size does not match the kernel");
    }

    Eigen::VectorXd core(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        if (weights[i] < 0.0 || areas[i] < 0.0) {
            throw ParamError("reweighted_kernel: negative weight or area at vertex " + std::to_string(i));
        }
        core[i] = weights[i] * areas[i];
    }

    Eigen::MatrixXd k = heat_half.entries.transpose() * core.asDiagonal() * heat_half.entries;
    return 0.5 * (k + k.transpose()).eval();
}

LandmarkSequence gplmk_sequence(const Eigen::MatrixXd& kernel, const GplmkConfig& config,
                                const std::vector<int>& seed_indices) {
    const Eigen::Index n = kernel.rows();
    if (kernel.cols() != n || n == 0) throw ParamError("gplmk_sequence: kernel must be square and nonempty");
    if (config.n_landmarks < 1) throw ParamError("gplmk_sequence: n_landmarks must be >= 1");
    if (!(config.jitter >= 0.0)) throw ParamError("gplmk_sequence: jitter must be >= 0");
    const std::size_t total = seed_indices.size() + static_cast<std::size_t>(config.n_landmarks);
    if (total > static_cast<std::size_t>(n)) {
        throw ParamError("gplmk_sequence: " + std::to_string(seed_indices.size()) + " seeds + " +
                         std::to_string(config.n_landmarks) + " landmarks exceed " + std::to_string(n) +
                         " vertices");
    }

    std::vector<char> selected(static_cast<std::size_t>(n), 0);
    for (int s : seed_indices) {
        if (s < 0 || s >= n) throw ParamError("gplmk_sequence: seed index " + std::to_string(s) + " out of range");
        if (selected[static_cast<std::size_t>(s)]) {
            throw ParamError("gplmk_sequence: duplicate seed index " + std::to_string(s));
        }
        selected[static_cast<std::size_t>(s)] = 1;
    }
    std::fill(selected.begin(), selected.end(), 0);

    // Running posterior variance per vertex, reduced in place as the factor
    // grows: score_i = K_ii - sum_p C(p,i)^2 with C = L^-1 K(sel, :).
    Eigen::VectorXd score = kernel.diagonal();
    const Eigen::Index cap = static_cast<Eigen::Index>(total);
    Eigen::MatrixXd chol = Eigen::MatrixXd::Zero(cap, cap);
    Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(cap, n);
    Eigen::Index m = 0;

    auto extend = [&](Eigen::Index v) {
        const double d2 = score[v] + config.jitter;
        if (!(d2 > 0.0)) {
            throw NumericalError("gplmk_sequence: non-positive Cholesky pivot " + std::to_string(d2) +
                                 " at vertex " + std::to_string(v) + ", step " + std::to_string(m + 1) +
                                 "; kernel is not PSD within jitter");
        }
        const double d = std::sqrt(d2);
        if (m > 0) chol.row(m).head(m) = cross.col(v).head(m).transpose();
        chol(m, m) = d;
        Eigen::RowVectorXd new_row = kernel.row(v);
        if (m > 0) new_row.noalias() -= cross.col(v).head(m).transpose() * cross.topRows(m);
        new_row /= d;
        cross.row(m) = new_row;
        score.array() -= new_row.array().square().transpose();
        selected[static_cast<std::size_t>(v)] = 1;
        ++m;
    };

    for (int s : seed_indices) extend(s);

    LandmarkSequence seq;
    seq.indices.reserve(static_cast<std::size_t>(config.n_landmarks));
    seq.scores.reserve(static_cast<std::size_t>(config.n_landmarks));
    for (int step = 0; step < config.n_landmarks; ++step) {
        Eigen::Index best = -1;
        double best_score = -std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < n; ++i) {
            if (!selected[static_cast<std::size_t>(i)] && score[i] > best_score) {
                best = i;
                best_score = score[i];
            }
        }
        seq.indices.push_back(static_cast<int>(best));
        seq.scores.push_back(best_score);
        extend(best);
    }
    return seq;
}

} // namespace bspm
