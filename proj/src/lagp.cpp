#include "bspm/lagp.hpp"

#include "bspm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace bspm {

namespace {

constexpr int kMaxJitterDoublings = 8;

void validate_lagp(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets, double noise_var,
                   const LagpConfig& config) {
    const Eigen::Index n = inputs.rows();
    if (targets.size() != n) {
        throw ParamError("lagp: " + std::to_string(n) + " inputs but " + std::to_string(targets.size()) +
                         " targets");
    }
    if (config.n0 < 1 || config.n0 >= config.n_end) {
        throw ParamError("lagp: need 1 <= n0 < n_end, got n0=" + std::to_string(config.n0) +
                         ", n_end=" + std::to_string(config.n_end));
    }
    if (static_cast<Eigen::Index>(config.n_end) > n) {
        throw ParamError("lagp: n_end=" + std::to_string(config.n_end) + " exceeds dataset size " +
                         std::to_string(n));
    }
    if (config.n_cand < config.n_end - config.n0) {
        throw ParamError("lagp: n_cand=" + std::to_string(config.n_cand) + " < n_end - n0 = " +
                         std::to_string(config.n_end - config.n0));
    }
    if (!(noise_var >= 0.0) || !std::isfinite(noise_var)) {
        throw ParamError("lagp: noise_var must be finite and >= 0");
    }
}

// Per-coordinate 1/sd over the dataset; constant coordinates scale by 1.
Eigen::VectorXd inverse_scales(const Eigen::MatrixXd& inputs) {
    const double n = static_cast<double>(inputs.rows());
    Eigen::VectorXd inv(inputs.cols());
    for (Eigen::Index d = 0; d < inputs.cols(); ++d) {
        const double mean = inputs.col(d).mean();
        const double var = (inputs.col(d).array() - mean).square().sum() / n;
        inv[d] = var > 0.0 ? 1.0 / std::sqrt(var) : 1.0;
    }
    return inv;
}

LocalDesign predict_one(const Eigen::VectorXd& query, const Eigen::MatrixXd& inputs,
                        const Eigen::VectorXd& targets, const KernelSpec& kernel, double noise_var,
                        const LagpConfig& config, const Eigen::VectorXd& inv_scales) {
    const Eigen::Index n = inputs.rows();
    if (query.size() != inputs.cols()) {
        throw ParamError("lagp: query dimension " + std::to_string(query.size()) +
                         " != data dimension " + std::to_string(inputs.cols()));
    }

    // Nearest-neighbor ranking in the normalized metric, ties to lower index.
    Eigen::VectorXd d2(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        d2[i] = (inv_scales.array() * (inputs.row(i).transpose() - query).array()).square().sum();
    }
    const Eigen::Index pool_size =
        std::min<Eigen::Index>(n, std::max(config.n_cand, config.n_end));
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    auto nearer = [&](int a, int b) { return d2[a] < d2[b] || (d2[a] == d2[b] && a < b); };
    std::nth_element(order.begin(), order.begin() + pool_size - 1, order.end(), nearer);
    order.resize(static_cast<std::size_t>(pool_size));
    std::sort(order.begin(), order.end(), nearer);

    // Kernel blocks on the pool, evaluated once in raw coordinates.
    Eigen::MatrixXd xp(pool_size, inputs.cols());
    Eigen::VectorXd yp(pool_size);
    for (Eigen::Index i = 0; i < pool_size; ++i) {
        xp.row(i) = inputs.row(order[static_cast<std::size_t>(i)]);
        yp[i] = targets[order[static_cast<std::size_t>(i)]];
    }
    const Eigen::MatrixXd k_pool = kernel_eval(kernel, xp, xp);
    const Eigen::MatrixXd qrow = query.transpose();
    const Eigen::VectorXd k_qs = kernel_eval(kernel, xp, qrow).col(0);
    const double k_ss = kernel_diag(kernel, qrow)[0];

    const double mean_diag = k_pool.diagonal().mean() + noise_var;
    double jitter = 1e-10 * (mean_diag > 0.0 ? mean_diag : 1.0);

    const int n_end = config.n_end;
    for (int attempt = 0; attempt <= kMaxJitterDoublings; ++attempt, jitter *= 2.0) {
        // Partial solves against the growing factor: column c of `sol` holds
        // L^-1 k(S, c); `v` and `w` are the same solves for k(S, query) and
        // the targets. One rank-1 extension costs O(j) per candidate.
        Eigen::MatrixXd sol = Eigen::MatrixXd::Zero(n_end, pool_size);
        Eigen::VectorXd sol_sq = Eigen::VectorXd::Zero(pool_size);
        Eigen::VectorXd v = Eigen::VectorXd::Zero(n_end);
        Eigen::VectorXd w = Eigen::VectorXd::Zero(n_end);
        std::vector<char> picked(static_cast<std::size_t>(pool_size), 0);
        std::vector<int> chosen;
        chosen.reserve(static_cast<std::size_t>(n_end));
        bool degenerate = false;

        auto extend = [&](Eigen::Index c) {
            const int j = static_cast<int>(chosen.size());
            const double piv2 = k_pool(c, c) + noise_var + jitter - sol_sq[c];
            if (!(piv2 > 0.0)) return false;
            const double piv = std::sqrt(piv2);
            const auto lc = sol.col(c).head(j);
            v[j] = (k_qs[c] - lc.dot(v.head(j))) / piv;
            w[j] = (yp[c] - lc.dot(w.head(j))) / piv;
            for (Eigen::Index o = 0; o < pool_size; ++o) {
                if (picked[static_cast<std::size_t>(o)] || o == c) continue;
                const double e = (k_pool(c, o) - lc.dot(sol.col(o).head(j))) / piv;
                sol(j, o) = e;
                sol_sq[o] += e * e;
            }
            picked[static_cast<std::size_t>(c)] = 1;
            chosen.push_back(static_cast<int>(c));
            return true;
        };

        for (int s = 0; s < config.n0 && !degenerate; ++s) degenerate = !extend(s);

        while (!degenerate && static_cast<int>(chosen.size()) < n_end) {
            const int j = static_cast<int>(chosen.size());
            Eigen::Index best = -1;
            double best_gain = -1.0;
            for (Eigen::Index c = 0; c < pool_size; ++c) {
                if (picked[static_cast<std::size_t>(c)]) continue;
                const double piv2 = k_pool(c, c) + noise_var + jitter - sol_sq[c];
                if (!(piv2 > 0.0)) continue;
                const double resid = k_qs[c] - sol.col(c).head(j).dot(v.head(j));
                const double gain = resid * resid / piv2;
                if (gain > best_gain) {
                    best = c;
                    best_gain = gain;
                }
            }
            if (best < 0 || !extend(best)) {
                degenerate = true;
                break;
            }
        }

        if (degenerate) continue;

        LocalDesign out;
        out.query = query;
        out.indices.reserve(chosen.size());
        for (int c : chosen) out.indices.push_back(order[static_cast<std::size_t>(c)]);
        out.mean = v.dot(w);
        out.variance = std::max(0.0, k_ss - v.dot(v)); // clamp conditioning roundoff
        return out;
    }

    throw NumericalError("lagp: local Gram of " + std::to_string(pool_size) +
                         " points stayed degenerate after " + std::to_string(kMaxJitterDoublings) +
                         " jitter doublings");
}

} // namespace

LocalDesign lagp_predict(const Eigen::VectorXd& query, const Eigen::MatrixXd& inputs,
                         const Eigen::VectorXd& targets, const KernelSpec& kernel, double noise_var,
                         const LagpConfig& config) {
    validate_lagp(inputs, targets, noise_var, config);
    return predict_one(query, inputs, targets, kernel, noise_var, config, inverse_scales(inputs));
}

std::vector<LocalDesign> lagp_batch(const Eigen::MatrixXd& queries, const Eigen::MatrixXd& inputs,
                                    const Eigen::VectorXd& targets, const KernelSpec& kernel,
                                    double noise_var, const LagpConfig& config) {
    validate_lagp(inputs, targets, noise_var, config);
    const Eigen::VectorXd inv_scales = inverse_scales(inputs);

    std::vector<LocalDesign> out;
    out.reserve(static_cast<std::size_t>(queries.rows()));
    for (Eigen::Index q = 0; q < queries.rows(); ++q) {
        auto tag = [&](const char* what) {
            return "query " + std::to_string(q) + ": " + what;
        };
        try {
            out.push_back(predict_one(queries.row(q).transpose(), inputs, targets, kernel, noise_var,
                                      config, inv_scales));
        } catch (const ParamError& e) {
            throw ParamError(tag(e.what()));
        } catch (const NumericalError& e) {
            throw NumericalError(tag(e.what()));
        } catch (const DataError& e) {
            throw DataError(tag(e.what()));
        }
    }
    return out;
}

} // namespace bspm
