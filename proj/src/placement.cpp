#include "bspm/placement.hpp"

#include "bspm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace bspm {

Eigen::MatrixXd lhd_points(const Eigen::Vector3d& lo, const Eigen::Vector3d& hi, int n, Rng& rng) {
    if (n < 1) throw ParamError("lhd_points: n must be >= 1");
    Eigen::MatrixXd pts(n, 3);
    std::vector<int> strata(static_cast<std::size_t>(n));
    for (int d = 0; d < 3; ++d) {
        std::iota(strata.begin(), strata.end(), 0);
        rng.shuffle(strata);
        const double width = (hi[d] - lo[d]) / n;
        for (int i = 0; i < n; ++i) {
            pts(i, d) = lo[d] + (strata[static_cast<std::size_t>(i)] + rng.uniform()) * width;
        }
    }
    return pts;
}

namespace {

int nearest_vertex(const TriMesh& mesh, const Eigen::Vector3d& p) {
    int best = 0;
    double best_d2 = (mesh.vertices[0] - p).squaredNorm();
    for (int v = 1; v < mesh.n_vertices(); ++v) {
        const double d2 = (mesh.vertices[static_cast<std::size_t>(v)] - p).squaredNorm();
        if (d2 < best_d2) {
            best = v;
            best_d2 = d2;
        }
    }
    return best;
}

} // namespace

std::vector<int> lhd_init(const TriMesh& mesh, int n, std::uint64_t seed) {
    if (n < 1 || n > mesh.n_vertices()) {
        throw ParamError("lhd_init: n=" + std::to_string(n) + " outside [1, " +
                         std::to_string(mesh.n_vertices()) + "]");
    }
    Eigen::Vector3d lo = mesh.vertices[0], hi = mesh.vertices[0];
    for (const auto& v : mesh.vertices) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }

    Rng rng(derive_seed(seed, 0));
    constexpr int kMaxAttempts = 100;
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        const Eigen::MatrixXd pts = lhd_points(lo, hi, n, rng);
        std::vector<int> ids;
        ids.reserve(static_cast<std::size_t>(n));
        std::set<int> seen;
        bool collision = false;
        for (int i = 0; i < n && !collision; ++i) {
            const int v = nearest_vertex(mesh, pts.row(i).transpose());
            collision = !seen.insert(v).second;
            ids.push_back(v);
        }
        if (!collision) return ids;
    }
    throw DataError("lhd_init: " + std::to_string(kMaxAttempts) +
                    " redraws all snapped to colliding vertices; use the farthest-point baseline for "
                    "this mesh");
}

std::vector<int> uniform_baseline(const TriMesh& mesh, int k) {
    const int n = mesh.n_vertices();
    if (k < 1 || k > n) {
        throw ParamError("uniform_baseline: k=" + std::to_string(k) + " outside [1, " + std::to_string(n) +
                         "]");
    }

    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    for (const auto& v : mesh.vertices) centroid += v;
    centroid /= n;

    std::vector<int> ids;
    ids.reserve(static_cast<std::size_t>(k));
    ids.push_back(nearest_vertex(mesh, centroid));

    std::vector<double> min_d2(static_cast<std::size_t>(n));
    for (int v = 0; v < n; ++v) {
        min_d2[static_cast<std::size_t>(v)] =
            (mesh.vertices[static_cast<std::size_t>(v)] - mesh.vertices[static_cast<std::size_t>(ids[0])])
                .squaredNorm();
    }
    while (static_cast<int>(ids.size()) < k) {
        int best = -1;
        double best_d2 = -1.0;
        for (int v = 0; v < n; ++v) {
            if (min_d2[static_cast<std::size_t>(v)] > best_d2) {
                best = v;
                best_d2 = min_d2[static_cast<std::size_t>(v)];
            }
        }
        ids.push_back(best);
        for (int v = 0; v < n; ++v) {
            const double d2 =
                (mesh.vertices[static_cast<std::size_t>(v)] - mesh.vertices[static_cast<std::size_t>(best)])
                    .squaredNorm();
            min_d2[static_cast<std::size_t>(v)] = std::min(min_d2[static_cast<std::size_t>(v)], d2);
        }
    }
    return ids;
}

KernelSpec initial_st_kernel(const SensorTraining& training, int sm_components, double sample_period,
                             std::uint64_t seed) {
    if (sm_components < 1) throw ParamError("initial_st_kernel: sm_components must be >= 1");
    const Eigen::Index n = training.targets.size();
    if (n < 2) throw ParamError("initial_st_kernel: need at least two training points");

    const double var_y = std::max(
        1e-8, (training.targets.array() - training.targets.mean()).square().sum() / static_cast<double>(n));

    std::array<KernelSpec, 3> spatial;
    for (int d = 0; d < 3; ++d) {
        const auto col = training.inputs.col(d);
        const double sd = std::sqrt((col.array() - col.mean()).square().sum() / static_cast<double>(n));
        const double l = std::max(sd, 1e-3);
        // Per-axis variance near 1 so the product's scale lives in the
        // temporal term.
        spatial[d] = KernelSpec::sum({KernelSpec::rq_ard({l}, 1.0, 0.5), KernelSpec::matern52(l, 0.5)});
    }

    const auto tcol = training.inputs.col(3);
    const double t_lo = tcol.minCoeff(), t_hi = tcol.maxCoeff();
    const double span = std::max(t_hi - t_lo, sample_period);
    Rng rng(derive_seed(seed, 0));
    KernelSpec sm = spectral_mixture_init(sm_components, sample_period, span, var_y, rng);

    // The raw time coordinate is large in ms, so a unit-slope linear term
    // would dwarf everything else; start it shallow and centered.
    const double t_center = 0.5 * (t_lo + t_hi);
    const double max_sq = std::max({(t_lo - t_center) * (t_lo - t_center),
                                    (t_hi - t_center) * (t_hi - t_center), 1.0});
    KernelSpec temporal = KernelSpec::sum(
        {std::move(sm), KernelSpec::white_noise(1e-4), KernelSpec::linear(0.01 * var_y / max_sq, t_center)});

    return st_kernel(spatial, temporal);
}

namespace {

int auto_stride(int t_n, int leads, int cap) {
    int stride = 1;
    while (stride < t_n) {
        const int points = leads * ((t_n + stride - 1) / stride);
        if (points <= cap) break;
        ++stride;
    }
    return stride;
}

} // namespace

SensorSet select_sensors(const BspmDataset& dataset, const TriMesh& mesh,
                         const LandmarkSequence& landmarks, const PlacementConfig& config) {
    const int l_n = dataset.n_leads();
    if (l_n != mesh.n_vertices()) {
        throw ParamError("select_sensors: dataset has " + std::to_string(l_n) + " leads but the mesh has " +
                         std::to_string(mesh.n_vertices()) + " vertices");
    }
    if (config.n_init < 1 || config.target <= config.n_init) {
        throw ParamError("select_sensors: need 1 <= n_init < target");
    }
    if (config.target > l_n) {
        throw ParamError("select_sensors: target " + std::to_string(config.target) + " exceeds " +
                         std::to_string(l_n) + " leads");
    }
    if (config.per_iter < 1 || config.per_iter > config.slice_size) {
        throw ParamError("select_sensors: need 1 <= per_iter <= slice_size");
    }
    if ((config.target - config.n_init) % config.per_iter != 0) {
        throw ParamError("select_sensors: target - n_init = " +
                         std::to_string(config.target - config.n_init) + " not divisible by per_iter = " +
                         std::to_string(config.per_iter));
    }
    if (config.fit_budget < 1 || config.fit_points_cap < 2) {
        throw ParamError("select_sensors: fit_budget and fit_points_cap must be positive");
    }

    SensorSet out;
    out.ids = lhd_init(mesh, config.n_init, config.seed);
    out.provenance.assign(out.ids.size(), "init");

    std::set<int> selected(out.ids.begin(), out.ids.end());
    std::size_t cursor = 0; // next unconsumed landmark rank

    const int n_iters = (config.target - config.n_init) / config.per_iter;
    KernelSpec warm_kernel;
    double warm_noise = 0.0;
    bool have_warm = false;

    for (int iter = 0; iter < n_iters; ++iter) {
        // Consume the next slice_size landmark ids that are not yet selected.
        std::vector<int> slice;
        while (static_cast<int>(slice.size()) < config.slice_size &&
               cursor < landmarks.indices.size()) {
            const int id = landmarks.indices[cursor++];
            if (!selected.count(id)) slice.push_back(id);
        }
        if (static_cast<int>(slice.size()) < config.slice_size) {
            throw ParamError("select_sensors: landmark sequence exhausted at iteration " +
                             std::to_string(iter + 1) + " (" + std::to_string(slice.size()) + " of " +
                             std::to_string(config.slice_size) +
                             " test ids available); the sequence cannot exceed the vertex count");
        }

        const FieldObservations obs = observe(dataset, out.ids);
        const int stride = config.time_stride > 0
                               ? config.time_stride
                               : auto_stride(dataset.n_samples(), static_cast<int>(out.ids.size()),
                                             config.fit_points_cap);
        const SensorTraining tr = build_training(obs, stride);

        GpModel fitted = [&] {
            try {
                const double sp = dataset.sample_period * stride;
                KernelSpec k0 = have_warm ? warm_kernel
                                          : initial_st_kernel(tr, config.sm_components, sp,
                                                              derive_seed(config.seed, 1));
                const double var_y = std::max(
                    1e-8, (tr.targets.array() - tr.targets.mean()).square().sum() / tr.targets.size());
                const double noise0 = have_warm ? warm_noise : std::max(1e-6, 0.05 * var_y);
                GpModel base = make_gp(tr.inputs, tr.targets, std::move(k0), noise0);
                if (have_warm && !config.refit_each_iter) return base;
                FitOptions fopt;
                fopt.budget = config.fit_budget;
                fopt.n_restarts = config.fit_restarts;
                fopt.seed = derive_seed(config.seed, 16 + static_cast<std::uint64_t>(iter));
                return fit_hyperparameters(base, fopt);
            } catch (const NumericalError& e) {
                throw NumericalError("select_sensors: iteration " + std::to_string(iter + 1) + ": " +
                                     e.what());
            }
        }();
        warm_kernel = fitted.kernel;
        warm_noise = fitted.noise_var;
        have_warm = true;

        // Predict every slice lead over the strided grid and rank by summed
        // absolute error; ties keep the earlier landmark rank.
        IterationDiag diag;
        diag.tested = slice;
        diag.kernel = fitted.kernel;
        diag.noise_var = fitted.noise_var;
        diag.lml = log_marginal_likelihood(fitted);
        diag.time_stride = stride;
        diag.fit_points = static_cast<int>(tr.targets.size());

        const int t_used = (dataset.n_samples() + stride - 1) / stride;
        Eigen::MatrixXd queries(t_used, 4);
        diag.errors.reserve(slice.size());
        for (int lead : slice) {
            int qr = 0;
            for (int r = 0; r < dataset.n_samples(); r += stride, ++qr) {
                queries(qr, 0) = dataset.lead_coords(lead, 0);
                queries(qr, 1) = dataset.lead_coords(lead, 1);
                queries(qr, 2) = dataset.lead_coords(lead, 2);
                queries(qr, 3) = dataset.time_of(r);
            }
            const Eigen::VectorXd pred = gp_predict_mean(fitted, queries);
            double err = 0.0;
            int qr2 = 0;
            for (int r = 0; r < dataset.n_samples(); r += stride, ++qr2) {
                err += std::abs(dataset.potentials(r, lead) - (pred[qr2] + tr.mean_offset));
            }
            diag.errors.push_back(err);
        }

        std::vector<std::size_t> order(slice.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return diag.errors[a] > diag.errors[b];
        });
        for (int p = 0; p < config.per_iter; ++p) {
            const int id = slice[order[static_cast<std::size_t>(p)]];
            diag.selected.push_back(id);
            out.ids.push_back(id);
            out.provenance.push_back("iteration " + std::to_string(iter + 1));
            selected.insert(id);
        }
        out.iterations.push_back(std::move(diag));
    }

    out.kernel = warm_kernel;
    out.noise_var = warm_noise;
    return out;
}

} // namespace bspm
