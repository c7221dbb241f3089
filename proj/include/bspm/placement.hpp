#pragma once

#include "bspm/dataset.hpp"
#include "bspm/gp.hpp"
#include "bspm/gplmk.hpp"
#include "bspm/mesh.hpp"
#include "bspm/reconstruct.hpp"
#include "bspm/rng.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

namespace bspm {

struct PlacementConfig {
    int n_init = 10;
    int slice_size = 40;
    int per_iter = 5;
    int target = 30;
    int time_stride = 0;        // samples; 0 = auto (smallest stride within fit_points_cap)
    int fit_points_cap = 4000;  // ceiling for the auto stride
    bool refit_each_iter = true; // warm-started refit per iteration vs one fit up front
    int fit_budget = 40;        // marginal-likelihood evaluations per fit
    int fit_restarts = 5;
    int sm_components = 12;
    std::uint64_t seed = 0;
};

/// One selection iteration's bookkeeping: the tested landmark slice, its
/// summed absolute prediction errors in slice order, the chosen ids, and the
/// hyperparameters used.
struct IterationDiag {
    std::vector<int> tested;
    std::vector<double> errors;
    std::vector<int> selected;
    KernelSpec kernel;
    double noise_var = 0.0;
    double lml = 0.0;
    int time_stride = 1;
    int fit_points = 0;
};

struct SensorSet {
    std::vector<int> ids;                // selection order: n_init init picks, then per-iteration adds
    std::vector<std::string> provenance; // "init" or "iteration <k>"
    std::vector<IterationDiag> iterations;
    KernelSpec kernel; // last fitted kernel, reusable for reconstruction
    double noise_var = 0.0;
};

/// Latin-hypercube draw in an axis-aligned box: each axis is cut into n
/// strata, one sample lands in every stratum per axis, and a random
/// permutation pairs strata across axes. Rows are points.
Eigen::MatrixXd lhd_points(const Eigen::Vector3d& lo, const Eigen::Vector3d& hi, int n, Rng& rng);

/// LHD over the mesh bounding box, each point snapped to its nearest vertex.
/// Collisions redraw the whole design, up to 100 attempts, then raise a
/// DataError suggesting the farthest-point baseline instead.
std::vector<int> lhd_init(const TriMesh& mesh, int n, std::uint64_t seed);

/// Farthest-point sampling from the centroid-nearest vertex; ties to the
/// lowest index. Deterministic spread-maximizing stand-in for a uniform
/// layout.
std::vector<int> uniform_baseline(const TriMesh& mesh, int k);

/// The sequential selection loop: LHD init, then per iteration fit a
/// spatiotemporal GP on the selected leads (strided time grid), predict the
/// next slice_size unconsumed landmarks, and adopt the per_iter worst
/// predicted. Landmarks already selected are skipped and consumed. Stops at
/// `target` leads.
SensorSet select_sensors(const BspmDataset& dataset, const TriMesh& mesh,
                         const LandmarkSequence& landmarks, const PlacementConfig& config);

/// The Eq. 12-style separable kernel this pipeline starts its fits from:
/// per-axis RQ + Matern-5/2 sums and an SM + white-noise + linear temporal
/// term, scales seeded from the data.
KernelSpec initial_st_kernel(const SensorTraining& training, int sm_components, double sample_period,
                             std::uint64_t seed);

} // namespace bspm
