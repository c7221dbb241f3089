#pragma once

#include "bspm/mesh.hpp"

#include <Eigen/Core>

#include <vector>

namespace bspm {

struct GplmkConfig {
    double lambda = 0.5;  // mixing weight between the two curvature terms
    double rho = 1.0;     // curvature magnitude exponent
    double bandwidth = 0.0; // heat kernel bandwidth t, length^2; must be > 0
    int n_landmarks = 1;
    double jitter = 1e-10;
};

/// Greedy landmark order with the posterior-variance score recorded at each
/// selection. Scores are non-increasing when unseeded.
struct LandmarkSequence {
    std::vector<int> indices;
    std::vector<double> scores;
};

/// Curvature-driven vertex weights
///   w_i = lambda |K_i|^rho / sum_k |K_k|^rho v_k
///       + (1 - lambda) |eta_i|^rho / sum_k |eta_k|^rho v_k
/// so that sum_i w_i v_i = 1. A zero denominator on an active term means the
/// surface carries no curvature signal; that raises FlatGeometryError and the
/// caller may substitute uniform weights.
std::vector<double> gplmk_weights(const std::vector<VertexGeometry>& geometry, const GplmkConfig& config);

/// Reweighted heat kernel K^w = Kh' diag(w_k v_k) Kh, with Kh the heat kernel
/// at half the target bandwidth. Symmetric PSD whenever w, v >= 0.
Eigen::MatrixXd reweighted_kernel(const HeatKernelMatrix& heat_half, const std::vector<double>& weights,
                                  const std::vector<double>& areas);

/// Sequential maximum-uncertainty selection on a PSD kernel: each step picks
/// the vertex with the largest posterior variance given the landmarks chosen
/// so far (ties to the lowest index), tracked with an incrementally extended
/// Cholesky factor. Seeds condition the posterior but do not appear in the
/// output. Throws NumericalError naming the failing pivot if the kernel is
/// not PSD beyond the configured jitter.
LandmarkSequence gplmk_sequence(const Eigen::MatrixXd& kernel, const GplmkConfig& config,
                                const std::vector<int>& seed_indices = {});

} // namespace bspm
