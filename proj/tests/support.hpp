// Shared fixtures for the test suites: small analytic meshes and a
// from-scratch dense GP oracle that deliberately avoids the library's
// cached-factor code paths.
#pragma once

#include "bspm/kernels.hpp"
#include "bspm/mesh.hpp"
#include "bspm/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <utility>
#include <vector>

namespace testsupport {

inline bspm::TriMesh make_equilateral_triangle() {
    bspm::TriMesh m;
    m.vertices = {{0.0, 0.0, 0.0}, {1.0, 0.0, 0.0}, {0.5, std::sqrt(3.0) / 2.0, 0.0}};
    m.faces = {{0, 1, 2}};
    return m;
}

inline bspm::TriMesh make_tetrahedron() {
    bspm::TriMesh m;
    m.vertices = {{0.0, 0.0, 0.0},
                  {1.0, 0.0, 0.0},
                  {0.5, std::sqrt(3.0) / 2.0, 0.0},
                  {0.5, std::sqrt(3.0) / 6.0, std::sqrt(6.0) / 3.0}};
    m.faces = {{0, 1, 2}, {0, 3, 1}, {1, 3, 2}, {0, 2, 3}};
    return m;
}

inline bspm::TriMesh make_flat_grid(int nx, int ny, double spacing) {
    bspm::TriMesh m;
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            m.vertices.emplace_back(i * spacing, j * spacing, 0.0);
        }
    }
    auto vid = [nx](int i, int j) { return j * nx + i; };
    for (int j = 0; j + 1 < ny; ++j) {
        for (int i = 0; i + 1 < nx; ++i) {
            m.faces.push_back({vid(i, j), vid(i + 1, j), vid(i, j + 1)});
            m.faces.push_back({vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)});
        }
    }
    return m;
}

// Open tube (no caps); side vertices have k1 = 1/radius, k2 = 0.
inline bspm::TriMesh make_open_cylinder(int n_around, int n_rings, double radius, double height) {
    bspm::TriMesh m;
    for (int r = 0; r < n_rings; ++r) {
        const double z = height * r / (n_rings - 1);
        for (int j = 0; j < n_around; ++j) {
            const double a = 2.0 * M_PI * j / n_around;
            m.vertices.emplace_back(radius * std::cos(a), radius * std::sin(a), z);
        }
    }
    auto vid = [n_around](int r, int j) { return r * n_around + (j % n_around); };
    for (int r = 0; r + 1 < n_rings; ++r) {
        for (int j = 0; j < n_around; ++j) {
            m.faces.push_back({vid(r, j), vid(r, j + 1), vid(r + 1, j)});
            m.faces.push_back({vid(r, j + 1), vid(r + 1, j + 1), vid(r + 1, j)});
        }
    }
    return m;
}

// Icosahedron subdivided `subdivisions` times, vertices projected to the unit
// sphere. 2 subdivisions = 162 vertices.
inline bspm::TriMesh make_icosphere(int subdivisions) {
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Eigen::Vector3d> verts = {
        {-1, phi, 0}, {1, phi, 0},   {-1, -phi, 0}, {1, -phi, 0}, {0, -1, phi},  {0, 1, phi},
        {0, -1, -phi}, {0, 1, -phi}, {phi, 0, -1},  {phi, 0, 1},  {-phi, 0, -1}, {-phi, 0, 1}};
    for (auto& v : verts) v.normalize();
    std::vector<std::array<int, 3>> faces = {
        {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9},  {5, 11, 4},
        {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6},  {3, 6, 8},
        {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
    for (int s = 0; s < subdivisions; ++s) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            const auto key = std::minmax(a, b);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            Eigen::Vector3d v = (verts[a] + verts[b]).normalized();
            verts.push_back(v);
            const int id = static_cast<int>(verts.size()) - 1;
            midpoint[key] = id;
            return id;
        };
        std::vector<std::array<int, 3>> next;
        next.reserve(faces.size() * 4);
        for (const auto& f : faces) {
            const int ab = mid(f[0], f[1]);
            const int bc = mid(f[1], f[2]);
            const int ca = mid(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        faces = std::move(next);
    }
    bspm::TriMesh m;
    m.vertices = std::move(verts);
    m.faces = std::move(faces);
    return m;
}

inline Eigen::MatrixXd random_matrix(bspm::Rng& rng, int rows, int cols, double lo, double hi) {
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) m(r, c) = rng.uniform(lo, hi);
    }
    return m;
}

inline Eigen::VectorXd random_vector(bspm::Rng& rng, int n, double lo, double hi) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = rng.uniform(lo, hi);
    return v;
}

struct DensePosterior {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

// From-scratch GP posterior: explicit inverse via full-pivot LU, no cached
// factor, no jitter. Independent of the library's Cholesky path.
inline DensePosterior dense_posterior(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                      const bspm::KernelSpec& kernel, double noise_var,
                                      const Eigen::MatrixXd& xs) {
    const long n = x.rows();
    Eigen::MatrixXd kn = bspm::kernel_eval(kernel, x, x);
    kn += noise_var * Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd kinv = kn.fullPivLu().solve(Eigen::MatrixXd::Identity(n, n));
    const Eigen::MatrixXd ks = bspm::kernel_eval(kernel, xs, x);
    const Eigen::MatrixXd kss = bspm::kernel_eval(kernel, xs, xs);
    DensePosterior out;
    out.mean = ks * kinv * y;
    out.cov = kss - ks * kinv * ks.transpose();
    return out;
}

inline double dense_lml(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                        const bspm::KernelSpec& kernel, double noise_var) {
    const long n = x.rows();
    Eigen::MatrixXd kn = bspm::kernel_eval(kernel, x, x);
    kn += noise_var * Eigen::MatrixXd::Identity(n, n);
    const Eigen::VectorXd alpha = kn.fullPivLu().solve(y);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(kn, Eigen::EigenvaluesOnly);
    const double logdet = es.eigenvalues().array().log().sum();
    return -0.5 * y.dot(alpha) - 0.5 * logdet -
           0.5 * static_cast<double>(n) * std::log(2.0 * M_PI);
}

inline double min_eigenvalue(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

inline double median_of(std::vector<double> v) {
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    return v[mid];
}

// Spatiotemporal composite in the production shape: per-axis Sum(RQ, Matern52)
// products times a temporal Sum(SpectralMixture, WhiteNoise, Linear) on dim 3.
inline bspm::KernelSpec example_st_kernel(int q_components = 3) {
    using K = bspm::KernelSpec;
    auto axis = [](double l) {
        return K::sum({K::rq_ard({l}, 1.0, 0.5), K::matern52(l, 0.5)});
    };
    std::vector<double> w, mu, v;
    for (int i = 0; i < q_components; ++i) {
        w.push_back(0.4 / (1 + i));
        mu.push_back(0.03 + 0.07 * i);
        v.push_back(0.002 + 0.001 * i);
    }
    const K temporal =
        K::sum({K::spectral_mixture(w, mu, v), K::white_noise(1e-4), K::linear(0.01, 5.0)});
    return bspm::st_kernel({axis(1.2), axis(0.8), axis(2.0)}, temporal);
}

} // namespace testsupport
