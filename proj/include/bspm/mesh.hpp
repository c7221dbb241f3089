#pragma once

#include <Eigen/Core>

#include <array>
#include <string>
#include <vector>

namespace bspm {

/// Triangulated surface. Vertices are 3D points in the dataset's length
/// units; faces are CCW vertex-index triples.
struct TriMesh {
    std::vector<Eigen::Vector3d> vertices;
    std::vector<std::array<int, 3>> faces;

    int n_vertices() const { return static_cast<int>(vertices.size()); }
    int n_faces() const { return static_cast<int>(faces.size()); }

    /// Number of distinct undirected edges.
    std::size_t n_edges() const;

    /// V - E + F.
    long euler_characteristic() const;
};

/// Per-vertex discrete geometry. gauss_k is the angle-deficit Gaussian
/// curvature, mean_eta = k1 + k2 is the (unsigned) cotangent mean-curvature
/// magnitude. k1 >= k2 are recovered from (gauss_k, mean_eta) with the
/// discriminant clamped at zero, so k1*k2 == min(gauss_k, (mean_eta/2)^2).
struct VertexGeometry {
    double area = 0.0;     // length^2, barycentric share
    double gauss_k = 0.0;  // length^-2
    double mean_eta = 0.0; // length^-1, magnitude only
    double k1 = 0.0;
    double k2 = 0.0;
};

/// Dense squared-exponential kernel exp(-|xi - xj|^2 / t) on vertex
/// coordinates. Symmetric, unit diagonal, PSD up to roundoff.
struct HeatKernelMatrix {
    Eigen::MatrixXd entries;
    double bandwidth = 0.0; // t, length^2
};

/// Loads an OFF mesh: "OFF" header, "<nv> <nf> <ne>" counts, nv coordinate
/// lines, nf "3 i j k" lines. '#' comments and blank lines are skipped.
/// Throws DataError naming the offending line on parse/validation failure.
TriMesh load_mesh(const std::string& path);

/// Same parser over in-memory text; `origin` labels error messages.
TriMesh load_mesh_from_string(const std::string& text, const std::string& origin = "<memory>");

/// Shared validation: face indices in range, no degenerate faces
/// (area <= 1e-12), no duplicate vertices within 1e-9.
void validate_mesh(const TriMesh& mesh, const std::string& origin = "<mesh>");

/// Barycentric vertex areas: one third of each incident face's area.
std::vector<double> vertex_areas(const TriMesh& mesh);

/// Angle-deficit Gaussian curvature and cotangent mean-curvature magnitude
/// per vertex. Boundary vertices use pi as the flat angle reference.
/// Throws DataError for vertices with no incident face.
std::vector<VertexGeometry> curvatures(const TriMesh& mesh, const std::vector<double>& areas);

/// Heat kernel at bandwidth t > 0. Throws ParamError for t <= 0.
HeatKernelMatrix heat_kernel(const TriMesh& mesh, double t);

double total_surface_area(const TriMesh& mesh);

/// Median of squared pairwise vertex distances; the default GPLMK bandwidth.
double median_squared_pairwise_distance(const TriMesh& mesh);

/// Serializes to OFF text that load_mesh_from_string round-trips exactly.
std::string mesh_to_off(const TriMesh& mesh);

} // namespace bspm
