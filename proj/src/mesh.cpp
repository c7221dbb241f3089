#include "bspm/mesh.hpp"

#include "bspm/errors.hpp"
#include "bspm/io.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <utility>

namespace bspm {

namespace {

constexpr double kDegenerateFaceArea = 1e-12;
constexpr double kDuplicateVertexTol = 1e-9;
constexpr double kPi = 3.14159265358979323846;

double face_area(const TriMesh& mesh, const std::array<int, 3>& f) {
    const Eigen::Vector3d& a = mesh.vertices[f[0]];
    const Eigen::Vector3d& b = mesh.vertices[f[1]];
    const Eigen::Vector3d& c = mesh.vertices[f[2]];
    return 0.5 * (b - a).cross(c - a).norm();
}

// Reads the next non-comment token stream line.
bool next_content_line(std::istream& in, std::string& line, int& line_no) {
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        bool blank = true;
        for (char c : line) {
            if (!std::isspace(static_cast<unsigned char>(c))) {
                blank = false;
                break;
            }
        }
        if (!blank) return true;
    }
    return false;
}

} // namespace

std::size_t TriMesh::n_edges() const {
    std::set<std::pair<int, int>> edges;
    for (const auto& f : faces) {
        for (int e = 0; e < 3; ++e) {
            int a = f[e], b = f[(e + 1) % 3];
            if (a > b) std::swap(a, b);
            edges.emplace(a, b);
        }
    }
    return edges.size();
}

long TriMesh::euler_characteristic() const {
    return static_cast<long>(n_vertices()) - static_cast<long>(n_edges()) + static_cast<long>(n_faces());
}

void validate_mesh(const TriMesh& mesh, const std::string& origin) {
    const int nv = mesh.n_vertices();
    for (std::size_t fi = 0; fi < mesh.faces.size(); ++fi) {
        const auto& f = mesh.faces[fi];
        for (int k = 0; k < 3; ++k) {
            if (f[k] < 0 || f[k] >= nv) {
                throw DataError(origin + ": face " + std::to_string(fi) + " index out of range: " +
                                std::to_string(f[k]) + " not in [0, " + std::to_string(nv) + ")");
            }
        }
        if (face_area(mesh, f) <= kDegenerateFaceArea) {
            throw DataError(origin + ": face " + std::to_string(fi) + " is degenerate (area <= 1e-12)");
        }
    }

    // Duplicate detection: sort by x, scan the window where x differs <= tol.
    std::vector<int> order(mesh.vertices.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return mesh.vertices[a].x() < mesh.vertices[b].x(); });
    for (std::size_t i = 0; i < order.size(); ++i) {
        for (std::size_t j = i + 1; j < order.size(); ++j) {
            const Eigen::Vector3d& a = mesh.vertices[order[i]];
            const Eigen::Vector3d& b = mesh.vertices[order[j]];
            if (b.x() - a.x() > kDuplicateVertexTol) break;
            if ((a - b).cwiseAbs().maxCoeff() <= kDuplicateVertexTol) {
                throw DataError(origin + ": duplicate vertices " + std::to_string(order[i]) + " and " +
                                std::to_string(order[j]) + " (within 1e-9)");
            }
        }
    }
}

TriMesh load_mesh_from_string(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;

    if (!next_content_line(in, line, line_no)) throw DataError(origin + ": empty file");
    {
        std::istringstream ls(line);
        std::string magic;
        ls >> magic;
        if (magic != "OFF") {
            throw DataError(origin + ": line " + std::to_string(line_no) + ": expected OFF header, got '" +
                            magic + "'");
        }
    }

    if (!next_content_line(in, line, line_no)) throw DataError(origin + ": missing counts line");
    long nv = 0, nf = 0, ne = 0;
    {
        std::istringstream ls(line);
        if (!(ls >> nv >> nf >> ne) || nv < 0 || nf < 0) {
            throw DataError(origin + ": line " + std::to_string(line_no) + ": bad counts line '" + line + "'");
        }
    }

    TriMesh mesh;
    mesh.vertices.reserve(static_cast<std::size_t>(nv));
    for (long i = 0; i < nv; ++i) {
        if (!next_content_line(in, line, line_no)) {
            throw DataError(origin + ": unexpected end of file reading vertex " + std::to_string(i));
        }
        std::istringstream ls(line);
        double x, y, z;
        if (!(ls >> x >> y >> z)) {
            throw DataError(origin + ": line " + std::to_string(line_no) + ": bad vertex line '" + line + "'");
        }
        if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z)) {
            throw DataError(origin + ": line " + std::to_string(line_no) + ": non-finite vertex coordinate");
        }
        mesh.vertices.emplace_back(x, y, z);
    }

    mesh.faces.reserve(static_cast<std::size_t>(nf));
    for (long i = 0; i < nf; ++i) {
        if (!next_content_line(in, line, line_no)) {
            throw DataError(origin + ": unexpected end of file reading face " + std::to_string(i));
        }
        std::istringstream ls(line);
        long arity, a, b, c;
        if (!(ls >> arity)) {
            throw DataError(origin + ": line " + std::to_string(line_no) + ": bad face line '" + line + "'");
        }
        if (arity != 3) {
            throw DataError(origin + ": line " + std::to_string(line_no) + ": only triangular faces supported, got " +
                            std::to_string(arity) + " vertices");
        }
        if (!(ls >> a >> b >> c)) {
            throw DataError(origin + ": line " + std::to_string(line_no) + ": bad face line '" + line + "'");
        }
        mesh.faces.push_back({static_cast<int>(a), static_cast<int>(b), static_cast<int>(c)});
    }

    validate_mesh(mesh, origin);
    return mesh;
}

TriMesh load_mesh(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open mesh file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_mesh_from_string(ss.str(), path);
}

std::vector<double> vertex_areas(const TriMesh& mesh) {
    std::vector<double> areas(mesh.vertices.size(), 0.0);
    for (const auto& f : mesh.faces) {
        const double third = face_area(mesh, f) / 3.0;
        areas[f[0]] += third;
        areas[f[1]] += third;
        areas[f[2]] += third;
    }
    return areas;
}

double total_surface_area(const TriMesh& mesh) {
    double total = 0.0;
    for (const auto& f : mesh.faces) total += face_area(mesh, f);
    return total;
}

std::vector<VertexGeometry> curvatures(const TriMesh& mesh, const std::vector<double>& areas) {
    const int nv = mesh.n_vertices();
    if (static_cast<int>(areas.size()) != nv) throw ParamError("curvatures: areas size mismatch");

    std::vector<double> angle_sum(nv, 0.0);
    std::vector<Eigen::Vector3d> cot_sum(nv, Eigen::Vector3d::Zero());
    std::vector<int> incident(nv, 0);

    // Boundary detection: count each undirected edge's face incidence.
    std::set<std::pair<int, int>> seen_once;
    std::set<std::pair<int, int>> seen_more;
    auto edge_key = [](int a, int b) {
        if (a > b) std::swap(a, b);
        return std::make_pair(a, b);
    };

    for (const auto& f : mesh.faces) {
        const Eigen::Vector3d& p0 = mesh.vertices[f[0]];
        const Eigen::Vector3d& p1 = mesh.vertices[f[1]];
        const Eigen::Vector3d& p2 = mesh.vertices[f[2]];
        const Eigen::Vector3d p[3] = {p0, p1, p2};

        for (int k = 0; k < 3; ++k) {
            const int i = f[k], j = f[(k + 1) % 3], l = f[(k + 2) % 3];
            const Eigen::Vector3d u = p[(k + 1) % 3] - p[k];
            const Eigen::Vector3d v = p[(k + 2) % 3] - p[k];
            const double cross_norm = u.cross(v).norm();
            const double dot = u.dot(v);
            angle_sum[i] += std::atan2(cross_norm, dot);
            ++incident[i];

            // cot of the angle at vertex k, opposite edge (j, l)
            const double cot = dot / std::max(cross_norm, 1e-300);
            cot_sum[j] += cot * (mesh.vertices[j] - mesh.vertices[l]);
            cot_sum[l] += cot * (mesh.vertices[l] - mesh.vertices[j]);

            const auto key = edge_key(i, j);
            if (seen_once.count(key)) {
                seen_once.erase(key);
                seen_more.insert(key);
            } else if (!seen_more.count(key)) {
                seen_once.insert(key);
            }
        }
    }

    std::vector<bool> boundary(nv, false);
    for (const auto& e : seen_once) {
        boundary[e.first] = true;
        boundary[e.second] = true;
    }

    std::vector<VertexGeometry> geom(nv);
    for (int i = 0; i < nv; ++i) {
        if (incident[i] == 0) {
            throw DataError("curvatures: vertex " + std::to_string(i) + " has no incident face");
        }
        const double area = areas[i];
        VertexGeometry g;
        g.area = area;
        const double flat_ref = boundary[i] ? kPi : 2.0 * kPi;
        g.gauss_k = (flat_ref - angle_sum[i]) / area;
        // eta = k1 + k2 = |sum_j (cot a + cot b)(x_i - x_j)| / (2 A_i)
        g.mean_eta = cot_sum[i].norm() / (2.0 * area);
        const double half_eta = 0.5 * g.mean_eta;
        const double disc = std::max(half_eta * half_eta - g.gauss_k, 0.0);
        const double root = std::sqrt(disc);
        g.k1 = half_eta + root;
        g.k2 = half_eta - root;
        geom[i] = g;
    }
    return geom;
}

HeatKernelMatrix heat_kernel(const TriMesh& mesh, double t) {
    if (!(t > 0.0)) throw ParamError("heat_kernel: bandwidth t must be > 0, got " + std::to_string(t));
    const int nv = mesh.n_vertices();
    HeatKernelMatrix hk;
    hk.bandwidth = t;
    hk.entries.resize(nv, nv);
    for (int i = 0; i < nv; ++i) {
        hk.entries(i, i) = 1.0;
        for (int j = i + 1; j < nv; ++j) {
            const double d2 = (mesh.vertices[i] - mesh.vertices[j]).squaredNorm();
            const double v = std::exp(-d2 / t);
            hk.entries(i, j) = v;
            hk.entries(j, i) = v;
        }
    }
    return hk;
}

double median_squared_pairwise_distance(const TriMesh& mesh) {
    const int nv = mesh.n_vertices();
    if (nv < 2) throw ParamError("median_squared_pairwise_distance: need at least 2 vertices");
    std::vector<double> d2;
    d2.reserve(static_cast<std::size_t>(nv) * (nv - 1) / 2);
    for (int i = 0; i < nv; ++i) {
        for (int j = i + 1; j < nv; ++j) {
            d2.push_back((mesh.vertices[i] - mesh.vertices[j]).squaredNorm());
        }
    }
    const std::size_t mid = d2.size() / 2;
    std::nth_element(d2.begin(), d2.begin() + mid, d2.end());
    return d2[mid];
}

std::string mesh_to_off(const TriMesh& mesh) {
    std::string out = "OFF\n";
    out += std::to_string(mesh.n_vertices());
    out += ' ';
    out += std::to_string(mesh.n_faces());
    out += " 0\n";
    for (const auto& v : mesh.vertices) {
        out += format_double(v.x());
        out += ' ';
        out += format_double(v.y());
        out += ' ';
        out += format_double(v.z());
        out += '\n';
    }
    for (const auto& f : mesh.faces) {
        out += "3 " + std::to_string(f[0]) + ' ' + std::to_string(f[1]) + ' ' + std::to_string(f[2]) + '\n';
    }
    return out;
}

} // namespace bspm
