#include "bspm/synth.hpp"

#include "bspm/errors.hpp"
#include "bspm/rng.hpp"

#include <cmath>
#include <string>

namespace bspm {

namespace {

constexpr double kPi = 3.1415926535897932384626433832795;
constexpr double kTwoPi = 2.0 * kPi;

} // namespace

TriMesh make_torso_mesh(int n_around, int n_rings) {
    if (n_around < 3 || n_rings < 2) {
        throw ParamError("make_torso_mesh: need n_around >= 3 and n_rings >= 2");
    }

    // Chest-like proportions in mm. The sin(pi s) bulge keeps Gaussian and
    // mean curvature nonzero away from a measure-zero set, which the
    // curvature-driven landmark weights need.
    const double height = 400.0;
    const double semi_x = 165.0;
    const double semi_y = 120.0;

    TriMesh mesh;
    mesh.vertices.reserve(static_cast<std::size_t>(n_around) * n_rings);
    for (int r = 0; r < n_rings; ++r) {
        const double s = static_cast<double>(r) / (n_rings - 1);
        const double z = height * (s - 0.5);
        const double swell = 1.0 + 0.25 * std::sin(kPi * s);
        for (int j = 0; j < n_around; ++j) {
            const double theta = kTwoPi * j / n_around;
            mesh.vertices.emplace_back(semi_x * swell * std::cos(theta), semi_y * swell * std::sin(theta),
                                       z);
        }
    }

    mesh.faces.reserve(static_cast<std::size_t>(2 * n_around) * (n_rings - 1));
    auto vid = [&](int r, int j) { return r * n_around + (j % n_around); };
    for (int r = 0; r + 1 < n_rings; ++r) {
        for (int j = 0; j < n_around; ++j) {
            mesh.faces.push_back({vid(r, j), vid(r, j + 1), vid(r + 1, j + 1)});
            mesh.faces.push_back({vid(r, j), vid(r + 1, j + 1), vid(r + 1, j)});
        }
    }
    return mesh;
}

SynthModel make_synth_model(const TriMesh& mesh, const SynthSpec& spec, std::uint64_t seed) {
    if (spec.n_sources < 1) throw ParamError("synth: n_sources must be >= 1");
    if (!(spec.duration_ms >= 10.0)) throw ParamError("synth: duration must be >= 10 ms");
    if (!(spec.sample_period > 0.0)) throw ParamError("synth: sample_period must be > 0");
    if (!(spec.noise_sd >= 0.0)) throw ParamError("synth: noise_sd must be >= 0");
    if (mesh.vertices.empty()) throw ParamError("synth: empty mesh");

    Eigen::Vector3d lo = mesh.vertices[0], hi = mesh.vertices[0];
    for (const auto& v : mesh.vertices) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
    const Eigen::Vector3d center0 = 0.5 * (lo + hi);
    const Eigen::Vector3d ext = hi - lo;
    const double lateral = 0.25 * (ext.x() + ext.y()); // mean lateral semi-extent

    Rng rng(derive_seed(seed, 0));
    auto random_unit = [&]() {
        while (true) {
            Eigen::Vector3d v(rng.normal(), rng.normal(), rng.normal());
            const double n = v.norm();
            if (n > 1e-9) return Eigen::Vector3d(v / n);
        }
    };

    SynthModel model;
    model.sample_period = spec.sample_period;
    model.n_samples = static_cast<int>(std::llround(spec.duration_ms / spec.sample_period));
    model.noise_sd = spec.noise_sd;
    model.sources.reserve(static_cast<std::size_t>(spec.n_sources));

    for (int s = 0; s < spec.n_sources; ++s) {
        SynthSource src;
        src.pulse = s == 0;
        if (src.pulse) {
            src.amplitude = 2.5;
        } else {
            src.amplitude = rng.uniform(0.3, 0.6) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
        }
        // the pulse is a broad dominant event (its spike drives QRS detection);
        // background sources stay narrow so the field keeps localized spatial
        // structure, the way real surface potentials concentrate near the
        // precordium
        src.sigma = (src.pulse ? rng.uniform(0.5, 0.7) : rng.uniform(0.2, 0.35)) * lateral;
        for (int d = 0; d < 3; ++d) src.center[d] = center0[d] + rng.uniform(-0.15, 0.15) * ext[d];
        src.radius = rng.uniform(0.5, 0.8) * lateral;

        src.axis_u = random_unit();
        while (true) {
            Eigen::Vector3d v = random_unit();
            Eigen::Vector3d w = v - v.dot(src.axis_u) * src.axis_u;
            const double n = w.norm();
            if (n > 1e-6) {
                src.axis_w = w / n;
                break;
            }
        }

        src.theta0 = rng.uniform(0.0, kTwoPi);
        src.omega = kTwoPi * rng.uniform(0.15, 0.45) / spec.duration_ms;
        if (src.pulse) {
            src.t_pulse = rng.uniform(0.4, 0.6) * spec.duration_ms;
            src.tau = rng.uniform(0.025, 0.04) * spec.duration_ms;
        } else {
            src.freq = rng.uniform(0.5, 1.5) / spec.duration_ms;
            src.phase = rng.uniform(0.0, kTwoPi);
        }
        model.sources.push_back(src);
    }
    return model;
}

double synth_field(const SynthModel& model, const Eigen::Vector3d& x, double t) {
    double value = 0.0;
    for (const auto& s : model.sources) {
        const double theta = s.theta0 + s.omega * t;
        const Eigen::Vector3d p =
            s.center + s.radius * (std::cos(theta) * s.axis_u + std::sin(theta) * s.axis_w);
        const double envelope = s.pulse
                                    ? std::exp(-(t - s.t_pulse) * (t - s.t_pulse) / (2.0 * s.tau * s.tau))
                                    : 0.5 * (1.0 + std::sin(kTwoPi * s.freq * t + s.phase));
        value += s.amplitude * std::exp(-(x - p).squaredNorm() / (s.sigma * s.sigma)) * envelope;
    }
    return value;
}

BspmDataset synth_generate(const TriMesh& mesh, const SynthSpec& spec, std::uint64_t seed) {
    const SynthModel model = make_synth_model(mesh, spec, seed);
    const int n_leads = mesh.n_vertices();

    BspmDataset d;
    d.subject_id = "synthetic";
    d.sample_period = model.sample_period;
    d.start_ms = 0.0;
    d.lead_coords.resize(n_leads, 3);
    for (int l = 0; l < n_leads; ++l) d.lead_coords.row(l) = mesh.vertices[static_cast<std::size_t>(l)];

    Rng noise(derive_seed(seed, 1));
    d.potentials.resize(model.n_samples, n_leads);
    for (int r = 0; r < model.n_samples; ++r) {
        const double t = model.sample_period * r;
        for (int l = 0; l < n_leads; ++l) {
            double v = synth_field(model, mesh.vertices[static_cast<std::size_t>(l)], t);
            if (model.noise_sd > 0.0) v += model.noise_sd * noise.normal();
            d.potentials(r, l) = v;
        }
    }
    return d;
}

} // namespace bspm
