#pragma once

#include "bspm/dataset.hpp"
#include "bspm/mesh.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace bspm {

/// Torso-like test surface: an elliptic tube whose radius swells toward the
/// middle and tapers toward the openings, so both curvatures are nonzero
/// everywhere. 22 vertices around x 16 rings = 352 by default. The tube is
/// open at top and bottom (boundary rings).
TriMesh make_torso_mesh(int n_around = 22, int n_rings = 16);

/// One moving Gaussian blob. Its center travels a circle of the given radius
/// in the plane spanned by (axis_u, axis_w); the temporal envelope is either
/// a sharp Gaussian pulse (the depolarization stand-in) or a slow raised
/// sinusoid in [0, 1].
struct SynthSource {
    double amplitude = 1.0; // mV, may be negative
    double sigma = 1.0;     // spatial width, length units
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    Eigen::Vector3d axis_u = Eigen::Vector3d::UnitX();
    Eigen::Vector3d axis_w = Eigen::Vector3d::UnitY();
    double radius = 1.0;
    double theta0 = 0.0; // rad
    double omega = 0.0;  // rad/ms
    bool pulse = false;
    double t_pulse = 0.0; // ms, pulse center
    double tau = 1.0;     // ms, pulse width
    double freq = 0.0;    // cycles/ms, background envelope
    double phase = 0.0;   // rad
};

struct SynthModel {
    std::vector<SynthSource> sources;
    double sample_period = 1.0; // ms
    int n_samples = 0;
    double noise_sd = 0.0; // mV
};

struct SynthSpec {
    int n_sources = 3;
    double duration_ms = 300.0;
    double noise_sd = 0.0;     // mV
    double sample_period = 1.0; // ms
};

/// Draws source geometry and envelopes from the seed. The first source is
/// always the pulse. Fully determined by (mesh bounding box, spec, seed).
SynthModel make_synth_model(const TriMesh& mesh, const SynthSpec& spec, std::uint64_t seed);

/// Noiseless field value sum_s a_s exp(-|x - p_s(t)|^2 / sigma_s^2) g_s(t).
double synth_field(const SynthModel& model, const Eigen::Vector3d& x, double t);

/// Renders the model at every (vertex, sample) and adds N(0, noise_sd^2)
/// noise drawn from a child seed. Lead coords are the mesh vertices.
BspmDataset synth_generate(const TriMesh& mesh, const SynthSpec& spec, std::uint64_t seed);

} // namespace bspm
