#pragma once

#include "bspm/dataset.hpp"
#include "bspm/kernels.hpp"
#include "bspm/lagp.hpp"
#include "bspm/metrics.hpp"

#include <Eigen/Core>

#include <vector>

namespace bspm {

/// What reconstruction is allowed to see: coordinates of every lead, the
/// time grid, and potentials of the sensor leads only. Building one of these
/// is the only way to feed reconstruct_field, which keeps validation-lead
/// potentials out of reach by construction.
struct FieldObservations {
    Eigen::MatrixXd lead_coords;       // L x 3, all leads
    std::vector<double> times;         // ms, ascending
    Eigen::MatrixXd sensor_potentials; // T x S, column i belongs to sensor_ids[i]
    std::vector<int> sensor_ids;       // distinct, each < L
};

FieldObservations observe(const BspmDataset& dataset, const std::vector<int>& sensor_ids);

/// Sensor observations flattened to GP training rows (x, y, z, t), lead
/// major, optionally strided in time. Targets are centered by one global
/// mean over all training rows; anything lead-specific would not transfer
/// to the unobserved leads the GP exists to predict. mean_offset is that
/// mean, added back to every prediction.
struct SensorTraining {
    Eigen::MatrixXd inputs;  // (S * ceil(T/stride)) x 4
    Eigen::VectorXd targets; // centered mV
    std::vector<int> sensor_ids;
    double mean_offset = 0.0;
    int time_stride = 1;
};

SensorTraining build_training(const FieldObservations& obs, int time_stride = 1);

struct ReconstructionResult {
    std::vector<int> leads;   // predicted lead ids, ascending
    Eigen::MatrixXd predicted; // T x |leads|, mV (offsets restored)
    Eigen::MatrixXd variance;  // T x |leads|, mV^2
};

/// laGP reconstruction of the given leads (default: every non-sensor lead)
/// over the full observation time grid. Queries run lead major, time
/// ascending inside each lead.
ReconstructionResult reconstruct_field(const FieldObservations& obs, const KernelSpec& kernel,
                                       double noise_var, const LagpConfig& config,
                                       const std::vector<int>& leads = {});

/// Scores a reconstruction against the full dataset (the only place
/// validation potentials meet predictions).
Metrics score_reconstruction(const BspmDataset& dataset, const ReconstructionResult& recon);

} // namespace bspm
