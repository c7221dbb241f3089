#pragma once

#include <Eigen/Core>

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace bspm {

/// Body-surface potential recording: one column per lead, one row per time
/// sample, lead order matching the mesh vertex order it was measured on.
struct BspmDataset {
    Eigen::MatrixXd lead_coords; // L x 3, same length units as the mesh
    Eigen::MatrixXd potentials;  // T x L, mV
    double sample_period = 1.0;  // ms between consecutive rows
    double start_ms = 0.0;       // timestamp of row 0
    std::string subject_id;

    int n_leads() const { return static_cast<int>(potentials.cols()); }
    int n_samples() const { return static_cast<int>(potentials.rows()); }
    double time_of(int row) const { return start_ms + sample_period * row; }
    double duration_ms() const { return sample_period * n_samples(); }
};

/// Loads a potentials CSV (header "t_ms,lead_0,...") and a coords CSV
/// (header "lead,x,y,z", rows in lead order). Validates rectangular shape,
/// finite values, a uniform time grid, and matching lead counts. Errors name
/// the file and line.
BspmDataset load_dataset(const std::string& potentials_path, const std::string& coords_path);

/// In-memory variant for tests and generated data.
BspmDataset load_dataset_from_strings(const std::string& potentials_csv, const std::string& coords_csv,
                                      const std::string& potentials_origin = "<potentials>",
                                      const std::string& coords_origin = "<coords>");

/// The half-open window [t0, t1) of the dominant depolarization-like burst:
/// per-lead means are removed, the across-lead RMS envelope is formed, and
/// the window is the contiguous run of samples >= 20% of the envelope peak
/// that contains the peak. Throws DataError when the peak is not above the
/// noise floor (peak < 2x median envelope) or not positive.
std::pair<double, double> detect_qrs_window(const BspmDataset& dataset);

/// Restricts the recording to a time window. An explicit window keeps rows
/// with t0 <= t < t1 and must be non-empty and inside the recording; when
/// absent, detect_qrs_window chooses it.
BspmDataset qrs_extract(const BspmDataset& dataset,
                        std::optional<std::pair<double, double>> window = std::nullopt);

} // namespace bspm
