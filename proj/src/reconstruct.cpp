#include "bspm/reconstruct.hpp"

#include "bspm/errors.hpp"

#include <algorithm>
#include <set>
#include <string>

namespace bspm {

FieldObservations observe(const BspmDataset& dataset, const std::vector<int>& sensor_ids) {
    if (sensor_ids.empty()) throw ParamError("observe: no sensor leads");
    std::set<int> seen;
    for (int id : sensor_ids) {
        if (id < 0 || id >= dataset.n_leads()) {
            throw ParamError("observe: sensor lead " + std::to_string(id) + " out of range (L=" +
                             std::to_string(dataset.n_leads()) + ")");
        }
        if (!seen.insert(id).second) throw ParamError("observe: duplicate sensor lead " + std::to_string(id));
    }

    FieldObservations obs;
    obs.lead_coords = dataset.lead_coords;
    obs.times.reserve(static_cast<std::size_t>(dataset.n_samples()));
    for (int r = 0; r < dataset.n_samples(); ++r) obs.times.push_back(dataset.time_of(r));
    obs.sensor_ids = sensor_ids;
    obs.sensor_potentials.resize(dataset.n_samples(), static_cast<Eigen::Index>(sensor_ids.size()));
    for (std::size_t i = 0; i < sensor_ids.size(); ++i) {
        obs.sensor_potentials.col(static_cast<Eigen::Index>(i)) = dataset.potentials.col(sensor_ids[i]);
    }
    return obs;
}

SensorTraining build_training(const FieldObservations& obs, int time_stride) {
    if (time_stride < 1) throw ParamError("build_training: time_stride must be >= 1");
    const int t_n = static_cast<int>(obs.times.size());
    const int s_n = static_cast<int>(obs.sensor_ids.size());
    if (t_n == 0 || s_n == 0) throw ParamError("build_training: empty observations");

    const int t_used = (t_n + time_stride - 1) / time_stride;

    SensorTraining tr;
    tr.sensor_ids = obs.sensor_ids;
    tr.time_stride = time_stride;
    tr.inputs.resize(static_cast<Eigen::Index>(s_n) * t_used, 4);
    tr.targets.resize(static_cast<Eigen::Index>(s_n) * t_used);

    Eigen::Index row = 0;
    for (int s = 0; s < s_n; ++s) {
        const auto& xyz = obs.lead_coords.row(obs.sensor_ids[static_cast<std::size_t>(s)]);
        for (int r = 0; r < t_n; r += time_stride, ++row) {
            tr.inputs(row, 0) = xyz[0];
            tr.inputs(row, 1) = xyz[1];
            tr.inputs(row, 2) = xyz[2];
            tr.inputs(row, 3) = obs.times[static_cast<std::size_t>(r)];
            tr.targets[row] = obs.sensor_potentials(r, s);
        }
    }
    tr.mean_offset = tr.targets.mean();
    tr.targets.array() -= tr.mean_offset;
    return tr;
}

ReconstructionResult reconstruct_field(const FieldObservations& obs, const KernelSpec& kernel,
                                       double noise_var, const LagpConfig& config,
                                       const std::vector<int>& leads) {
    const int l_n = static_cast<int>(obs.lead_coords.rows());
    const int t_n = static_cast<int>(obs.times.size());

    std::vector<int> targets = leads;
    if (targets.empty()) {
        std::set<int> sensors(obs.sensor_ids.begin(), obs.sensor_ids.end());
        for (int l = 0; l < l_n; ++l) {
            if (!sensors.count(l)) targets.push_back(l);
        }
    } else {
        for (int l : targets) {
            if (l < 0 || l >= l_n) {
                throw ParamError("reconstruct_field: lead " + std::to_string(l) + " out of range");
            }
        }
    }
    if (targets.empty()) throw ParamError("reconstruct_field: nothing to predict");

    const SensorTraining tr = build_training(obs, 1);

    ReconstructionResult out;
    out.leads = targets;
    out.predicted.resize(t_n, static_cast<Eigen::Index>(targets.size()));
    out.variance.resize(t_n, static_cast<Eigen::Index>(targets.size()));

    Eigen::MatrixXd queries(t_n, 4);
    for (std::size_t li = 0; li < targets.size(); ++li) {
        const auto& xyz = obs.lead_coords.row(targets[li]);
        for (int r = 0; r < t_n; ++r) {
            queries(r, 0) = xyz[0];
            queries(r, 1) = xyz[1];
            queries(r, 2) = xyz[2];
            queries(r, 3) = obs.times[static_cast<std::size_t>(r)];
        }
        const auto designs = lagp_batch(queries, tr.inputs, tr.targets, kernel, noise_var, config);
        for (int r = 0; r < t_n; ++r) {
            out.predicted(r, static_cast<Eigen::Index>(li)) = designs[static_cast<std::size_t>(r)].mean + tr.mean_offset;
            out.variance(r, static_cast<Eigen::Index>(li)) = designs[static_cast<std::size_t>(r)].variance;
        }
    }
    return out;
}

Metrics score_reconstruction(const BspmDataset& dataset, const ReconstructionResult& recon) {
    if (recon.predicted.rows() != dataset.n_samples()) {
        throw ParamError("score_reconstruction: " + std::to_string(recon.predicted.rows()) +
                         " predicted samples vs " + std::to_string(dataset.n_samples()) + " in the dataset");
    }
    Eigen::MatrixXd actual(dataset.n_samples(), static_cast<Eigen::Index>(recon.leads.size()));
    for (std::size_t li = 0; li < recon.leads.size(); ++li) {
        const int lead = recon.leads[li];
        if (lead < 0 || lead >= dataset.n_leads()) {
            throw ParamError("score_reconstruction: lead " + std::to_string(lead) + " out of range");
        }
        actual.col(static_cast<Eigen::Index>(li)) = dataset.potentials.col(lead);
    }
    return compute_metrics(actual, recon.predicted);
}

} // namespace bspm
