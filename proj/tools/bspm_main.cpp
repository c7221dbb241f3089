// bspm: body-surface potential mapping toolkit.
//
// Subcommands cover the full workflow: landmark ordering on a torso mesh,
// sequential sensor selection, field reconstruction at unsampled leads,
// evaluation reports, a uniform-coverage baseline, synthetic data
// generation, and per-frame potential export.

#include "bspm/dataset.hpp"
#include "bspm/errors.hpp"
#include "bspm/gp.hpp"
#include "bspm/gplmk.hpp"
#include "bspm/io.hpp"
#include "bspm/kernels.hpp"
#include "bspm/lagp.hpp"
#include "bspm/mesh.hpp"
#include "bspm/metrics.hpp"
#include "bspm/placement.hpp"
#include "bspm/reconstruct.hpp"
#include "bspm/rng.hpp"
#include "bspm/synth.hpp"
#include "bspm/version.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using nlohmann::json;

struct PipelineConfig {
    int n_init = 10;
    int slice_size = 40;
    int per_iter = 5;
    int target = 30;
    double lambda = 0.5;
    double rho = 1.0;
    std::optional<double> gplmk_bandwidth_t; // unset = median squared pairwise distance
    int sm_components = 12;
    int lagp_n0 = 6;
    int lagp_n_end = 50;
    int lagp_n_cand = 100;
    int time_stride = 0; // 0 = auto
    std::optional<std::pair<double, double>> qrs_window; // unset = detect
    std::uint64_t seed = 0;
    int fit_budget = 40;
    int fit_restarts = 5;
    int fit_points_cap = 4000;
    bool refit_each_iter = true;
};

template <typename T>
T expect(const json& j, const std::string& key, const char* type_name) {
    try {
        return j.get<T>();
    } catch (const json::exception&) {
        throw bspm::ParamError("config: key '" + key + "' must be " + type_name);
    }
}

PipelineConfig load_config(const std::string& path) {
    PipelineConfig cfg;
    if (path.empty()) return cfg;
    json j;
    try {
        j = json::parse(bspm::read_file(path));
    } catch (const json::exception& e) {
        throw bspm::DataError("config " + path + ": " + e.what());
    }
    if (!j.is_object()) throw bspm::DataError("config " + path + ": top level must be an object");
    for (const auto& [key, value] : j.items()) {
        if (key == "n_init") cfg.n_init = expect<int>(value, key, "an integer");
        else if (key == "slice_size") cfg.slice_size = expect<int>(value, key, "an integer");
        else if (key == "per_iter") cfg.per_iter = expect<int>(value, key, "an integer");
        else if (key == "target") cfg.target = expect<int>(value, key, "an integer");
        else if (key == "lambda") cfg.lambda = expect<double>(value, key, "a number");
        else if (key == "rho") cfg.rho = expect<double>(value, key, "a number");
        else if (key == "gplmk_bandwidth_t") {
            if (value.is_null()) cfg.gplmk_bandwidth_t.reset();
            else cfg.gplmk_bandwidth_t = expect<double>(value, key, "a number or null");
        } else if (key == "sm_components") cfg.sm_components = expect<int>(value, key, "an integer");
        else if (key == "lagp_n0") cfg.lagp_n0 = expect<int>(value, key, "an integer");
        else if (key == "lagp_n_end") cfg.lagp_n_end = expect<int>(value, key, "an integer");
        else if (key == "lagp_n_cand") cfg.lagp_n_cand = expect<int>(value, key, "an integer");
        else if (key == "time_stride") {
            if (value.is_null()) cfg.time_stride = 0;
            else cfg.time_stride = expect<int>(value, key, "an integer or null");
        } else if (key == "qrs_window") {
            if (value.is_null()) {
                cfg.qrs_window.reset();
            } else {
                if (!value.is_array() || value.size() != 2) {
                    throw bspm::ParamError("config: key 'qrs_window' must be null or [t0_ms, t1_ms]");
                }
                cfg.qrs_window = {expect<double>(value[0], key, "a number"),
                                  expect<double>(value[1], key, "a number")};
            }
        } else if (key == "seed") cfg.seed = expect<std::uint64_t>(value, key, "a non-negative integer");
        else if (key == "fit_budget") cfg.fit_budget = expect<int>(value, key, "an integer");
        else if (key == "fit_restarts") cfg.fit_restarts = expect<int>(value, key, "an integer");
        else if (key == "fit_points_cap") cfg.fit_points_cap = expect<int>(value, key, "an integer");
        else if (key == "refit_each_iter") cfg.refit_each_iter = expect<bool>(value, key, "a boolean");
        else throw bspm::ParamError("config: unknown key '" + key + "'");
    }
    return cfg;
}

json config_to_json(const PipelineConfig& cfg) {
    json j;
    j["n_init"] = cfg.n_init;
    j["slice_size"] = cfg.slice_size;
    j["per_iter"] = cfg.per_iter;
    j["target"] = cfg.target;
    j["lambda"] = cfg.lambda;
    j["rho"] = cfg.rho;
    j["gplmk_bandwidth_t"] = cfg.gplmk_bandwidth_t ? json(*cfg.gplmk_bandwidth_t) : json(nullptr);
    j["sm_components"] = cfg.sm_components;
    j["lagp_n0"] = cfg.lagp_n0;
    j["lagp_n_end"] = cfg.lagp_n_end;
    j["lagp_n_cand"] = cfg.lagp_n_cand;
    j["time_stride"] = cfg.time_stride > 0 ? json(cfg.time_stride) : json(nullptr);
    j["qrs_window"] = cfg.qrs_window ? json{cfg.qrs_window->first, cfg.qrs_window->second} : json(nullptr);
    j["seed"] = cfg.seed;
    j["fit_budget"] = cfg.fit_budget;
    j["fit_restarts"] = cfg.fit_restarts;
    j["fit_points_cap"] = cfg.fit_points_cap;
    j["refit_each_iter"] = cfg.refit_each_iter;
    return j;
}

bspm::LagpConfig lagp_config(const PipelineConfig& cfg) {
    bspm::LagpConfig lc;
    lc.n0 = cfg.lagp_n0;
    lc.n_end = cfg.lagp_n_end;
    lc.n_cand = cfg.lagp_n_cand;
    return lc;
}

std::string out_path(const std::string& out_dir, const std::string& name) {
    return (std::filesystem::path(out_dir) / name).string();
}

void write_json(const std::string& path, const json& j) {
    bspm::atomic_write_file(path, j.dump(2) + "\n");
}

// ---- CSV serialization ----------------------------------------------------

std::string potentials_to_csv(const bspm::BspmDataset& ds) {
    std::string out = "t_ms";
    for (int l = 0; l < ds.n_leads(); ++l) out += ",lead_" + std::to_string(l);
    out += '\n';
    for (int r = 0; r < ds.n_samples(); ++r) {
        out += bspm::format_double(ds.time_of(r));
        for (int l = 0; l < ds.n_leads(); ++l) {
            out += ',';
            out += bspm::format_double(ds.potentials(r, l));
        }
        out += '\n';
    }
    return out;
}

std::string coords_to_csv(const bspm::BspmDataset& ds) {
    std::string out = "lead,x,y,z\n";
    for (int l = 0; l < ds.n_leads(); ++l) {
        out += std::to_string(l);
        for (int c = 0; c < 3; ++c) {
            out += ',';
            out += bspm::format_double(ds.lead_coords(l, c));
        }
        out += '\n';
    }
    return out;
}

std::string landmarks_to_csv(const bspm::LandmarkSequence& seq) {
    std::string out = "rank,vertex_id,score\n";
    for (std::size_t i = 0; i < seq.indices.size(); ++i) {
        out += std::to_string(i) + ',' + std::to_string(seq.indices[i]) + ',' +
               bspm::format_double(seq.scores[i]) + '\n';
    }
    return out;
}

std::string sensors_to_csv(const std::vector<int>& ids, const std::vector<std::string>& provenance) {
    std::string out = "rank,vertex_id,provenance\n";
    for (std::size_t i = 0; i < ids.size(); ++i) {
        out += std::to_string(i) + ',' + std::to_string(ids[i]) + ',' + provenance[i] + '\n';
    }
    return out;
}

std::string predictions_to_csv(const bspm::ReconstructionResult& recon,
                               const Eigen::MatrixXd& lead_coords, const std::vector<double>& times) {
    std::string out = "query_index,x,y,z,t,mean_mv,var_mv2\n";
    long q = 0;
    for (std::size_t c = 0; c < recon.leads.size(); ++c) {
        const int lead = recon.leads[c];
        for (std::size_t r = 0; r < times.size(); ++r, ++q) {
            out += std::to_string(q);
            for (int d = 0; d < 3; ++d) {
                out += ',';
                out += bspm::format_double(lead_coords(lead, d));
            }
            out += ',';
            out += bspm::format_double(times[r]);
            out += ',';
            out += bspm::format_double(recon.predicted(static_cast<long>(r), static_cast<long>(c)));
            out += ',';
            out += bspm::format_double(recon.variance(static_cast<long>(r), static_cast<long>(c)));
            out += '\n';
        }
    }
    return out;
}

std::string frames_to_csv(const bspm::BspmDataset& ds) {
    std::string out = "t_ms,lead,potential_mv\n";
    for (int r = 0; r < ds.n_samples(); ++r) {
        const std::string t = bspm::format_double(ds.time_of(r));
        for (int l = 0; l < ds.n_leads(); ++l) {
            out += t + ',' + std::to_string(l) + ',' + bspm::format_double(ds.potentials(r, l)) + '\n';
        }
    }
    return out;
}

// ---- shared pipeline pieces ------------------------------------------------

struct LandmarkRun {
    bspm::LandmarkSequence seq;
    double bandwidth = 0.0;
    bool uniform_weights_fallback = false;
};

LandmarkRun compute_landmarks(const bspm::TriMesh& mesh, const PipelineConfig& cfg, int count) {
    LandmarkRun run;
    const auto areas = bspm::vertex_areas(mesh);
    const auto geometry = bspm::curvatures(mesh, areas);
    bspm::GplmkConfig g;
    g.lambda = cfg.lambda;
    g.rho = cfg.rho;
    g.bandwidth = cfg.gplmk_bandwidth_t ? *cfg.gplmk_bandwidth_t
                                        : bspm::median_squared_pairwise_distance(mesh);
    g.n_landmarks = count;
    run.bandwidth = g.bandwidth;
    std::vector<double> weights;
    try {
        weights = bspm::gplmk_weights(geometry, g);
    } catch (const bspm::FlatGeometryError& e) {
        std::cerr << "warning: " << e.what() << "\n";
        run.uniform_weights_fallback = true;
        const double total = bspm::total_surface_area(mesh);
        weights.assign(static_cast<std::size_t>(mesh.n_vertices()), 1.0 / total);
    }
    const auto heat_half = bspm::heat_kernel(mesh, 0.5 * g.bandwidth);
    const Eigen::MatrixXd kernel = bspm::reweighted_kernel(heat_half, weights, areas);
    run.seq = bspm::gplmk_sequence(kernel, g);
    return run;
}

int landmark_count_for_select(const bspm::TriMesh& mesh, const PipelineConfig& cfg) {
    const int nv = mesh.n_vertices();
    if (cfg.per_iter <= 0 || cfg.target < cfg.n_init || (cfg.target - cfg.n_init) % cfg.per_iter != 0) {
        return nv; // selection will reject the config with a precise message
    }
    const int n_iters = (cfg.target - cfg.n_init) / cfg.per_iter;
    const long generous = static_cast<long>(cfg.n_init) + cfg.target +
                          static_cast<long>(n_iters) * cfg.slice_size;
    return static_cast<int>(std::min<long>(nv, generous));
}

bspm::PlacementConfig placement_config(const PipelineConfig& cfg) {
    bspm::PlacementConfig pc;
    pc.n_init = cfg.n_init;
    pc.slice_size = cfg.slice_size;
    pc.per_iter = cfg.per_iter;
    pc.target = cfg.target;
    pc.time_stride = cfg.time_stride;
    pc.fit_points_cap = cfg.fit_points_cap;
    pc.refit_each_iter = cfg.refit_each_iter;
    pc.fit_budget = cfg.fit_budget;
    pc.fit_restarts = cfg.fit_restarts;
    pc.sm_components = cfg.sm_components;
    pc.seed = cfg.seed;
    return pc;
}

json iteration_to_json(const bspm::IterationDiag& it) {
    json j;
    j["tested"] = it.tested;
    j["errors"] = it.errors;
    j["selected"] = it.selected;
    j["kernel"] = bspm::kernel_to_json(it.kernel);
    j["noise_var"] = it.noise_var;
    j["lml"] = it.lml;
    j["time_stride"] = it.time_stride;
    j["fit_points"] = it.fit_points;
    return j;
}

struct SegmentInfo {
    std::string kind; // "full" or "qrs"
    double t0 = 0.0;
    double t1 = 0.0;
};

bspm::BspmDataset apply_segment(const bspm::BspmDataset& ds, const std::string& segment,
                                const PipelineConfig& cfg, SegmentInfo& info) {
    if (segment == "full") {
        info = {"full", ds.start_ms, ds.start_ms + ds.duration_ms()};
        return ds;
    }
    auto window = cfg.qrs_window ? *cfg.qrs_window : bspm::detect_qrs_window(ds);
    info = {"qrs", window.first, window.second};
    return bspm::qrs_extract(ds, window);
}

// Spatio-temporal hyperparameter fit on the sensor training set; reused when
// reconstructing from a sensor list that carries no fitted kernel.
std::pair<bspm::KernelSpec, double> fit_sensor_kernel(const bspm::FieldObservations& obs,
                                                      const PipelineConfig& cfg) {
    const int t_n = static_cast<int>(obs.times.size());
    const int s_n = static_cast<int>(obs.sensor_ids.size());
    int stride = cfg.time_stride;
    if (stride <= 0) {
        stride = 1;
        while (static_cast<long>(s_n) * ((t_n + stride - 1) / stride) > cfg.fit_points_cap) ++stride;
    }
    const auto training = bspm::build_training(obs, stride);
    const double var_y = training.targets.size() > 0
                             ? training.targets.squaredNorm() / static_cast<double>(training.targets.size())
                             : 1.0;
    bspm::GpModel model = bspm::make_gp(
        training.inputs, training.targets,
        bspm::initial_st_kernel(training, cfg.sm_components,
                                obs.times.size() > 1 ? obs.times[1] - obs.times[0] : 1.0,
                                bspm::derive_seed(cfg.seed, 48)),
        std::max(1e-6, 0.05 * var_y));
    bspm::FitOptions opts;
    opts.budget = cfg.fit_budget;
    opts.n_restarts = cfg.fit_restarts;
    opts.seed = bspm::derive_seed(cfg.seed, 49);
    model = bspm::fit_hyperparameters(model, opts);
    return {model.kernel, model.noise_var};
}

// ---- subcommands ------------------------------------------------------------

struct CliArgs {
    std::string config_path;
    std::string out_dir = ".";
    std::uint64_t seed = 0;
    bool seed_given = false;

    std::string mesh_path;
    std::string potentials_path;
    std::string coords_path;
    std::string sensors_path;
    std::string kernel_path;
    std::string segment = "qrs";
    int count = 0;

    int n_sources = 3;
    double duration_ms = 300.0;
    double noise_sd = 0.0;
    double sample_period = 1.0;
    int n_around = 22;
    int n_rings = 16;
};

PipelineConfig effective_config(const CliArgs& args) {
    PipelineConfig cfg = load_config(args.config_path);
    if (args.seed_given) cfg.seed = args.seed;
    std::filesystem::create_directories(args.out_dir);
    return cfg;
}

int run_landmark(const CliArgs& args) {
    const PipelineConfig cfg = effective_config(args);
    const auto mesh = bspm::load_mesh(args.mesh_path);
    const int count = args.count > 0 ? args.count : mesh.n_vertices();
    const auto run = compute_landmarks(mesh, cfg, count);
    bspm::atomic_write_file(out_path(args.out_dir, "landmarks.csv"), landmarks_to_csv(run.seq));
    std::cout << "wrote " << out_path(args.out_dir, "landmarks.csv") << " (" << run.seq.indices.size()
              << " landmarks, bandwidth " << run.bandwidth << ")\n";
    return 0;
}

int run_select(const CliArgs& args) {
    const PipelineConfig cfg = effective_config(args);
    const auto mesh = bspm::load_mesh(args.mesh_path);
    const auto dataset = bspm::load_dataset(args.potentials_path, args.coords_path);
    const auto run = compute_landmarks(mesh, cfg, landmark_count_for_select(mesh, cfg));
    const auto sensors = bspm::select_sensors(dataset, mesh, run.seq, placement_config(cfg));

    json j;
    j["method"] = "gplmk";
    j["subject_id"] = dataset.subject_id;
    j["ids"] = sensors.ids;
    j["provenance"] = sensors.provenance;
    json iters = json::array();
    for (const auto& it : sensors.iterations) iters.push_back(iteration_to_json(it));
    j["iterations"] = iters;
    j["kernel"] = bspm::kernel_to_json(sensors.kernel);
    j["noise_var"] = sensors.noise_var;
    j["gplmk_bandwidth_t"] = run.bandwidth;
    j["uniform_weights_fallback"] = run.uniform_weights_fallback;
    j["config"] = config_to_json(cfg);
    j["tool_version"] = bspm::kToolVersion;
    write_json(out_path(args.out_dir, "sensors.json"), j);
    bspm::atomic_write_file(out_path(args.out_dir, "sensors.csv"),
                            sensors_to_csv(sensors.ids, sensors.provenance));
    bspm::atomic_write_file(out_path(args.out_dir, "landmarks.csv"), landmarks_to_csv(run.seq));

    json k;
    k["kernel"] = bspm::kernel_to_json(sensors.kernel);
    k["noise_var"] = sensors.noise_var;
    k["tool_version"] = bspm::kToolVersion;
    write_json(out_path(args.out_dir, "kernel.json"), k);

    std::cout << "selected " << sensors.ids.size() << " sensors; wrote sensors.json, sensors.csv, "
              << "kernel.json, landmarks.csv under " << args.out_dir << "\n";
    return 0;
}

int run_baseline(const CliArgs& args) {
    const PipelineConfig cfg = effective_config(args);
    const auto mesh = bspm::load_mesh(args.mesh_path);
    const int count = args.count > 0 ? args.count : cfg.target;
    const auto ids = bspm::uniform_baseline(mesh, count);
    const std::vector<std::string> provenance(ids.size(), "uniform");

    json j;
    j["method"] = "uniform";
    j["ids"] = ids;
    j["provenance"] = provenance;
    j["config"] = config_to_json(cfg);
    j["tool_version"] = bspm::kToolVersion;
    write_json(out_path(args.out_dir, "baseline.json"), j);
    bspm::atomic_write_file(out_path(args.out_dir, "baseline.csv"), sensors_to_csv(ids, provenance));
    std::cout << "wrote " << count << "-sensor uniform baseline under " << args.out_dir << "\n";
    return 0;
}

int run_reconstruct(const CliArgs& args, bool write_predictions) {
    const PipelineConfig cfg = effective_config(args);
    const auto dataset = bspm::load_dataset(args.potentials_path, args.coords_path);

    json sj;
    try {
        sj = json::parse(bspm::read_file(args.sensors_path));
    } catch (const json::exception& e) {
        throw bspm::DataError("sensors " + args.sensors_path + ": " + e.what());
    }
    if (!sj.is_object() || !sj.contains("ids") || !sj["ids"].is_array()) {
        throw bspm::DataError("sensors " + args.sensors_path + ": expected an object with an 'ids' array");
    }
    std::vector<int> ids;
    for (const auto& v : sj["ids"]) {
        if (!v.is_number_integer()) {
            throw bspm::DataError("sensors " + args.sensors_path + ": ids must be integers");
        }
        ids.push_back(v.get<int>());
    }
    const std::string method = sj.value("method", std::string("unknown"));
    for (int id : ids) {
        if (id < 0 || id >= dataset.n_leads()) {
            throw bspm::DataError("sensors " + args.sensors_path + ": lead id " + std::to_string(id) +
                                  " out of range for " + std::to_string(dataset.n_leads()) + " leads");
        }
    }

    SegmentInfo segment;
    const auto ds = apply_segment(dataset, args.segment, cfg, segment);
    const auto obs = bspm::observe(ds, ids);

    bspm::KernelSpec kernel;
    double noise_var = 0.0;
    if (!args.kernel_path.empty()) {
        json kj;
        try {
            kj = json::parse(bspm::read_file(args.kernel_path));
        } catch (const json::exception& e) {
            throw bspm::DataError("kernel " + args.kernel_path + ": " + e.what());
        }
        if (!kj.is_object() || !kj.contains("kernel") || !kj.contains("noise_var")) {
            throw bspm::DataError("kernel " + args.kernel_path +
                                  ": expected {\"kernel\": ..., \"noise_var\": ...}");
        }
        kernel = bspm::kernel_from_json(kj["kernel"]);
        noise_var = kj["noise_var"].get<double>();
    } else if (sj.contains("kernel") && !sj["kernel"].is_null()) {
        kernel = bspm::kernel_from_json(sj["kernel"]);
        noise_var = sj.value("noise_var", 0.0);
    } else {
        std::tie(kernel, noise_var) = fit_sensor_kernel(obs, cfg);
    }

    const auto recon = bspm::reconstruct_field(obs, kernel, noise_var, lagp_config(cfg));
    const auto metrics = bspm::score_reconstruction(ds, recon);

    json report;
    report["method"] = method;
    report["segment"] = {{"kind", segment.kind}, {"t0_ms", segment.t0}, {"t1_ms", segment.t1}};
    report["r2_percent"] = metrics.r2_percent;
    report["mae_mv"] = metrics.mae;
    report["n_validation"] = recon.leads.size();
    report["n_values"] = metrics.n_values;
    json per_lead = json::array();
    for (std::size_t i = 0; i < recon.leads.size(); ++i) {
        per_lead.push_back({{"lead", recon.leads[i]}, {"mae_mv", metrics.per_lead_mae[i]}});
    }
    report["per_lead"] = per_lead;
    report["n_sensors"] = ids.size();
    report["units"] = {{"potential", "mV"}, {"time", "ms"}, {"coordinates", "as-given"}};
    report["config"] = config_to_json(cfg);
    report["tool_version"] = bspm::kToolVersion;
    write_json(out_path(args.out_dir, "report.json"), report);

    if (write_predictions) {
        bspm::atomic_write_file(out_path(args.out_dir, "predictions.csv"),
                                predictions_to_csv(recon, ds.lead_coords, obs.times));
    }

    std::cout << "method " << method << ", segment " << segment.kind << " [" << segment.t0 << ", "
              << segment.t1 << ") ms: R^2 " << metrics.r2_percent << "%, MAE " << metrics.mae
              << " mV over " << recon.leads.size() << " validation leads\n";
    return 0;
}

int run_synth(const CliArgs& args) {
    const PipelineConfig cfg = effective_config(args);
    const auto mesh = bspm::make_torso_mesh(args.n_around, args.n_rings);
    bspm::SynthSpec spec;
    spec.n_sources = args.n_sources;
    spec.duration_ms = args.duration_ms;
    spec.noise_sd = args.noise_sd;
    spec.sample_period = args.sample_period;
    const auto ds = bspm::synth_generate(mesh, spec, cfg.seed);
    bspm::atomic_write_file(out_path(args.out_dir, "mesh.off"), bspm::mesh_to_off(mesh));
    bspm::atomic_write_file(out_path(args.out_dir, "potentials.csv"), potentials_to_csv(ds));
    bspm::atomic_write_file(out_path(args.out_dir, "coords.csv"), coords_to_csv(ds));
    std::cout << "wrote synthetic dataset (" << ds.n_samples() << " samples x " << ds.n_leads()
              << " leads, seed " << cfg.seed << ") under " << args.out_dir << "\n";
    return 0;
}

int run_frames(const CliArgs& args) {
    const PipelineConfig cfg = effective_config(args);
    const auto dataset = bspm::load_dataset(args.potentials_path, args.coords_path);
    SegmentInfo segment;
    const auto ds = apply_segment(dataset, args.segment, cfg, segment);
    bspm::atomic_write_file(out_path(args.out_dir, "frames.csv"), frames_to_csv(ds));
    std::cout << "wrote " << ds.n_samples() << " frames (" << segment.kind << " segment) to "
              << out_path(args.out_dir, "frames.csv") << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"body-surface potential mapping: sensor placement and field reconstruction"};
    app.require_subcommand(1);

    CliArgs args;
    app.add_option("--config", args.config_path, "pipeline configuration JSON")->group("Global");
    auto* seed_opt =
        app.add_option("--seed", args.seed, "RNG seed (overrides the config file)")->group("Global");
    app.add_option("--out-dir", args.out_dir, "output directory (created if missing)")->group("Global");

    auto add_mesh = [&](CLI::App* sub) {
        sub->add_option("--mesh", args.mesh_path, "triangular mesh, OFF format")->required();
    };
    auto add_data = [&](CLI::App* sub) {
        sub->add_option("--potentials", args.potentials_path, "potentials CSV (t_ms,lead_0,...)")
            ->required();
        sub->add_option("--coords", args.coords_path, "lead coordinates CSV (lead,x,y,z)")->required();
    };
    auto add_segment = [&](CLI::App* sub) {
        sub->add_option("--segment", args.segment, "time segment: qrs or full")
            ->check(CLI::IsMember({"qrs", "full"}))
            ->capture_default_str();
    };

    auto* landmark = app.add_subcommand("landmark", "order mesh vertices by curvature-weighted coverage");
    add_mesh(landmark);
    landmark->add_option("--count", args.count, "landmarks to emit (default: all vertices)");

    auto* select = app.add_subcommand("select", "choose sensor vertices from training potentials");
    add_mesh(select);
    add_data(select);

    auto* baseline = app.add_subcommand("baseline", "farthest-point uniform-coverage sensor set");
    add_mesh(baseline);
    baseline->add_option("--count", args.count, "sensors to place (default: config target)");

    auto* reconstruct =
        app.add_subcommand("reconstruct", "predict unsampled leads and write predictions + report");
    add_data(reconstruct);
    reconstruct->add_option("--sensors", args.sensors_path, "sensor set JSON")->required();
    reconstruct->add_option("--kernel", args.kernel_path, "fitted kernel JSON (else fit fresh)");
    add_segment(reconstruct);

    auto* evaluate = app.add_subcommand("evaluate", "score a sensor set without writing predictions");
    add_data(evaluate);
    evaluate->add_option("--sensors", args.sensors_path, "sensor set JSON")->required();
    evaluate->add_option("--kernel", args.kernel_path, "fitted kernel JSON (else fit fresh)");
    add_segment(evaluate);

    auto* synth = app.add_subcommand("synth", "generate a synthetic torso dataset");
    synth->add_option("--n-sources", args.n_sources, "moving sources")->capture_default_str();
    synth->add_option("--duration", args.duration_ms, "duration, ms")->capture_default_str();
    synth->add_option("--noise-sd", args.noise_sd, "additive noise SD, mV")->capture_default_str();
    synth->add_option("--sample-period", args.sample_period, "sample period, ms")->capture_default_str();
    synth->add_option("--n-around", args.n_around, "vertices per ring")->capture_default_str();
    synth->add_option("--n-rings", args.n_rings, "rings along the torso")->capture_default_str();

    auto* frames = app.add_subcommand("frames", "export per-sample potential maps as CSV");
    add_data(frames);
    add_segment(frames);
    for (auto* sub : {landmark, select, baseline, reconstruct, evaluate, synth, frames}) {
        sub->fallthrough();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    args.seed_given = seed_opt->count() > 0;
    // frames defaults to the full recording; reconstruct/evaluate default to the QRS window
    if (app.got_subcommand(frames) && frames->get_option("--segment")->count() == 0) {
        args.segment = "full";
    }

    try {
        if (app.got_subcommand(landmark)) return run_landmark(args);
        if (app.got_subcommand(select)) return run_select(args);
        if (app.got_subcommand(baseline)) return run_baseline(args);
        if (app.got_subcommand(reconstruct)) return run_reconstruct(args, true);
        if (app.got_subcommand(evaluate)) return run_reconstruct(args, false);
        if (app.got_subcommand(synth)) return run_synth(args);
        if (app.got_subcommand(frames)) return run_frames(args);
    } catch (const bspm::ParamError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const bspm::DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const bspm::NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const bspm::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
