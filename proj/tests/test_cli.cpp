#include <doctest.h>

#include <json.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

extern std::string g_cli_path;

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output; // stdout + stderr
};

RunResult run_cli(const std::string& args, const fs::path& scratch) {
    const fs::path log = scratch / "last_run.log";
    const std::string cmd = g_cli_path + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    RunResult r;
    if (WIFEXITED(status)) r.exit_code = WEXITSTATUS(status);
    std::ifstream in(log);
    std::ostringstream buf;
    buf << in.rdbuf();
    r.output = buf.str();
    return r;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

long count_lines(const std::string& text) {
    long n = 0;
    for (char c : text) {
        if (c == '\n') ++n;
    }
    return n;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path p =
        fs::temp_directory_path() / ("bspm_cli_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// One synthetic dataset plus select/baseline outputs, built on first use and
// shared by the dependent cases below.
struct Workspace {
    fs::path root = fresh_dir("shared");
    fs::path data = root / "data";
    fs::path select = root / "select";
    fs::path baseline = root / "baseline";
    std::string mesh, potentials, coords, config;
    int synth_code = -1, select_code = -1, baseline_code = -1;

    Workspace() {
        config = (root / "cfg.json").string();
        std::ofstream(config) << R"({
          "n_init": 6, "slice_size": 12, "per_iter": 2, "target": 10,
          "time_stride": 4, "fit_budget": 6, "fit_restarts": 1,
          "sm_components": 3, "lagp_n0": 4, "lagp_n_end": 20, "lagp_n_cand": 40,
          "seed": 11
        })";

        synth_code = run_cli("synth --seed 9 --duration 40 --noise-sd 0.02 --n-around 10 --n-rings 6 "
                             "--out-dir " + data.string(),
                             root)
                         .exit_code;
        mesh = (data / "mesh.off").string();
        potentials = (data / "potentials.csv").string();
        coords = (data / "coords.csv").string();

        select_code = run_cli("select --mesh " + mesh + " --potentials " + potentials + " --coords " +
                                  coords + " --config " + config + " --out-dir " + select.string(),
                              root)
                          .exit_code;
        baseline_code = run_cli("baseline --mesh " + mesh + " --count 10 --out-dir " +
                                    baseline.string(),
                                root)
                            .exit_code;
    }
};

const Workspace& shared() {
    static Workspace ws;
    return ws;
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("synth is reproducible byte for byte under one seed") {
    const auto dir = fresh_dir("synth_repro");
    const std::string flags = "--duration 30 --noise-sd 0.05 --n-around 8 --n-rings 5 --out-dir ";
    const auto a = run_cli("synth --seed 7 " + flags + (dir / "a").string(), dir);
    const auto b = run_cli("synth --seed 7 " + flags + (dir / "b").string(), dir);
    REQUIRE(a.exit_code == 0);
    REQUIRE(b.exit_code == 0);
    for (const char* name : {"potentials.csv", "coords.csv", "mesh.off"}) {
        CHECK(slurp(dir / "a" / name) == slurp(dir / "b" / name));
    }

    const auto c = run_cli("synth --seed 8 " + flags + (dir / "c").string(), dir);
    REQUIRE(c.exit_code == 0);
    CHECK(slurp(dir / "a" / "potentials.csv") != slurp(dir / "c" / "potentials.csv"));

    // a config-file seed and the flag agree; the flag wins over the config
    std::ofstream(dir / "seed7.json") << R"({"seed": 7})";
    const auto d = run_cli("synth --config " + (dir / "seed7.json").string() + " " + flags +
                               (dir / "d").string(),
                           dir);
    REQUIRE(d.exit_code == 0);
    CHECK(slurp(dir / "a" / "potentials.csv") == slurp(dir / "d" / "potentials.csv"));
}

TEST_CASE("landmark writes a ranked vertex listing") {
    const auto& ws = shared();
    REQUIRE(ws.synth_code == 0);
    const auto dir = fresh_dir("landmark");
    const auto r = run_cli("landmark --mesh " + ws.mesh + " --count 12 --out-dir " + dir.string(), dir);
    REQUIRE(r.exit_code == 0);

    const std::string csv = slurp(dir / "landmarks.csv");
    CHECK(count_lines(csv) == 13);
    CHECK(csv.rfind("rank,vertex_id,score\n", 0) == 0);

    std::istringstream lines(csv);
    std::string line;
    std::getline(lines, line); // header
    std::set<int> ids;
    int rank = 0;
    while (std::getline(lines, line)) {
        std::istringstream cells(line);
        std::string r_s, id_s, score_s;
        std::getline(cells, r_s, ',');
        std::getline(cells, id_s, ',');
        std::getline(cells, score_s, ',');
        CHECK(std::stoi(r_s) == rank++);
        const int id = std::stoi(id_s);
        CHECK(id >= 0);
        CHECK(id < 60);
        CHECK(ids.insert(id).second);
        CHECK(std::stod(score_s) >= 0.0);
    }
    CHECK(rank == 12);
}

TEST_CASE("select produces a full sensor bundle") {
    const auto& ws = shared();
    REQUIRE(ws.select_code == 0);

    const json sj = json::parse(slurp(ws.select / "sensors.json"));
    CHECK(sj["method"] == "gplmk");
    REQUIRE(sj["ids"].size() == 10);
    std::set<int> distinct;
    for (const auto& v : sj["ids"]) distinct.insert(v.get<int>());
    CHECK(distinct.size() == 10);
    REQUIRE(sj["provenance"].size() == 10);
    for (int i = 0; i < 6; ++i) CHECK(sj["provenance"][i] == "init");
    CHECK(sj["provenance"][9] == "iteration 2");
    CHECK(sj["iterations"].size() == 2);
    CHECK(sj["kernel"].is_object());
    CHECK(sj["noise_var"].is_number());
    CHECK(sj["config"]["target"] == 10);
    CHECK(sj["tool_version"].is_string());

    CHECK(count_lines(slurp(ws.select / "sensors.csv")) == 11);
    CHECK(json::parse(slurp(ws.select / "kernel.json")).contains("noise_var"));
    CHECK(count_lines(slurp(ws.select / "landmarks.csv")) >= 2);
}

TEST_CASE("baseline produces a uniform sensor set") {
    const auto& ws = shared();
    REQUIRE(ws.baseline_code == 0);
    const json bj = json::parse(slurp(ws.baseline / "baseline.json"));
    CHECK(bj["method"] == "uniform");
    REQUIRE(bj["ids"].size() == 10);
    std::set<int> distinct;
    for (const auto& v : bj["ids"]) distinct.insert(v.get<int>());
    CHECK(distinct.size() == 10);
    CHECK(count_lines(slurp(ws.baseline / "baseline.csv")) == 11);
}

TEST_CASE("evaluate writes a complete report without predictions") {
    const auto& ws = shared();
    REQUIRE(ws.select_code == 0);
    const auto dir = fresh_dir("evaluate");
    const auto r = run_cli("evaluate --potentials " + ws.potentials + " --coords " + ws.coords +
                               " --sensors " + (ws.select / "sensors.json").string() +
                               " --config " + ws.config + " --segment full --out-dir " + dir.string(),
                           dir);
    REQUIRE(r.exit_code == 0);
    CHECK_FALSE(fs::exists(dir / "predictions.csv"));

    const json report = json::parse(slurp(dir / "report.json"));
    CHECK(report["method"] == "gplmk");
    CHECK(report["segment"]["kind"] == "full");
    CHECK(report["segment"]["t0_ms"] == 0.0);
    CHECK(report["segment"]["t1_ms"] == 40.0);
    CHECK(report["r2_percent"].is_number());
    CHECK(report["r2_percent"].get<double>() <= 100.0);
    CHECK(report["mae_mv"].get<double>() >= 0.0);
    CHECK(report["n_validation"] == 50);
    CHECK(report["n_values"] == 50 * 40);
    CHECK(report["per_lead"].size() == 50);
    CHECK(report["per_lead"][0].contains("lead"));
    CHECK(report["per_lead"][0].contains("mae_mv"));
    CHECK(report["n_sensors"] == 10);
    CHECK(report["units"]["potential"] == "mV");
    CHECK(report["units"]["time"] == "ms");
    CHECK(report["config"]["lagp_n_end"] == 20);
    CHECK(report["tool_version"].is_string());
}

TEST_CASE("reconstruct writes predictions for every validation lead and sample") {
    const auto& ws = shared();
    REQUIRE(ws.baseline_code == 0);
    REQUIRE(ws.select_code == 0);
    const auto dir = fresh_dir("reconstruct");
    const auto r = run_cli("reconstruct --potentials " + ws.potentials + " --coords " + ws.coords +
                               " --sensors " + (ws.baseline / "baseline.json").string() + " --kernel " +
                               (ws.select / "kernel.json").string() + " --config " + ws.config +
                               " --segment full --out-dir " + dir.string(),
                           dir);
    REQUIRE(r.exit_code == 0);

    const std::string csv = slurp(dir / "predictions.csv");
    CHECK(csv.rfind("query_index,x,y,z,t,mean_mv,var_mv2\n", 0) == 0);
    CHECK(count_lines(csv) == 1 + 50 * 40);

    const json report = json::parse(slurp(dir / "report.json"));
    CHECK(report["method"] == "uniform");
    CHECK(report["n_validation"] == 50);
}

TEST_CASE("frames exports one row per sample and lead, window via config") {
    const auto& ws = shared();
    REQUIRE(ws.synth_code == 0);
    const auto dir = fresh_dir("frames");

    const auto full = run_cli("frames --potentials " + ws.potentials + " --coords " + ws.coords +
                                  " --out-dir " + (dir / "full").string(),
                              dir);
    REQUIRE(full.exit_code == 0);
    const std::string full_csv = slurp(dir / "full" / "frames.csv");
    CHECK(full_csv.rfind("t_ms,lead,potential_mv\n", 0) == 0);
    CHECK(count_lines(full_csv) == 1 + 40 * 60);

    std::ofstream(dir / "win.json") << R"({"qrs_window": [10, 30]})";
    const auto qrs = run_cli("frames --potentials " + ws.potentials + " --coords " + ws.coords +
                                 " --segment qrs --config " + (dir / "win.json").string() +
                                 " --out-dir " + (dir / "qrs").string(),
                             dir);
    REQUIRE(qrs.exit_code == 0);
    CHECK(count_lines(slurp(dir / "qrs" / "frames.csv")) == 1 + 20 * 60);
}

TEST_CASE("exit codes: usage errors are 1, data errors are 2") {
    const auto& ws = shared();
    const auto dir = fresh_dir("exit_codes");

    CHECK(run_cli("", dir).exit_code == 1);                        // missing subcommand
    CHECK(run_cli("bogus-subcommand", dir).exit_code == 1);        // unknown subcommand
    CHECK(run_cli("synth --no-such-flag", dir).exit_code == 1);    // unknown flag
    CHECK(run_cli("select --mesh " + ws.mesh, dir).exit_code == 1); // missing required options

    std::ofstream(dir / "bad_key.json") << R"({"bogus": 1})";
    const auto bad_key = run_cli("baseline --mesh " + ws.mesh + " --config " +
                                     (dir / "bad_key.json").string() + " --out-dir " + dir.string(),
                                 dir);
    CHECK(bad_key.exit_code == 1);
    CHECK(bad_key.output.find("unknown key 'bogus'") != std::string::npos);

    std::ofstream(dir / "bad_type.json") << R"({"n_init": "ten"})";
    CHECK(run_cli("baseline --mesh " + ws.mesh + " --config " + (dir / "bad_type.json").string() +
                      " --out-dir " + dir.string(),
                  dir)
              .exit_code == 1);

    // data errors: missing files and malformed content
    CHECK(run_cli("landmark --mesh " + (dir / "nope.off").string() + " --out-dir " + dir.string(), dir)
              .exit_code == 2);
    std::ofstream(dir / "broken.off") << "not an OFF file\n";
    CHECK(run_cli("landmark --mesh " + (dir / "broken.off").string() + " --out-dir " + dir.string(),
                  dir)
              .exit_code == 2);
    CHECK(run_cli("baseline --mesh " + ws.mesh + " --config " + (dir / "nope.json").string() +
                      " --out-dir " + dir.string(),
                  dir)
              .exit_code == 2);
}

TEST_CASE("reconstruct rejects sensor ids beyond the lead count with exit 2") {
    const auto& ws = shared();
    REQUIRE(ws.synth_code == 0);
    const auto dir = fresh_dir("bad_sensors");

    std::ofstream(dir / "bad_ids.json") << R"({"method": "uniform", "ids": [0, 1, 2, 600]})";
    const auto r = run_cli("reconstruct --potentials " + ws.potentials + " --coords " + ws.coords +
                               " --sensors " + (dir / "bad_ids.json").string() + " --segment full" +
                               " --out-dir " + dir.string(),
                           dir);
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("out of range") != std::string::npos);

    std::ofstream(dir / "not_ints.json") << R"({"ids": [0, 1.5]})";
    CHECK(run_cli("evaluate --potentials " + ws.potentials + " --coords " + ws.coords + " --sensors " +
                      (dir / "not_ints.json").string() + " --segment full --out-dir " + dir.string(),
                  dir)
              .exit_code == 2);
}

} // TEST_SUITE
