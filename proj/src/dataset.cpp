#include "bspm/dataset.hpp"

#include "bspm/errors.hpp"
#include "bspm/io.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

namespace bspm {

namespace {

// Non-empty, non-comment lines with their 1-based line numbers.
std::vector<std::pair<int, std::string>> content_lines(const std::string& text) {
    std::vector<std::pair<int, std::string>> out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string trimmed = line;
        while (!trimmed.empty() && (trimmed.back() == '\r' || trimmed.back() == ' ')) trimmed.pop_back();
        if (trimmed.empty() || trimmed[0] == '#') continue;
        out.emplace_back(lineno, trimmed);
    }
    return out;
}

std::string at(const std::string& origin, int lineno) {
    return origin + ":" + std::to_string(lineno);
}

} // namespace

BspmDataset load_dataset_from_strings(const std::string& potentials_csv, const std::string& coords_csv,
                                      const std::string& potentials_origin,
                                      const std::string& coords_origin) {
    const auto pot_lines = content_lines(potentials_csv);
    if (pot_lines.size() < 3) {
        throw DataError(potentials_origin + ": need a header and at least two samples");
    }
    const auto header = split_csv_line(pot_lines[0].second);
    if (header.size() < 2 || header[0] != "t_ms") {
        throw DataError(at(potentials_origin, pot_lines[0].first) +
                        ": expected header \"t_ms,lead_0,...\"");
    }
    const int n_leads = static_cast<int>(header.size()) - 1;
    for (int l = 0; l < n_leads; ++l) {
        if (header[static_cast<std::size_t>(l) + 1] != "lead_" + std::to_string(l)) {
            throw DataError(at(potentials_origin, pot_lines[0].first) + ": column " +
                            std::to_string(l + 1) + " should be lead_" + std::to_string(l));
        }
    }

    const int n_samples = static_cast<int>(pot_lines.size()) - 1;
    BspmDataset d;
    d.potentials.resize(n_samples, n_leads);
    std::vector<double> times(static_cast<std::size_t>(n_samples));
    for (int r = 0; r < n_samples; ++r) {
        const auto& [lineno, text] = pot_lines[static_cast<std::size_t>(r) + 1];
        const auto cells = split_csv_line(text);
        if (static_cast<int>(cells.size()) != n_leads + 1) {
            throw DataError(at(potentials_origin, lineno) + ": expected " + std::to_string(n_leads + 1) +
                            " fields, got " + std::to_string(cells.size()));
        }
        times[static_cast<std::size_t>(r)] = parse_double(cells[0], at(potentials_origin, lineno) + " t_ms");
        for (int l = 0; l < n_leads; ++l) {
            d.potentials(r, l) = parse_double(cells[static_cast<std::size_t>(l) + 1],
                                              at(potentials_origin, lineno) + " lead_" + std::to_string(l));
        }
    }

    d.start_ms = times[0];
    d.sample_period = times[1] - times[0];
    if (!(d.sample_period > 0.0)) {
        throw DataError(potentials_origin + ": time column must be strictly increasing");
    }
    for (int r = 1; r < n_samples; ++r) {
        const double expected = d.start_ms + d.sample_period * r;
        if (std::abs(times[static_cast<std::size_t>(r)] - expected) >
            1e-6 * std::max(1.0, std::abs(expected))) {
            throw DataError(at(potentials_origin, pot_lines[static_cast<std::size_t>(r) + 1].first) +
                            ": non-uniform sample grid (expected t=" + std::to_string(expected) + ")");
        }
    }

    const auto coord_lines = content_lines(coords_csv);
    if (coord_lines.empty()) throw DataError(coords_origin + ": empty file");
    const auto chead = split_csv_line(coord_lines[0].second);
    if (chead.size() != 4 || chead[0] != "lead" || chead[1] != "x" || chead[2] != "y" || chead[3] != "z") {
        throw DataError(at(coords_origin, coord_lines[0].first) + ": expected header \"lead,x,y,z\"");
    }
    const int n_coord_rows = static_cast<int>(coord_lines.size()) - 1;
    if (n_coord_rows != n_leads) {
        throw DataError(coords_origin + ": " + std::to_string(n_coord_rows) + " leads but " +
                        potentials_origin + " has " + std::to_string(n_leads));
    }
    d.lead_coords.resize(n_leads, 3);
    for (int l = 0; l < n_leads; ++l) {
        const auto& [lineno, text] = coord_lines[static_cast<std::size_t>(l) + 1];
        const auto cells = split_csv_line(text);
        if (cells.size() != 4) {
            throw DataError(at(coords_origin, lineno) + ": expected 4 fields, got " +
                            std::to_string(cells.size()));
        }
        const long id = parse_long(cells[0], at(coords_origin, lineno) + " lead");
        if (id != l) {
            throw DataError(at(coords_origin, lineno) + ": lead ids must run 0..L-1 in order, got " +
                            std::to_string(id));
        }
        for (int c = 0; c < 3; ++c) {
            d.lead_coords(l, c) =
                parse_double(cells[static_cast<std::size_t>(c) + 1], at(coords_origin, lineno));
        }
    }
    return d;
}

BspmDataset load_dataset(const std::string& potentials_path, const std::string& coords_path) {
    return load_dataset_from_strings(read_file(potentials_path), read_file(coords_path), potentials_path,
                                     coords_path);
}

std::pair<double, double> detect_qrs_window(const BspmDataset& dataset) {
    const Eigen::Index t_n = dataset.potentials.rows();
    const Eigen::Index l_n = dataset.potentials.cols();
    if (t_n < 2) throw DataError("detect_qrs_window: need at least two samples");

    Eigen::MatrixXd centered = dataset.potentials;
    centered.rowwise() -= dataset.potentials.colwise().mean();
    Eigen::VectorXd envelope =
        (centered.array().square().rowwise().sum() / static_cast<double>(l_n)).sqrt();

    Eigen::Index peak = 0;
    double peak_val = envelope[0];
    for (Eigen::Index r = 1; r < t_n; ++r) {
        if (envelope[r] > peak_val) {
            peak = r;
            peak_val = envelope[r];
        }
    }
    std::vector<double> sorted(envelope.data(), envelope.data() + t_n);
    std::nth_element(sorted.begin(), sorted.begin() + t_n / 2, sorted.end());
    const double median = sorted[static_cast<std::size_t>(t_n / 2)];
    if (!(peak_val > 0.0) || peak_val < 2.0 * median) {
        throw DataError("detect_qrs_window: envelope peak " + std::to_string(peak_val) +
                        " is not above the noise floor (median " + std::to_string(median) + ")");
    }

    const double threshold = 0.2 * peak_val;
    Eigen::Index lo = peak, hi = peak;
    while (lo > 0 && envelope[lo - 1] >= threshold) --lo;
    while (hi + 1 < t_n && envelope[hi + 1] >= threshold) ++hi;
    return {dataset.time_of(static_cast<int>(lo)), dataset.time_of(static_cast<int>(hi + 1))};
}

BspmDataset qrs_extract(const BspmDataset& dataset, std::optional<std::pair<double, double>> window) {
    const auto [t0, t1] = window ? *window : detect_qrs_window(dataset);
    if (!(t0 < t1)) {
        throw ParamError("qrs_extract: empty window [" + std::to_string(t0) + ", " + std::to_string(t1) +
                         ")");
    }
    const double t_end = dataset.start_ms + dataset.duration_ms();
    if (window && (t0 < dataset.start_ms || t1 > t_end)) {
        throw ParamError("qrs_extract: window [" + std::to_string(t0) + ", " + std::to_string(t1) +
                         ") outside the recording [" + std::to_string(dataset.start_ms) + ", " +
                         std::to_string(t_end) + ")");
    }

    int first = -1, count = 0;
    for (int r = 0; r < dataset.n_samples(); ++r) {
        const double t = dataset.time_of(r);
        if (t >= t0 && t < t1) {
            if (first < 0) first = r;
            ++count;
        }
    }
    if (count == 0) throw ParamError("qrs_extract: window contains no samples");

    BspmDataset out;
    out.lead_coords = dataset.lead_coords;
    out.potentials = dataset.potentials.middleRows(first, count);
    out.sample_period = dataset.sample_period;
    out.start_ms = dataset.time_of(first);
    out.subject_id = dataset.subject_id;
    return out;
}

} // namespace bspm
