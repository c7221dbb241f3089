#include "bspm/io.hpp"

#include "bspm/errors.hpp"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace bspm {

void atomic_write_file(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    const fs::path dir = target.has_parent_path() ? target.parent_path() : fs::path(".");
    std::error_code ec;
    fs::create_directories(dir, ec);

    const fs::path tmp = dir / (target.filename().string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot open for writing: " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw DataError("write failed: " + tmp.string());
    }
    fs::rename(tmp, target, ec);
    if (ec) throw DataError("rename failed: " + tmp.string() + " -> " + path + ": " + ec.message());
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(cur);
    for (auto& f : fields) {
        std::size_t b = 0, e = f.size();
        while (b < e && (f[b] == ' ' || f[b] == '\t' || f[b] == '\r')) ++b;
        while (e > b && (f[e - 1] == ' ' || f[e - 1] == '\t' || f[e - 1] == '\r')) --e;
        f = f.substr(b, e - b);
    }
    return fields;
}

double parse_double(const std::string& text, const std::string& context) {
    if (text.empty()) throw DataError(context + ": empty numeric field");
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (end != text.c_str() + text.size() || errno == ERANGE) {
        throw DataError(context + ": cannot parse number '" + text + "'");
    }
    if (!std::isfinite(v)) throw DataError(context + ": non-finite value '" + text + "'");
    return v;
}

std::string format_double(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, res.ptr);
}

long parse_long(const std::string& text, const std::string& context) {
    if (text.empty()) throw DataError(context + ": empty integer field");
    errno = 0;
    char* end = nullptr;
    const long v = std::strtol(text.c_str(), &end, 10);
    if (end != text.c_str() + text.size() || errno == ERANGE) {
        throw DataError(context + ": cannot parse integer '" + text + "'");
    }
    return v;
}

} // namespace bspm
