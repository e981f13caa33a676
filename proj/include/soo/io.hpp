#pragma once

// File formats: samples CSV (run_id,x0,...,x{d-1}), covariance report JSON,
// histogram grid CSV. Doubles are written in shortest round-trip form.

#include <charconv>
#include <cstddef>
#include <fstream>
#include <iterator>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "soo/error.hpp"
#include "soo/experiments.hpp"
#include "soo/linalg.hpp"

namespace soo {

/// Malformed configuration or input file (CLI exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

inline std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, const std::string& where) {
    double v = 0.0;
    const auto* first = s.data();
    const auto* last = s.data() + s.size();
    // from_chars rejects a leading '+'; accept it for hand-written files.
    if (first != last && *first == '+') ++first;
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last) throw ConfigError(where + ": not a number: '" + std::string(s) + "'");
    return v;
}

inline void write_samples_csv(std::ostream& os, const SampleMatrix& s) {
    os << "run_id";
    for (std::size_t j = 0; j < s.dim(); ++j) os << ",x" << j;
    os << '\n';
    for (std::size_t i = 0; i < s.n_runs(); ++i) {
        os << i;
        for (double v : s.row(i)) os << ',' << format_double(v);
        os << '\n';
    }
}

inline void write_samples_csv(const std::filesystem::path& path, const SampleMatrix& s) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open " + path.string() + " for writing");
    write_samples_csv(os, s);
    if (!os) throw Error("failed writing " + path.string());
}

namespace detail {

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) return out;
        start = pos + 1;
    }
}

inline std::string_view trim_cr(std::string_view s) {
    if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
    return s;
}

}  // namespace detail

/// Reads a samples CSV, checking the header against `expected_dim` columns
/// and that run ids count up from 0.
inline SampleMatrix read_samples_csv(std::istream& is, std::size_t expected_dim, SampleKind kind,
                                     const std::string& name = "samples.csv") {
    std::string line;
    if (!std::getline(is, line)) throw ConfigError(name + ": empty file");
    const auto header = detail::split_commas(detail::trim_cr(line));
    if (header.size() != expected_dim + 1 || header[0] != "run_id")
        throw ConfigError(name + ": header must be run_id,x0,...,x" + std::to_string(expected_dim - 1) + " (got " +
                          std::to_string(header.size()) + " columns)");
    for (std::size_t j = 0; j < expected_dim; ++j)
        if (header[j + 1] != "x" + std::to_string(j))
            throw ConfigError(name + ": header column " + std::to_string(j + 1) + " must be x" + std::to_string(j));

    std::vector<double> data;
    std::size_t n = 0;
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        const auto trimmed = detail::trim_cr(line);
        if (trimmed.empty()) continue;
        const auto cells = detail::split_commas(trimmed);
        const std::string where = name + ":" + std::to_string(line_no);
        if (cells.size() != expected_dim + 1)
            throw ConfigError(where + ": expected " + std::to_string(expected_dim + 1) + " columns, got " +
                              std::to_string(cells.size()));
        if (parse_double(cells[0], where) != static_cast<double>(n))
            throw ConfigError(where + ": run_id out of order, expected " + std::to_string(n));
        for (std::size_t j = 1; j < cells.size(); ++j) data.push_back(parse_double(cells[j], where));
        ++n;
    }
    if (n < 2) throw ConfigError(name + ": need at least 2 sample rows, got " + std::to_string(n));
    try {
        return SampleMatrix(kind, n, expected_dim, std::move(data));
    } catch (const Error& e) {
        throw ConfigError(name + ": " + e.what());
    }
}

inline SampleMatrix read_samples_csv(const std::filesystem::path& path, std::size_t expected_dim, SampleKind kind) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot open samples file " + path.string());
    return read_samples_csv(is, expected_dim, kind, path.string());
}

/// First line "# bins=<b>,range=<r>,overflow=<o>,n=<N>", then one line per x0
/// bin holding the comma-separated counts over x1 bins.
inline void write_histogram_csv(std::ostream& os, const Histogram2D& h) {
    os << "# bins=" << h.bins << ",range=" << format_double(h.range) << ",overflow=" << h.overflow
       << ",n=" << (h.total() + h.overflow) << '\n';
    for (std::size_t i = 0; i < h.bins; ++i) {
        for (std::size_t j = 0; j < h.bins; ++j) {
            if (j) os << ',';
            os << h.at(i, j);
        }
        os << '\n';
    }
}

inline nlohmann::json to_json(const SymMatrix& m) { return nlohmann::json(m.to_rows()); }

inline nlohmann::json to_json(const CovarianceReport& r) {
    return nlohmann::json{
        {"setting", r.setting},
        {"kind", to_string(r.kind)},
        {"n_runs", r.n_runs},
        {"steps", r.steps},
        {"empirical", to_json(r.empirical)},
        {"theoretical", to_json(r.theoretical)},
        {"frobenius_rel_err", r.frobenius_rel_err},
        {"gap_eigenvalues", r.gap_eigenvalues},
        {"standardized_covariance", to_json(r.standardized)},
        {"standardized_rel_err", r.standardized_rel_err},
    };
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open " + path.string() + " for writing");
    os << j.dump(2) << '\n';
    if (!os) throw Error("failed writing " + path.string());
}

}  // namespace soo
