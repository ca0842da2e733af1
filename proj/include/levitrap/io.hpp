#pragma once

// File formats.
//
// Trace CSV:   optional "# key=value" metadata lines, then a header
//              "t_s,<name>_<unit>[,lit]" and one row per sample. The unit
//              suffix is mandatory (m, m_per_s, m2, v, v2, j, kbt0, hz, 1).
// Profile CSV: "# metres_per_pixel=..." metadata, header "position_m,intensity".
// Profile bin: "LVTPROF1", u64 count, f64 metres per pixel, count f64
//              intensities; all little-endian.
// Numbers are written in shortest round-trip form, so export then import
// reproduces every double bit for bit.

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "levitrap/error.hpp"
#include "levitrap/fit_result.hpp"
#include "levitrap/profile.hpp"
#include "levitrap/spectral.hpp"
#include "levitrap/time_trace.hpp"

namespace levitrap::io {

inline std::string format_double(double v) {
    std::array<char, 32> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

inline double parse_double(std::string_view s, std::size_t line) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        throw ParseError("not a number: '" + std::string(s) + "'", line);
    return v;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            out.push_back(line.substr(start, i - start));
            start = i + 1;
        }
    }
    for (auto& f : out) {
        while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
        while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
    }
    return out;
}

/// Splits "<name>_<unit>" using the longest known unit suffix.
inline std::optional<std::pair<std::string, SeriesUnit>> parse_column(std::string_view col) {
    std::optional<std::pair<std::string, SeriesUnit>> best;
    std::size_t best_len = 0;
    for (auto u : {SeriesUnit::Metre, SeriesUnit::MetrePerSecond, SeriesUnit::MetreSquared,
                   SeriesUnit::Volt, SeriesUnit::VoltSquared, SeriesUnit::Joule,
                   SeriesUnit::ThermalEnergy, SeriesUnit::Hertz, SeriesUnit::Dimensionless}) {
        const std::string suffix = "_" + std::string(unit_tag(u));
        if (col.size() > suffix.size() && col.ends_with(suffix) && suffix.size() > best_len) {
            best_len = suffix.size();
            best = std::make_pair(std::string(col.substr(0, col.size() - suffix.size())), u);
        }
    }
    return best;
}

struct NamedTrace {
    std::string name = "x";
    TimeTrace trace;
};

inline std::string trace_to_csv(const TimeTrace& tr, std::string_view name = "x") {
    tr.check();
    std::string s;
    s += "# t0_s=" + format_double(tr.t0) + "\n";
    s += "# dt_s=" + format_double(tr.dt) + "\n";
    s += "t_s," + std::string(name) + "_" + std::string(unit_tag(tr.unit));
    const bool mask = !tr.lit.empty();
    if (mask) s += ",lit";
    s += "\n";
    for (std::size_t i = 0; i < tr.size(); ++i) {
        s += format_double(tr.time(i));
        s += ',';
        s += format_double(tr.values[i]);
        if (mask) s += tr.lit[i] ? ",1" : ",0";
        s += '\n';
    }
    return s;
}

/// Parses a trace CSV. `header_map` renames external column names before
/// the unit suffix is resolved.
inline NamedTrace trace_from_csv(std::string_view text,
                                 const std::map<std::string, std::string>& header_map = {}) {
    NamedTrace out;
    std::optional<double> meta_t0, meta_dt;
    std::vector<double> times;
    std::size_t line_no = 0;
    bool have_header = false;
    bool has_lit = false;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t end = std::min(text.find('\n', pos), text.size());
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) {
            if (end == text.size()) break;
            continue;
        }
        if (line.front() == '#') {
            auto body = line.substr(1);
            while (!body.empty() && body.front() == ' ') body.remove_prefix(1);
            const auto eq = body.find('=');
            if (eq != std::string_view::npos) {
                const auto key = body.substr(0, eq);
                if (key == "t0_s") meta_t0 = parse_double(body.substr(eq + 1), line_no);
                if (key == "dt_s") meta_dt = parse_double(body.substr(eq + 1), line_no);
            }
            continue;
        }
        auto fields = split_csv(line);
        if (!have_header) {
            std::vector<std::string> cols;
            for (auto f : fields) {
                std::string c(f);
                if (auto it = header_map.find(c); it != header_map.end()) c = it->second;
                cols.push_back(c);
            }
            if (cols.size() < 2 || cols.size() > 3) throw ParseError("expected header t_s,<name>_<unit>[,lit]", line_no);
            if (cols[0] != "t_s") throw ParseError("first column must be t_s", line_no);
            const auto parsed = parse_column(cols[1]);
            if (!parsed) throw ParseError("column '" + cols[1] + "' lacks a unit suffix", line_no);
            out.name = parsed->first;
            out.trace.unit = parsed->second;
            if (cols.size() == 3) {
                if (cols[2] != "lit") throw ParseError("third column must be lit", line_no);
                has_lit = true;
            }
            have_header = true;
            continue;
        }
        if (fields.size() != (has_lit ? 3u : 2u)) throw ParseError("wrong number of fields", line_no);
        times.push_back(parse_double(fields[0], line_no));
        out.trace.values.push_back(parse_double(fields[1], line_no));
        if (has_lit) {
            const double l = parse_double(fields[2], line_no);
            if (l != 0.0 && l != 1.0) throw ParseError("lit must be 0 or 1", line_no);
            out.trace.lit.push_back(l != 0.0 ? 1 : 0);
        }
    }
    if (!have_header) throw ParseError("missing header", line_no);
    if (times.size() < 2 && !meta_dt) throw ParseError("need at least two samples to infer dt", line_no);
    out.trace.t0 = meta_t0 ? *meta_t0 : times.front();
    out.trace.dt = meta_dt ? *meta_dt : times[1] - times[0];
    if (!(out.trace.dt > 0.0)) throw ParseError("time column must increase", line_no);
    for (std::size_t i = 0; i < times.size(); ++i) {
        const double expect = out.trace.t0 + static_cast<double>(i) * out.trace.dt;
        if (std::abs(times[i] - expect) > 1e-6 * out.trace.dt + 1e-12 * std::abs(expect))
            throw ParseError("samples are not uniformly spaced", i + 1);
    }
    if (has_lit && out.trace.all_lit()) out.trace.lit.clear();
    return out;
}

inline std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write '" + path + "'");
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!f) throw IoError("write failed for '" + path + "'");
}

inline std::string profile_to_csv(const IntensityProfile& p) {
    std::string s = "# metres_per_pixel=" + format_double(p.metres_per_pixel) + "\n";
    s += "# exposure_s=" + format_double(p.exposure_s) + "\n";
    s += "position_m,intensity\n";
    for (std::size_t i = 0; i < p.size(); ++i)
        s += format_double(p.position_m(i)) + "," + format_double(p.intensities[i]) + "\n";
    return s;
}

inline IntensityProfile profile_from_csv(std::string_view text) {
    IntensityProfile p;
    std::optional<double> pitch;
    std::vector<double> pos;
    bool have_header = false;
    std::size_t line_no = 0, start = 0;
    while (start < text.size()) {
        const std::size_t end = std::min(text.find('\n', start), text.size());
        std::string_view line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        if (line.front() == '#') {
            auto body = line.substr(1);
            while (!body.empty() && body.front() == ' ') body.remove_prefix(1);
            const auto eq = body.find('=');
            if (eq == std::string_view::npos) continue;
            if (body.substr(0, eq) == "metres_per_pixel") pitch = parse_double(body.substr(eq + 1), line_no);
            if (body.substr(0, eq) == "exposure_s") p.exposure_s = parse_double(body.substr(eq + 1), line_no);
            continue;
        }
        const auto f = split_csv(line);
        if (!have_header) {
            if (f.size() != 2 || f[0] != "position_m" || f[1] != "intensity")
                throw ParseError("expected header position_m,intensity", line_no);
            have_header = true;
            continue;
        }
        if (f.size() != 2) throw ParseError("wrong number of fields", line_no);
        pos.push_back(parse_double(f[0], line_no));
        const double v = parse_double(f[1], line_no);
        if (v < 0.0) throw ParseError("negative intensity", line_no);
        p.intensities.push_back(v);
    }
    if (!have_header) throw ParseError("missing header", line_no);
    if (pos.size() < 2 && !pitch) throw ParseError("cannot infer pixel pitch", line_no);
    p.metres_per_pixel = pitch ? *pitch : pos[1] - pos[0];
    if (!(p.metres_per_pixel > 0.0)) throw ParseError("pixel pitch must be positive", line_no);
    return p;
}

inline constexpr std::string_view profile_magic = "LVTPROF1";

namespace detail {

inline void put_u64(std::string& s, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline std::uint64_t get_u64(std::string_view s, std::size_t off) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[off + static_cast<std::size_t>(i)])) << (8 * i);
    return v;
}

}  // namespace detail

inline std::string profile_to_binary(const IntensityProfile& p) {
    std::string s(profile_magic);
    detail::put_u64(s, p.size());
    detail::put_u64(s, std::bit_cast<std::uint64_t>(p.metres_per_pixel));
    for (double v : p.intensities) detail::put_u64(s, std::bit_cast<std::uint64_t>(v));
    return s;
}

inline IntensityProfile profile_from_binary(std::string_view s) {
    if (s.size() < 24 || s.substr(0, 8) != profile_magic) throw ParseError("not a profile file (bad magic)", 0);
    const std::uint64_t n = detail::get_u64(s, 8);
    if (s.size() != 24 + 8 * n) throw ParseError("profile size does not match its header", 0);
    IntensityProfile p;
    p.metres_per_pixel = std::bit_cast<double>(detail::get_u64(s, 16));
    p.intensities.resize(n);
    for (std::uint64_t i = 0; i < n; ++i) p.intensities[i] = std::bit_cast<double>(detail::get_u64(s, 24 + 8 * i));
    return p;
}

inline nlohmann::json to_json(const FitResult& f) {
    nlohmann::json j;
    j["parameters"] = nlohmann::json::array();
    for (const auto& p : f.parameters) j["parameters"].push_back({{"name", p.name}, {"value", p.value}, {"sigma", p.sigma}});
    nlohmann::json cov = nlohmann::json::array();
    for (Eigen::Index r = 0; r < f.covariance.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < f.covariance.cols(); ++c) row.push_back(f.covariance(r, c));
        cov.push_back(row);
    }
    j["covariance"] = cov;
    j["mse"] = f.mse;
    j["mean_variance"] = f.mean_variance;
    j["n_observations"] = f.residuals.size();
    j["converged"] = f.converged;
    j["degenerate"] = f.degenerate;
    j["message"] = f.message;
    j["flags"] = f.flags;
    return j;
}

inline FitResult fit_from_json(const nlohmann::json& j) {
    FitResult f;
    for (const auto& p : j.at("parameters")) f.add(p.at("name"), p.at("value"), p.at("sigma"));
    const auto& cov = j.at("covariance");
    if (!cov.empty()) {
        f.covariance.resize(static_cast<Eigen::Index>(cov.size()), static_cast<Eigen::Index>(cov[0].size()));
        for (std::size_t r = 0; r < cov.size(); ++r)
            for (std::size_t c = 0; c < cov[r].size(); ++c)
                f.covariance(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = cov[r][c];
    }
    f.mse = j.value("mse", 0.0);
    f.mean_variance = j.value("mean_variance", 0.0);
    f.converged = j.value("converged", true);
    f.degenerate = j.value("degenerate", false);
    f.message = j.value("message", "");
    f.flags = j.value("flags", std::vector<std::string>{});
    return f;
}

inline std::string residuals_to_csv(const FitResult& f) {
    std::string s = f.variances.empty() ? "index,residual\n" : "index,residual,variance\n";
    for (std::size_t i = 0; i < f.residuals.size(); ++i) {
        s += std::to_string(i) + "," + format_double(f.residuals[i]);
        if (!f.variances.empty()) s += "," + format_double(f.variances[i]);
        s += "\n";
    }
    return s;
}

inline std::string allan_to_csv(const std::vector<AllanPoint>& pts) {
    std::string s = "tau_s,sigma_1,error_1,intervals,valid,flag\n";
    for (const auto& p : pts)
        s += format_double(p.tau) + "," + format_double(p.sigma) + "," + format_double(p.error) + "," +
             std::to_string(p.intervals) + "," + (p.valid ? "1" : "0") + "," + p.flag + "\n";
    return s;
}

inline std::string frequency_series_to_csv(const FrequencySeries& f) {
    std::string s = "# nominal_hz=" + format_double(f.nominal_hz) + "\n";
    s += "t_s,f_hz,valid\n";
    for (std::size_t i = 0; i < f.size(); ++i)
        s += format_double(f.times[i]) + "," + format_double(f.frequencies[i]) + "," + (f.is_valid(i) ? "1" : "0") + "\n";
    return s;
}

inline std::string series_to_csv(const Series& s, std::string_view x_col, std::string_view y_col) {
    std::string out = std::string(x_col) + "," + std::string(y_col) + "\n";
    for (std::size_t i = 0; i < s.size(); ++i)
        out += format_double(s.times[i]) + "," + format_double(s.values[i]) + "\n";
    return out;
}

/// FNV-1a over bytes, used for output determinism checks.
inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace levitrap::io
