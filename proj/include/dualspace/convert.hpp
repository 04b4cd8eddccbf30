#pragma once

// Converters from distributed dataset layouts to the canonical TSV files
// read by the evaluation parsers.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dualspace/common.hpp"
#include "dualspace/corpus.hpp"

namespace dualspace {

enum class SourceFormat { simlex, wordsim, swow, eat };

inline SourceFormat parse_source_format(std::string_view s) {
    if (s == "simlex") return SourceFormat::simlex;
    if (s == "wordsim") return SourceFormat::wordsim;
    if (s == "swow") return SourceFormat::swow;
    if (s == "eat") return SourceFormat::eat;
    throw UsageError("unknown source format '" + std::string(s) + "' (expected simlex, wordsim, swow or eat)");
}

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line) {
    const char sep = line.find('\t') != std::string::npos ? '\t' : ',';
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == sep) {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r' && ch != '"') {
            cur += ch;
        }
    }
    out.push_back(cur);
    for (auto& f : out) {
        const auto b = f.find_first_not_of(' ');
        f = b == std::string::npos ? "" : f.substr(b, f.find_last_not_of(' ') - b + 1);
    }
    return out;
}

inline bool is_number(const std::string& s) {
    if (s.empty()) return false;
    char* end = nullptr;
    std::strtod(s.c_str(), &end);
    return *end == '\0';
}

inline std::string fmt_score(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

inline std::size_t column(const std::vector<std::string>& header, std::initializer_list<std::string_view> names,
                          const std::string& path) {
    for (auto n : names)
        for (std::size_t k = 0; k < header.size(); ++k)
            if (ascii_lower(header[k]) == ascii_lower(n)) return k;
    throw Error(path + ": missing column " + std::string(*names.begin()));
}

}  // namespace detail

/// SimLex: header row, word1 word2 POS SimLex999 ... (tab separated).
/// WordSim: optional header, word1 word2 score (tab or comma separated).
/// Output: `w1<TAB>w2<TAB>score`, lowercased.
inline std::string convert_similarity(std::istream& in, SourceFormat fmt, const std::string& path) {
    std::ostringstream out;
    std::string line;
    std::size_t c1 = 0, c2 = 1, cs = 2;
    bool first = true;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
        auto f = detail::split_fields(line);
        if (first) {
            first = false;
            if (fmt == SourceFormat::simlex) {
                cs = detail::column(f, {"SimLex999", "score"}, path);
                continue;
            }
            if (f.size() < 3 || !detail::is_number(f[2])) continue;  // header
        }
        if (f.size() <= std::max({c1, c2, cs}) || !detail::is_number(f[cs]))
            throw Error(path + ": malformed row: " + line);
        out << ascii_lower(f[c1]) << '\t' << ascii_lower(f[c2]) << '\t' << f[cs] << '\n';
        ++n;
    }
    if (n == 0) throw Error(path + ": no pairs");
    return out.str();
}

/// SWOW: header with cue, response and a strength column (R123.Strength,
/// R1.Strength or strength). EAT: cue, response, count rows; strength is
/// the count divided by the cue's total. Output: `cue<TAB>response<TAB>strength`.
inline std::string convert_association(std::istream& in, SourceFormat fmt, const std::string& path) {
    std::vector<std::string> order;
    std::map<std::string, std::vector<std::pair<std::string, double>>> rows;
    std::string line;
    std::size_t cc = 0, cr = 1, cv = 2;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
        auto f = detail::split_fields(line);
        if (first) {
            first = false;
            if (fmt == SourceFormat::swow) {
                cc = detail::column(f, {"cue"}, path);
                cr = detail::column(f, {"response"}, path);
                cv = detail::column(f, {"R123.Strength", "R1.Strength", "strength"}, path);
                continue;
            }
            if (f.size() < 3 || !detail::is_number(f[2])) continue;
        }
        if (f.size() <= std::max({cc, cr, cv})) throw Error(path + ": malformed row: " + line);
        if (!detail::is_number(f[cv])) continue;  // "NA" strengths
        const auto cue = ascii_lower(f[cc]);
        if (!rows.count(cue)) order.push_back(cue);
        rows[cue].emplace_back(ascii_lower(f[cr]), std::stod(f[cv]));
    }
    if (order.empty()) throw Error(path + ": no cues");
    std::ostringstream out;
    for (const auto& cue : order) {
        double total = 0.0;
        for (const auto& r : rows[cue]) total += r.second;
        for (const auto& [resp, v] : rows[cue]) {
            const double s = fmt == SourceFormat::eat ? (total > 0 ? v / total : 0.0) : v;
            if (s < 0.0 || s > 1.0) throw Error(path + ": strength outside [0,1] for " + cue + "/" + resp);
            out << cue << '\t' << resp << '\t' << detail::fmt_score(s) << '\n';
        }
    }
    return out.str();
}

inline std::string convert_dataset(const std::string& path, SourceFormat fmt) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    if (fmt == SourceFormat::simlex || fmt == SourceFormat::wordsim) return convert_similarity(in, fmt, path);
    return convert_association(in, fmt, path);
}

}  // namespace dualspace
