#pragma once

// Results file records and the consolidated "maximum (average)" tables:
// mean over datasets per task, then max and mean over embedding dimensions.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "dualspace/common.hpp"
#include "dualspace/dual_embedding.hpp"
#include "dualspace/evaluation.hpp"

namespace dualspace {

/// One grid cell: trainer, compare method, window, dimension.
struct ModelKey {
    std::string trainer;
    CompareMethod compare = CompareMethod::WW;
    std::size_t window = 0;
    std::size_t dim = 0;
    friend auto operator<=>(const ModelKey&, const ModelKey&) = default;
};

/// One line of the results file.
struct ResultRecord {
    std::string model;  // embedding identifier, e.g. "sgns-sg_w5_d100"
    std::string trainer;
    std::size_t window = 0;
    std::size_t dim = 0;
    CompareMethod compare = CompareMethod::WW;
    Task task = Task::similarity;
    std::string dataset;
    double value = 0.0;
    std::map<std::string, double> aux;
    std::string manifest;  // fingerprint of the manifest that produced the embedding
    std::string embedding;

    ModelKey key() const { return {trainer, compare, window, dim}; }

    nlohmann::json to_json() const {
        nlohmann::json out;
        out["model"] = model;
        out["trainer"] = trainer;
        out["window"] = window;
        out["dim"] = dim;
        out["compare"] = std::string(to_string(compare));
        out["task"] = std::string(to_string(task));
        out["dataset"] = dataset;
        out["value"] = value;
        out["aux"] = aux;
        out["manifest"] = manifest;
        out["embedding"] = embedding;
        return out;
    }

    static ResultRecord from_json(const nlohmann::json& j) {
        ResultRecord r;
        r.model = j.value("model", "");
        r.trainer = j.at("trainer").get<std::string>();
        r.window = j.at("window").get<std::size_t>();
        r.dim = j.at("dim").get<std::size_t>();
        r.compare = parse_compare_method(j.at("compare").get<std::string>());
        r.task = parse_task(j.at("task").get<std::string>());
        r.dataset = j.at("dataset").get<std::string>();
        r.value = j.at("value").get<double>();
        if (j.contains("aux")) r.aux = j.at("aux").get<std::map<std::string, double>>();
        r.manifest = j.value("manifest", "");
        r.embedding = j.value("embedding", "");
        return r;
    }

    /// Single-line JSON, keys sorted.
    std::string line() const { return to_json().dump(); }

    friend bool operator==(const ResultRecord&, const ResultRecord&) = default;
};

/// Parses a results file. Later lines win over earlier ones for the same
/// (model key, task, dataset); order of first appearance is kept.
inline std::vector<ResultRecord> read_results(std::istream& in, const std::string& name = "results") {
    std::vector<ResultRecord> out;
    std::map<std::tuple<ModelKey, Task, std::string>, std::size_t> index;
    std::string line;
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        ResultRecord r;
        try {
            r = ResultRecord::from_json(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception& e) {
            throw Error(name + ":" + std::to_string(lineno) + ": " + e.what());
        }
        auto [it, fresh] = index.emplace(std::make_tuple(r.key(), r.task, r.dataset), out.size());
        if (fresh)
            out.push_back(std::move(r));
        else
            out[it->second] = std::move(r);
    }
    if (out.empty()) throw Error(name + ": no results");
    return out;
}

inline std::vector<ResultRecord> load_results(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open results file " + path);
    return read_results(in, path);
}

/// Unweighted mean of per-dataset scores for one model key and task.
inline double aggregate_task(std::span<const double> scores) {
    if (scores.empty()) throw Error("aggregate_task: no dataset scores");
    double s = 0.0;
    for (double v : scores) s += v;
    return s / static_cast<double>(scores.size());
}

inline double aggregate_task(const std::vector<double>& scores) {
    return aggregate_task(std::span<const double>(scores));
}

struct ConsolidatedCell {
    double max_score = 0.0;
    double avg_score = 0.0;
    std::size_t n_dims = 0;
    // lineage
    std::vector<std::size_t> dims;
    std::vector<double> per_dim;
    std::vector<std::string> datasets;

    friend bool operator==(const ConsolidatedCell&, const ConsolidatedCell&) = default;
};

/// Max and mean over the dimension axis. Dims are sorted first, so the
/// result does not depend on input order.
inline ConsolidatedCell consolidate(std::vector<std::pair<std::size_t, double>> by_dim) {
    if (by_dim.empty()) throw Error("consolidate: no dimensions");
    std::sort(by_dim.begin(), by_dim.end());
    ConsolidatedCell c;
    double sum = 0.0;
    c.max_score = by_dim.front().second;
    for (std::size_t k = 0; k < by_dim.size(); ++k) {
        if (k > 0 && by_dim[k].first == by_dim[k - 1].first)
            throw Error("consolidate: duplicate dim " + std::to_string(by_dim[k].first));
        c.dims.push_back(by_dim[k].first);
        c.per_dim.push_back(by_dim[k].second);
        c.max_score = std::max(c.max_score, by_dim[k].second);
        sum += by_dim[k].second;
    }
    c.n_dims = by_dim.size();
    c.avg_score = std::min(sum / static_cast<double>(c.n_dims), c.max_score);
    return c;
}

inline ConsolidatedCell consolidate(const std::map<std::size_t, double>& by_dim) {
    return consolidate(std::vector<std::pair<std::size_t, double>>(by_dim.begin(), by_dim.end()));
}

// ---- grid ----------------------------------------------------------------

inline int trainer_rank(std::string_view trainer) {
    if (trainer == "sgns-cbow") return 0;
    if (trainer == "sgns-sg") return 1;
    if (trainer == "glove") return 2;
    return 3;
}

inline std::string trainer_family(std::string_view trainer) {
    return trainer.starts_with("sgns") ? "sgns" : std::string(trainer);
}

struct RowKey {
    Task task = Task::similarity;
    std::string trainer;
    std::size_t window = 0;

    friend bool operator==(const RowKey&, const RowKey&) = default;
    friend bool operator<(const RowKey& a, const RowKey& b) {
        return std::make_tuple(a.task, trainer_rank(a.trainer), std::cref(a.trainer), a.window) <
               std::make_tuple(b.task, trainer_rank(b.trainer), std::cref(b.trainer), b.window);
    }
};

/// rows (task, trainer, window) -> compare method -> consolidated cell.
using ReportGrid = std::map<RowKey, std::map<CompareMethod, ConsolidatedCell>>;

inline ReportGrid build_grid(const std::vector<ResultRecord>& records) {
    // (row, compare) -> dim -> dataset -> value
    std::map<std::pair<RowKey, CompareMethod>, std::map<std::size_t, std::map<std::string, double>>> raw;
    for (const auto& r : records) {
        if (!std::isfinite(r.value)) throw Error("non-finite score for " + r.model + " " + r.dataset);
        raw[{RowKey{r.task, r.trainer, r.window}, r.compare}][r.dim][r.dataset] = r.value;
    }
    ReportGrid grid;
    for (const auto& [rk, dims] : raw) {
        std::vector<std::pair<std::size_t, double>> by_dim;
        std::set<std::string> datasets;
        for (const auto& [dim, per_dataset] : dims) {
            std::vector<double> values;
            for (const auto& [name, v] : per_dataset) {
                values.push_back(v);
                datasets.insert(name);
            }
            by_dim.emplace_back(dim, aggregate_task(values));
        }
        auto cell = consolidate(std::move(by_dim));
        cell.datasets.assign(datasets.begin(), datasets.end());
        grid[rk.first][rk.second] = std::move(cell);
    }
    return grid;
}

// ---- rendering -----------------------------------------------------------

enum class ReportFormat { markdown, csv };

inline constexpr double kComparableMargin = 0.02;

namespace detail {

inline std::string fmt3(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

inline std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <typename T, typename F>
std::string join(const std::vector<T>& xs, F&& f) {
    std::string out;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        if (k) out += ';';
        out += f(xs[k]);
    }
    return out;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    if (s.empty()) return out;
    std::size_t start = 0;
    while (true) {
        auto p = s.find(sep, start);
        out.push_back(s.substr(start, p == std::string::npos ? std::string::npos : p - start));
        if (p == std::string::npos) break;
        start = p + 1;
    }
    return out;
}

inline std::string render_markdown(const ReportGrid& grid) {
    std::map<std::string, std::vector<const ReportGrid::value_type*>> families;
    std::vector<std::string> family_order;
    for (const auto& row : grid) {
        auto fam = trainer_family(row.first.trainer);
        if (!families.count(fam)) family_order.push_back(fam);
        families[fam].push_back(&row);
    }
    std::sort(family_order.begin(), family_order.end(), [](const std::string& a, const std::string& b) {
        const int ra = a == "sgns" ? 0 : a == "glove" ? 1 : 2;
        const int rb = b == "sgns" ? 0 : b == "glove" ? 1 : 2;
        return std::tie(ra, a) < std::tie(rb, b);
    });

    std::ostringstream out;
    out << "# Consolidated report\n\nCells are maximum (average) over embedding dimensions. "
           "Bold marks the best value per task block; underline marks cells within "
        << fmt3(kComparableMargin) << " of the best maximum.\n";
    for (const auto& fam : family_order) {
        const auto& rows = families[fam];
        std::vector<CompareMethod> columns;
        for (auto cm : kAllCompareMethods)
            for (const auto* row : rows)
                if (row->second.count(cm)) {
                    columns.push_back(cm);
                    break;
                }
        std::map<Task, std::pair<double, double>> best;  // task -> (max, avg)
        for (const auto* row : rows)
            for (const auto& [cm, cell] : row->second) {
                auto [it, fresh] = best.emplace(row->first.task, std::make_pair(cell.max_score, cell.avg_score));
                if (!fresh) {
                    it->second.first = std::max(it->second.first, cell.max_score);
                    it->second.second = std::max(it->second.second, cell.avg_score);
                }
            }

        out << "\n## " << fam << "\n\n| Task | Trainer | Window |";
        for (auto cm : columns) out << ' ' << to_string(cm) << " |";
        out << "\n| --- | --- | ---: |";
        for (std::size_t k = 0; k < columns.size(); ++k) out << " --- |";
        out << '\n';
        for (const auto* row : rows) {
            const auto& rk = row->first;
            out << "| " << to_string(rk.task) << " | " << rk.trainer << " | " << rk.window << " |";
            const auto [best_max, best_avg] = best.at(rk.task);
            for (auto cm : columns) {
                auto it = row->second.find(cm);
                if (it == row->second.end()) {
                    out << " — |";
                    continue;
                }
                const auto& c = it->second;
                const bool top_max = c.max_score == best_max;
                const bool top_avg = c.avg_score == best_avg;
                std::string mx = fmt3(c.max_score), av = fmt3(c.avg_score);
                std::string text;
                if (top_max && top_avg)
                    text = "**" + mx + " (" + av + ")**";
                else
                    text = (top_max ? "**" + mx + "**" : mx) + " (" + (top_avg ? "**" + av + "**" : av) + ")";
                if (!top_max && best_max - c.max_score <= kComparableMargin) text = "<u>" + text + "</u>";
                out << ' ' << text << " |";
            }
            out << '\n';
        }
    }
    return out.str();
}

inline constexpr std::string_view kCsvHeader = "task,trainer,window,compare,max,avg,n_dims,dims,per_dim,datasets";

inline std::string render_csv(const ReportGrid& grid) {
    std::ostringstream out;
    out << kCsvHeader << '\n';
    for (const auto& [rk, cells] : grid)
        for (auto cm : kAllCompareMethods) {
            auto it = cells.find(cm);
            if (it == cells.end()) continue;
            const auto& c = it->second;
            out << to_string(rk.task) << ',' << rk.trainer << ',' << rk.window << ',' << to_string(cm) << ','
                << fmt17(c.max_score) << ',' << fmt17(c.avg_score) << ',' << c.n_dims << ','
                << join(c.dims, [](std::size_t d) { return std::to_string(d); }) << ','
                << join(c.per_dim, fmt17) << ',' << join(c.datasets, [](const std::string& s) { return s; })
                << '\n';
        }
    return out.str();
}

}  // namespace detail

/// Markdown: one table per trainer family, rows (task, trainer, window),
/// columns in WW, WC, CW, CC, SS, AA order. CSV: one line per cell with
/// full-precision values and the per-dimension lineage.
inline std::string render(const ReportGrid& grid, ReportFormat format) {
    if (grid.empty()) throw Error("render: empty grid");
    return format == ReportFormat::markdown ? detail::render_markdown(grid) : detail::render_csv(grid);
}

inline ReportGrid parse_report_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != detail::kCsvHeader) throw Error("report csv: bad header");
    ReportGrid grid;
    for (std::size_t lineno = 2; std::getline(in, line); ++lineno) {
        if (line.empty()) continue;
        auto f = detail::split(line, ',');
        f.resize(10);
        try {
            RowKey rk{parse_task(f[0]), f[1], std::stoul(f[2])};
            ConsolidatedCell c;
            c.max_score = std::stod(f[4]);
            c.avg_score = std::stod(f[5]);
            c.n_dims = std::stoul(f[6]);
            for (const auto& d : detail::split(f[7], ';')) c.dims.push_back(std::stoul(d));
            for (const auto& v : detail::split(f[8], ';')) c.per_dim.push_back(std::stod(v));
            c.datasets = detail::split(f[9], ';');
            if (c.dims.size() != c.n_dims || c.per_dim.size() != c.n_dims) throw Error("lineage size mismatch");
            grid[rk][parse_compare_method(f[3])] = std::move(c);
        } catch (const std::exception& e) {
            throw Error("report csv line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return grid;
}

inline ReportGrid parse_report_csv(const std::string& text) {
    std::istringstream in(text);
    return parse_report_csv(in);
}

}  // namespace dualspace
