#pragma once

// End-to-end drivers behind the command line: run manifests, preprocessing,
// training, evaluation, the resumable grid sweep and report generation.

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dualspace/common.hpp"
#include "dualspace/corpus.hpp"
#include "dualspace/dual_embedding.hpp"
#include "dualspace/evaluation.hpp"
#include "dualspace/glove.hpp"
#include "dualspace/report.hpp"
#include "dualspace/sgns.hpp"

namespace dualspace {

namespace fs = std::filesystem;

// ---- small utilities -----------------------------------------------------

/// UTC ISO-8601. SOURCE_DATE_EPOCH, when set, replaces the wall clock.
inline std::string utc_timestamp() {
    std::time_t t = std::time(nullptr);
    if (const char* e = std::getenv("SOURCE_DATE_EPOCH")) t = static_cast<std::time_t>(std::strtoll(e, nullptr, 10));
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Thread default: 1, or DUALSPACE_THREADS when set.
inline std::size_t default_threads() {
    if (const char* e = std::getenv("DUALSPACE_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(e, &end, 10);
        if (end == e || *end != '\0' || v < 1) throw UsageError("DUALSPACE_THREADS must be a positive integer");
        return static_cast<std::size_t>(v);
    }
    return 1;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

/// Write-to-temp then rename, so readers never see a partial file.
inline void write_file_atomic(const std::string& path, std::string_view bytes) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw Error("write failed: " + tmp);
    }
    fs::rename(tmp, path);
}

/// Appends one line with a single write(2) on an O_APPEND descriptor.
inline void append_line(const std::string& path, std::string line) {
    line += '\n';
    const int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT, 0644);
    if (fd < 0) throw Error("cannot open " + path + " for appending");
    const auto n = ::write(fd, line.data(), line.size());
    ::close(fd);
    if (n != static_cast<ssize_t>(line.size())) throw Error("short write to " + path);
}

/// `key = value` lines; '#' starts a comment. Later keys override earlier ones.
inline std::map<std::string, std::string> parse_key_values(std::istream& in, const std::string& name) {
    std::map<std::string, std::string> out;
    std::string line;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string();
        return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
    };
    for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw UsageError(name + ":" + std::to_string(lineno) + ": expected key = value");
        auto key = trim(line.substr(0, eq));
        if (key.empty()) throw UsageError(name + ":" + std::to_string(lineno) + ": empty key");
        out[key] = trim(line.substr(eq + 1));
    }
    return out;
}

inline std::map<std::string, std::string> load_key_values(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file " + path);
    return parse_key_values(in, path);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    auto flush = [&] {
        const auto b = cur.find_first_not_of(" \t");
        if (b != std::string::npos) out.push_back(cur.substr(b, cur.find_last_not_of(" \t") - b + 1));
        cur.clear();
    };
    for (char ch : s) {
        if (ch == ',')
            flush();
        else
            cur += ch;
    }
    flush();
    return out;
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    unsigned long long x = 0;
    try {
        if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
        x = std::stoull(v, &used);
    } catch (const std::logic_error&) {
        used = 0;
    }
    if (used == 0 || used != v.size()) throw UsageError(key + ": expected a non-negative integer, got '" + v + "'");
    return x;
}

inline double parse_double(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double x = 0;
    try {
        x = std::stod(v, &used);
    } catch (const std::logic_error&) {
        used = 0;
    }
    if (used == 0 || used != v.size() || !std::isfinite(x)) throw UsageError(key + ": expected a number, got '" + v + "'");
    return x;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw UsageError(key + ": expected a boolean, got '" + v + "'");
}

// ---- manifest ------------------------------------------------------------

/// Provenance of one produced artifact. The fingerprint covers everything
/// but the timestamps, so equal fingerprints mean equal inputs.
struct RunManifest {
    std::string kind;
    std::map<std::string, std::string> config;
    std::string corpus_fingerprint;
    std::uint64_t seed = 0;
    std::string tool_version{kToolVersion};
    std::string started_at;
    std::string finished_at;

    std::string fingerprint() const {
        nlohmann::json j = {{"kind", kind}, {"config", config}, {"corpus", corpus_fingerprint},
                            {"seed", seed}, {"tool_version", tool_version}};
        return hex64(fnv1a(j.dump()));
    }

    nlohmann::json to_json() const {
        return {{"kind", kind},
                {"config", config},
                {"corpus_fingerprint", corpus_fingerprint},
                {"seed", seed},
                {"tool_version", tool_version},
                {"started_at", started_at},
                {"finished_at", finished_at},
                {"fingerprint", fingerprint()}};
    }

    static RunManifest from_json(const nlohmann::json& j) {
        RunManifest m;
        m.kind = j.at("kind").get<std::string>();
        m.config = j.at("config").get<std::map<std::string, std::string>>();
        m.corpus_fingerprint = j.at("corpus_fingerprint").get<std::string>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.tool_version = j.at("tool_version").get<std::string>();
        m.started_at = j.value("started_at", "");
        m.finished_at = j.value("finished_at", "");
        return m;
    }
};

inline std::string manifest_path(const std::string& artifact) { return artifact + ".manifest.json"; }

inline void save_manifest(const std::string& path, const RunManifest& m) {
    write_file_atomic(path, m.to_json().dump(2) + "\n");
}

/// nullopt when missing or unreadable.
inline std::optional<RunManifest> try_load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) return std::nullopt;
    try {
        return RunManifest::from_json(nlohmann::json::parse(in));
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

// ---- preprocess ----------------------------------------------------------

struct PreprocessOptions {
    std::vector<std::string> inputs;  // files or directories
    std::string stopwords;            // path; empty = built-in list
    std::uint64_t min_count = 5;
    NormalizerMode normalizer = NormalizerMode::lowercase;
};

struct PreprocessResult {
    Vocabulary vocab;
    SentenceStream stream;
    RunManifest manifest;
};

/// Regular files under the inputs; directories expanded recursively, sorted.
inline std::vector<std::string> list_corpus_files(const std::vector<std::string>& inputs) {
    std::vector<std::string> out;
    for (const auto& in : inputs) {
        if (fs::is_directory(in)) {
            std::vector<std::string> found;
            for (const auto& e : fs::recursive_directory_iterator(in))
                if (e.is_regular_file()) found.push_back(e.path().string());
            std::sort(found.begin(), found.end());
            out.insert(out.end(), found.begin(), found.end());
        } else if (fs::is_regular_file(in)) {
            out.push_back(in);
        } else {
            throw Error("corpus input not found: " + in);
        }
    }
    if (out.empty()) throw Error("no corpus files");
    return out;
}

inline std::string content_fingerprint(const std::vector<std::string>& files) {
    Fnv1a h;
    for (const auto& f : files) {
        const auto bytes = read_file(f);
        h.update(std::to_string(bytes.size()));
        h.update(":");
        h.update(bytes);
    }
    return hex64(h.digest());
}

inline RunManifest preprocess_manifest(const PreprocessOptions& opt) {
    const auto files = list_corpus_files(opt.inputs);
    RunManifest m;
    m.kind = "preprocess";
    std::string names;
    for (const auto& f : files) names += (names.empty() ? "" : ",") + fs::path(f).filename().string();
    m.config = {{"inputs", names},
                {"min_count", std::to_string(opt.min_count)},
                {"normalizer", std::string(to_string(opt.normalizer))},
                {"stopwords", opt.stopwords.empty() ? "builtin" : "file:" + content_fingerprint({opt.stopwords})}};
    m.corpus_fingerprint = content_fingerprint(files);
    return m;
}

/// Two streaming passes: count, then encode.
inline PreprocessResult preprocess(const PreprocessOptions& opt) {
    if (opt.min_count < 1) throw UsageError("min_count must be >= 1");
    PreprocessResult r;
    r.manifest = preprocess_manifest(opt);
    r.manifest.started_at = utc_timestamp();
    const auto files = list_corpus_files(opt.inputs);
    const StopwordSet stop = opt.stopwords.empty() ? default_english_stopwords() : load_stopwords(opt.stopwords);

    VocabCounter counter;
    for (const auto& f : files) {
        std::ifstream in(f, std::ios::binary);
        if (!in) throw Error("cannot open " + f);
        for_each_sentence(in, stop, opt.normalizer, [&](Sentence&& s) { counter.add(s); });
    }
    r.vocab = counter.finish(opt.min_count);
    for (const auto& f : files) {
        std::ifstream in(f, std::ios::binary);
        for_each_sentence(in, stop, opt.normalizer, [&](Sentence&& s) {
            auto ids = encode_sentence(s, r.vocab);
            if (!ids.empty()) r.stream.sentences.push_back(std::move(ids));
        });
    }
    r.manifest.finished_at = utc_timestamp();
    return r;
}

struct CorpusDir {
    static std::string vocab(const std::string& dir) { return (fs::path(dir) / "vocab.txt").string(); }
    static std::string stream(const std::string& dir) { return (fs::path(dir) / "stream.txt").string(); }
    static std::string manifest(const std::string& dir) { return (fs::path(dir) / "manifest.json").string(); }
};

inline RunManifest run_preprocess(const PreprocessOptions& opt, const std::string& out_dir) {
    auto r = preprocess(opt);
    fs::create_directories(out_dir);
    save_vocab(CorpusDir::vocab(out_dir), r.vocab);
    save_stream(CorpusDir::stream(out_dir), r.stream);
    save_manifest(CorpusDir::manifest(out_dir), r.manifest);
    return r.manifest;
}

struct LoadedCorpus {
    Vocabulary vocab;
    SentenceStream stream;
    RunManifest manifest;
};

inline LoadedCorpus load_corpus_dir(const std::string& dir) {
    LoadedCorpus c;
    auto m = try_load_manifest(CorpusDir::manifest(dir));
    if (!m) throw Error("missing or unreadable manifest in " + dir + " (run preprocess first)");
    c.manifest = *m;
    c.vocab = load_vocab(CorpusDir::vocab(dir));
    c.stream = load_stream(CorpusDir::stream(dir), c.vocab.size());
    return c;
}

// ---- train ---------------------------------------------------------------

struct TrainOptions {
    std::string trainer = "sgns-sg";  // sgns-cbow | sgns-sg | glove
    std::size_t dim = 100;
    std::size_t window = 5;
    std::optional<std::size_t> epochs;
    std::optional<double> learning_rate;
    std::size_t negatives = 5;
    double noise_power = 0.75;
    double x_max = 100.0;
    double alpha = 0.75;
    bool distance_weighting = true;
    std::uint64_t seed = 1;
    std::size_t threads = 1;

    bool is_glove() const { return trainer == "glove"; }

    void validate() const {
        if (trainer != "sgns-cbow" && trainer != "sgns-sg" && trainer != "glove")
            throw UsageError("unknown method '" + trainer + "' (expected sgns-cbow, sgns-sg or glove)");
        if (is_glove())
            glove().validate();
        else
            sgns().validate();
    }

    SgnsConfig sgns() const {
        SgnsConfig c;
        c.method = trainer == "sgns-cbow" ? SgnsMethod::cbow : SgnsMethod::sg;
        c.dim = dim;
        c.window = window;
        c.negatives = negatives;
        c.noise_power = noise_power;
        if (epochs) c.epochs = *epochs;
        if (learning_rate) c.learning_rate = *learning_rate;
        c.seed = seed;
        c.threads = threads;
        return c;
    }

    GloveConfig glove() const {
        GloveConfig c;
        c.dim = dim;
        c.window = window;
        c.x_max = x_max;
        c.alpha = alpha;
        c.distance_weighting = distance_weighting;
        if (epochs) c.epochs = *epochs;
        if (learning_rate) c.learning_rate = *learning_rate;
        c.seed = seed;
        c.threads = threads;
        return c;
    }

    DualEmbedding::Metadata metadata() const { return is_glove() ? glove_metadata(glove()) : sgns_metadata(sgns()); }

    /// Applies one `key=value` setting. Unknown keys are usage errors.
    void set(const std::string& key, const std::string& v) {
        if (key == "method" || key == "trainer") trainer = v;
        else if (key == "dim") dim = parse_uint(key, v);
        else if (key == "window") window = parse_uint(key, v);
        else if (key == "epochs") epochs = parse_uint(key, v);
        else if (key == "lr" || key == "learning_rate") learning_rate = parse_double(key, v);
        else if (key == "negatives") negatives = parse_uint(key, v);
        else if (key == "noise_power") noise_power = parse_double(key, v);
        else if (key == "x_max") x_max = parse_double(key, v);
        else if (key == "alpha") alpha = parse_double(key, v);
        else if (key == "distance_weighting") distance_weighting = parse_bool(key, v);
        else if (key == "seed") seed = parse_uint(key, v);
        else if (key == "threads") threads = parse_uint(key, v);
        else throw UsageError("unknown training option '" + key + "'");
    }
};

/// Manifest of a training run; `threads` is part of it because only
/// single-threaded runs are reproducible.
inline RunManifest train_manifest(const TrainOptions& opt, const RunManifest& corpus) {
    RunManifest m;
    m.kind = "train";
    m.config = opt.metadata();
    m.config["normalizer"] = corpus.config.count("normalizer") ? corpus.config.at("normalizer") : "lowercase";
    m.corpus_fingerprint = corpus.fingerprint();
    m.seed = opt.seed;
    return m;
}

inline DualEmbedding train(const LoadedCorpus& corpus, const TrainOptions& opt, TrainingLog* log = nullptr) {
    opt.validate();
    const auto manifest = train_manifest(opt, corpus.manifest);
    DualEmbedding emb = [&] {
        if (opt.is_glove()) {
            const auto cooc = accumulate_cooc(corpus.stream, corpus.vocab.size(), opt.window, opt.distance_weighting,
                                              opt.threads);
            return train_glove(cooc, corpus.vocab, opt.glove(), log);
        }
        return train_sgns(corpus.stream, corpus.vocab, opt.sgns(), log);
    }();
    auto meta = emb.metadata();
    meta["corpus"] = manifest.corpus_fingerprint;
    meta["manifest"] = manifest.fingerprint();
    meta["normalizer"] = manifest.config.at("normalizer");
    meta["tool_version"] = std::string(kToolVersion);
    emb.set_metadata(std::move(meta));
    return emb;
}

/// Trains and writes `out_path` plus its sidecar manifest.
inline RunManifest run_train(const std::string& corpus_dir, const TrainOptions& opt, const std::string& out_path) {
    opt.validate();
    const auto corpus = load_corpus_dir(corpus_dir);
    auto manifest = train_manifest(opt, corpus.manifest);
    manifest.started_at = utc_timestamp();
    const auto emb = train(corpus, opt);
    if (auto parent = fs::path(out_path).parent_path(); !parent.empty()) fs::create_directories(parent);
    const std::string tmp = out_path + ".tmp";
    save_embedding(tmp, emb);
    fs::rename(tmp, out_path);
    manifest.finished_at = utc_timestamp();
    save_manifest(manifest_path(out_path), manifest);
    return manifest;
}

// ---- eval ----------------------------------------------------------------

struct EvalOptions {
    Task task = Task::similarity;
    CompareMethod compare = CompareMethod::WW;
    std::string dataset;                  // file, or BATS directory for analogy
    std::optional<std::size_t> top_n;     // 10 for association, 3 for analogy
    double min_strength = 0.10;
    double epsilon = 0.001;
    bool shift = true;
    std::size_t sample = 0;               // analogy: 0 = all questions
    std::uint64_t seed = 1;
    std::size_t threads = 1;
    std::optional<NormalizerMode> normalizer;  // default: the embedding's
};

inline std::string dataset_name(const std::string& path) {
    auto p = fs::path(path);
    if (p.filename().empty()) p = p.parent_path();
    return p.stem().string();
}

inline TaskScore evaluate(const DualEmbedding& emb, const EvalOptions& opt) {
    NormalizerMode mode = NormalizerMode::lowercase;
    if (opt.normalizer)
        mode = *opt.normalizer;
    else if (auto it = emb.metadata().find("normalizer"); it != emb.metadata().end())
        mode = parse_normalizer(it->second);
    switch (opt.task) {
        case Task::similarity:
            return eval_similarity(emb, opt.compare, parse_similarity(opt.dataset, mode));
        case Task::association:
            return eval_association(emb, opt.compare, parse_association(opt.dataset, opt.min_strength, mode),
                                    opt.top_n.value_or(10));
        case Task::analogy: {
            auto qs = fs::is_directory(opt.dataset) ? bats_join(parse_bats_dir(opt.dataset, mode), opt.seed)
                                                    : parse_analogy(opt.dataset, mode);
            if (opt.sample > 0) qs = sample_questions(qs, opt.sample, opt.seed);
            AnalogyOptions ao;
            ao.epsilon = opt.epsilon;
            ao.shift = opt.shift;
            return eval_analogy(emb, opt.compare, qs, opt.top_n.value_or(3), ao, opt.threads);
        }
    }
    throw UsageError("unknown task");
}

inline std::string meta_or(const DualEmbedding& emb, const std::string& key, const std::string& fallback) {
    auto it = emb.metadata().find(key);
    return it == emb.metadata().end() ? fallback : it->second;
}

inline ResultRecord make_record(const DualEmbedding& emb, const std::string& model, const std::string& embedding_ref,
                                const EvalOptions& opt, const TaskScore& score) {
    ResultRecord r;
    r.model = model;
    r.trainer = meta_or(emb, "trainer", "unknown");
    r.window = static_cast<std::size_t>(std::stoull(meta_or(emb, "window", "0")));
    r.dim = emb.dim();
    r.compare = opt.compare;
    r.task = opt.task;
    r.dataset = dataset_name(opt.dataset);
    r.value = score.value;
    r.aux = score.aux;
    r.manifest = meta_or(emb, "manifest", "");
    r.embedding = embedding_ref;
    return r;
}

/// Evaluates and appends one line to `results_path`.
inline ResultRecord run_eval(const std::string& embedding_path, const EvalOptions& opt,
                             const std::string& results_path) {
    const auto emb = load_embedding(embedding_path);
    const auto score = evaluate(emb, opt);
    auto rec = make_record(emb, fs::path(embedding_path).stem().string(), embedding_path, opt, score);
    append_line(results_path, rec.line());
    return rec;
}

// ---- report --------------------------------------------------------------

/// Reads `results_path`, writes report.md, report.csv and report.manifest.json.
inline ReportGrid run_report(const std::string& results_path, const std::string& out_dir) {
    const auto records = load_results(results_path);
    const auto grid = build_grid(records);
    fs::create_directories(out_dir);
    RunManifest m;
    m.kind = "report";
    m.started_at = utc_timestamp();
    m.corpus_fingerprint = hex64(fnv1a(read_file(results_path)));
    m.config = {{"results", fs::path(results_path).filename().string()}, {"records", std::to_string(records.size())}};
    write_file_atomic((fs::path(out_dir) / "report.md").string(), render(grid, ReportFormat::markdown));
    write_file_atomic((fs::path(out_dir) / "report.csv").string(), render(grid, ReportFormat::csv));
    m.finished_at = utc_timestamp();
    save_manifest((fs::path(out_dir) / "report.manifest.json").string(), m);
    return grid;
}

// ---- sweep ---------------------------------------------------------------

struct SweepGrid {
    PreprocessOptions corpus;
    std::vector<std::string> trainers;
    std::vector<std::size_t> windows;
    std::vector<std::size_t> dims;
    std::vector<CompareMethod> compare;
    std::map<Task, std::vector<std::string>> datasets;
    TrainOptions sgns_defaults;
    TrainOptions glove_defaults;
    EvalOptions association;
    EvalOptions analogy;
    std::uint64_t seed = 1;
    std::size_t threads = 1;

    void validate() const {
        if (corpus.inputs.empty()) throw UsageError("sweep: no corpus");
        if (trainers.empty() || windows.empty() || dims.empty() || compare.empty())
            throw UsageError("sweep: empty grid (trainers, windows, dims and compare must be non-empty)");
        std::size_t n = 0;
        for (const auto& [t, d] : datasets) n += d.size();
        if (n == 0) throw UsageError("sweep: no evaluation datasets");
        for (const auto& t : trainers) {
            TrainOptions o;
            o.trainer = t;
            o.validate();
        }
    }
};

/// Grid file keys (relative paths resolve against the file's directory):
///   corpus, stopwords, min_count, normalizer,
///   trainers, windows, dims, compare, seed, threads,
///   similarity, association, analogy            (dataset lists)
///   sgns.<option>, glove.<option>                (training options)
///   association.top_n, association.min_strength,
///   analogy.top_n, analogy.sample, analogy.epsilon, analogy.shift
inline SweepGrid parse_sweep_grid(const std::map<std::string, std::string>& kv, const fs::path& base) {
    SweepGrid g;
    auto resolve = [&](const std::string& p) { return fs::path(p).is_absolute() ? p : (base / p).lexically_normal().string(); };
    for (const auto& [key, v] : kv) {
        if (key == "corpus") {
            for (const auto& p : split_list(v)) g.corpus.inputs.push_back(resolve(p));
        } else if (key == "stopwords") {
            g.corpus.stopwords = v.empty() || v == "builtin" ? "" : resolve(v);
        } else if (key == "min_count") {
            g.corpus.min_count = parse_uint(key, v);
        } else if (key == "normalizer") {
            g.corpus.normalizer = parse_normalizer(v);
        } else if (key == "trainers") {
            g.trainers = split_list(v);
        } else if (key == "windows") {
            for (const auto& x : split_list(v)) g.windows.push_back(parse_uint(key, x));
        } else if (key == "dims") {
            for (const auto& x : split_list(v)) g.dims.push_back(parse_uint(key, x));
        } else if (key == "compare") {
            for (const auto& x : split_list(v)) g.compare.push_back(parse_compare_method(x));
        } else if (key == "seed") {
            g.seed = parse_uint(key, v);
        } else if (key == "threads") {
            g.threads = parse_uint(key, v);
        } else if (key == "similarity" || key == "association" || key == "analogy") {
            for (const auto& p : split_list(v)) g.datasets[parse_task(key)].push_back(resolve(p));
        } else if (key.starts_with("sgns.")) {
            g.sgns_defaults.set(key.substr(5), v);
        } else if (key.starts_with("glove.")) {
            g.glove_defaults.set(key.substr(6), v);
        } else if (key == "association.top_n") {
            g.association.top_n = parse_uint(key, v);
        } else if (key == "association.min_strength") {
            g.association.min_strength = parse_double(key, v);
        } else if (key == "analogy.top_n") {
            g.analogy.top_n = parse_uint(key, v);
        } else if (key == "analogy.sample") {
            g.analogy.sample = parse_uint(key, v);
        } else if (key == "analogy.epsilon") {
            g.analogy.epsilon = parse_double(key, v);
        } else if (key == "analogy.shift") {
            g.analogy.shift = parse_bool(key, v);
        } else {
            throw UsageError("sweep: unknown key '" + key + "'");
        }
    }
    return g;
}

inline SweepGrid load_sweep_grid(const std::string& path) {
    return parse_sweep_grid(load_key_values(path), fs::path(path).parent_path());
}

struct SweepSummary {
    std::size_t trained = 0, reused = 0, evaluated = 0, skipped = 0;
};

inline std::string cell_id(const std::string& trainer, std::size_t window, std::size_t dim) {
    return trainer + "_w" + std::to_string(window) + "_d" + std::to_string(dim);
}

/// Runs every (trainer, window, dim) cell and every (compare, task, dataset)
/// evaluation. Artifacts whose manifest matches are reused, results lines
/// already present for the same manifest are not recomputed.
///   out/corpus/{vocab.txt,stream.txt,manifest.json}
///   out/models/<cell>.demb (+ .manifest.json)
///   out/results.jsonl, out/report.md, out/report.csv
inline SweepSummary run_sweep(SweepGrid grid, const std::string& out_dir, std::ostream* progress = nullptr) {
    grid.validate();
    SweepSummary sum;
    const fs::path out(out_dir);
    fs::create_directories(out / "models");
    auto say = [&](const std::string& s) {
        if (progress) *progress << s << '\n' << std::flush;
    };

    const std::string corpus_dir = (out / "corpus").string();
    const auto want = preprocess_manifest(grid.corpus);
    auto have = try_load_manifest(CorpusDir::manifest(corpus_dir));
    if (!have || have->fingerprint() != want.fingerprint() || !fs::exists(CorpusDir::stream(corpus_dir))) {
        say("preprocess");
        run_preprocess(grid.corpus, corpus_dir);
    } else {
        say("preprocess: up to date");
    }
    const auto corpus = load_corpus_dir(corpus_dir);

    const std::string results_path = (out / "results.jsonl").string();
    std::set<std::tuple<ModelKey, Task, std::string, std::string>> done;
    if (fs::exists(results_path) && fs::file_size(results_path) > 0)
        for (const auto& r : load_results(results_path)) done.insert({r.key(), r.task, r.dataset, r.manifest});

    for (const auto& trainer : grid.trainers)
        for (auto window : grid.windows)
            for (auto dim : grid.dims) {
                TrainOptions opt = trainer == "glove" ? grid.glove_defaults : grid.sgns_defaults;
                opt.trainer = trainer;
                opt.window = window;
                opt.dim = dim;
                opt.seed = grid.seed;
                opt.threads = grid.threads;
                const auto id = cell_id(trainer, window, dim);
                const std::string rel = "models/" + id + ".demb";
                const std::string path = (out / rel).string();
                const auto manifest = train_manifest(opt, corpus.manifest);
                auto prior = try_load_manifest(manifest_path(path));
                std::optional<DualEmbedding> emb;
                if (prior && prior->fingerprint() == manifest.fingerprint() && fs::exists(path)) {
                    say("train " + id + ": up to date");
                    ++sum.reused;
                } else {
                    say("train " + id);
                    auto m = manifest;
                    m.started_at = utc_timestamp();
                    emb = train(corpus, opt);
                    save_embedding(path + ".tmp", *emb);
                    fs::rename(path + ".tmp", path);
                    m.finished_at = utc_timestamp();
                    save_manifest(manifest_path(path), m);
                    ++sum.trained;
                }
                const auto fp = manifest.fingerprint();
                for (auto cm : grid.compare)
                    for (const auto& [task, sets] : grid.datasets)
                        for (const auto& ds : sets) {
                            EvalOptions eo = task == Task::association ? grid.association
                                             : task == Task::analogy   ? grid.analogy
                                                                       : EvalOptions{};
                            eo.task = task;
                            eo.compare = cm;
                            eo.dataset = ds;
                            eo.seed = grid.seed;
                            eo.threads = grid.threads;
                            const ModelKey key{trainer, cm, window, dim};
                            if (done.count({key, task, dataset_name(ds), fp})) {
                                ++sum.skipped;
                                continue;
                            }
                            if (!emb) emb = load_embedding(path);
                            const auto score = evaluate(*emb, eo);
                            const auto rec = make_record(*emb, id, rel, eo, score);
                            append_line(results_path, rec.line());
                            done.insert({key, task, rec.dataset, fp});
                            ++sum.evaluated;
                            say("eval " + id + " " + std::string(to_string(cm)) + " " +
                                std::string(to_string(task)) + " " + rec.dataset + " = " + detail::fmt3(rec.value));
                        }
            }
    run_report(results_path, out_dir);
    say("report: " + (out / "report.md").string());
    return sum;
}

}  // namespace dualspace
