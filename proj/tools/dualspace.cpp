// dualspace: preprocess, train, eval, sweep, report, convert.
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dualspace/convert.hpp"
#include "dualspace/pipeline.hpp"

namespace ds = dualspace;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

template <typename T>
void set_if(std::optional<T>& dst, const std::optional<T>& src) {
    if (src) dst = src;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Train and evaluate dual-space word embeddings"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(ds::kToolVersion));
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "Suppress warnings and progress");

    // preprocess
    auto* pre = app.add_subcommand("preprocess", "Tokenize a corpus into vocab.txt and stream.txt");
    pre->set_config("--config", "", "key=value config file");
    ds::PreprocessOptions pre_opt;
    std::string pre_out, pre_norm = "lowercase";
    pre->add_option("-i,--input", pre_opt.inputs, "Corpus files or directories")->required();
    pre->add_option("--stopwords", pre_opt.stopwords, "Stopword file (default: built-in English list)");
    pre->add_option("--min-count", pre_opt.min_count, "Minimum token frequency")->capture_default_str();
    pre->add_option("--normalizer", pre_norm, "none, lowercase or lowercase+suffix-strip")->capture_default_str();
    pre->add_option("-o,--out", pre_out, "Output directory")->required();

    // train
    auto* tr = app.add_subcommand("train", "Train one embedding from a preprocessed corpus");
    tr->set_config("--config", "", "key=value config file");
    ds::TrainOptions tr_opt;
    std::string tr_corpus, tr_out;
    std::optional<std::size_t> tr_epochs, tr_threads;
    std::optional<double> tr_lr;
    bool no_dw = false;
    tr->add_option("-c,--corpus", tr_corpus, "Preprocessed corpus directory")->required();
    tr->add_option("-m,--method", tr_opt.trainer, "sgns-cbow, sgns-sg or glove")->capture_default_str();
    tr->add_option("--dim", tr_opt.dim)->capture_default_str();
    tr->add_option("--window", tr_opt.window)->capture_default_str();
    tr->add_option("--epochs", tr_epochs, "Default 5 (sgns) or 25 (glove)");
    tr->add_option("--lr", tr_lr, "Default 0.025 (sgns) or 0.05 (glove)");
    tr->add_option("--negatives", tr_opt.negatives)->capture_default_str();
    tr->add_option("--noise-power", tr_opt.noise_power)->capture_default_str();
    tr->add_option("--x-max", tr_opt.x_max)->capture_default_str();
    tr->add_option("--alpha", tr_opt.alpha)->capture_default_str();
    tr->add_flag("--no-distance-weighting", no_dw, "GloVe: count every window position as 1");
    tr->add_option("--seed", tr_opt.seed)->capture_default_str();
    tr->add_option("--threads", tr_threads, "Worker threads (default 1 or DUALSPACE_THREADS)");
    tr->add_option("-o,--out", tr_out, "Output embedding file")->required();

    // eval
    auto* ev = app.add_subcommand("eval", "Score an embedding and append a result line");
    ev->set_config("--config", "", "key=value config file");
    ds::EvalOptions ev_opt;
    std::string ev_emb, ev_task, ev_results = "results.jsonl", ev_norm;
    std::vector<std::string> ev_compare{"WW"};
    std::optional<std::size_t> ev_top, ev_threads;
    bool no_shift = false;
    ev->add_option("-e,--embedding", ev_emb, "DUALEMB file")->required();
    ev->add_option("-t,--task", ev_task, "similarity, association or analogy")->required();
    ev->add_option("--compare", ev_compare, "Compare methods (WW WC CW CC SS AA)")->delimiter(',')->capture_default_str();
    ev->add_option("-d,--dataset", ev_opt.dataset, "Dataset file (or BATS directory)")->required();
    ev->add_option("-r,--results", ev_results, "Results file to append to")->capture_default_str();
    ev->add_option("--top-n", ev_top, "Neighbors considered (default 10 association, 3 analogy)");
    ev->add_option("--min-strength", ev_opt.min_strength, "Association pruning threshold")->capture_default_str();
    ev->add_option("--epsilon", ev_opt.epsilon, "3COSMUL epsilon")->capture_default_str();
    ev->add_flag("--no-shift", no_shift, "3COSMUL on raw cosines");
    ev->add_option("--sample", ev_opt.sample, "Analogy: evaluate a seeded sample of N questions");
    ev->add_option("--seed", ev_opt.seed)->capture_default_str();
    ev->add_option("--normalizer", ev_norm, "Dataset token normalizer (default: the embedding's)");
    ev->add_option("--threads", ev_threads);

    // sweep
    auto* sw = app.add_subcommand("sweep", "Train and evaluate a whole grid, then report");
    std::string sw_grid, sw_out;
    std::optional<std::uint64_t> sw_seed;
    std::optional<std::size_t> sw_threads;
    sw->add_option("grid", sw_grid, "Grid config file (key=value)")->required()->check(CLI::ExistingFile);
    sw->add_option("-o,--out", sw_out, "Output directory")->required();
    sw->add_option("--seed", sw_seed, "Override the grid seed");
    sw->add_option("--threads", sw_threads, "Override the grid thread count");

    // report
    auto* rp = app.add_subcommand("report", "Consolidate a results file into report.md and report.csv");
    std::string rp_results, rp_out;
    rp->add_option("-r,--results", rp_results)->required();
    rp->add_option("-o,--out", rp_out, "Output directory")->required();

    // convert
    auto* cv = app.add_subcommand("convert", "Convert SimLex/WordSim/SWOW/EAT files to canonical TSV");
    std::string cv_fmt, cv_in, cv_out;
    cv->add_option("-f,--format", cv_fmt, "simlex, wordsim, swow or eat")->required();
    cv->add_option("-i,--input", cv_in)->required();
    cv->add_option("-o,--out", cv_out)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        ds::set_quiet(quiet);
        std::ostream* progress = quiet ? nullptr : &std::cerr;
        if (*pre) {
            pre_opt.normalizer = ds::parse_normalizer(pre_norm);
            const auto m = ds::run_preprocess(pre_opt, pre_out);
            std::cout << m.to_json().dump() << '\n';
        } else if (*tr) {
            tr_opt.epochs = tr_epochs;
            tr_opt.learning_rate = tr_lr;
            tr_opt.distance_weighting = !no_dw;
            tr_opt.threads = tr_threads.value_or(ds::default_threads());
            const auto m = ds::run_train(tr_corpus, tr_opt, tr_out);
            std::cout << m.to_json().dump() << '\n';
        } else if (*ev) {
            ev_opt.task = ds::parse_task(ev_task);
            set_if(ev_opt.top_n, ev_top);
            ev_opt.shift = !no_shift;
            ev_opt.threads = ev_threads.value_or(ds::default_threads());
            if (!ev_norm.empty()) ev_opt.normalizer = ds::parse_normalizer(ev_norm);
            std::vector<ds::CompareMethod> methods;
            for (const auto& c : ev_compare) methods.push_back(ds::parse_compare_method(c));
            const auto emb = ds::load_embedding(ev_emb);
            for (auto cm : methods) {
                ev_opt.compare = cm;
                const auto score = ds::evaluate(emb, ev_opt);
                const auto rec = ds::make_record(emb, std::filesystem::path(ev_emb).stem().string(), ev_emb, ev_opt,
                                                 score);
                ds::append_line(ev_results, rec.line());
                std::cout << rec.line() << '\n';
            }
        } else if (*sw) {
            auto grid = ds::load_sweep_grid(sw_grid);
            if (sw_seed) grid.seed = *sw_seed;
            grid.threads = sw_threads.value_or(grid.threads == 1 ? ds::default_threads() : grid.threads);
            const auto s = ds::run_sweep(grid, sw_out, progress);
            std::cout << "trained " << s.trained << ", reused " << s.reused << ", evaluated " << s.evaluated
                      << ", skipped " << s.skipped << '\n';
        } else if (*rp) {
            const auto grid = ds::run_report(rp_results, rp_out);
            std::cout << ds::render(grid, ds::ReportFormat::markdown);
        } else if (*cv) {
            const auto text = ds::convert_dataset(cv_in, ds::parse_source_format(cv_fmt));
            ds::write_file_atomic(cv_out, text);
        }
    } catch (const ds::UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return 0;
}
