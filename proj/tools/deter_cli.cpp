// deter: command-line front end for the out-of-scope detection pipeline.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "deter/checkpoint.hpp"
#include "deter/error.hpp"
#include "deter/ini.hpp"
#include "deter/io.hpp"
#include "deter/pipeline.hpp"

namespace fs = std::filesystem;
using namespace deter;

namespace {

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = "deter-out";
    std::size_t threads = 0;
    bool deterministic = false;
    std::string ablation;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorKind::invalid_input, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << text;
    require(static_cast<bool>(out), ErrorKind::invalid_input, "cannot write " + path.string());
}

PipelineConfig load_config(const Globals& g) {
    if (g.config.empty()) return parse_pipeline_config("", "", "defaults");
    return read_pipeline_config(g.config);
}

bool ablation_on(const Globals& g, const PipelineConfig& cfg) {
    if (g.ablation.empty()) return cfg.ablation;
    require(g.ablation == "no-threshold", ErrorKind::configuration,
            "unknown ablation '" + g.ablation + "' (expected no-threshold)");
    return true;
}

std::uint64_t run_seed(const Globals& g, const PipelineConfig& cfg) { return g.seed.value_or(cfg.seeds.front()); }

double read_threshold_file(const std::string& path) {
    std::istringstream in(slurp(path));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        return parse_double(line, path);
    }
    fail(ErrorKind::format, path + ": no threshold value");
}

std::string sources_tsv(const OutlierBatch& b) {
    std::ostringstream out;
    out << "id\tprovenance\talpha_id\tbeta_id\talpha_label\tbeta_label\ttheta\n";
    for (const auto& r : b.rows) {
        out << r.id << '\t' << to_string(r.provenance) << '\t' << r.alpha_id << '\t' << r.beta_id << '\t'
            << r.alpha_label << '\t' << r.beta_label << '\t' << format_double(r.theta) << '\n';
    }
    return out.str();
}

// Every report.json / report_model_only.json below the given paths, sorted.
std::vector<fs::path> find_reports(const std::vector<std::string>& roots) {
    std::vector<fs::path> found;
    for (const auto& root : roots) {
        if (fs::is_regular_file(root)) {
            found.emplace_back(root);
            continue;
        }
        require(fs::is_directory(root), ErrorKind::invalid_input, "no such file or directory: " + root);
        for (const auto& e : fs::recursive_directory_iterator(root)) {
            const auto name = e.path().filename().string();
            if (e.is_regular_file() && (name == "report.json" || name == "report_model_only.json")) {
                found.push_back(e.path());
            }
        }
    }
    std::sort(found.begin(), found.end());
    return found;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deter: out-of-scope intent detection on sentence embeddings"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--config", g.config, "INI config file")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "Run seed (overrides [experiment] seeds)");
    app.add_option("--out", g.out, "Output directory")->capture_default_str();
    app.add_option("--threads", g.threads, "Worker threads for independent runs (0 = config)");
    app.add_flag("--deterministic", g.deterministic, "Run everything sequentially");
    app.add_option("--ablation", g.ablation, "Ablation variant: no-threshold");

    // gen-toy
    auto* gen = app.add_subcommand("gen-toy", "Write a synthetic clustered corpus ([toy] section)");

    // split
    auto* split = app.add_subcommand("split", "Select known intents and build train/val/test");
    std::optional<double> split_ratio;
    split->add_option("--ratio", split_ratio, "Known intent ratio (default: first configured ratio)");

    // synth
    auto* synth = app.add_subcommand("synth", "Generate synthetic outliers from a dataset's inliers");
    std::string synth_input;
    std::optional<std::size_t> synth_count;
    synth->add_option("--input", synth_input, "Dataset manifest")->required()->check(CLI::ExistingFile);
    synth->add_option("--count", synth_count, "Rows to generate (default: [outliers] synthetic)");

    // train
    auto* train = app.add_subcommand("train", "Train the classifier with early stopping");
    std::string train_manifest, val_manifest;
    train->add_option("--train", train_manifest, "Training manifest")->required()->check(CLI::ExistingFile);
    train->add_option("--val", val_manifest, "Validation manifest")->required()->check(CLI::ExistingFile);

    // calibrate
    auto* calib = app.add_subcommand("calibrate", "Choose the confidence threshold on validation data");
    std::string calib_model, calib_val;
    calib->add_option("--model", calib_model, "Model checkpoint")->required()->check(CLI::ExistingFile);
    calib->add_option("--val", calib_val, "Validation manifest")->required()->check(CLI::ExistingFile);

    // eval
    auto* eval = app.add_subcommand("eval", "Evaluate a model on a test set");
    std::string eval_model, eval_test, eval_threshold_file;
    std::optional<double> eval_threshold, eval_ratio;
    eval->add_option("--model", eval_model, "Model checkpoint")->required()->check(CLI::ExistingFile);
    eval->add_option("--test", eval_test, "Test manifest")->required()->check(CLI::ExistingFile);
    auto* t_opt = eval->add_option("--threshold", eval_threshold, "Threshold T");
    eval->add_option("--threshold-file", eval_threshold_file, "threshold.txt written by calibrate")
        ->check(CLI::ExistingFile)
        ->excludes(t_opt);
    eval->add_option("--ratio", eval_ratio, "Ratio recorded in the report");

    // report
    auto* report = app.add_subcommand("report", "Aggregate report.json files into summary tables");
    std::vector<std::string> report_inputs;
    report->add_option("inputs", report_inputs, "Run directories or report files")->required();

    // run
    auto* run = app.add_subcommand("run", "Full pipeline over every configured ratio and seed");

    CLI11_PARSE(app, argc, argv);

    try {
        const PipelineConfig cfg = load_config(g);
        const fs::path out(g.out);

        if (*gen) {
            require(cfg.toy.has_value(), ErrorKind::configuration, "gen-toy needs a [toy] section in --config");
            ToyGenConfig tc = *cfg.toy;
            if (g.seed) tc.seed = *g.seed;
            const auto files = write_toy(tc, out.string());
            std::cout << files.manifest << "\n";
            if (!files.open_domain_manifest.empty()) std::cout << files.open_domain_manifest << "\n";
        } else if (*split) {
            const auto inputs = load_inputs(cfg);
            const double ratio = split_ratio.value_or(cfg.ratios.front());
            const auto seed = run_seed(g, cfg);
            const auto plan = make_plan(cfg, inputs, ratio, seed);
            const auto bundle = split_stage(cfg, inputs, plan);
            spit(out / "plan.ini", format_plan(plan));
            spit(out / "label_remap.tsv", format_label_remap(bundle, inputs.full.label_map));
            save_dataset(bundle.train, out.string(), "train", SplitTag::train);
            save_dataset(bundle.val, out.string(), "val", SplitTag::val);
            save_dataset(bundle.test, out.string(), "test", SplitTag::test);
            std::cout << "known=" << plan.known_intents.size() << " unknown=" << plan.unknown_intents.size()
                      << " train=" << bundle.train.size() << " val=" << bundle.val.size()
                      << " test=" << bundle.test.size() << "\n";
        } else if (*synth) {
            const auto ds = load_dataset(synth_input);
            SynthConfig sc = synth_config(cfg);
            if (synth_count) sc.count = *synth_count;
            sc.seed = run_seed(g, cfg);
            const auto batch = generate_synthetic(ds, sc);
            save_dataset(merge_outliers(ds.empty_like(), {batch}), out.string(), "synthetic", SplitTag::train);
            spit(out / "synthetic_sources.tsv", sources_tsv(batch));
            std::cout << "synthetic=" << batch.size() << "\n";
        } else if (*train) {
            const auto tr = load_dataset(train_manifest);
            const auto va = load_dataset(val_manifest);
            require(tr.label_map == va.label_map, ErrorKind::invalid_input,
                    "train and val manifests declare different intents");
            const auto result = train_stage(cfg, tr, va, run_seed(g, cfg));
            fs::create_directories(out);
            save_model(result.model, (out / "model.detm").string());
            spit(out / "history.tsv", format_history(result.history));
            std::cout << "best_epoch=" << result.history.best_epoch
                      << " stopped_epoch=" << result.history.stopped_epoch << " val_accuracy="
                      << format_double(result.history.val_accuracy[result.history.best_epoch - 1]) << "\n";
        } else if (*calib) {
            const auto model = load_model(calib_model);
            const auto va = load_dataset(calib_val);
            const auto result = calibrate(model, va, cfg.threshold);
            spit(out / "threshold.txt", format_double(result.T) + "\n");
            spit(out / "threshold_curve.tsv", format_curve(result));
            std::cout << "T=" << format_double(result.T) << " objective=" << format_double(result.objective) << "\n";
        } else if (*eval) {
            const auto model = load_model(eval_model);
            const auto te = load_dataset(eval_test);
            double T = cfg.threshold.T;
            if (eval_threshold) T = *eval_threshold;
            if (!eval_threshold_file.empty()) T = read_threshold_file(eval_threshold_file);
            const auto probs = predict_probs(model, te);
            const auto n = te.label_map.n_classes();
            RunMeta meta{cfg.dataset_name, eval_ratio.value_or(cfg.ratios.front()), run_seed(g, cfg), "with_threshold"};
            const auto rep = evaluate(te.labels, reclassify_rows(probs, T), n, T, meta);
            spit(out / "report.json", report_to_json(rep));
            std::cout << "known=" << format_double(rep.macro_f1_known) << " unknown=" << format_double(rep.f1_unknown)
                      << " T=" << format_double(T) << "\n";
            if (ablation_on(g, cfg)) {
                meta.variant = "model_only";
                const auto base = evaluate(te.labels, reclassify_rows(probs, 0.0), n, 0.0, meta);
                spit(out / "report_model_only.json", report_to_json(base));
                std::cout << "model_only known=" << format_double(base.macro_f1_known)
                          << " unknown=" << format_double(base.f1_unknown) << "\n";
            }
        } else if (*report) {
            std::vector<EvalReport> reports;
            for (const auto& p : find_reports(report_inputs)) reports.push_back(report_from_json(slurp(p.string())));
            require(!reports.empty(), ErrorKind::invalid_input, "no report.json files found");
            const auto summaries = summarize_runs(reports);
            spit(out / "summary.json", summaries_to_json(summaries));
            const auto table = render_table(summaries);
            spit(out / "summary.md", table);
            std::cout << table;
        } else if (*run) {
            RunOptions opts;
            opts.threads = g.deterministic ? 1 : (g.threads > 0 ? g.threads : cfg.threads);
            opts.deterministic = g.deterministic;
            opts.seed = g.seed;
            if (!g.ablation.empty()) opts.ablation = ablation_on(g, cfg);
            const std::string text = g.config.empty() ? std::string() : slurp(g.config);
            const auto result = run_pipeline(cfg, text, out.string(), opts);
            std::size_t failed = 0;
            for (const auto& r : result.runs) {
                if (!r.ok) {
                    ++failed;
                    std::cerr << "run ratio=" << format_double(r.ratio) << " seed=" << r.seed << " failed: " << r.error
                              << "\n";
                }
            }
            if (!result.summaries.empty()) std::cout << render_table(result.summaries);
            if (failed == result.runs.size()) return 1;
        }
    } catch (const Error& e) {
        std::cerr << "deter: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "deter: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
