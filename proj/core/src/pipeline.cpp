#include "deter/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <mutex>
#include <sstream>
#include <thread>

#include "binary.hpp"
#include "deter/checkpoint.hpp"
#include "deter/error.hpp"
#include "deter/ini.hpp"
#include "deter/io.hpp"
#include "deter/rng.hpp"
#include "json.hpp"

namespace deter {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// ============================================================================
// Config
// ============================================================================

namespace {

std::string resolve_path(const std::string& base_dir, const std::string& p) {
    if (p.empty()) return p;
    const fs::path path(p);
    return path.is_absolute() || base_dir.empty() ? p : (fs::path(base_dir) / path).string();
}

std::vector<std::size_t> to_sizes(const std::vector<std::uint64_t>& v) { return {v.begin(), v.end()}; }

ToyGenConfig parse_toy_section(IniDocument& doc) {
    ToyGenConfig t;
    const std::string s = "toy";
    if (auto v = doc.take_u64(s, "n_intents")) t.n_intents = *v;
    if (auto v = doc.take_u64(s, "train_per_intent")) t.train_per_intent = *v;
    if (auto v = doc.take_u64(s, "val_per_intent")) t.val_per_intent = *v;
    if (auto v = doc.take_u64(s, "test_per_intent")) t.test_per_intent = *v;
    if (auto v = doc.take_u64(s, "d_tsdae")) t.d_tsdae = *v;
    if (auto v = doc.take_u64(s, "d_use")) t.d_use = *v;
    if (auto v = doc.take_double(s, "separation")) t.separation = *v;
    if (auto v = doc.take_double(s, "sigma")) t.sigma = *v;
    if (auto v = doc.take_u64(s, "external_oos")) t.external_oos = *v;
    if (auto v = doc.take_u64(s, "open_domain")) t.open_domain = *v;
    if (auto v = doc.take_u64(s, "max_retries")) t.max_retries = *v;
    if (auto v = doc.take_u64(s, "seed")) t.seed = *v;
    return t;
}

}  // namespace

PipelineConfig parse_pipeline_config(const std::string& text, const std::string& base_dir, const std::string& source) {
    auto doc = IniDocument::parse(text, source);
    PipelineConfig c;

    c.dataset_name = doc.take_or("data", "dataset_name", c.dataset_name);
    c.manifest = resolve_path(base_dir, doc.take_or("data", "manifest", ""));
    c.external_oos_manifest = resolve_path(base_dir, doc.take_or("data", "external_oos_manifest", ""));
    c.open_domain_manifest = resolve_path(base_dir, doc.take_or("data", "open_domain_manifest", ""));
    c.known_intents_file = resolve_path(base_dir, doc.take_or("data", "known_intents_file", ""));

    if (auto v = doc.take_doubles("experiment", "ratios")) c.ratios = *v;
    if (auto v = doc.take_u64s("experiment", "seeds")) c.seeds = *v;
    if (auto v = doc.take("experiment", "val_oos_source")) {
        const auto parsed = parse_val_oos_source(*v);
        require(parsed.has_value(), ErrorKind::configuration, source + ": unknown val_oos_source '" + *v + "'");
        c.val_oos_source = *parsed;
    }
    if (auto v = doc.take_bool("experiment", "unknown_train_to_val")) c.unknown_train_to_val = *v;

    if (auto v = doc.take_u64("outliers", "synthetic")) c.synthetic = *v;
    if (auto v = doc.take_u64("outliers", "open_domain")) c.open_domain = *v;
    if (auto v = doc.take_u64("outliers", "val_synthetic")) c.val_synthetic = *v;
    if (auto v = doc.take_u64("outliers", "val_open_domain")) c.val_open_domain = *v;
    if (auto v = doc.take_double("outliers", "theta_min")) c.theta_min = *v;
    if (auto v = doc.take_double("outliers", "theta_max")) c.theta_max = *v;
    if (auto v = doc.take_bool("outliers", "regenerate_each_epoch")) c.regenerate_each_epoch = *v;

    if (auto v = doc.take_u64s("model", "tsdae_hidden")) c.tsdae_hidden = to_sizes(*v);
    if (auto v = doc.take_u64s("model", "use_hidden")) c.use_hidden = to_sizes(*v);
    if (auto v = doc.take_double("model", "dropout")) c.dropout = *v;

    auto& t = c.train;
    if (auto v = doc.take_u64("train", "batch_size")) t.batch_size = *v;
    if (auto v = doc.take_u64("train", "max_epochs")) t.max_epochs = *v;
    if (auto v = doc.take_u64("train", "patience")) t.patience = *v;
    if (auto v = doc.take_double("train", "learning_rate")) t.learning_rate = *v;
    if (auto v = doc.take_double("train", "weight_decay")) t.weight_decay = *v;
    if (auto v = doc.take_double("train", "beta1")) t.beta1 = *v;
    if (auto v = doc.take_double("train", "beta2")) t.beta2 = *v;
    if (auto v = doc.take_double("train", "epsilon")) t.epsilon = *v;
    if (auto v = doc.take("train", "class_weights")) {
        if (*v == "none") {
            c.class_weight_mode = ClassWeightMode::none;
        } else if (*v == "balanced") {
            c.class_weight_mode = ClassWeightMode::balanced;
        } else {
            c.class_weight_mode = ClassWeightMode::explicit_list;
            for (const auto& item : split_list(*v)) c.class_weights.push_back(parse_double(item, source + ": [train] class_weights"));
        }
    }

    auto& th = c.threshold;
    if (auto v = doc.take_double("threshold", "T")) th.T = *v;
    if (auto v = doc.take("threshold", "calibration")) {
        const auto parsed = parse_calibration(*v);
        require(parsed.has_value(), ErrorKind::configuration, source + ": unknown calibration '" + *v + "'");
        th.calibration = *parsed;
    }
    if (auto v = doc.take_double("threshold", "grid_step")) th.grid_step = *v;
    if (auto v = doc.take("threshold", "objective")) {
        const auto parsed = parse_objective(*v);
        require(parsed.has_value(), ErrorKind::configuration, source + ": unknown objective '" + *v + "'");
        th.objective = *parsed;
    }

    if (auto v = doc.take_bool("run", "ablation")) c.ablation = *v;
    if (auto v = doc.take_u64("run", "threads")) c.threads = *v;

    if (doc.has_section("toy")) c.toy = parse_toy_section(doc);
    doc.finish();

    require(!c.ratios.empty(), ErrorKind::configuration, source + ": [experiment] ratios is empty");
    require(!c.seeds.empty(), ErrorKind::configuration, source + ": [experiment] seeds is empty");
    for (double r : c.ratios) require(r > 0.0 && r <= 1.0, ErrorKind::configuration, source + ": ratios must lie in (0, 1]");
    SynthConfig{0, c.theta_min, c.theta_max, 0, "syn"}.validate();
    th.validate();
    t.validate();
    ModelConfig probe;
    probe.tsdae_hidden = c.tsdae_hidden;
    probe.use_hidden = c.use_hidden;
    probe.dropout_rate = c.dropout;
    probe.validate();
    if (c.toy) c.toy->validate();
    return c;
}

PipelineConfig read_pipeline_config(const std::string& path) {
    return parse_pipeline_config(detail::read_file(path), fs::path(path).parent_path().string(), path);
}

// ============================================================================
// Inputs
// ============================================================================

namespace {

// Lines: ratio <TAB> seed <TAB> name,name,...
std::map<std::pair<double, std::uint64_t>, std::vector<std::string>> read_known_file(const std::string& path) {
    std::map<std::pair<double, std::uint64_t>, std::vector<std::string>> out;
    std::istringstream in(detail::read_file(path));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const std::string where = path + ":" + std::to_string(lineno);
        const auto t1 = line.find('\t');
        const auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
        require(t2 != std::string::npos, ErrorKind::format, where + ": expected ratio<TAB>seed<TAB>names");
        const double ratio = parse_double(line.substr(0, t1), where);
        const auto seed = parse_u64(line.substr(t1 + 1, t2 - t1 - 1), where);
        out[{ratio, seed}] = split_list(line.substr(t2 + 1));
    }
    return out;
}

}  // namespace

PipelineInputs load_inputs(const PipelineConfig& cfg) {
    require(!cfg.manifest.empty(), ErrorKind::configuration, "[data] manifest is required");
    PipelineInputs in;
    in.full = load_dataset(cfg.manifest);
    if (!cfg.external_oos_manifest.empty()) in.external_oos = load_dataset(cfg.external_oos_manifest);
    if (!cfg.open_domain_manifest.empty()) in.open_domain = load_dataset(cfg.open_domain_manifest);
    if (!cfg.known_intents_file.empty()) in.fixed_known = read_known_file(cfg.known_intents_file);
    const auto violations = validate_dataset(in.full);
    if (!violations.empty()) {
        const auto& v = violations.front();
        fail(ErrorKind::invalid_input, cfg.manifest + ": " + std::to_string(violations.size()) +
                                           " validation violations, first: " + v.record_id + " " + v.rule + " (" +
                                           v.detail + ")");
    }
    return in;
}

// ============================================================================
// Stages
// ============================================================================

RunSeeds derive_seeds(std::uint64_t run_seed) {
    return {run_seed, mix_seed(run_seed, 21), mix_seed(run_seed, 22), mix_seed(run_seed, 23)};
}

ExperimentPlan make_plan(const PipelineConfig& cfg, const PipelineInputs& in, double ratio, std::uint64_t seed) {
    const std::size_t total = in.full.label_map.known_count();
    KnownSplit split;
    if (const auto it = in.fixed_known.find({ratio, seed}); it != in.fixed_known.end()) {
        std::vector<int> known;
        for (const auto& name : it->second) {
            const auto label = in.full.label_map.find(name);
            require(label.has_value() && *label < in.full.label_map.oos_index(), ErrorKind::invalid_input,
                    "known_intents_file names unknown intent '" + name + "'");
            known.push_back(*label);
        }
        split = select_known_fixed(total, std::move(known));
    } else {
        split = select_known(total, ratio, derive_seeds(seed).plan);
    }
    ExperimentPlan plan;
    plan.ratio = ratio;
    plan.seed = seed;
    plan.known_intents = std::move(split.known);
    plan.unknown_intents = std::move(split.unknown);
    plan.synthetic_count = cfg.synthetic;
    plan.open_domain_count = cfg.open_domain;
    plan.val_oos_source = cfg.val_oos_source;
    plan.val_synthetic_count = cfg.val_synthetic;
    plan.val_open_domain_count = cfg.val_open_domain;
    plan.unknown_train_to_val = cfg.unknown_train_to_val;
    return plan;
}

SynthConfig synth_config(const PipelineConfig& cfg) {
    SynthConfig sc;
    sc.count = cfg.synthetic;
    sc.theta_min = cfg.theta_min;
    sc.theta_max = cfg.theta_max;
    return sc;
}

SplitBundle split_stage(const PipelineConfig& cfg, const PipelineInputs& in, const ExperimentPlan& plan) {
    return build_splits(in.full, in.external_oos ? &*in.external_oos : nullptr,
                        in.open_domain ? &*in.open_domain : nullptr, plan, synth_config(cfg));
}

ModelConfig model_config(const PipelineConfig& cfg, const DualDataset& train, std::uint64_t seed) {
    ModelConfig mc;
    mc.d_tsdae = train.d_tsdae();
    mc.d_use = train.d_use();
    mc.tsdae_hidden = cfg.tsdae_hidden;
    mc.use_hidden = cfg.use_hidden;
    mc.dropout_rate = cfg.dropout;
    mc.n_classes = train.label_map.n_classes();
    mc.seed = seed;
    return mc;
}

TrainConfig train_config(const PipelineConfig& cfg, const DualDataset& train, std::uint64_t seed) {
    TrainConfig tc = cfg.train;
    tc.seed = seed;
    const std::size_t n_classes = train.label_map.n_classes();
    switch (cfg.class_weight_mode) {
        case ClassWeightMode::none: tc.class_weights.reset(); break;
        case ClassWeightMode::explicit_list: tc.class_weights = cfg.class_weights; break;
        case ClassWeightMode::balanced: {
            // n / (C * n_c) over classes present; absent classes get weight 1.
            std::vector<std::size_t> counts(n_classes, 0);
            for (int y : train.labels) counts[static_cast<std::size_t>(y)] += 1;
            const std::size_t present = static_cast<std::size_t>(
                std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }));
            std::vector<double> w(n_classes, 1.0);
            for (std::size_t c = 0; c < n_classes; ++c) {
                if (counts[c] > 0) {
                    w[c] = static_cast<double>(train.size()) / (static_cast<double>(present) * static_cast<double>(counts[c]));
                }
            }
            tc.class_weights = std::move(w);
            break;
        }
    }
    return tc;
}

TrainResult train_stage(const PipelineConfig& cfg, const DualDataset& train, const DualDataset& val,
                        std::uint64_t run_seed) {
    const auto seeds = derive_seeds(run_seed);
    const Model initial = init_model<float>(model_config(cfg, train, seeds.model));
    const TrainConfig tc = train_config(cfg, train, seeds.train);

    TrainHooks hooks;
    if (cfg.regenerate_each_epoch && cfg.synthetic > 0) {
        // Synthetic rows carry ids "syn:<k>"; refresh them in place from the inliers.
        std::vector<std::size_t> slots;
        std::vector<std::size_t> inliers;
        const int oos = train.label_map.oos_index();
        for (std::size_t i = 0; i < train.size(); ++i) {
            if (train.ids[i].rfind("syn:", 0) == 0) slots.push_back(i);
            if (train.labels[i] != oos) inliers.push_back(i);
        }
        const DualDataset inlier_set = train.subset(inliers);
        SynthConfig sc = synth_config(cfg);
        sc.count = slots.size();
        hooks.before_epoch = [slots, inlier_set, sc, seeds](std::size_t epoch, DualDataset& working) mutable {
            if (epoch == 1) return;
            sc.seed = mix_seed(seeds.regenerate, epoch);
            const auto batch = generate_synthetic(inlier_set, sc);
            for (std::size_t k = 0; k < slots.size(); ++k) {
                std::copy_n(batch.tsdae.row(k).begin(), batch.tsdae.dim(), working.tsdae.row(slots[k]).begin());
                std::copy_n(batch.use.row(k).begin(), batch.use.dim(), working.use.row(slots[k]).begin());
            }
        };
    }
    return deter::train(initial, train, val, tc, hooks);
}

// ============================================================================
// Artifact formats
// ============================================================================

namespace {

json stats_json(const MetricStats& s) { return json{{"mean", s.mean}, {"std", s.std}, {"max", s.max}, {"min", s.min}}; }

}  // namespace

std::string report_to_json(const EvalReport& r) {
    json j;
    j["dataset"] = r.meta.dataset;
    j["ratio"] = r.meta.ratio;
    j["seed"] = r.meta.seed;
    j["variant"] = r.meta.variant;
    j["threshold_used"] = r.threshold_used;
    j["macro_f1_known"] = r.macro_f1_known;
    j["f1_unknown"] = r.f1_unknown;
    j["macro_f1_all"] = r.macro_f1_all;
    j["accuracy"] = r.accuracy;
    j["n_classes"] = r.confusion.n;
    j["per_class_f1"] = r.per_class_f1;
    json rows = json::array();
    for (std::size_t g = 0; g < r.confusion.n; ++g) {
        json row = json::array();
        for (std::size_t p = 0; p < r.confusion.n; ++p) row.push_back(r.confusion.at(g, p));
        rows.push_back(std::move(row));
    }
    j["confusion"] = std::move(rows);
    return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
    try {
        const auto j = json::parse(text);
        EvalReport r;
        r.meta.dataset = j.at("dataset").get<std::string>();
        r.meta.ratio = j.at("ratio").get<double>();
        r.meta.seed = j.at("seed").get<std::uint64_t>();
        r.meta.variant = j.at("variant").get<std::string>();
        r.threshold_used = j.at("threshold_used").get<double>();
        r.macro_f1_known = j.at("macro_f1_known").get<double>();
        r.f1_unknown = j.at("f1_unknown").get<double>();
        r.macro_f1_all = j.at("macro_f1_all").get<double>();
        r.accuracy = j.at("accuracy").get<double>();
        const auto n = j.at("n_classes").get<std::size_t>();
        r.per_class_f1 = j.at("per_class_f1").get<std::vector<double>>();
        r.confusion = ConfusionMatrix(n);
        const auto& rows = j.at("confusion");
        require(rows.size() == n, ErrorKind::format, "report: confusion has wrong row count");
        for (std::size_t g = 0; g < n; ++g) {
            require(rows[g].size() == n, ErrorKind::format, "report: confusion has wrong column count");
            for (std::size_t p = 0; p < n; ++p) r.confusion.counts[g * n + p] = rows[g][p].get<std::uint64_t>();
        }
        return r;
    } catch (const json::exception& e) {
        fail(ErrorKind::format, std::string("report: ") + e.what());
    }
}

std::string summaries_to_json(const std::vector<RunSummary>& summaries) {
    json arr = json::array();
    for (const auto& s : summaries) {
        arr.push_back(json{{"dataset", s.dataset},
                           {"ratio", s.ratio},
                           {"variant", s.variant},
                           {"n_classes", s.n_classes},
                           {"runs", s.seeds.size()},
                           {"seeds", s.seeds},
                           {"known", stats_json(s.known)},
                           {"unknown", stats_json(s.unknown)},
                           {"accuracy", stats_json(s.accuracy)},
                           {"threshold", stats_json(s.threshold)}});
    }
    return arr.dump(2) + "\n";
}

std::string format_curve(const CalibrationResult& c) {
    std::ostringstream out;
    out << "# selected_T\t" << format_double(c.T) << "\n";
    out << "T\tobjective\n";
    for (const auto& p : c.curve) out << format_double(p.T) << '\t' << format_double(p.objective) << '\n';
    return out.str();
}

std::string format_history(const TrainHistory& h) {
    std::ostringstream out;
    out << "# best_epoch\t" << h.best_epoch << "\n# stopped_epoch\t" << h.stopped_epoch << "\n";
    out << "epoch\ttrain_loss\tval_accuracy\n";
    for (std::size_t i = 0; i < h.train_loss.size(); ++i) {
        out << (i + 1) << '\t' << format_double(h.train_loss[i]) << '\t' << format_double(h.val_accuracy[i]) << '\n';
    }
    return out.str();
}

std::string format_label_remap(const SplitBundle& b, const IntentLabelMap& original) {
    std::ostringstream out;
    out << "original_label\toriginal_name\tnew_label\tnew_name\n";
    for (std::size_t i = 0; i < b.label_remap.size(); ++i) {
        const int nl = b.label_remap[i];
        out << i << '\t' << original.name(static_cast<int>(i)) << '\t' << nl << '\t' << b.train.label_map.name(nl) << '\n';
    }
    return out.str();
}

// ============================================================================
// Runs
// ============================================================================

std::string run_dir_name(double ratio, std::uint64_t seed) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "ratio-%.2f/seed-%llu", ratio, static_cast<unsigned long long>(seed));
    return buf;
}

RunOutcome run_single(const PipelineConfig& cfg, const PipelineInputs& in, double ratio, std::uint64_t seed,
                      bool ablation, const std::string& run_dir) {
    fs::create_directories(run_dir);
    const fs::path dir(run_dir);
    RunOutcome out;
    out.ratio = ratio;
    out.seed = seed;

    const auto plan = make_plan(cfg, in, ratio, seed);
    detail::write_file((dir / "plan.ini").string(), format_plan(plan));
    const auto bundle = split_stage(cfg, in, plan);
    detail::write_file((dir / "label_remap.tsv").string(), format_label_remap(bundle, in.full.label_map));

    auto trained = train_stage(cfg, bundle.train, bundle.val, seed);
    save_model(trained.model, (dir / "model.detm").string());
    detail::write_file((dir / "history.tsv").string(), format_history(trained.history));
    out.history = trained.history;

    out.calibration = calibrate(trained.model, bundle.val, cfg.threshold);
    detail::write_file((dir / "threshold_curve.tsv").string(), format_curve(out.calibration));

    const auto probs = predict_probs(trained.model, bundle.test);
    const std::size_t n_classes = bundle.test.label_map.n_classes();
    RunMeta meta{cfg.dataset_name, ratio, seed, "with_threshold"};
    out.report = evaluate(bundle.test.labels, reclassify_rows(probs, out.calibration.T), n_classes,
                          out.calibration.T, meta);
    detail::write_file((dir / "report.json").string(), report_to_json(out.report));
    if (ablation) {
        meta.variant = "model_only";
        out.model_only = evaluate(bundle.test.labels, reclassify_rows(probs, 0.0), n_classes, 0.0, meta);
        detail::write_file((dir / "report_model_only.json").string(), report_to_json(*out.model_only));
    }
    out.ok = true;
    return out;
}

PipelineResult run_pipeline(const PipelineConfig& cfg_in, const std::string& config_text, const std::string& out_dir,
                            const RunOptions& opts) {
    PipelineConfig cfg = cfg_in;
    if (opts.seed) cfg.seeds = {*opts.seed};
    const bool ablation = opts.ablation.value_or(cfg.ablation);
    const fs::path out(out_dir);
    fs::create_directories(out);
    detail::write_file((out / "config.ini").string(), config_text);

    if (cfg.manifest.empty()) {
        require(cfg.toy.has_value(), ErrorKind::configuration, "config needs [data] manifest or a [toy] section");
        const auto files = write_toy(*cfg.toy, (out / "data").string());
        cfg.manifest = files.manifest;
        if (!files.open_domain_manifest.empty() && cfg.open_domain_manifest.empty()) {
            cfg.open_domain_manifest = files.open_domain_manifest;
        }
    }
    const PipelineInputs inputs = load_inputs(cfg);

    std::vector<std::pair<double, std::uint64_t>> jobs;
    for (double r : cfg.ratios) {
        for (auto s : cfg.seeds) jobs.emplace_back(r, s);
    }

    PipelineResult result;
    result.runs.resize(jobs.size());
    auto work = [&](std::size_t i) {
        const auto [ratio, seed] = jobs[i];
        try {
            result.runs[i] = run_single(cfg, inputs, ratio, seed, ablation, (out / "runs" / run_dir_name(ratio, seed)).string());
        } catch (const std::exception& e) {
            result.runs[i].ratio = ratio;
            result.runs[i].seed = seed;
            result.runs[i].ok = false;
            result.runs[i].error = e.what();
        }
    };

    // Runs are independent and write to disjoint directories, so the worker
    // count never changes any output byte.
    const std::size_t threads = std::max<std::size_t>(1, std::min(opts.threads, jobs.size()));
    if (threads == 1) {
        for (std::size_t i = 0; i < jobs.size(); ++i) work(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < jobs.size(); i = next++) work(i);
            });
        }
        for (auto& th : pool) th.join();
    }

    std::ostringstream log;
    std::vector<EvalReport> reports;
    for (const auto& r : result.runs) {
        log << "ratio=" << format_double(r.ratio) << " seed=" << r.seed;
        if (r.ok) {
            log << " status=ok T=" << format_double(r.calibration.T) << " best_epoch=" << r.history.best_epoch
                << " stopped_epoch=" << r.history.stopped_epoch << " known=" << format_double(r.report.macro_f1_known)
                << " unknown=" << format_double(r.report.f1_unknown) << "\n";
            reports.push_back(r.report);
            if (r.model_only) reports.push_back(*r.model_only);
        } else {
            log << " status=error message=" << r.error << "\n";
        }
    }
    detail::write_file((out / "run.log").string(), log.str());
    if (!reports.empty()) {
        result.summaries = summarize_runs(reports);
        detail::write_file((out / "summary.json").string(), summaries_to_json(result.summaries));
        detail::write_file((out / "summary.md").string(), render_table(result.summaries));
    }
    return result;
}

}  // namespace deter
