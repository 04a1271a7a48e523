/**
 * @file pipeline.hpp
 * @brief Experiment configuration and the split -> outliers -> train -> calibrate -> evaluate loop.
 *
 * Config file (sectioned key = value; unknown keys are rejected, relative
 * paths resolve against the config file's directory):
 *
 *   [data]       manifest, external_oos_manifest, open_domain_manifest,
 *                known_intents_file, dataset_name
 *   [experiment] ratios, seeds, val_oos_source, unknown_train_to_val
 *   [outliers]   synthetic, open_domain, val_synthetic, val_open_domain,
 *                theta_min, theta_max, regenerate_each_epoch
 *   [model]      tsdae_hidden, use_hidden, dropout
 *   [train]      batch_size, max_epochs, patience, learning_rate, weight_decay,
 *                beta1, beta2, epsilon, class_weights (none | balanced | w0,w1,...)
 *   [threshold]  T, calibration (fixed | grid_search), grid_step,
 *                objective (macro_f1_all | macro_f1_known | val_accuracy)
 *   [run]        ablation (true | false), threads
 *   [toy]        synthetic corpus settings; used by `deter gen-toy`, and by
 *                `deter run` when [data] manifest is absent
 *
 * Run directory layout (no timestamps, so reruns are byte-identical):
 *
 *   <out>/config.ini                      copy of the config bytes
 *   <out>/runs/ratio-<r>/seed-<s>/        plan.ini, label_remap.tsv, model.detm,
 *                                         history.tsv, threshold_curve.tsv,
 *                                         report.json [, report_model_only.json]
 *   <out>/run.log                         one status line per run
 *   <out>/summary.json, <out>/summary.md
 */
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "deter/metrics.hpp"
#include "deter/nn.hpp"
#include "deter/outlier.hpp"
#include "deter/splitter.hpp"
#include "deter/threshold.hpp"
#include "deter/toy.hpp"

namespace deter {

enum class ClassWeightMode : std::uint8_t { none, balanced, explicit_list };

struct PipelineConfig {
    std::string dataset_name = "dataset";
    std::string manifest;
    std::string external_oos_manifest;
    std::string open_domain_manifest;
    std::string known_intents_file;

    std::vector<double> ratios{0.25, 0.5, 0.75};
    std::vector<std::uint64_t> seeds{0};
    ValOosSource val_oos_source = ValOosSource::mixed;
    bool unknown_train_to_val = false;

    std::size_t synthetic = 500;
    std::size_t open_domain = 500;
    std::size_t val_synthetic = 100;
    std::size_t val_open_domain = 100;
    double theta_min = 0.0;
    double theta_max = 1.0;
    bool regenerate_each_epoch = false;

    std::vector<std::size_t> tsdae_hidden{512, 256};
    std::vector<std::size_t> use_hidden{512, 256};
    double dropout = 0.1;

    TrainConfig train;
    ClassWeightMode class_weight_mode = ClassWeightMode::none;
    std::vector<double> class_weights;

    ThresholdPolicy threshold;

    bool ablation = false;
    std::size_t threads = 1;

    std::optional<ToyGenConfig> toy;
};

PipelineConfig parse_pipeline_config(const std::string& text, const std::string& base_dir,
                                     const std::string& source = "config");
PipelineConfig read_pipeline_config(const std::string& path);

// Corpus, optional external OOS rows and optional open-domain pool.
struct PipelineInputs {
    DualDataset full;
    std::optional<DualDataset> external_oos;
    std::optional<DualDataset> open_domain;
    // (ratio, seed) -> known intent names
    std::map<std::pair<double, std::uint64_t>, std::vector<std::string>> fixed_known;
};

PipelineInputs load_inputs(const PipelineConfig& cfg);

// Per-run derived seeds.
struct RunSeeds {
    std::uint64_t plan;
    std::uint64_t model;
    std::uint64_t train;
    std::uint64_t regenerate;
};
RunSeeds derive_seeds(std::uint64_t run_seed);

ExperimentPlan make_plan(const PipelineConfig& cfg, const PipelineInputs& in, double ratio, std::uint64_t seed);
SynthConfig synth_config(const PipelineConfig& cfg);
SplitBundle split_stage(const PipelineConfig& cfg, const PipelineInputs& in, const ExperimentPlan& plan);

ModelConfig model_config(const PipelineConfig& cfg, const DualDataset& train, std::uint64_t seed);
TrainConfig train_config(const PipelineConfig& cfg, const DualDataset& train, std::uint64_t seed);
TrainResult train_stage(const PipelineConfig& cfg, const DualDataset& train, const DualDataset& val,
                        std::uint64_t run_seed);

struct RunOutcome {
    double ratio = 0.0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    EvalReport report;
    std::optional<EvalReport> model_only;
    TrainHistory history;
    CalibrationResult calibration;
};

struct RunOptions {
    std::size_t threads = 1;
    bool deterministic = true;
    std::optional<bool> ablation;
    std::optional<std::uint64_t> seed;  // replaces the configured seed list
};

struct PipelineResult {
    std::vector<RunOutcome> runs;  // (ratio, seed) order
    std::vector<RunSummary> summaries;
};

// One (ratio, seed) run; writes its artifacts to run_dir. Throws on stage errors.
RunOutcome run_single(const PipelineConfig& cfg, const PipelineInputs& in, double ratio, std::uint64_t seed,
                      bool ablation, const std::string& run_dir);

// All runs. A failing run is logged and skipped; the others proceed.
PipelineResult run_pipeline(const PipelineConfig& cfg, const std::string& config_text, const std::string& out_dir,
                            const RunOptions& opts = {});

std::string run_dir_name(double ratio, std::uint64_t seed);

// ----------------------------------------------------------------------------
// Artifact text formats
// ----------------------------------------------------------------------------

std::string report_to_json(const EvalReport& r);
EvalReport report_from_json(const std::string& text);
std::string summaries_to_json(const std::vector<RunSummary>& s);
std::string format_curve(const CalibrationResult& c);
std::string format_history(const TrainHistory& h);
std::string format_label_remap(const SplitBundle& b, const IntentLabelMap& original);

}  // namespace deter
