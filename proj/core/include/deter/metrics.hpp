/**
 * @file metrics.hpp
 * @brief Confusion matrices, per-class F1, and aggregation over repeated runs.
 *
 * "Known" is the macro F1 over classes 0..K-1; "Unknown" is the F1 of the
 * single OOS class K. Every 0/0 in precision, recall or F1 is taken as 0.
 */
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace deter {

struct ConfusionMatrix {
    std::size_t n = 0;
    std::vector<std::uint64_t> counts;  // row = gold, col = predicted

    explicit ConfusionMatrix(std::size_t n_classes = 0) : n(n_classes), counts(n_classes * n_classes, 0) {}

    std::uint64_t at(std::size_t gold, std::size_t pred) const { return counts[gold * n + pred]; }
    std::uint64_t total() const;

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

ConfusionMatrix confusion_matrix(std::span<const int> gold, std::span<const int> pred, std::size_t n_classes);

std::vector<double> f1_scores(const ConfusionMatrix& cm);

struct RunMeta {
    std::string dataset;
    double ratio = 0.0;
    std::uint64_t seed = 0;
    std::string variant = "with_threshold";  // or "model_only"

    friend bool operator==(const RunMeta&, const RunMeta&) = default;
};

struct EvalReport {
    ConfusionMatrix confusion;
    std::vector<double> per_class_f1;
    double macro_f1_known = 0.0;
    double f1_unknown = 0.0;
    double macro_f1_all = 0.0;
    double accuracy = 0.0;
    double threshold_used = 0.0;
    RunMeta meta;

    friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

// The last class (n_classes - 1) is OOS.
EvalReport evaluate(std::span<const int> gold, std::span<const int> pred, std::size_t n_classes, double threshold,
                    RunMeta meta = {});

struct MetricStats {
    double mean = 0.0;
    double std = 0.0;  // population
    double max = 0.0;
    double min = 0.0;
};

MetricStats describe(std::span<const double> values);

struct RunSummary {
    std::string dataset;
    double ratio = 0.0;
    std::string variant;
    std::size_t n_classes = 0;
    std::vector<std::uint64_t> seeds;
    MetricStats known;
    MetricStats unknown;
    MetricStats accuracy;
    MetricStats threshold;
};

// Groups by (dataset, ratio, variant), in order of first appearance. Reports in
// one group must agree on the class count.
std::vector<RunSummary> summarize_runs(std::span<const EvalReport> reports);

// Known/Unknown column pair per ratio, one row per (dataset, variant), values in
// percent as mean ± std, followed by an audit table with thresholds and seeds.
std::string render_table(std::span<const RunSummary> summaries);

}  // namespace deter
