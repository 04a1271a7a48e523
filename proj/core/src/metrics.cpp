#include "deter/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "deter/error.hpp"

namespace deter {

std::uint64_t ConfusionMatrix::total() const { return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}); }

ConfusionMatrix confusion_matrix(std::span<const int> gold, std::span<const int> pred, std::size_t n_classes) {
    require(gold.size() == pred.size(), ErrorKind::invalid_input,
            "confusion_matrix: gold has " + std::to_string(gold.size()) + " labels, pred has " +
                std::to_string(pred.size()));
    ConfusionMatrix cm(n_classes);
    const int n = static_cast<int>(n_classes);
    for (std::size_t i = 0; i < gold.size(); ++i) {
        require(gold[i] >= 0 && gold[i] < n && pred[i] >= 0 && pred[i] < n, ErrorKind::invalid_input,
                "confusion_matrix: label out of range at position " + std::to_string(i));
        cm.counts[static_cast<std::size_t>(gold[i]) * n_classes + static_cast<std::size_t>(pred[i])] += 1;
    }
    return cm;
}

std::vector<double> f1_scores(const ConfusionMatrix& cm) {
    std::vector<double> f1(cm.n, 0.0);
    for (std::size_t c = 0; c < cm.n; ++c) {
        std::uint64_t row = 0, col = 0;
        for (std::size_t k = 0; k < cm.n; ++k) {
            row += cm.at(c, k);
            col += cm.at(k, c);
        }
        const double tp = static_cast<double>(cm.at(c, c));
        const double precision = col ? tp / static_cast<double>(col) : 0.0;
        const double recall = row ? tp / static_cast<double>(row) : 0.0;
        f1[c] = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    }
    return f1;
}

EvalReport evaluate(std::span<const int> gold, std::span<const int> pred, std::size_t n_classes, double threshold,
                    RunMeta meta) {
    require(n_classes >= 2, ErrorKind::invalid_input, "evaluate: need at least one known class plus OOS");
    EvalReport r;
    r.confusion = confusion_matrix(gold, pred, n_classes);
    r.per_class_f1 = f1_scores(r.confusion);
    const std::size_t k = n_classes - 1;
    r.macro_f1_known = std::accumulate(r.per_class_f1.begin(), r.per_class_f1.begin() + static_cast<std::ptrdiff_t>(k),
                                       0.0) / static_cast<double>(k);
    r.f1_unknown = r.per_class_f1[k];
    r.macro_f1_all = std::accumulate(r.per_class_f1.begin(), r.per_class_f1.end(), 0.0) / static_cast<double>(n_classes);
    std::uint64_t hits = 0;
    for (std::size_t c = 0; c < n_classes; ++c) hits += r.confusion.at(c, c);
    r.accuracy = gold.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(gold.size());
    r.threshold_used = threshold;
    r.meta = std::move(meta);
    return r;
}

MetricStats describe(std::span<const double> values) {
    MetricStats s;
    if (values.empty()) return s;
    const double n = static_cast<double>(values.size());
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double var = 0.0;
    for (double v : values) var += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(var / n);
    s.max = *std::max_element(values.begin(), values.end());
    s.min = *std::min_element(values.begin(), values.end());
    return s;
}

std::vector<RunSummary> summarize_runs(std::span<const EvalReport> reports) {
    require(!reports.empty(), ErrorKind::invalid_input, "summarize_runs: no reports");
    using Key = std::tuple<std::string, double, std::string>;
    std::vector<Key> order;
    std::map<Key, std::vector<const EvalReport*>> groups;
    for (const auto& r : reports) {
        Key key{r.meta.dataset, r.meta.ratio, r.meta.variant};
        auto [it, inserted] = groups.try_emplace(key);
        if (inserted) order.push_back(key);
        if (!it->second.empty()) {
            require(it->second.front()->confusion.n == r.confusion.n, ErrorKind::invalid_input,
                    "summarize_runs: reports for dataset '" + r.meta.dataset +
                        "' at one ratio disagree on the class count");
        }
        it->second.push_back(&r);
    }

    std::vector<RunSummary> out;
    for (const auto& key : order) {
        const auto& group = groups[key];
        RunSummary s;
        std::tie(s.dataset, s.ratio, s.variant) = key;
        s.n_classes = group.front()->confusion.n;
        std::vector<double> known, unknown, acc, thr;
        for (const auto* r : group) {
            s.seeds.push_back(r->meta.seed);
            known.push_back(r->macro_f1_known);
            unknown.push_back(r->f1_unknown);
            acc.push_back(r->accuracy);
            thr.push_back(r->threshold_used);
        }
        s.known = describe(known);
        s.unknown = describe(unknown);
        s.accuracy = describe(acc);
        s.threshold = describe(thr);
        out.push_back(std::move(s));
    }
    return out;
}

namespace {

std::string pct(const MetricStats& s) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f ± %.2f", 100.0 * s.mean, 100.0 * s.std);
    return buf;
}

std::string ratio_label(double r) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g%%", 100.0 * r);
    return buf;
}

}  // namespace

std::string render_table(std::span<const RunSummary> summaries) {
    std::vector<double> ratios;
    std::vector<std::pair<std::string, std::string>> rows;
    std::map<std::tuple<std::string, std::string, double>, const RunSummary*> cell;
    for (const auto& s : summaries) {
        if (std::find(ratios.begin(), ratios.end(), s.ratio) == ratios.end()) ratios.push_back(s.ratio);
        std::pair<std::string, std::string> row{s.dataset, s.variant};
        if (std::find(rows.begin(), rows.end(), row) == rows.end()) rows.push_back(row);
        cell[{s.dataset, s.variant, s.ratio}] = &s;
    }
    std::sort(ratios.begin(), ratios.end());

    std::ostringstream out;
    out << "| Dataset | Variant |";
    for (double r : ratios) out << " " << ratio_label(r) << " Known | " << ratio_label(r) << " Unknown |";
    out << "\n|---|---|";
    for (std::size_t i = 0; i < ratios.size(); ++i) out << "---|---|";
    out << "\n";
    for (const auto& [dataset, variant] : rows) {
        out << "| " << dataset << " | " << variant << " |";
        for (double r : ratios) {
            const auto it = cell.find({dataset, variant, r});
            if (it == cell.end()) {
                out << " - | - |";
            } else {
                out << " " << pct(it->second->known) << " | " << pct(it->second->unknown) << " |";
            }
        }
        out << "\n";
    }

    out << "\n| Dataset | Variant | Ratio | Runs | Known max | Unknown max | Threshold mean | Seeds |\n";
    out << "|---|---|---|---|---|---|---|---|\n";
    for (const auto& s : summaries) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "| %s | %s | %s | %zu | %.2f | %.2f | %.4f | ", s.dataset.c_str(),
                      s.variant.c_str(), ratio_label(s.ratio).c_str(), s.seeds.size(), 100.0 * s.known.max,
                      100.0 * s.unknown.max, s.threshold.mean);
        out << buf;
        for (std::size_t i = 0; i < s.seeds.size(); ++i) out << (i ? "," : "") << s.seeds[i];
        out << " |\n";
    }
    return out.str();
}

}  // namespace deter
