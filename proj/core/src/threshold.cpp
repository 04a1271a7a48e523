#include "deter/threshold.hpp"

#include <cmath>

#include "deter/error.hpp"
#include "deter/metrics.hpp"

namespace deter {

const char* to_string(Calibration c) noexcept { return c == Calibration::fixed ? "fixed" : "grid_search"; }

const char* to_string(Objective o) noexcept {
    switch (o) {
        case Objective::macro_f1_all: return "macro_f1_all";
        case Objective::macro_f1_known: return "macro_f1_known";
        case Objective::val_accuracy: return "val_accuracy";
    }
    return "?";
}

std::optional<Calibration> parse_calibration(std::string_view s) {
    if (s == "fixed") return Calibration::fixed;
    if (s == "grid_search") return Calibration::grid_search;
    return std::nullopt;
}

std::optional<Objective> parse_objective(std::string_view s) {
    if (s == "macro_f1_all") return Objective::macro_f1_all;
    if (s == "macro_f1_known") return Objective::macro_f1_known;
    if (s == "val_accuracy") return Objective::val_accuracy;
    return std::nullopt;
}

void ThresholdPolicy::validate() const {
    require(T >= 0.0 && T <= 1.0, ErrorKind::configuration, "threshold T must lie in [0, 1]");
    require(grid_step > 0.0 && grid_step <= 1.0, ErrorKind::configuration, "grid_step must lie in (0, 1]");
    const double n = std::round(1.0 / grid_step);
    require(std::abs(n * grid_step - 1.0) < 1e-9, ErrorKind::configuration, "grid_step must divide 1 evenly");
}

std::vector<double> ThresholdPolicy::grid() const {
    validate();
    const auto n = static_cast<std::size_t>(std::round(1.0 / grid_step));
    std::vector<double> out(n + 1);
    for (std::size_t i = 0; i <= n; ++i) out[i] = static_cast<double>(i) / static_cast<double>(n);
    return out;
}

int reclassify(std::span<const double> probs, double T) {
    require(probs.size() >= 2, ErrorKind::invalid_input, "reclassify: need at least one known class plus OOS");
    require(T >= 0.0 && T <= 1.0, ErrorKind::invalid_input, "reclassify: T outside [0, 1]");
    double sum = 0.0;
    for (double p : probs) {
        require(std::isfinite(p) && p >= 0.0 && p <= 1.0, ErrorKind::invalid_input,
                "reclassify: probabilities must be finite and within [0, 1]");
        sum += p;
    }
    require(std::abs(sum - 1.0) <= 1e-6, ErrorKind::invalid_input, "reclassify: probabilities do not sum to 1");
    const std::size_t j = argmax(probs);
    const int oos = static_cast<int>(probs.size()) - 1;
    if (static_cast<int>(j) == oos) return oos;
    return probs[j] >= T ? static_cast<int>(j) : oos;
}

Matrix<double> predict_probs(const Model& m, const DualDataset& ds) {
    const auto logits = predict_logits(m, ds);
    Matrix<double> probs(logits.rows, logits.cols);
    std::vector<double> row(logits.cols);
    for (std::size_t r = 0; r < logits.rows; ++r) {
        const auto src = logits.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) row[c] = static_cast<double>(src[c]);
        const auto p = softmax(row);
        std::copy(p.begin(), p.end(), probs.data.begin() + r * probs.cols);
    }
    return probs;
}

std::vector<int> reclassify_rows(const Matrix<double>& probs, double T) {
    std::vector<int> out(probs.rows);
    for (std::size_t r = 0; r < probs.rows; ++r) out[r] = reclassify(probs.row(r), T);
    return out;
}

std::vector<int> predict(const Model& m, const DualDataset& ds, double T) {
    return reclassify_rows(predict_probs(m, ds), T);
}

std::vector<int> predict(const Model& m, const DualDataset& ds, const ThresholdPolicy& policy) {
    policy.validate();
    return predict(m, ds, policy.T);
}

double objective_value(Objective o, std::span<const int> gold, std::span<const int> pred, std::size_t n_classes) {
    const auto report = evaluate(gold, pred, n_classes, 0.0);
    switch (o) {
        case Objective::macro_f1_all: return report.macro_f1_all;
        case Objective::macro_f1_known: return report.macro_f1_known;
        case Objective::val_accuracy: return report.accuracy;
    }
    return 0.0;
}

CalibrationResult calibrate_probs(const Matrix<double>& probs, std::span<const int> labels,
                                  const ThresholdPolicy& policy) {
    policy.validate();
    require(probs.rows > 0, ErrorKind::invalid_input, "calibrate: validation set is empty");
    require(labels.size() == probs.rows, ErrorKind::invalid_input, "calibrate: label count differs from rows");
    CalibrationResult result;
    bool have_best = false;
    for (double T : policy.grid()) {
        const auto pred = reclassify_rows(probs, T);
        const double value = objective_value(policy.objective, labels, pred, probs.cols);
        result.curve.push_back({T, value});
        if (!have_best || value > result.objective) {
            result.T = T;
            result.objective = value;
            have_best = true;
        }
    }
    if (policy.calibration == Calibration::fixed) {
        result.T = policy.T;
        result.objective = objective_value(policy.objective, labels, reclassify_rows(probs, policy.T), probs.cols);
    }
    return result;
}

CalibrationResult calibrate(const Model& m, const DualDataset& val, const ThresholdPolicy& policy) {
    require(val.size() > 0, ErrorKind::invalid_input, "calibrate: validation set is empty");
    return calibrate_probs(predict_probs(m, val), val.labels, policy);
}

}  // namespace deter
