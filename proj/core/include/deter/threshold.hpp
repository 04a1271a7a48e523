/**
 * @file threshold.hpp
 * @brief Confidence-threshold re-classification and its validation-set calibration.
 *
 * Decision rule for a probability vector over K+1 classes (OOS last):
 *   j = argmax (lowest index on ties)
 *   j == K          -> K
 *   probs[j] >= T   -> j
 *   otherwise       -> K
 */
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "deter/nn.hpp"
#include "deter/types.hpp"

namespace deter {

enum class Calibration : std::uint8_t { fixed, grid_search };
enum class Objective : std::uint8_t { macro_f1_all, macro_f1_known, val_accuracy };

const char* to_string(Calibration c) noexcept;
const char* to_string(Objective o) noexcept;
std::optional<Calibration> parse_calibration(std::string_view s);
std::optional<Objective> parse_objective(std::string_view s);

struct ThresholdPolicy {
    double T = 0.7;
    Calibration calibration = Calibration::grid_search;
    double grid_step = 0.01;
    Objective objective = Objective::macro_f1_all;

    void validate() const;
    // {0, step, ..., 1}; each point is i / n so the last one is exactly 1.
    std::vector<double> grid() const;
};

int reclassify(std::span<const double> probs, double T);

// Row-wise softmax probabilities in double precision.
Matrix<double> predict_probs(const Model& m, const DualDataset& ds);

std::vector<int> reclassify_rows(const Matrix<double>& probs, double T);

std::vector<int> predict(const Model& m, const DualDataset& ds, double T);
std::vector<int> predict(const Model& m, const DualDataset& ds, const ThresholdPolicy& policy);

struct CurvePoint {
    double T = 0.0;
    double objective = 0.0;
};

struct CalibrationResult {
    double T = 0.0;
    double objective = 0.0;
    std::vector<CurvePoint> curve;  // every grid point, ascending T
};

double objective_value(Objective o, std::span<const int> gold, std::span<const int> pred, std::size_t n_classes);

// Grid search over policy.grid(); the maximum with the smallest T wins.
// With Calibration::fixed the curve is still computed but T = policy.T.
CalibrationResult calibrate_probs(const Matrix<double>& probs, std::span<const int> labels,
                                  const ThresholdPolicy& policy);

CalibrationResult calibrate(const Model& m, const DualDataset& val, const ThresholdPolicy& policy);

}  // namespace deter
