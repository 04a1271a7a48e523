/**
 * @file outlier.hpp
 * @brief Pseudo out-of-scope training rows.
 *
 * Synthetic outliers are convex combinations theta * h_beta + (1 - theta) * h_alpha
 * of two inlier features whose intents differ. The combination is applied to
 * each encoder stream with the same theta, which is identical to combining the
 * concatenated features and splitting afterwards.
 *
 * Open-domain outliers are rows of an external embedding pool (e.g. encoded
 * questions from an unrelated QA corpus), subsampled without replacement.
 */
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "deter/types.hpp"

namespace deter {

struct SynthConfig {
    std::size_t count = 500;
    double theta_min = 0.0;
    double theta_max = 1.0;
    std::uint64_t seed = 0;
    std::string id_prefix = "syn";

    void validate() const;
};

enum class Provenance : std::uint8_t { synthetic, open_domain };

const char* to_string(Provenance p) noexcept;

struct OutlierRow {
    Provenance provenance = Provenance::synthetic;
    std::string id;
    // synthetic rows only
    std::string alpha_id;
    std::string beta_id;
    int alpha_label = -1;
    int beta_label = -1;
    double theta = 0.0;
};

struct OutlierBatch {
    EmbeddingMatrix tsdae;
    EmbeddingMatrix use;
    std::vector<OutlierRow> rows;

    std::size_t size() const noexcept { return rows.size(); }
};

// theta * beta + (1 - theta) * alpha, evaluated in double and clamped to the
// per-component source interval so betweenness survives float rounding.
float mix_component(float alpha, float beta, double theta) noexcept;

JointFeature synthesize_one(const JointFeature& h_alpha, const JointFeature& h_beta, double theta);

// Rows with labels in [0, K) are inliers; OOS-labeled rows are ignored.
// Pair sampling: a class uniformly, a different class uniformly, then a row
// uniformly within each.
OutlierBatch generate_synthetic(const DualDataset& ds, const SynthConfig& sc);

// Seeded uniform subsample without replacement; selected rows keep file order.
OutlierBatch sample_open_domain(const EmbeddingMatrix& tsdae, const EmbeddingMatrix& use,
                                const std::vector<std::string>& source_ids, std::size_t count, std::uint64_t seed);

OutlierBatch load_open_domain(const std::string& tsdae_file, const std::string& use_file, std::size_t count,
                              std::uint64_t seed);

// Appends every outlier row labeled oos_index. Split tags, when the input has
// them, are set to `tag` for the new rows.
DualDataset merge_outliers(const DualDataset& base, const std::vector<OutlierBatch>& batches,
                           SplitTag tag = SplitTag::train);

}  // namespace deter
