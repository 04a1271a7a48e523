/**
 * @file splitter.hpp
 * @brief Known-intent selection and train/val/test assembly for one experiment run.
 *
 * A fraction of the corpus intents is treated as known. Known intents are
 * relabeled 0..K-1 (ascending original index); every unknown intent, and every
 * OOS row of the corpus, maps to K.
 *
 *  train = known train rows + synthetic + open-domain outliers
 *  val   = known val rows + pseudo-OOS rows (see ValOosSource)
 *  test  = known test rows + unknown-intent test rows + all corpus OOS rows
 *          + external OOS rows
 */
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "deter/outlier.hpp"
#include "deter/types.hpp"

namespace deter {

enum class ValOosSource : std::uint8_t { synthetic, open_domain, unselected_intents, mixed };

const char* to_string(ValOosSource s) noexcept;
std::optional<ValOosSource> parse_val_oos_source(std::string_view s);

struct ExperimentPlan {
    double ratio = 1.0;
    std::uint64_t seed = 0;
    std::vector<int> known_intents;    // original label indices, sorted
    std::vector<int> unknown_intents;  // complement, sorted
    std::size_t synthetic_count = 500;
    std::size_t open_domain_count = 500;
    ValOosSource val_oos_source = ValOosSource::mixed;
    std::size_t val_synthetic_count = 100;
    std::size_t val_open_domain_count = 100;
    // Route unknown-intent train rows into validation as OOS instead of dropping them.
    bool unknown_train_to_val = false;

    friend bool operator==(const ExperimentPlan&, const ExperimentPlan&) = default;
};

struct KnownSplit {
    std::vector<int> known;
    std::vector<int> unknown;
};

// round-half-up(total * ratio); 150 * 0.25 = 37.5 -> 38.
std::size_t known_intent_count(std::size_t total, double ratio);

// Seeded uniform choice of known intents.
KnownSplit select_known(std::size_t total, double ratio, std::uint64_t seed);

// Externally supplied known list (e.g. to mirror another toolkit's seeds).
KnownSplit select_known_fixed(std::size_t total, std::vector<int> known);

struct SplitBundle {
    DualDataset train;
    DualDataset val;
    DualDataset test;
    // label_remap[original] = new label; size = original K + 1 (last entry is original OOS).
    std::vector<int> label_remap;
};

// open_domain_pool: optional rows to draw open-domain outliers from (train and
// val draws are disjoint). external_oos: optional extra test rows, all labeled OOS.
SplitBundle build_splits(const DualDataset& full, const DualDataset* external_oos, const DualDataset* open_domain_pool,
                         const ExperimentPlan& plan, const SynthConfig& synth);

// Key-value text stored next to every run.
std::string format_plan(const ExperimentPlan& plan);
ExperimentPlan parse_plan(const std::string& text);

}  // namespace deter
