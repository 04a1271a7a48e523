#pragma once

#include <cstdint>
#include <string>

#include "deter/types.hpp"

namespace deter {

// Gaussian clusters around random unit-norm centers, one center per intent and
// stream. Centers within a stream are at least separation * sigma apart.
struct ToyGenConfig {
    std::size_t n_intents = 10;
    std::size_t train_per_intent = 20;
    std::size_t val_per_intent = 5;
    std::size_t test_per_intent = 5;
    std::size_t d_tsdae = 32;
    std::size_t d_use = 16;
    double separation = 10.0;  // minimum center distance, in sigma units
    double sigma = 0.1;        // per-dimension noise
    // Extra test rows labeled "oos" in the main dataset, and a separate
    // open-domain pool; both drawn around fresh random unit directions.
    std::size_t external_oos = 0;
    std::size_t open_domain = 0;
    std::size_t max_retries = 10000;
    std::uint64_t seed = 0;

    void validate() const;
};

struct ToyData {
    DualDataset dataset;      // split-tagged, intent-major row order
    DualDataset open_domain;  // label_map empty, every row labeled oos
};

ToyData gen_toy(const ToyGenConfig& cfg);

struct ToyFiles {
    std::string manifest;
    std::string open_domain_manifest;  // empty when cfg.open_domain == 0
};

// Writes toy.{tsdae,use}.detb + toy.tsv (and open_domain.* when requested) into dir.
ToyFiles write_toy(const ToyGenConfig& cfg, const std::string& dir);

}  // namespace deter
