#include "deter/types.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "deter/error.hpp"

namespace deter {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::invalid_input: return "invalid input";
        case ErrorKind::configuration: return "configuration error";
        case ErrorKind::format: return "format error";
        case ErrorKind::insufficient_classes: return "insufficient classes";
        case ErrorKind::degenerate_split: return "degenerate split";
        case ErrorKind::generation: return "generation error";
    }
    return "error";
}

// ---------------------------------------------------------------------------
// EmbeddingMatrix
// ---------------------------------------------------------------------------

EmbeddingMatrix::EmbeddingMatrix(std::size_t dim, std::size_t count, std::vector<float> values)
    : dim_(dim), values_(std::move(values)) {
    require(values_.size() == dim * count, ErrorKind::invalid_input,
            "embedding values length " + std::to_string(values_.size()) + " != count*dim " +
                std::to_string(dim * count));
    require(dim > 0 || count == 0, ErrorKind::invalid_input, "embedding dim must be positive");
}

EmbeddingMatrix EmbeddingMatrix::zeros(std::size_t dim, std::size_t count) {
    return EmbeddingMatrix(dim, count, std::vector<float>(dim * count, 0.0f));
}

void EmbeddingMatrix::append_row(std::span<const float> r) {
    require(r.size() == dim_, ErrorKind::invalid_input,
            "row dim " + std::to_string(r.size()) + " != matrix dim " + std::to_string(dim_));
    values_.insert(values_.end(), r.begin(), r.end());
}

bool EmbeddingMatrix::row_finite(std::size_t i) const {
    const auto r = row(i);
    return std::all_of(r.begin(), r.end(), [](float v) { return std::isfinite(v); });
}

bool EmbeddingMatrix::all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](float v) { return std::isfinite(v); });
}

EmbeddingMatrix EmbeddingMatrix::gather(std::span<const std::size_t> rows) const {
    EmbeddingMatrix out(dim_);
    out.reserve(rows.size());
    for (std::size_t r : rows) out.append_row(row(r));
    return out;
}

// ---------------------------------------------------------------------------
// IntentLabelMap
// ---------------------------------------------------------------------------

IntentLabelMap::IntentLabelMap(std::vector<std::string> names) : names_(std::move(names)) {
    std::set<std::string_view> seen;
    for (const auto& n : names_) {
        require(seen.insert(n).second, ErrorKind::invalid_input, "duplicate intent name '" + n + "'");
        require(n != kOosName, ErrorKind::invalid_input, "intent name 'oos' is reserved");
    }
}

std::string IntentLabelMap::name(int label) const {
    if (label == oos_index()) return std::string(kOosName);
    require(label >= 0 && label < oos_index(), ErrorKind::invalid_input,
            "label " + std::to_string(label) + " out of range");
    return names_[static_cast<std::size_t>(label)];
}

std::optional<int> IntentLabelMap::find(std::string_view name) const {
    if (name == kOosName) return oos_index();
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (names_[i] == name) return static_cast<int>(i);
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// DualDataset
// ---------------------------------------------------------------------------

const char* to_string(SplitTag tag) noexcept {
    switch (tag) {
        case SplitTag::train: return "train";
        case SplitTag::val: return "val";
        case SplitTag::test: return "test";
    }
    return "?";
}

std::optional<SplitTag> parse_split_tag(std::string_view s) {
    if (s == "train") return SplitTag::train;
    if (s == "val" || s == "valid" || s == "dev") return SplitTag::val;
    if (s == "test") return SplitTag::test;
    return std::nullopt;
}

DualDataset DualDataset::empty_like() const {
    DualDataset out;
    out.tsdae = EmbeddingMatrix(tsdae.dim());
    out.use = EmbeddingMatrix(use.dim());
    out.label_map = label_map;
    return out;
}

DualDataset DualDataset::subset(std::span<const std::size_t> rows) const {
    DualDataset out = empty_like();
    out.tsdae.reserve(rows.size());
    out.use.reserve(rows.size());
    for (std::size_t r : rows) out.append(*this, r);
    return out;
}

void DualDataset::append(const DualDataset& other, std::size_t row) {
    tsdae.append_row(other.tsdae.row(row));
    use.append_row(other.use.row(row));
    labels.push_back(other.labels[row]);
    ids.push_back(other.ids[row]);
    if (!other.splits.empty()) splits.push_back(other.splits[row]);
}

// ---------------------------------------------------------------------------
// Joint features
// ---------------------------------------------------------------------------

JointFeature concat_features(std::span<const float> tsdae, std::span<const float> use) {
    require(!tsdae.empty() && !use.empty(), ErrorKind::invalid_input,
            "concat_features: both streams need a positive dimension");
    JointFeature out;
    out.h.reserve(tsdae.size() + use.size());
    out.h.insert(out.h.end(), tsdae.begin(), tsdae.end());
    out.h.insert(out.h.end(), use.begin(), use.end());
    return out;
}

FeatureParts split_feature(const JointFeature& feature, std::size_t d_tsdae) {
    require(d_tsdae > 0 && d_tsdae < feature.dim(), ErrorKind::invalid_input,
            "split_feature: d_tsdae " + std::to_string(d_tsdae) + " must lie in (0, " +
                std::to_string(feature.dim()) + ")");
    const auto mid = feature.h.begin() + static_cast<std::ptrdiff_t>(d_tsdae);
    return {std::vector<float>(feature.h.begin(), mid), std::vector<float>(mid, feature.h.end())};
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

std::vector<Violation> validate_dataset(const DualDataset& ds) {
    std::vector<Violation> out;
    const std::string dataset_id = "<dataset>";
    const std::size_t n = ds.tsdae.count();

    auto length_rule = [&](std::size_t got, const char* what) {
        if (got != n) {
            out.push_back({dataset_id, "length_mismatch",
                           std::string(what) + " length " + std::to_string(got) + " != tsdae count " +
                               std::to_string(n)});
        }
    };
    length_rule(ds.use.count(), "use");
    length_rule(ds.labels.size(), "labels");
    length_rule(ds.ids.size(), "ids");
    if (!ds.splits.empty()) length_rule(ds.splits.size(), "splits");

    if (ds.tsdae.dim() == 0) out.push_back({dataset_id, "dim_positive", "tsdae dim is zero"});
    if (ds.use.dim() == 0) out.push_back({dataset_id, "dim_positive", "use dim is zero"});

    auto id_of = [&](std::size_t i) {
        return i < ds.ids.size() ? ds.ids[i] : "#" + std::to_string(i);
    };

    for (std::size_t i = 0; i < ds.tsdae.count(); ++i) {
        if (!ds.tsdae.row_finite(i)) out.push_back({id_of(i), "finite", "non-finite tsdae value"});
    }
    for (std::size_t i = 0; i < ds.use.count(); ++i) {
        if (!ds.use.row_finite(i)) out.push_back({id_of(i), "finite", "non-finite use value"});
    }

    const int oos = ds.label_map.oos_index();
    for (std::size_t i = 0; i < ds.labels.size(); ++i) {
        if (ds.labels[i] < 0 || ds.labels[i] > oos) {
            out.push_back({id_of(i), "label_range",
                           "label " + std::to_string(ds.labels[i]) + " outside [0, " + std::to_string(oos) + "]"});
        }
    }

    std::set<std::string_view> seen;
    for (const auto& id : ds.ids) {
        if (!seen.insert(id).second) out.push_back({id, "unique_id", "duplicate record id"});
    }
    return out;
}

}  // namespace deter
