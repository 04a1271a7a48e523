/**
 * @file types.hpp
 * @brief Embedding storage, intent label maps and the aligned dual-stream dataset.
 *
 * The two encoder streams (TSDAE, USE) are kept as separate row-major float
 * blocks. A joint feature is the TSDAE vector followed by the USE vector.
 */
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace deter {

inline constexpr std::size_t kDefaultTsdaeDim = 768;
inline constexpr std::size_t kDefaultUseDim = 512;

// ============================================================================
// EmbeddingMatrix
// ============================================================================

// count x dim block of floats from one encoder stream, row-major.
// Shape is enforced on construction; finiteness is checked by validate_dataset
// and by the file writer so corrupt inputs can be reported rather than thrown.
class EmbeddingMatrix {
public:
    EmbeddingMatrix() = default;
    explicit EmbeddingMatrix(std::size_t dim) : dim_(dim) {}
    EmbeddingMatrix(std::size_t dim, std::size_t count, std::vector<float> values);

    static EmbeddingMatrix zeros(std::size_t dim, std::size_t count);

    std::size_t dim() const noexcept { return dim_; }
    std::size_t count() const noexcept { return dim_ == 0 ? 0 : values_.size() / dim_; }
    bool empty() const noexcept { return values_.empty(); }

    std::span<const float> row(std::size_t i) const { return {values_.data() + i * dim_, dim_}; }
    std::span<float> row(std::size_t i) { return {values_.data() + i * dim_, dim_}; }

    std::span<const float> values() const noexcept { return values_; }
    std::span<float> values() noexcept { return values_; }

    void append_row(std::span<const float> r);
    void reserve(std::size_t rows) { values_.reserve(rows * dim_); }

    bool row_finite(std::size_t i) const;
    bool all_finite() const;

    // Rows in the given order (duplicates allowed).
    EmbeddingMatrix gather(std::span<const std::size_t> rows) const;

    friend bool operator==(const EmbeddingMatrix&, const EmbeddingMatrix&) = default;

private:
    std::size_t dim_ = 0;
    std::vector<float> values_;
};

// ============================================================================
// IntentLabelMap
// ============================================================================

// Known intents occupy 0..K-1; the OOS class is always index K.
class IntentLabelMap {
public:
    IntentLabelMap() = default;
    explicit IntentLabelMap(std::vector<std::string> names);

    std::size_t known_count() const noexcept { return names_.size(); }
    int oos_index() const noexcept { return static_cast<int>(names_.size()); }
    std::size_t n_classes() const noexcept { return names_.size() + 1; }

    const std::vector<std::string>& names() const noexcept { return names_; }
    // Name for any label in [0, K]; index K yields "oos".
    std::string name(int label) const;
    std::optional<int> find(std::string_view name) const;

    friend bool operator==(const IntentLabelMap&, const IntentLabelMap&) = default;

private:
    std::vector<std::string> names_;
};

inline constexpr std::string_view kOosName = "oos";

// ============================================================================
// DualDataset
// ============================================================================

enum class SplitTag : std::uint8_t { train, val, test };

const char* to_string(SplitTag tag) noexcept;
std::optional<SplitTag> parse_split_tag(std::string_view s);

struct DualDataset {
    EmbeddingMatrix tsdae;
    EmbeddingMatrix use;
    std::vector<int> labels;
    std::vector<std::string> ids;
    IntentLabelMap label_map;
    // Optional; either empty or one tag per record.
    std::vector<SplitTag> splits;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t d_tsdae() const noexcept { return tsdae.dim(); }
    std::size_t d_use() const noexcept { return use.dim(); }

    // Empty dataset with the same dims and label map.
    DualDataset empty_like() const;
    // Subset in the given row order; split tags carried when present.
    DualDataset subset(std::span<const std::size_t> rows) const;
    void append(const DualDataset& other, std::size_t row);

    friend bool operator==(const DualDataset&, const DualDataset&) = default;
};

// ============================================================================
// Joint features
// ============================================================================

struct JointFeature {
    std::vector<float> h;
    std::size_t dim() const noexcept { return h.size(); }
};

JointFeature concat_features(std::span<const float> tsdae, std::span<const float> use);

struct FeatureParts {
    std::vector<float> tsdae;
    std::vector<float> use;
};

FeatureParts split_feature(const JointFeature& feature, std::size_t d_tsdae);

// ============================================================================
// Validation
// ============================================================================

struct Violation {
    std::string record_id;  // "<dataset>" for dataset-level rules
    std::string rule;
    std::string detail;
};

// Empty iff every DualDataset invariant holds. Never throws.
std::vector<Violation> validate_dataset(const DualDataset& ds);

}  // namespace deter
