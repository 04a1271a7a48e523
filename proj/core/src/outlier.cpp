#include "deter/outlier.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "deter/error.hpp"
#include "deter/io.hpp"
#include "deter/rng.hpp"

namespace deter {

void SynthConfig::validate() const {
    require(theta_min >= 0.0 && theta_min < theta_max && theta_max <= 1.0, ErrorKind::configuration,
            "theta range must satisfy 0 <= theta_min < theta_max <= 1");
}

const char* to_string(Provenance p) noexcept {
    return p == Provenance::synthetic ? "synthetic" : "open_domain";
}

float mix_component(float alpha, float beta, double theta) noexcept {
    const double v = theta * static_cast<double>(beta) + (1.0 - theta) * static_cast<double>(alpha);
    const float lo = std::min(alpha, beta);
    const float hi = std::max(alpha, beta);
    return std::clamp(static_cast<float>(v), lo, hi);
}

namespace {

void mix_into(std::span<const float> alpha, std::span<const float> beta, double theta, std::vector<float>& out) {
    out.resize(alpha.size());
    for (std::size_t i = 0; i < alpha.size(); ++i) out[i] = mix_component(alpha[i], beta[i], theta);
}

}  // namespace

JointFeature synthesize_one(const JointFeature& h_alpha, const JointFeature& h_beta, double theta) {
    require(h_alpha.dim() == h_beta.dim(), ErrorKind::invalid_input,
            "synthesize_one: dims differ (" + std::to_string(h_alpha.dim()) + " vs " + std::to_string(h_beta.dim()) +
                ")");
    require(theta >= 0.0 && theta <= 1.0, ErrorKind::invalid_input, "synthesize_one: theta outside [0, 1]");
    JointFeature out;
    mix_into(h_alpha.h, h_beta.h, theta, out.h);
    return out;
}

OutlierBatch generate_synthetic(const DualDataset& ds, const SynthConfig& sc) {
    sc.validate();
    const int oos = ds.label_map.oos_index();
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.labels[i] >= 0 && ds.labels[i] < oos) by_class[ds.labels[i]].push_back(i);
    }
    require(by_class.size() >= 2, ErrorKind::insufficient_classes,
            "generate_synthetic needs at least 2 known classes, found " + std::to_string(by_class.size()));
    std::vector<const std::vector<std::size_t>*> classes;
    for (const auto& [label, rows] : by_class) classes.push_back(&rows);

    OutlierBatch batch;
    batch.tsdae = EmbeddingMatrix(ds.d_tsdae());
    batch.use = EmbeddingMatrix(ds.d_use());
    batch.tsdae.reserve(sc.count);
    batch.use.reserve(sc.count);
    batch.rows.reserve(sc.count);

    Rng rng(sc.seed);
    std::vector<float> buf;
    const std::size_t n_classes = classes.size();
    for (std::size_t k = 0; k < sc.count; ++k) {
        const std::size_t ca = rng.below(n_classes);
        std::size_t cb = rng.below(n_classes - 1);
        if (cb >= ca) ++cb;
        const auto& rows_a = *classes[ca];
        const auto& rows_b = *classes[cb];
        const std::size_t a = rows_a[rng.below(rows_a.size())];
        const std::size_t b = rows_b[rng.below(rows_b.size())];
        const double theta = rng.uniform(sc.theta_min, sc.theta_max);

        mix_into(ds.tsdae.row(a), ds.tsdae.row(b), theta, buf);
        batch.tsdae.append_row(buf);
        mix_into(ds.use.row(a), ds.use.row(b), theta, buf);
        batch.use.append_row(buf);

        OutlierRow row;
        row.provenance = Provenance::synthetic;
        row.id = sc.id_prefix + ":" + std::to_string(k);
        row.alpha_id = ds.ids[a];
        row.beta_id = ds.ids[b];
        row.alpha_label = ds.labels[a];
        row.beta_label = ds.labels[b];
        row.theta = theta;
        batch.rows.push_back(std::move(row));
    }
    return batch;
}

OutlierBatch sample_open_domain(const EmbeddingMatrix& tsdae, const EmbeddingMatrix& use,
                                const std::vector<std::string>& source_ids, std::size_t count, std::uint64_t seed) {
    require(tsdae.count() == use.count(), ErrorKind::invalid_input,
            "open-domain streams are not aligned (" + std::to_string(tsdae.count()) + " vs " +
                std::to_string(use.count()) + " rows)");
    require(source_ids.empty() || source_ids.size() == tsdae.count(), ErrorKind::invalid_input,
            "open-domain id list does not match row count");
    require(count <= tsdae.count(), ErrorKind::invalid_input,
            "requested " + std::to_string(count) + " open-domain rows, only " + std::to_string(tsdae.count()) +
                " available");
    Rng rng(seed);
    auto picked = rng.sample_without_replacement(tsdae.count(), count);
    std::sort(picked.begin(), picked.end());

    OutlierBatch batch;
    batch.tsdae = tsdae.gather(picked);
    batch.use = use.gather(picked);
    for (std::size_t r : picked) {
        OutlierRow row;
        row.provenance = Provenance::open_domain;
        row.id = "od:" + (source_ids.empty() ? std::to_string(r) : source_ids[r]);
        batch.rows.push_back(std::move(row));
    }
    return batch;
}

OutlierBatch load_open_domain(const std::string& tsdae_file, const std::string& use_file, std::size_t count,
                              std::uint64_t seed) {
    return sample_open_domain(read_embeddings(tsdae_file), read_embeddings(use_file), {}, count, seed);
}

DualDataset merge_outliers(const DualDataset& base, const std::vector<OutlierBatch>& batches, SplitTag tag) {
    DualDataset out = base;
    const int oos = base.label_map.oos_index();
    for (const auto& b : batches) {
        if (b.size() == 0) continue;
        require(b.tsdae.dim() == base.d_tsdae() && b.use.dim() == base.d_use(), ErrorKind::invalid_input,
                "merge_outliers: outlier dims " + std::to_string(b.tsdae.dim()) + "/" + std::to_string(b.use.dim()) +
                    " differ from dataset dims " + std::to_string(base.d_tsdae()) + "/" +
                    std::to_string(base.d_use()));
        for (std::size_t i = 0; i < b.size(); ++i) {
            out.tsdae.append_row(b.tsdae.row(i));
            out.use.append_row(b.use.row(i));
            out.labels.push_back(oos);
            out.ids.push_back(b.rows[i].id);
            if (!base.splits.empty()) out.splits.push_back(tag);
        }
    }
    return out;
}

}  // namespace deter
