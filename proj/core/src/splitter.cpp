#include "deter/splitter.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "deter/error.hpp"
#include "deter/ini.hpp"
#include "deter/rng.hpp"

namespace deter {

namespace {

// Sub-seed streams derived from the plan seed.
enum : std::uint64_t {
    kStreamKnown = 11,
    kStreamSynthTrain = 12,
    kStreamSynthVal = 13,
    kStreamOpenDomain = 14,
};

std::string join_ints(const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(v[i]);
    }
    return out;
}

OutlierBatch gather_open_domain(const DualDataset& pool, std::vector<std::size_t> rows) {
    std::sort(rows.begin(), rows.end());
    OutlierBatch b;
    b.tsdae = pool.tsdae.gather(rows);
    b.use = pool.use.gather(rows);
    for (std::size_t r : rows) {
        OutlierRow row;
        row.provenance = Provenance::open_domain;
        row.id = "od:" + pool.ids[r];
        b.rows.push_back(std::move(row));
    }
    return b;
}

DualDataset with_tag(DualDataset ds, SplitTag tag) {
    ds.splits.assign(ds.size(), tag);
    return ds;
}

}  // namespace

const char* to_string(ValOosSource s) noexcept {
    switch (s) {
        case ValOosSource::synthetic: return "synthetic";
        case ValOosSource::open_domain: return "open_domain";
        case ValOosSource::unselected_intents: return "unselected_intents";
        case ValOosSource::mixed: return "mixed";
    }
    return "?";
}

std::optional<ValOosSource> parse_val_oos_source(std::string_view s) {
    if (s == "synthetic") return ValOosSource::synthetic;
    if (s == "open_domain") return ValOosSource::open_domain;
    if (s == "unselected_intents") return ValOosSource::unselected_intents;
    if (s == "mixed") return ValOosSource::mixed;
    return std::nullopt;
}

std::size_t known_intent_count(std::size_t total, double ratio) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(total) * ratio + 0.5));
}

KnownSplit select_known(std::size_t total, double ratio, std::uint64_t seed) {
    require(total >= 2, ErrorKind::invalid_input, "select_known needs at least 2 intents");
    require(ratio > 0.0 && ratio <= 1.0, ErrorKind::invalid_input, "known ratio must lie in (0, 1]");
    const std::size_t k = known_intent_count(total, ratio);
    require(k > 0 && (ratio == 1.0 || k < total), ErrorKind::degenerate_split,
            "ratio " + format_double(ratio) + " of " + std::to_string(total) + " intents gives " + std::to_string(k) +
                " known intents");
    Rng rng(mix_seed(seed, kStreamKnown));
    const auto picked = rng.sample_without_replacement(total, k);
    std::vector<int> known(picked.begin(), picked.end());
    return select_known_fixed(total, std::move(known));
}

KnownSplit select_known_fixed(std::size_t total, std::vector<int> known) {
    std::sort(known.begin(), known.end());
    require(std::adjacent_find(known.begin(), known.end()) == known.end(), ErrorKind::invalid_input,
            "known intent list has duplicates");
    require(!known.empty(), ErrorKind::degenerate_split, "known intent list is empty");
    for (int k : known) {
        require(k >= 0 && static_cast<std::size_t>(k) < total, ErrorKind::invalid_input,
                "known intent " + std::to_string(k) + " out of range");
    }
    KnownSplit out;
    out.known = std::move(known);
    for (int i = 0; i < static_cast<int>(total); ++i) {
        if (!std::binary_search(out.known.begin(), out.known.end(), i)) out.unknown.push_back(i);
    }
    return out;
}

SplitBundle build_splits(const DualDataset& full, const DualDataset* external_oos, const DualDataset* open_domain_pool,
                         const ExperimentPlan& plan, const SynthConfig& synth) {
    require(full.splits.size() == full.size(), ErrorKind::invalid_input,
            "build_splits: every record needs a train/val/test tag");
    const std::size_t total = full.label_map.known_count();
    const int orig_oos = full.label_map.oos_index();

    {
        std::vector<int> all = plan.known_intents;
        all.insert(all.end(), plan.unknown_intents.begin(), plan.unknown_intents.end());
        std::sort(all.begin(), all.end());
        bool ok = all.size() == total;
        for (std::size_t i = 0; ok && i < all.size(); ++i) ok = all[i] == static_cast<int>(i);
        require(ok, ErrorKind::invalid_input, "build_splits: known and unknown intents must partition all intents");
        require(!plan.known_intents.empty(), ErrorKind::degenerate_split, "build_splits: no known intents");
    }

    SplitBundle out;
    std::vector<std::string> names;
    out.label_remap.assign(total + 1, static_cast<int>(plan.known_intents.size()));
    for (int orig : plan.known_intents) {
        out.label_remap[static_cast<std::size_t>(orig)] = static_cast<int>(names.size());
        names.push_back(full.label_map.names()[static_cast<std::size_t>(orig)]);
    }
    const IntentLabelMap map(names);
    const int oos = map.oos_index();

    DualDataset base = full.empty_like();
    base.label_map = map;
    DualDataset train_in = base, val_in = base, test = base, val_unknown = base;

    for (std::size_t i = 0; i < full.size(); ++i) {
        const int orig = full.labels[i];
        const bool is_corpus_oos = orig == orig_oos;
        const bool known = !is_corpus_oos && out.label_remap[static_cast<std::size_t>(orig)] != oos;
        const SplitTag tag = full.splits[i];
        DualDataset* dst = nullptr;
        if (is_corpus_oos) {
            dst = &test;  // corpus OOS rows are held out for testing only
        } else if (known) {
            dst = tag == SplitTag::train ? &train_in : tag == SplitTag::val ? &val_in : &test;
        } else if (tag == SplitTag::test) {
            dst = &test;
        } else if (tag == SplitTag::val && plan.val_oos_source == ValOosSource::unselected_intents) {
            dst = &val_unknown;
        } else if (tag == SplitTag::train && plan.unknown_train_to_val) {
            dst = &val_unknown;
        }
        if (!dst) continue;
        dst->append(full, i);
        dst->labels.back() = is_corpus_oos ? oos : out.label_remap[static_cast<std::size_t>(orig)];
    }
    if (external_oos) {
        require(external_oos->d_tsdae() == full.d_tsdae() && external_oos->d_use() == full.d_use(),
                ErrorKind::invalid_input, "build_splits: external OOS dims differ from the corpus");
        for (std::size_t i = 0; i < external_oos->size(); ++i) {
            test.tsdae.append_row(external_oos->tsdae.row(i));
            test.use.append_row(external_oos->use.row(i));
            test.labels.push_back(oos);
            test.ids.push_back("ext:" + external_oos->ids[i]);
        }
    }

    // Open-domain draws for train and val come from one sample so they never overlap.
    const bool val_wants_od =
        plan.val_oos_source == ValOosSource::open_domain || plan.val_oos_source == ValOosSource::mixed;
    const bool val_wants_syn =
        plan.val_oos_source == ValOosSource::synthetic || plan.val_oos_source == ValOosSource::mixed;
    const std::size_t val_od = val_wants_od && open_domain_pool ? plan.val_open_domain_count : 0;
    require(plan.open_domain_count == 0 || open_domain_pool, ErrorKind::invalid_input,
            "build_splits: open-domain outliers requested but no open-domain pool given");
    require(plan.val_oos_source != ValOosSource::open_domain || open_domain_pool || plan.val_open_domain_count == 0,
            ErrorKind::invalid_input, "build_splits: validation OOS source open_domain needs an open-domain pool");

    std::vector<OutlierBatch> train_batches, val_batches;
    {
        SynthConfig sc = synth;
        sc.count = plan.synthetic_count;
        sc.seed = mix_seed(plan.seed, kStreamSynthTrain);
        sc.id_prefix = "syn";
        if (sc.count > 0) train_batches.push_back(generate_synthetic(train_in, sc));
    }
    if (open_domain_pool && (plan.open_domain_count > 0 || val_od > 0)) {
        require(open_domain_pool->d_tsdae() == full.d_tsdae() && open_domain_pool->d_use() == full.d_use(),
                ErrorKind::invalid_input, "build_splits: open-domain dims differ from the corpus");
        const std::size_t need = plan.open_domain_count + val_od;
        require(need <= open_domain_pool->size(), ErrorKind::invalid_input,
                "build_splits: need " + std::to_string(need) + " open-domain rows, pool has " +
                    std::to_string(open_domain_pool->size()));
        Rng rng(mix_seed(plan.seed, kStreamOpenDomain));
        const auto drawn = rng.sample_without_replacement(open_domain_pool->size(), need);
        const auto mid = drawn.begin() + static_cast<std::ptrdiff_t>(plan.open_domain_count);
        if (plan.open_domain_count > 0) {
            train_batches.push_back(gather_open_domain(*open_domain_pool, {drawn.begin(), mid}));
        }
        if (val_od > 0) val_batches.push_back(gather_open_domain(*open_domain_pool, {mid, drawn.end()}));
    }
    if (val_wants_syn && plan.val_synthetic_count > 0) {
        SynthConfig sc = synth;
        sc.count = plan.val_synthetic_count;
        sc.seed = mix_seed(plan.seed, kStreamSynthVal);
        sc.id_prefix = "valsyn";
        // Validation pseudo-OOS is mixed from validation inliers so it shares no rows with training.
        val_batches.insert(val_batches.begin(), generate_synthetic(val_in, sc));
    }

    out.train = with_tag(merge_outliers(train_in, train_batches), SplitTag::train);
    DualDataset val = merge_outliers(val_in, val_batches);
    for (std::size_t i = 0; i < val_unknown.size(); ++i) val.append(val_unknown, i);
    out.val = with_tag(std::move(val), SplitTag::val);
    out.test = with_tag(std::move(test), SplitTag::test);
    return out;
}

// ============================================================================
// Plan text
// ============================================================================

std::string format_plan(const ExperimentPlan& plan) {
    std::ostringstream out;
    out << "[plan]\n";
    out << "ratio = " << format_double(plan.ratio) << "\n";
    out << "seed = " << plan.seed << "\n";
    out << "known_intents = " << join_ints(plan.known_intents) << "\n";
    out << "unknown_intents = " << join_ints(plan.unknown_intents) << "\n";
    out << "synthetic_count = " << plan.synthetic_count << "\n";
    out << "open_domain_count = " << plan.open_domain_count << "\n";
    out << "val_oos_source = " << to_string(plan.val_oos_source) << "\n";
    out << "val_synthetic_count = " << plan.val_synthetic_count << "\n";
    out << "val_open_domain_count = " << plan.val_open_domain_count << "\n";
    out << "unknown_train_to_val = " << (plan.unknown_train_to_val ? "true" : "false") << "\n";
    return out.str();
}

ExperimentPlan parse_plan(const std::string& text) {
    auto doc = IniDocument::parse(text, "plan");
    ExperimentPlan p;
    auto ints = [&](const char* key) {
        std::vector<int> v;
        for (auto x : doc.take_u64s("plan", key).value_or(std::vector<std::uint64_t>{})) v.push_back(static_cast<int>(x));
        return v;
    };
    auto need = [](auto opt, const char* key) {
        require(opt.has_value(), ErrorKind::configuration, std::string("plan: missing key ") + key);
        return *opt;
    };
    p.ratio = need(doc.take_double("plan", "ratio"), "ratio");
    p.seed = need(doc.take_u64("plan", "seed"), "seed");
    p.known_intents = ints("known_intents");
    p.unknown_intents = ints("unknown_intents");
    p.synthetic_count = need(doc.take_u64("plan", "synthetic_count"), "synthetic_count");
    p.open_domain_count = need(doc.take_u64("plan", "open_domain_count"), "open_domain_count");
    const auto src = need(doc.take("plan", "val_oos_source"), "val_oos_source");
    const auto parsed = parse_val_oos_source(src);
    require(parsed.has_value(), ErrorKind::configuration, "plan: unknown val_oos_source '" + src + "'");
    p.val_oos_source = *parsed;
    p.val_synthetic_count = need(doc.take_u64("plan", "val_synthetic_count"), "val_synthetic_count");
    p.val_open_domain_count = need(doc.take_u64("plan", "val_open_domain_count"), "val_open_domain_count");
    p.unknown_train_to_val = need(doc.take_bool("plan", "unknown_train_to_val"), "unknown_train_to_val");
    doc.finish();
    return p;
}

}  // namespace deter
