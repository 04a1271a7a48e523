#include <gtest/gtest.h>

#include <set>

#include "deter/error.hpp"
#include "deter/splitter.hpp"
#include "deter/toy.hpp"
#include "helpers.hpp"

using namespace deter;

namespace {

// n_intents intents with per-intent train/val/test counts, plus n_oos corpus OOS rows tagged test.
DualDataset corpus(std::size_t n_intents, std::size_t tr, std::size_t va, std::size_t te, std::size_t n_oos,
                   std::uint64_t seed) {
    const std::size_t per = tr + va + te;
    const std::size_t n = n_intents * per + n_oos;
    auto ds = test::random_dataset(n, 2, 2, n_intents, seed);
    ds.splits.clear();
    for (std::size_t i = 0; i < n_intents * per; ++i) {
        ds.labels[i] = static_cast<int>(i / per);
        const std::size_t j = i % per;
        ds.splits.push_back(j < tr ? SplitTag::train : j < tr + va ? SplitTag::val : SplitTag::test);
    }
    for (std::size_t i = n_intents * per; i < n; ++i) {
        ds.labels[i] = ds.label_map.oos_index();
        ds.splits.push_back(SplitTag::test);
    }
    return ds;
}

ExperimentPlan plan_for(std::size_t total, double ratio, std::uint64_t seed) {
    ExperimentPlan p;
    p.ratio = ratio;
    p.seed = seed;
    const auto ks = select_known(total, ratio, seed);
    p.known_intents = ks.known;
    p.unknown_intents = ks.unknown;
    return p;
}

std::size_t count_label(const DualDataset& ds, int y) {
    return static_cast<std::size_t>(std::count(ds.labels.begin(), ds.labels.end(), y));
}

}  // namespace

TEST(KnownSelection, Counts) {
    EXPECT_EQ(known_intent_count(150, 0.25), 38u);
    EXPECT_EQ(known_intent_count(150, 0.5), 75u);
    EXPECT_EQ(known_intent_count(150, 0.75), 113u);
    EXPECT_EQ(known_intent_count(20, 0.5), 10u);
    const auto a = select_known(150, 0.25, 3);
    EXPECT_EQ(a.known.size(), 38u);
    EXPECT_EQ(a.unknown.size(), 112u);
    EXPECT_EQ(select_known(20, 0.5, 1).known.size(), 10u);
}

TEST(KnownSelection, PartitionAndDeterminism) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto a = select_known(40, 0.5, seed);
        EXPECT_EQ(a.known, select_known(40, 0.5, seed).known);
        EXPECT_TRUE(std::is_sorted(a.known.begin(), a.known.end()));
        std::set<int> all(a.known.begin(), a.known.end());
        all.insert(a.unknown.begin(), a.unknown.end());
        EXPECT_EQ(all.size(), 40u);
        EXPECT_EQ(*all.begin(), 0);
        EXPECT_EQ(*all.rbegin(), 39);
    }
    EXPECT_NE(select_known(40, 0.5, 1).known, select_known(40, 0.5, 2).known);
}

TEST(KnownSelection, DegenerateRatios) {
    auto kind = [](auto f) {
        try {
            f();
        } catch (const Error& e) {
            return e.kind();
        }
        return ErrorKind::invalid_input;
    };
    EXPECT_EQ(kind([] { select_known(3, 0.1, 0); }), ErrorKind::degenerate_split);
    EXPECT_EQ(kind([] { select_known(3, 0.9, 0); }), ErrorKind::degenerate_split);
    EXPECT_THROW(select_known(10, 0.0, 0), Error);
    EXPECT_THROW(select_known(10, 1.5, 0), Error);
    EXPECT_EQ(select_known(10, 1.0, 0).known.size(), 10u);
    EXPECT_THROW(select_known_fixed(5, {1, 1}), Error);
    EXPECT_THROW(select_known_fixed(5, {7}), Error);
    EXPECT_EQ(select_known_fixed(5, {3, 0}).unknown, (std::vector<int>{1, 2, 4}));
}

TEST(BuildSplits, ClincShapedArithmetic) {
    const auto full = corpus(150, 100, 20, 30, 1200, 1);
    auto pool = test::random_dataset(2000, 2, 2, 1, 2);
    const auto plan = plan_for(150, 0.25, 7);
    const auto b = build_splits(full, nullptr, &pool, plan, SynthConfig{});
    const int oos = 38;
    EXPECT_EQ(b.train.label_map.known_count(), 38u);
    EXPECT_EQ(b.train.size(), 3800u + 500u + 500u);
    EXPECT_EQ(count_label(b.train, oos), 1000u);
    EXPECT_EQ(b.test.size(), 1140u + 3360u + 1200u);
    EXPECT_EQ(count_label(b.test, oos), 3360u + 1200u);
    EXPECT_EQ(b.val.size(), 38u * 20u + 100u + 100u);
    EXPECT_EQ(count_label(b.val, oos), 200u);
    for (const auto* d : {&b.train, &b.val, &b.test}) EXPECT_TRUE(validate_dataset(*d).empty());
}

TEST(BuildSplits, ToyArithmetic) {
    ToyGenConfig tc;
    tc.n_intents = 10;
    tc.train_per_intent = 20;
    tc.val_per_intent = 5;
    tc.test_per_intent = 5;
    const auto full = gen_toy(tc).dataset;
    auto plan = plan_for(10, 0.5, 0);
    plan.synthetic_count = 0;
    plan.open_domain_count = 0;
    plan.val_oos_source = ValOosSource::unselected_intents;
    const auto b = build_splits(full, nullptr, nullptr, plan, SynthConfig{});
    EXPECT_EQ(b.train.size(), 100u);
    EXPECT_EQ(count_label(b.train, 5), 0u);
    EXPECT_EQ(b.test.size(), 50u);
    EXPECT_EQ(count_label(b.test, 5), 25u);
    EXPECT_EQ(b.val.size(), 50u);
    EXPECT_EQ(count_label(b.val, 5), 25u);
}

TEST(BuildSplits, DisjointAndRemapIsBijection) {
    const auto full = corpus(12, 6, 2, 3, 5, 3);
    auto pool = test::random_dataset(100, 2, 2, 1, 4);
    auto plan = plan_for(12, 0.5, 9);
    plan.synthetic_count = 20;
    plan.open_domain_count = 10;
    plan.val_synthetic_count = 4;
    plan.val_open_domain_count = 6;
    const auto b = build_splits(full, nullptr, &pool, plan, SynthConfig{});

    std::set<std::string> seen;
    std::size_t total = 0;
    for (const auto* d : {&b.train, &b.val, &b.test}) {
        seen.insert(d->ids.begin(), d->ids.end());
        total += d->size();
    }
    EXPECT_EQ(seen.size(), total);

    ASSERT_EQ(b.label_remap.size(), 13u);
    std::set<int> image;
    for (int orig : plan.known_intents) image.insert(b.label_remap[static_cast<std::size_t>(orig)]);
    EXPECT_EQ(image.size(), 6u);
    EXPECT_EQ(*image.begin(), 0);
    EXPECT_EQ(*image.rbegin(), 5);
    for (int orig : plan.unknown_intents) EXPECT_EQ(b.label_remap[static_cast<std::size_t>(orig)], 6);
    EXPECT_EQ(b.label_remap.back(), 6);
    // known names keep their relative order
    for (std::size_t i = 0; i < plan.known_intents.size(); ++i) {
        EXPECT_EQ(b.train.label_map.name(static_cast<int>(i)),
                  full.label_map.name(plan.known_intents[i]));
    }
}

TEST(BuildSplits, Deterministic) {
    const auto full = corpus(10, 8, 3, 3, 4, 5);
    auto pool = test::random_dataset(200, 2, 2, 1, 6);
    auto plan = plan_for(10, 0.5, 2);
    plan.synthetic_count = 30;
    plan.open_domain_count = 20;
    const auto a = build_splits(full, nullptr, &pool, plan, SynthConfig{});
    const auto b = build_splits(full, nullptr, &pool, plan, SynthConfig{});
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.val, b.val);
    EXPECT_EQ(a.test, b.test);
}

TEST(BuildSplits, ExternalOosGoesToTest) {
    const auto full = corpus(6, 4, 2, 2, 0, 7);
    const auto ext = test::random_dataset(9, 2, 2, 1, 8);
    auto plan = plan_for(6, 0.5, 0);
    plan.synthetic_count = 0;
    plan.open_domain_count = 0;
    plan.val_oos_source = ValOosSource::synthetic;
    plan.val_synthetic_count = 0;
    const auto b = build_splits(full, &ext, nullptr, plan, SynthConfig{});
    EXPECT_EQ(b.test.size(), 6u * 2u + 9u);
    EXPECT_EQ(count_label(b.test, 3), 6u + 9u);
}

TEST(BuildSplits, RejectsBadInput) {
    auto full = corpus(6, 4, 2, 2, 0, 9);
    auto plan = plan_for(6, 0.5, 0);
    plan.open_domain_count = 10;
    EXPECT_THROW(build_splits(full, nullptr, nullptr, plan, SynthConfig{}), Error);
    plan.open_domain_count = 0;
    plan.val_oos_source = ValOosSource::synthetic;
    auto broken = plan;
    broken.unknown_intents.pop_back();
    EXPECT_THROW(build_splits(full, nullptr, nullptr, broken, SynthConfig{}), Error);
    full.splits.clear();
    EXPECT_THROW(build_splits(full, nullptr, nullptr, plan, SynthConfig{}), Error);
}

TEST(Plan, FormatParseRoundTrip) {
    auto p = plan_for(20, 0.75, 123);
    p.val_oos_source = ValOosSource::unselected_intents;
    p.synthetic_count = 7;
    p.unknown_train_to_val = true;
    const auto text = format_plan(p);
    EXPECT_EQ(parse_plan(text), p);
    EXPECT_EQ(format_plan(parse_plan(text)), text);
    EXPECT_THROW(parse_plan("[plan]\nratio = 0.5\n"), Error);
    EXPECT_THROW(parse_plan(text + "extra = 1\n"), Error);
}
