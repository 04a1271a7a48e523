#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "deter/error.hpp"
#include "deter/ini.hpp"
#include "deter/types.hpp"
#include "helpers.hpp"

using namespace deter;

TEST(EmbeddingMatrix, ShapeChecks) {
    EXPECT_THROW(EmbeddingMatrix(3, 2, std::vector<float>(5)), Error);
    auto m = EmbeddingMatrix::zeros(3, 2);
    EXPECT_EQ(m.count(), 2u);
    EXPECT_THROW(m.append_row(std::vector<float>{1.0f, 2.0f}), Error);
    m.append_row(std::vector<float>{1.0f, 2.0f, 3.0f});
    EXPECT_EQ(m.count(), 3u);
    const std::vector<std::size_t> rows{2, 2, 0};
    const auto g = m.gather(rows);
    EXPECT_EQ(g.count(), 3u);
    EXPECT_EQ(g.row(0)[2], 3.0f);
    EXPECT_EQ(g.row(2)[2], 0.0f);
}

TEST(IntentLabelMap, OosIsLast) {
    const IntentLabelMap m({"b", "a", "c"});
    EXPECT_EQ(m.oos_index(), 3);
    EXPECT_EQ(m.n_classes(), 4u);
    EXPECT_EQ(m.name(0), "b");
    EXPECT_EQ(m.name(3), "oos");
    EXPECT_EQ(m.find("c"), 2);
    EXPECT_EQ(m.find("oos"), 3);
    EXPECT_FALSE(m.find("zzz").has_value());
    EXPECT_THROW(IntentLabelMap({"a", "a"}), Error);
    EXPECT_THROW(IntentLabelMap({"oos"}), Error);
}

TEST(SplitTag, Parse) {
    EXPECT_EQ(parse_split_tag("train"), SplitTag::train);
    EXPECT_EQ(parse_split_tag("val"), SplitTag::val);
    EXPECT_EQ(parse_split_tag("test"), SplitTag::test);
    EXPECT_FALSE(parse_split_tag("holdout").has_value());
}

TEST(JointFeature, ConcatThenSplit) {
    const std::vector<float> t{1, 2, 3}, u{4, 5};
    const auto j = concat_features(t, u);
    EXPECT_EQ(j.h, (std::vector<float>{1, 2, 3, 4, 5}));
    const auto parts = split_feature(j, 3);
    EXPECT_EQ(parts.tsdae, t);
    EXPECT_EQ(parts.use, u);
    EXPECT_THROW(split_feature(j, 5), Error);
}

TEST(ValidateDataset, CleanDatasetHasNoViolations) {
    EXPECT_TRUE(validate_dataset(test::random_dataset(20, 4, 3, 3, 1)).empty());
}

TEST(ValidateDataset, ReportsEachRule) {
    auto ds = test::random_dataset(6, 4, 3, 3, 2);
    ds.tsdae.row(1)[2] = std::numeric_limits<float>::infinity();
    ds.use.row(4)[0] = std::numeric_limits<float>::quiet_NaN();
    ds.labels[3] = 7;
    ds.ids[5] = ds.ids[0];
    const auto v = validate_dataset(ds);
    auto has = [&](const std::string& id, const std::string& rule) {
        return std::any_of(v.begin(), v.end(), [&](const Violation& x) { return x.record_id == id && x.rule == rule; });
    };
    EXPECT_TRUE(has("r1", "finite"));
    EXPECT_TRUE(has("r4", "finite"));
    EXPECT_TRUE(has("r3", "label_range"));
    EXPECT_TRUE(has("r0", "unique_id"));
    EXPECT_EQ(v.size(), 4u);

    auto short_labels = test::random_dataset(6, 4, 3, 3, 2);
    short_labels.labels.pop_back();
    const auto w = validate_dataset(short_labels);
    ASSERT_EQ(w.size(), 1u);
    EXPECT_EQ(w[0].rule, "length_mismatch");
    EXPECT_EQ(w[0].record_id, "<dataset>");
}

TEST(Rng, DeterministicStreams) {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
    EXPECT_NE(mix_seed(1, 2), mix_seed(1, 3));
    EXPECT_NE(mix_seed(1, 2), mix_seed(2, 2));
    Rng c(3);
    for (int i = 0; i < 1000; ++i) {
        const auto v = c.below(7);
        EXPECT_LT(v, 7u);
        const double u = c.uniform_closed(0.2, 0.4);
        EXPECT_GE(u, 0.2);
        EXPECT_LE(u, 0.4);
    }
    const auto s = c.sample_without_replacement(50, 50);
    std::vector<std::size_t> sorted(s);
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(sorted[i], i);
}

TEST(Ini, StrictKeysAndValues) {
    auto doc = IniDocument::parse("[a]\nx = 1\ny = 2.5\nz = yes\n[b]\nw = 1, 2 ,3\n", "t");
    EXPECT_EQ(doc.take_u64("a", "x"), 1u);
    EXPECT_EQ(doc.take_double("a", "y"), 2.5);
    EXPECT_EQ(doc.take_bool("a", "z"), true);
    EXPECT_THROW(doc.finish(), Error);
    EXPECT_EQ(doc.take_u64s("b", "w"), (std::vector<std::uint64_t>{1, 2, 3}));
    EXPECT_NO_THROW(doc.finish());

    auto bad = IniDocument::parse("[a]\nx = one\n", "t");
    EXPECT_THROW(bad.take_u64("a", "x"), Error);
    EXPECT_EQ(format_double(0.1), "0.1");
    EXPECT_EQ(parse_double(format_double(1.0 / 3.0), "t"), 1.0 / 3.0);
}
