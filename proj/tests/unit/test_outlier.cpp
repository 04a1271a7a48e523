#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>
#include <set>

#include "deter/error.hpp"
#include "deter/io.hpp"
#include "deter/outlier.hpp"
#include "helpers.hpp"

using namespace deter;
using deter::test::random_dataset;

namespace {

JointFeature random_feature(std::size_t d, Rng& rng) {
    JointFeature f;
    f.h.resize(d);
    for (auto& v : f.h) v = static_cast<float>(rng.uniform(-10.0, 10.0));
    return f;
}

bool bit_equal(const std::vector<float>& a, const std::vector<float>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0;
}

}  // namespace

TEST(Synthesize, EndpointsAreExact) {
    Rng rng(1);
    for (int i = 0; i < 1000; ++i) {
        const auto a = random_feature(1 + rng.below(40), rng);
        const auto b = random_feature(a.dim(), rng);
        EXPECT_TRUE(bit_equal(synthesize_one(a, b, 0.0).h, a.h));
        EXPECT_TRUE(bit_equal(synthesize_one(a, b, 1.0).h, b.h));
    }
}

TEST(Synthesize, WorkedExample) {
    const auto out = synthesize_one({{0.0f, 0.0f}}, {{2.0f, 4.0f}}, 0.25);
    EXPECT_EQ(out.h, (std::vector<float>{0.5f, 1.0f}));
}

TEST(Synthesize, Betweenness) {
    Rng rng(2);
    for (int i = 0; i < 1000; ++i) {
        const auto a = random_feature(1 + rng.below(64), rng);
        const auto b = random_feature(a.dim(), rng);
        const double theta = rng.uniform_closed(0.0, 1.0);
        const auto out = synthesize_one(a, b, theta);
        for (std::size_t k = 0; k < a.dim(); ++k) {
            EXPECT_GE(out.h[k], std::min(a.h[k], b.h[k]));
            EXPECT_LE(out.h[k], std::max(a.h[k], b.h[k]));
        }
    }
}

TEST(Synthesize, ConcatenationEquivariance) {
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
        const std::size_t dt = 1 + rng.below(32), du = 1 + rng.below(32);
        const auto at = random_feature(dt, rng), au = random_feature(du, rng);
        const auto bt = random_feature(dt, rng), bu = random_feature(du, rng);
        const double theta = rng.uniform_closed(0.0, 1.0);
        const auto joint = synthesize_one(concat_features(at.h, au.h), concat_features(bt.h, bu.h), theta);
        const auto parts = split_feature(joint, dt);
        EXPECT_TRUE(bit_equal(parts.tsdae, synthesize_one(at, bt, theta).h));
        EXPECT_TRUE(bit_equal(parts.use, synthesize_one(au, bu, theta).h));
    }
}

TEST(Synthesize, RejectsBadInput) {
    EXPECT_THROW(synthesize_one({{1.0f}}, {{1.0f, 2.0f}}, 0.5), Error);
    EXPECT_THROW(synthesize_one({{1.0f}}, {{2.0f}}, -0.01), Error);
    EXPECT_THROW(synthesize_one({{1.0f}}, {{2.0f}}, 1.01), Error);
}

TEST(GenerateSynthetic, TwoClassesAllCrossClass) {
    const auto ds = random_dataset(30, 5, 3, 2, 4);
    SynthConfig sc;
    sc.count = 100;
    sc.seed = 9;
    const auto batch = generate_synthetic(ds, sc);
    ASSERT_EQ(batch.size(), 100u);
    EXPECT_EQ(batch.tsdae.count(), 100u);
    EXPECT_EQ(batch.use.count(), 100u);
    for (const auto& r : batch.rows) {
        EXPECT_NE(r.alpha_label, r.beta_label);
        EXPECT_EQ(r.provenance, Provenance::synthetic);
    }
}

TEST(GenerateSynthetic, RowsMatchRecordedSourcesAndTheta) {
    const auto ds = random_dataset(60, 7, 4, 5, 5);
    SynthConfig sc;
    sc.count = 300;
    sc.theta_min = 0.2;
    sc.theta_max = 0.6;
    sc.seed = 10;
    const auto batch = generate_synthetic(ds, sc);
    std::map<std::string, std::size_t> row_of;
    for (std::size_t i = 0; i < ds.size(); ++i) row_of[ds.ids[i]] = i;
    std::set<std::string> ids;
    for (std::size_t k = 0; k < batch.size(); ++k) {
        const auto& r = batch.rows[k];
        ids.insert(r.id);
        EXPECT_GE(r.theta, 0.2);
        EXPECT_LE(r.theta, 0.6);
        const auto a = row_of.at(r.alpha_id), b = row_of.at(r.beta_id);
        EXPECT_EQ(ds.labels[a], r.alpha_label);
        EXPECT_EQ(ds.labels[b], r.beta_label);
        EXPECT_NE(r.alpha_label, r.beta_label);
        const auto joint = synthesize_one(concat_features(ds.tsdae.row(a), ds.use.row(a)),
                                          concat_features(ds.tsdae.row(b), ds.use.row(b)), r.theta);
        const auto expected = concat_features(batch.tsdae.row(k), batch.use.row(k));
        EXPECT_TRUE(bit_equal(joint.h, expected.h));
    }
    EXPECT_EQ(ids.size(), batch.size());
}

TEST(GenerateSynthetic, DeterministicAndSeedSensitive) {
    const auto ds = random_dataset(40, 4, 4, 4, 6);
    SynthConfig sc;
    sc.count = 50;
    sc.seed = 1;
    const auto a = generate_synthetic(ds, sc);
    const auto b = generate_synthetic(ds, sc);
    EXPECT_EQ(a.tsdae, b.tsdae);
    EXPECT_EQ(a.use, b.use);
    sc.seed = 2;
    const auto c = generate_synthetic(ds, sc);
    std::size_t same_theta = 0;
    for (std::size_t i = 0; i < a.size(); ++i) same_theta += a.rows[i].theta == c.rows[i].theta;
    EXPECT_EQ(same_theta, 0u);
}

TEST(GenerateSynthetic, IgnoresOosRowsAndNeedsTwoClasses) {
    auto ds = random_dataset(20, 3, 3, 2, 7);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.labels[i] == 1) ds.labels[i] = ds.label_map.oos_index();
    }
    try {
        generate_synthetic(ds, SynthConfig{});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::insufficient_classes);
    }
}

TEST(OpenDomain, SamplingContract) {
    Rng rng(8);
    const auto t = test::random_matrix(6, 4000, rng);
    const auto u = test::random_matrix(3, 4000, rng);
    const auto b = sample_open_domain(t, u, {}, 500, 1);
    ASSERT_EQ(b.size(), 500u);
    std::set<std::string> ids;
    for (const auto& r : b.rows) {
        ids.insert(r.id);
        EXPECT_EQ(r.provenance, Provenance::open_domain);
    }
    EXPECT_EQ(ids.size(), 500u);

    const auto all = sample_open_domain(t, u, {}, 4000, 3);
    EXPECT_EQ(all.tsdae, t);
    EXPECT_EQ(all.use, u);
    EXPECT_EQ(sample_open_domain(t, u, {}, 0, 3).size(), 0u);
    EXPECT_THROW(sample_open_domain(t, u, {}, 4001, 3), Error);
}

TEST(OpenDomain, LoadFromFiles) {
    test::TempDir dir;
    Rng rng(9);
    const auto t = test::random_matrix(5, 40, rng);
    const auto u = test::random_matrix(2, 40, rng);
    write_embeddings(t, dir.str("od.t.detb"));
    write_embeddings(u, dir.str("od.u.detb"));
    const auto a = load_open_domain(dir.str("od.t.detb"), dir.str("od.u.detb"), 10, 4);
    const auto b = sample_open_domain(t, u, {}, 10, 4);
    EXPECT_EQ(a.tsdae, b.tsdae);
    EXPECT_EQ(a.use, b.use);
    EXPECT_THROW(load_open_domain(dir.str("od.t.detb"), dir.str("od.u.detb"), 41, 4), Error);
    test::spit(dir.path() / "bad.detb", "DETB");
    EXPECT_THROW(load_open_domain(dir.str("bad.detb"), dir.str("od.u.detb"), 1, 4), Error);
}

TEST(Merge, Contract) {
    const auto ds = random_dataset(3800, 2, 2, 38, 10);
    EXPECT_EQ(merge_outliers(ds, {}), ds);

    SynthConfig sc;
    sc.count = 500;
    const auto syn = generate_synthetic(ds, sc);
    Rng rng(11);
    const auto od = sample_open_domain(test::random_matrix(2, 800, rng), test::random_matrix(2, 800, rng), {}, 500, 2);
    const auto merged = merge_outliers(ds, {syn, od});
    EXPECT_EQ(merged.size(), 4800u);
    std::size_t n_oos = 0;
    for (std::size_t i = 0; i < merged.size(); ++i) {
        if (i >= ds.size()) {
            EXPECT_EQ(merged.labels[i], ds.label_map.oos_index());
        }
        n_oos += merged.labels[i] == ds.label_map.oos_index();
    }
    EXPECT_EQ(n_oos, 1000u);

    Rng r2(1);
    const auto wrong = sample_open_domain(test::random_matrix(3, 5, r2), test::random_matrix(2, 5, r2), {}, 2, 1);
    EXPECT_THROW(merge_outliers(ds, {wrong}), Error);
}
