#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "deter/error.hpp"
#include "deter/io.hpp"
#include "deter/toy.hpp"
#include "helpers.hpp"

using namespace deter;

namespace {

double dist2(std::span<const float> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

// Centroids from train rows, then argmin of summed squared distance over both streams.
double nearest_centroid_accuracy(const DualDataset& ds) {
    const std::size_t k = ds.label_map.known_count();
    std::vector<std::vector<double>> ct(k, std::vector<double>(ds.d_tsdae())), cu(k, std::vector<double>(ds.d_use()));
    std::vector<std::size_t> n(k, 0);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.splits[i] != SplitTag::train) continue;
        const auto y = static_cast<std::size_t>(ds.labels[i]);
        for (std::size_t d = 0; d < ds.d_tsdae(); ++d) ct[y][d] += ds.tsdae.row(i)[d];
        for (std::size_t d = 0; d < ds.d_use(); ++d) cu[y][d] += ds.use.row(i)[d];
        ++n[y];
    }
    for (std::size_t c = 0; c < k; ++c) {
        for (auto& v : ct[c]) v /= static_cast<double>(n[c]);
        for (auto& v : cu[c]) v /= static_cast<double>(n[c]);
    }
    std::size_t held = 0, right = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        if (ds.splits[i] == SplitTag::train) continue;
        std::size_t best = 0;
        double best_d = 1e300;
        for (std::size_t c = 0; c < k; ++c) {
            const double d = dist2(ds.tsdae.row(i), ct[c]) + dist2(ds.use.row(i), cu[c]);
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        ++held;
        right += best == static_cast<std::size_t>(ds.labels[i]);
    }
    return static_cast<double>(right) / static_cast<double>(held);
}

}  // namespace

TEST(Toy, CountsAndIds) {
    ToyGenConfig c;
    const auto toy = gen_toy(c);
    const auto& ds = toy.dataset;
    EXPECT_EQ(ds.size(), 300u);
    EXPECT_EQ(ds.d_tsdae(), 32u);
    EXPECT_EQ(ds.d_use(), 16u);
    EXPECT_EQ(std::set<std::string>(ds.ids.begin(), ds.ids.end()).size(), 300u);
    std::map<std::pair<int, SplitTag>, int> per;
    for (std::size_t i = 0; i < ds.size(); ++i) per[{ds.labels[i], ds.splits[i]}]++;
    for (int y = 0; y < 10; ++y) {
        EXPECT_EQ((per[{y, SplitTag::train}]), 20);
        EXPECT_EQ((per[{y, SplitTag::val}]), 5);
        EXPECT_EQ((per[{y, SplitTag::test}]), 5);
    }
    EXPECT_TRUE(validate_dataset(ds).empty());
}

TEST(Toy, CentersAreSeparated) {
    ToyGenConfig c;
    c.seed = 4;
    c.sigma = 0.0001;
    c.separation = 5000.0;
    c.train_per_intent = 1;
    c.val_per_intent = 1;
    c.test_per_intent = 1;
    const auto ds = gen_toy(c).dataset;
    // With tiny noise each row sits on its center, which has unit norm.
    for (std::size_t i = 0; i < ds.size(); ++i) {
        double n = 0;
        for (float v : ds.tsdae.row(i)) n += v * v;
        EXPECT_NEAR(std::sqrt(n), 1.0, 0.01);
        for (std::size_t j = 0; j < i; ++j) {
            if (ds.labels[i] == ds.labels[j]) continue;
            double d = 0;
            for (std::size_t k = 0; k < ds.d_tsdae(); ++k) {
                d += std::pow(ds.tsdae.row(i)[k] - ds.tsdae.row(j)[k], 2.0);
            }
            EXPECT_GE(std::sqrt(d), c.separation * c.sigma - 0.01);
        }
    }
}

TEST(Toy, NearestCentroidOracleIsPerfect) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        ToyGenConfig c;
        c.seed = seed;
        EXPECT_EQ(nearest_centroid_accuracy(gen_toy(c).dataset), 1.0) << "seed " << seed;
    }
}

TEST(Toy, SameSeedSameBytes) {
    test::TempDir a, b;
    ToyGenConfig c;
    c.open_domain = 30;
    c.external_oos = 7;
    const auto fa = write_toy(c, a.str());
    const auto fb = write_toy(c, b.str());
    for (const auto& name : {"toy.tsv", "toy.tsdae.detb", "toy.use.detb", "open_domain.tsv"}) {
        EXPECT_EQ(test::slurp(a.path() / name), test::slurp(b.path() / name)) << name;
    }
    const auto ds = load_dataset(fa.manifest);
    EXPECT_EQ(ds.size(), 307u);
    EXPECT_EQ(load_dataset(fa.open_domain_manifest).size(), 30u);
}

TEST(Toy, InfeasibleSeparationFails) {
    ToyGenConfig c;
    c.d_tsdae = 2;
    c.d_use = 2;
    c.n_intents = 50;
    c.separation = 10.0;
    c.sigma = 0.15;
    c.max_retries = 50;
    try {
        gen_toy(c);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::generation);
    }
}

TEST(Toy, RejectsInvalidConfig) {
    ToyGenConfig c;
    c.separation = 0.0;
    EXPECT_THROW(gen_toy(c), Error);
    c = ToyGenConfig{};
    c.n_intents = 0;
    EXPECT_THROW(gen_toy(c), Error);
}
