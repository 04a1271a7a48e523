#include "deter/toy.hpp"

#include <cmath>
#include <cstdio>

#include "deter/error.hpp"
#include "deter/io.hpp"
#include "deter/rng.hpp"

namespace deter {

namespace {

std::vector<float> random_unit(Rng& rng, std::size_t dim) {
    std::vector<double> v(dim);
    double norm = 0.0;
    do {
        norm = 0.0;
        for (auto& x : v) {
            x = rng.normal();
            norm += x * x;
        }
    } while (norm == 0.0);
    norm = std::sqrt(norm);
    std::vector<float> out(dim);
    for (std::size_t i = 0; i < dim; ++i) out[i] = static_cast<float>(v[i] / norm);
    return out;
}

double distance(const std::vector<float>& a, const std::vector<float>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        s += d * d;
    }
    return std::sqrt(s);
}

// Rejection-samples centers one at a time; the retry budget is shared.
std::vector<std::vector<float>> separated_centers(Rng& rng, std::size_t n, std::size_t dim, double min_dist,
                                                  std::size_t max_retries, const char* stream) {
    std::vector<std::vector<float>> centers;
    std::size_t retries = 0;
    while (centers.size() < n) {
        auto c = random_unit(rng, dim);
        bool ok = true;
        for (const auto& other : centers) {
            if (distance(c, other) < min_dist) {
                ok = false;
                break;
            }
        }
        if (ok) {
            centers.push_back(std::move(c));
        } else if (++retries > max_retries) {
            fail(ErrorKind::generation, std::string("gen_toy: cannot place ") + std::to_string(n) + " " + stream +
                                            " centers at distance >= " + std::to_string(min_dist) + " after " +
                                            std::to_string(max_retries) + " retries");
        }
    }
    return centers;
}

void append_noisy(Rng& rng, EmbeddingMatrix& m, const std::vector<float>& center, double sigma) {
    std::vector<float> row(center.size());
    for (std::size_t i = 0; i < center.size(); ++i) {
        row[i] = static_cast<float>(static_cast<double>(center[i]) + sigma * rng.normal());
    }
    m.append_row(row);
}

std::string intent_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "intent_%02zu", i);
    return buf;
}

}  // namespace

void ToyGenConfig::validate() const {
    auto check = [](bool ok, const char* what) { require(ok, ErrorKind::configuration, what); };
    check(n_intents > 0, "n_intents must be positive");
    check(train_per_intent > 0 && val_per_intent > 0 && test_per_intent > 0, "per-intent counts must be positive");
    check(d_tsdae > 0 && d_use > 0, "dims must be positive");
    check(separation > 0.0 && std::isfinite(separation), "separation must be positive");
    check(sigma > 0.0 && std::isfinite(sigma), "sigma must be positive");
}

ToyData gen_toy(const ToyGenConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);
    const double min_dist = cfg.separation * cfg.sigma;
    const auto t_centers = separated_centers(rng, cfg.n_intents, cfg.d_tsdae, min_dist, cfg.max_retries, "tsdae");
    const auto u_centers = separated_centers(rng, cfg.n_intents, cfg.d_use, min_dist, cfg.max_retries, "use");

    std::vector<std::string> names;
    for (std::size_t i = 0; i < cfg.n_intents; ++i) names.push_back(intent_name(i));

    ToyData out;
    auto& ds = out.dataset;
    ds.label_map = IntentLabelMap(names);
    ds.tsdae = EmbeddingMatrix(cfg.d_tsdae);
    ds.use = EmbeddingMatrix(cfg.d_use);

    const std::pair<SplitTag, std::size_t> parts[] = {
        {SplitTag::train, cfg.train_per_intent}, {SplitTag::val, cfg.val_per_intent}, {SplitTag::test, cfg.test_per_intent}};
    for (std::size_t c = 0; c < cfg.n_intents; ++c) {
        std::size_t k = 0;
        for (const auto& [tag, count] : parts) {
            for (std::size_t j = 0; j < count; ++j, ++k) {
                append_noisy(rng, ds.tsdae, t_centers[c], cfg.sigma);
                append_noisy(rng, ds.use, u_centers[c], cfg.sigma);
                ds.labels.push_back(static_cast<int>(c));
                ds.ids.push_back(names[c] + "-" + std::to_string(k));
                ds.splits.push_back(tag);
            }
        }
    }
    for (std::size_t j = 0; j < cfg.external_oos; ++j) {
        append_noisy(rng, ds.tsdae, random_unit(rng, cfg.d_tsdae), cfg.sigma);
        append_noisy(rng, ds.use, random_unit(rng, cfg.d_use), cfg.sigma);
        ds.labels.push_back(ds.label_map.oos_index());
        ds.ids.push_back("oos-" + std::to_string(j));
        ds.splits.push_back(SplitTag::test);
    }

    auto& od = out.open_domain;
    od.tsdae = EmbeddingMatrix(cfg.d_tsdae);
    od.use = EmbeddingMatrix(cfg.d_use);
    for (std::size_t j = 0; j < cfg.open_domain; ++j) {
        append_noisy(rng, od.tsdae, random_unit(rng, cfg.d_tsdae), cfg.sigma);
        append_noisy(rng, od.use, random_unit(rng, cfg.d_use), cfg.sigma);
        od.labels.push_back(od.label_map.oos_index());
        od.ids.push_back("od-" + std::to_string(j));
        od.splits.push_back(SplitTag::train);
    }
    return out;
}

ToyFiles write_toy(const ToyGenConfig& cfg, const std::string& dir) {
    const auto data = gen_toy(cfg);
    ToyFiles files;
    files.manifest = save_dataset(data.dataset, dir, "toy");
    if (cfg.open_domain > 0) files.open_domain_manifest = save_dataset(data.open_domain, dir, "open_domain");
    return files;
}

}  // namespace deter
