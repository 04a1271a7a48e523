#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>

#include "deter/rng.hpp"
#include "deter/types.hpp"

namespace deter::test {

// Unique scratch directory, removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("deter-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string str(const std::string& name = "") const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary);
    out << bytes;
}

inline EmbeddingMatrix random_matrix(std::size_t dim, std::size_t count, Rng& rng) {
    std::vector<float> v(dim * count);
    for (auto& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
    return EmbeddingMatrix(dim, count, std::move(v));
}

// k named intents "i0".."i{k-1}", labels cycle through them, no split tags.
inline DualDataset random_dataset(std::size_t n, std::size_t dt, std::size_t du, std::size_t k, std::uint64_t seed) {
    Rng rng(seed);
    DualDataset ds;
    ds.tsdae = random_matrix(dt, n, rng);
    ds.use = random_matrix(du, n, rng);
    std::vector<std::string> names;
    for (std::size_t c = 0; c < k; ++c) names.push_back("i" + std::to_string(c));
    ds.label_map = IntentLabelMap(names);
    for (std::size_t i = 0; i < n; ++i) {
        ds.labels.push_back(static_cast<int>(i % k));
        ds.ids.push_back("r" + std::to_string(i));
    }
    return ds;
}

}  // namespace deter::test
