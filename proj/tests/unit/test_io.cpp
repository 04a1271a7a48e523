#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <limits>

#include "deter/checkpoint.hpp"
#include "deter/error.hpp"
#include "deter/io.hpp"
#include "helpers.hpp"

using namespace deter;
using deter::test::TempDir;

namespace {

std::uint32_t u32_at(const std::string& b, std::size_t off) {
    return static_cast<std::uint32_t>(static_cast<unsigned char>(b[off])) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 1])) << 8 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 2])) << 16 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 3])) << 24;
}

std::string error_text(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST(EmbeddingFile, RoundTripIsBitwise) {
    Rng rng(1);
    const auto m = test::random_matrix(32, 100, rng);
    TempDir dir;
    write_embeddings(m, dir.str("m.detb"));
    const auto back = read_embeddings(dir.str("m.detb"));
    EXPECT_EQ(back, m);
    EXPECT_EQ(std::memcmp(back.values().data(), m.values().data(), m.values().size_bytes()), 0);
    EXPECT_EQ(encode_embeddings(back), test::slurp(dir.path() / "m.detb"));
}

TEST(EmbeddingFile, LayoutByHand) {
    const EmbeddingMatrix m(2, 1, {1.0f, -2.5f});
    const auto b = encode_embeddings(m);
    ASSERT_EQ(b.size(), 20u + 4u * 2u);
    EXPECT_EQ(b.substr(0, 4), "DETB");
    EXPECT_EQ(u32_at(b, 4), 1u);
    EXPECT_EQ(u32_at(b, 8), 2u);
    EXPECT_EQ(u32_at(b, 12), 1u);
    EXPECT_EQ(u32_at(b, 16), 0u);
    EXPECT_EQ(u32_at(b, 20), 0x3F800000u);
    EXPECT_EQ(u32_at(b, 24), 0xC0200000u);
}

TEST(EmbeddingFile, TruncatedPayloadNamesSizes) {
    Rng rng(2);
    auto bytes = encode_embeddings(test::random_matrix(4, 3, rng));
    bytes.resize(bytes.size() - 5);
    const auto msg = error_text([&] { decode_embeddings(bytes); });
    EXPECT_NE(msg.find("68"), std::string::npos) << msg;
    EXPECT_NE(msg.find("63"), std::string::npos) << msg;
    try {
        decode_embeddings(bytes);
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::format);
    }
}

TEST(EmbeddingFile, HeaderErrors) {
    Rng rng(3);
    const auto good = encode_embeddings(test::random_matrix(2, 2, rng));
    auto bad_magic = good;
    bad_magic[0] = 'X';
    EXPECT_THROW(decode_embeddings(bad_magic), Error);
    auto bad_version = good;
    bad_version[4] = 2;
    EXPECT_THROW(decode_embeddings(bad_version), Error);
    EXPECT_THROW(decode_embeddings(good.substr(0, 10)), Error);
    EXPECT_THROW(decode_embeddings(good + "x"), Error);
}

TEST(EmbeddingFile, WriteRejectsZeroDimAndNonFinite) {
    TempDir dir;
    EXPECT_THROW(write_embeddings(EmbeddingMatrix(), dir.str("z.detb")), Error);
    const EmbeddingMatrix nan(2, 1, {0.0f, std::numeric_limits<float>::quiet_NaN()});
    EXPECT_THROW(write_embeddings(nan, dir.str("n.detb")), Error);
}

TEST(Manifest, FormatParseRoundTrip) {
    DatasetManifest m;
    m.tsdae_file = "a.detb";
    m.use_file = "b.detb";
    m.tsdae_dim = 8;
    m.use_dim = 4;
    m.intents = {"x", "y"};
    m.records = {{"u1", "x", SplitTag::train, 0}, {"u2", "oos", SplitTag::test, 1}, {"u3", "y", SplitTag::val, 2}};
    const auto text = format_manifest(m);
    EXPECT_EQ(parse_manifest(text), m);
    EXPECT_EQ(format_manifest(parse_manifest(text)), text);
}

TEST(Manifest, RejectsMalformed) {
    const std::string head = "#deter-manifest\t1\n#tsdae_file\ta\n#use_file\tb\n#tsdae_dim\t2\n#use_dim\t2\n";
    EXPECT_THROW(parse_manifest(head + "#colour\tred\nid\tintent\tsplit\trow\n"), Error);
    EXPECT_THROW(parse_manifest(head + "id\tintent\trow\n"), Error);
    EXPECT_THROW(parse_manifest(head + "id\tintent\tsplit\trow\nu\tx\tsomewhere\t0\n"), Error);
    EXPECT_THROW(parse_manifest(head + "id\tintent\tsplit\trow\nu\tx\ttrain\tminus\n"), Error);
}

namespace {

// Writes a dataset by hand: 3 rows, dims 3/2.
std::string write_small(const TempDir& dir, const std::string& records, std::size_t rows = 3) {
    Rng rng(4);
    write_embeddings(test::random_matrix(3, rows, rng), dir.str("t.detb"));
    write_embeddings(test::random_matrix(2, rows, rng), dir.str("u.detb"));
    const std::string text = "#deter-manifest\t1\n#tsdae_file\tt.detb\n#use_file\tu.detb\n#tsdae_dim\t3\n#use_dim\t2\n"
                             "id\tintent\tsplit\trow\n" +
                             records;
    test::spit(dir.path() / "m.tsv", text);
    return dir.str("m.tsv");
}

}  // namespace

TEST(LoadDataset, AssemblesRowsByIndex) {
    TempDir dir;
    const auto path = write_small(dir, "c\tbeta\ttest\t2\na\talpha\ttrain\t0\nb\toos\tval\t1\n");
    const auto ds = load_dataset(path);
    const auto t = read_embeddings(dir.str("t.detb"));
    ASSERT_EQ(ds.size(), 3u);
    EXPECT_EQ(ds.ids, (std::vector<std::string>{"c", "a", "b"}));
    EXPECT_EQ(ds.label_map.names(), (std::vector<std::string>{"alpha", "beta"}));
    EXPECT_EQ(ds.labels, (std::vector<int>{1, 0, 2}));
    EXPECT_EQ(ds.splits, (std::vector<SplitTag>{SplitTag::test, SplitTag::train, SplitTag::val}));
    EXPECT_TRUE(std::equal(ds.tsdae.row(0).begin(), ds.tsdae.row(0).end(), t.row(2).begin()));
    EXPECT_TRUE(validate_dataset(ds).empty());
}

TEST(LoadDataset, RejectsBrokenIndexing) {
    TempDir dir;
    EXPECT_THROW(load_dataset(write_small(dir, "a\tx\ttrain\t0\nb\tx\ttrain\t0\nc\tx\ttrain\t2\n")), Error);
    EXPECT_THROW(load_dataset(write_small(dir, "a\tx\ttrain\t0\nb\tx\ttrain\t1\nc\tx\ttrain\t3\n")), Error);
    EXPECT_THROW(load_dataset(write_small(dir, "a\tx\ttrain\t0\nb\tx\ttrain\t1\n")), Error);
    EXPECT_THROW(load_dataset(write_small(dir, "a\tx\ttrain\t0\na\tx\ttrain\t1\nc\tx\ttrain\t2\n")), Error);
}

TEST(LoadDataset, RejectsDimMismatch) {
    TempDir dir;
    const auto path = write_small(dir, "a\tx\ttrain\t0\nb\tx\ttrain\t1\nc\tx\ttrain\t2\n");
    Rng rng(5);
    write_embeddings(test::random_matrix(4, 3, rng), dir.str("t.detb"));
    EXPECT_THROW(load_dataset(path), Error);
}

TEST(SaveDataset, RoundTrip) {
    TempDir dir;
    auto ds = test::random_dataset(12, 5, 3, 3, 6);
    ds.labels[4] = ds.label_map.oos_index();
    ds.splits.assign(12, SplitTag::val);
    ds.splits[0] = SplitTag::test;
    const auto path = save_dataset(ds, dir.str(), "rt");
    EXPECT_EQ(load_dataset(path), ds);
}

TEST(Checkpoint, RoundTripIsBitwise) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        ModelConfig c;
        c.d_tsdae = 9;
        c.d_use = 4;
        c.tsdae_hidden = {7, 5};
        c.use_hidden = {3};
        c.n_classes = 4;
        c.dropout_rate = 0.25;
        c.seed = seed;
        auto m = init_model<float>(c);
        Rng rng(seed);
        m.params.for_each_layer([&](DenseLayer<float>& l) {
            for (auto& b : l.bias) b = static_cast<float>(rng.normal());
        });
        TempDir dir;
        save_model(m, dir.str("m.detm"));
        const auto back = load_model(dir.str("m.detm"));
        EXPECT_EQ(back, m);
        EXPECT_EQ(serialize_model(back), test::slurp(dir.path() / "m.detm"));
    }
}

TEST(Checkpoint, RejectsCorruption) {
    ModelConfig c;
    c.d_tsdae = 3;
    c.d_use = 2;
    c.tsdae_hidden = {2};
    c.use_hidden = {2};
    const auto bytes = serialize_model(init_model<float>(c));
    EXPECT_EQ(bytes.substr(0, 4), "DETM");
    auto bad = bytes;
    bad[0] = 'X';
    EXPECT_THROW(deserialize_model(bad), Error);
    EXPECT_THROW(deserialize_model(bytes.substr(0, bytes.size() - 1)), Error);
    EXPECT_THROW(deserialize_model(bytes + "!"), Error);
    bad = bytes;
    bad[4] = 9;
    EXPECT_THROW(deserialize_model(bad), Error);
}

TEST(GoldenExport, LoadsWithoutViolations) {
    const std::string dir = DETER_TEST_DATA_DIR "/golden_export";
    const auto ds = load_dataset(dir + "/golden.tsv");
    EXPECT_EQ(ds.size(), 10u);
    EXPECT_EQ(ds.d_tsdae(), 768u);
    EXPECT_EQ(ds.d_use(), 512u);
    EXPECT_TRUE(validate_dataset(ds).empty());
    EXPECT_EQ(ds.label_map.names(), (std::vector<std::string>{"alarm", "book_flight", "weather"}));
    EXPECT_EQ(std::count(ds.labels.begin(), ds.labels.end(), ds.label_map.oos_index()), 2);
    // manifest row i is embedding row i in both files
    const auto t = read_embeddings(dir + "/golden.tsdae.detb");
    const auto u = read_embeddings(dir + "/golden.use.detb");
    for (std::size_t i = 0; i < ds.size(); ++i) {
        EXPECT_EQ(ds.ids[i], "g" + std::to_string(i));
        EXPECT_TRUE(std::equal(ds.tsdae.row(i).begin(), ds.tsdae.row(i).end(), t.row(i).begin()));
        EXPECT_TRUE(std::equal(ds.use.row(i).begin(), ds.use.row(i).end(), u.row(i).begin()));
    }
}
