/**
 * @file io.hpp
 * @brief Embedding files (one per encoder stream) and the dataset manifest.
 *
 * Embedding file, little-endian:
 *   bytes 0..3   magic "DETB"
 *   bytes 4..7   u32 version (=1)
 *   bytes 8..11  u32 dim
 *   bytes 12..19 u64 count
 *   bytes 20..   count*dim IEEE-754 f32, row-major
 *
 * Manifest: UTF-8 text. Header lines start with '#' and hold tab-separated
 * key/value pairs, followed by a column line and one tab-separated record per
 * utterance:
 *
 *   #deter-manifest  1
 *   #tsdae_file      train.tsdae.detb     (relative to the manifest directory)
 *   #use_file        train.use.detb
 *   #tsdae_dim       768
 *   #use_dim         512
 *   #intent          <name>               (optional, repeated; fixes label order)
 *   id  intent  split  row
 *   utt-0001  book_flight  train  0
 *
 * The intent name "oos" marks out-of-scope records.
 */
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "deter/types.hpp"

namespace deter {

inline constexpr std::uint32_t kEmbeddingVersion = 1;
inline constexpr std::size_t kEmbeddingHeaderBytes = 20;

std::string encode_embeddings(const EmbeddingMatrix& m);
EmbeddingMatrix decode_embeddings(const std::string& bytes, const std::string& source = "embedding file");

void write_embeddings(const EmbeddingMatrix& m, const std::string& path);
EmbeddingMatrix read_embeddings(const std::string& path);

struct ManifestRecord {
    std::string id;
    std::string intent;
    SplitTag split = SplitTag::train;
    std::size_t row = 0;

    friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

struct DatasetManifest {
    std::string tsdae_file;
    std::string use_file;
    std::size_t tsdae_dim = 0;
    std::size_t use_dim = 0;
    std::vector<std::string> intents;  // optional explicit label order
    std::vector<ManifestRecord> records;

    friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

std::string format_manifest(const DatasetManifest& m);
DatasetManifest parse_manifest(const std::string& text, const std::string& source = "manifest");

void write_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest read_manifest(const std::string& path);

// Reads manifest + both embedding files and assembles a DualDataset. Row indices
// must be unique, dense and in bounds; declared dims must match the files.
// Label order: the manifest's #intent lines when present, otherwise sorted
// distinct non-"oos" names.
DualDataset load_dataset(const std::string& manifest_path);

// Writes <dir>/<stem>.tsdae.detb, <dir>/<stem>.use.detb and <dir>/<stem>.tsv.
// Records are written in dataset order; rows without a split tag get `default_split`.
// Returns the manifest path.
std::string save_dataset(const DualDataset& ds, const std::string& dir, const std::string& stem,
                         SplitTag default_split = SplitTag::train);

}  // namespace deter
