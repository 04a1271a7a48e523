#include "deter/io.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "binary.hpp"
#include "deter/error.hpp"

namespace deter {

namespace fs = std::filesystem;

namespace detail {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorKind::invalid_input, "cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::invalid_input, "cannot open '" + path + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    require(static_cast<bool>(out), ErrorKind::invalid_input, "write to '" + path + "' failed");
}

}  // namespace detail

// ============================================================================
// Embedding files
// ============================================================================

namespace {
constexpr char kEmbeddingMagic[4] = {'D', 'E', 'T', 'B'};
}

std::string encode_embeddings(const EmbeddingMatrix& m) {
    require(m.dim() > 0, ErrorKind::invalid_input, "cannot write embeddings with dim 0");
    require(m.dim() <= 0xFFFFFFFFu, ErrorKind::invalid_input, "embedding dim does not fit in u32");
    require(m.all_finite(), ErrorKind::invalid_input, "cannot write non-finite embedding values");
    detail::ByteWriter w;
    w.bytes(kEmbeddingMagic, 4);
    w.u32(kEmbeddingVersion);
    w.u32(static_cast<std::uint32_t>(m.dim()));
    w.u64(m.count());
    for (float v : m.values()) w.f32(v);
    return w.take();
}

EmbeddingMatrix decode_embeddings(const std::string& bytes, const std::string& source) {
    detail::ByteReader r(bytes, source);
    r.need(kEmbeddingHeaderBytes);
    if (r.bytes(4) != std::string(kEmbeddingMagic, 4)) fail(ErrorKind::format, source + ": bad magic at byte offset 0");
    const auto version = r.u32();
    require(version == kEmbeddingVersion, ErrorKind::format,
            source + ": unsupported version " + std::to_string(version) + " at byte offset 4");
    const auto dim = r.u32();
    require(dim > 0, ErrorKind::format, source + ": dim 0 at byte offset 8");
    const auto count = r.u64();
    const std::uint64_t expected = kEmbeddingHeaderBytes + 4ULL * dim * count;
    require(bytes.size() == expected, ErrorKind::format,
            source + ": expected " + std::to_string(expected) + " bytes for " + std::to_string(count) + "x" +
                std::to_string(dim) + ", actual size " + std::to_string(bytes.size()) + " (payload starts at offset " +
                std::to_string(kEmbeddingHeaderBytes) + ")");
    std::vector<float> values(static_cast<std::size_t>(dim * count));
    for (auto& v : values) v = r.f32();
    return EmbeddingMatrix(dim, static_cast<std::size_t>(count), std::move(values));
}

void write_embeddings(const EmbeddingMatrix& m, const std::string& path) {
    detail::write_file(path, encode_embeddings(m));
}

EmbeddingMatrix read_embeddings(const std::string& path) { return decode_embeddings(detail::read_file(path), path); }

// ============================================================================
// Manifest
// ============================================================================

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find('\t', start);
        out.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

std::size_t parse_size(const std::string& s, const std::string& where) {
    try {
        std::size_t idx = 0;
        const auto v = std::stoull(s, &idx);
        if (idx == s.size() && !s.empty() && s[0] != '-') return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
    }
    fail(ErrorKind::format, where + ": expected a non-negative integer, got '" + s + "'");
}

}  // namespace

std::string format_manifest(const DatasetManifest& m) {
    std::ostringstream out;
    out << "#deter-manifest\t1\n";
    out << "#tsdae_file\t" << m.tsdae_file << "\n";
    out << "#use_file\t" << m.use_file << "\n";
    out << "#tsdae_dim\t" << m.tsdae_dim << "\n";
    out << "#use_dim\t" << m.use_dim << "\n";
    for (const auto& name : m.intents) out << "#intent\t" << name << "\n";
    out << "id\tintent\tsplit\trow\n";
    for (const auto& r : m.records) out << r.id << '\t' << r.intent << '\t' << to_string(r.split) << '\t' << r.row << '\n';
    return out.str();
}

DatasetManifest parse_manifest(const std::string& text, const std::string& source) {
    DatasetManifest m;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    bool seen_magic = false;
    bool seen_columns = false;
    std::set<std::string> header_keys;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::string where = source + ":" + std::to_string(lineno);
        if (line[0] == '#') {
            require(!seen_columns, ErrorKind::format, where + ": header line after records");
            const auto fields = split_tabs(line.substr(1));
            require(fields.size() == 2, ErrorKind::format, where + ": header needs exactly key<TAB>value");
            const auto& key = fields[0];
            const auto& value = fields[1];
            if (key != "intent") {
                require(header_keys.insert(key).second, ErrorKind::format, where + ": duplicate header '" + key + "'");
            }
            if (key == "deter-manifest") {
                require(value == "1", ErrorKind::format, where + ": unsupported manifest version " + value);
                seen_magic = true;
            } else if (key == "tsdae_file") {
                m.tsdae_file = value;
            } else if (key == "use_file") {
                m.use_file = value;
            } else if (key == "tsdae_dim") {
                m.tsdae_dim = parse_size(value, where);
            } else if (key == "use_dim") {
                m.use_dim = parse_size(value, where);
            } else if (key == "intent") {
                m.intents.push_back(value);
            } else {
                fail(ErrorKind::format, where + ": unknown header key '" + key + "'");
            }
            continue;
        }
        const auto fields = split_tabs(line);
        require(fields.size() == 4, ErrorKind::format,
                where + ": expected 4 tab-separated fields, got " + std::to_string(fields.size()));
        if (!seen_columns) {
            require(fields[0] == "id" && fields[1] == "intent" && fields[2] == "split" && fields[3] == "row",
                    ErrorKind::format, where + ": expected column line 'id intent split row'");
            seen_columns = true;
            continue;
        }
        ManifestRecord rec;
        rec.id = fields[0];
        rec.intent = fields[1];
        require(!rec.id.empty(), ErrorKind::format, where + ": empty id");
        require(!rec.intent.empty(), ErrorKind::format, where + ": empty intent");
        const auto tag = parse_split_tag(fields[2]);
        require(tag.has_value(), ErrorKind::format, where + ": unknown split tag '" + fields[2] + "'");
        rec.split = *tag;
        rec.row = parse_size(fields[3], where);
        m.records.push_back(std::move(rec));
    }
    require(seen_magic, ErrorKind::format, source + ": missing '#deter-manifest' header");
    require(!m.tsdae_file.empty() && !m.use_file.empty(), ErrorKind::format, source + ": missing embedding file headers");
    require(m.tsdae_dim > 0 && m.use_dim > 0, ErrorKind::format, source + ": missing or zero dims");
    require(seen_columns, ErrorKind::format, source + ": missing column line");
    return m;
}

void write_manifest(const DatasetManifest& m, const std::string& path) { detail::write_file(path, format_manifest(m)); }

DatasetManifest read_manifest(const std::string& path) { return parse_manifest(detail::read_file(path), path); }

DualDataset load_dataset(const std::string& manifest_path) {
    const auto manifest = read_manifest(manifest_path);
    const fs::path base = fs::path(manifest_path).parent_path();
    auto resolve = [&](const std::string& f) {
        const fs::path p(f);
        return (p.is_absolute() ? p : base / p).string();
    };
    const auto tsdae = read_embeddings(resolve(manifest.tsdae_file));
    const auto use = read_embeddings(resolve(manifest.use_file));
    require(tsdae.dim() == manifest.tsdae_dim, ErrorKind::format,
            manifest_path + ": declared tsdae_dim " + std::to_string(manifest.tsdae_dim) + " but file has " +
                std::to_string(tsdae.dim()));
    require(use.dim() == manifest.use_dim, ErrorKind::format,
            manifest_path + ": declared use_dim " + std::to_string(manifest.use_dim) + " but file has " +
                std::to_string(use.dim()));
    require(tsdae.count() == use.count(), ErrorKind::format,
            manifest_path + ": embedding files disagree on row count");

    const std::size_t n = manifest.records.size();
    require(tsdae.count() == n, ErrorKind::format,
            manifest_path + ": " + std::to_string(n) + " records but embedding files hold " +
                std::to_string(tsdae.count()) + " rows");
    std::vector<bool> used(n, false);
    std::set<std::string> ids;
    for (const auto& r : manifest.records) {
        require(r.row < n, ErrorKind::format, manifest_path + ": record '" + r.id + "' row " + std::to_string(r.row) +
                                                  " out of bounds");
        require(!used[r.row], ErrorKind::format, manifest_path + ": row " + std::to_string(r.row) + " referenced twice");
        used[r.row] = true;
        require(ids.insert(r.id).second, ErrorKind::format, manifest_path + ": duplicate id '" + r.id + "'");
    }

    std::vector<std::string> names = manifest.intents;
    if (names.empty()) {
        std::set<std::string> distinct;
        for (const auto& r : manifest.records) {
            if (r.intent != kOosName) distinct.insert(r.intent);
        }
        names.assign(distinct.begin(), distinct.end());
    }

    DualDataset ds;
    ds.label_map = IntentLabelMap(std::move(names));
    ds.tsdae = EmbeddingMatrix(tsdae.dim());
    ds.use = EmbeddingMatrix(use.dim());
    ds.tsdae.reserve(n);
    ds.use.reserve(n);
    for (const auto& r : manifest.records) {
        const auto label = ds.label_map.find(r.intent);
        require(label.has_value(), ErrorKind::format,
                manifest_path + ": record '" + r.id + "' has intent '" + r.intent + "' missing from #intent list");
        ds.tsdae.append_row(tsdae.row(r.row));
        ds.use.append_row(use.row(r.row));
        ds.labels.push_back(*label);
        ds.ids.push_back(r.id);
        ds.splits.push_back(r.split);
    }
    return ds;
}

std::string save_dataset(const DualDataset& ds, const std::string& dir, const std::string& stem,
                         SplitTag default_split) {
    const fs::path base(dir);
    fs::create_directories(base);
    DatasetManifest m;
    m.tsdae_file = stem + ".tsdae.detb";
    m.use_file = stem + ".use.detb";
    m.tsdae_dim = ds.tsdae.dim();
    m.use_dim = ds.use.dim();
    m.intents = ds.label_map.names();
    for (std::size_t i = 0; i < ds.size(); ++i) {
        m.records.push_back({ds.ids[i], ds.label_map.name(ds.labels[i]),
                             ds.splits.empty() ? default_split : ds.splits[i], i});
    }
    write_embeddings(ds.tsdae, (base / m.tsdae_file).string());
    write_embeddings(ds.use, (base / m.use_file).string());
    const auto manifest_path = (base / (stem + ".tsv")).string();
    write_manifest(m, manifest_path);
    return manifest_path;
}

}  // namespace deter
