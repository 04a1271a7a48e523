#include "deter/ini.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <sstream>

#include "binary.hpp"
#include "deter/error.hpp"

namespace deter {

namespace pt = boost::property_tree;

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

}  // namespace

IniDocument IniDocument::parse(const std::string& text, const std::string& source) {
    IniDocument doc;
    doc.source_ = source;
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        fail(ErrorKind::configuration, source + ":" + std::to_string(e.line()) + ": " + e.message());
    }
    for (const auto& [name, node] : tree) {
        if (node.empty()) {
            doc.values_[""][name] = trim(node.data());
            continue;
        }
        auto& section = doc.values_[name];
        for (const auto& [key, leaf] : node) section[key] = trim(leaf.data());
    }
    return doc;
}

IniDocument IniDocument::read(const std::string& path) { return parse(detail::read_file(path), path); }

bool IniDocument::has_section(const std::string& section) const { return values_.count(section) > 0; }

std::optional<std::string> IniDocument::take(const std::string& section, const std::string& key) {
    const auto s = values_.find(section);
    if (s == values_.end()) return std::nullopt;
    const auto k = s->second.find(key);
    if (k == s->second.end()) return std::nullopt;
    taken_.emplace(section, key);
    return k->second;
}

std::string IniDocument::take_or(const std::string& section, const std::string& key, const std::string& fallback) {
    return take(section, key).value_or(fallback);
}

namespace {
std::string where_of(const std::string& source, const std::string& section, const std::string& key) {
    return source + ": [" + section + "] " + key;
}
}  // namespace

std::optional<double> IniDocument::take_double(const std::string& section, const std::string& key) {
    const auto v = take(section, key);
    if (!v) return std::nullopt;
    return parse_double(*v, where_of(source_, section, key));
}

std::optional<std::uint64_t> IniDocument::take_u64(const std::string& section, const std::string& key) {
    const auto v = take(section, key);
    if (!v) return std::nullopt;
    return parse_u64(*v, where_of(source_, section, key));
}

std::optional<bool> IniDocument::take_bool(const std::string& section, const std::string& key) {
    const auto v = take(section, key);
    if (!v) return std::nullopt;
    return parse_bool(*v, where_of(source_, section, key));
}

std::optional<std::vector<double>> IniDocument::take_doubles(const std::string& section, const std::string& key) {
    const auto v = take(section, key);
    if (!v) return std::nullopt;
    std::vector<double> out;
    for (const auto& item : split_list(*v)) out.push_back(parse_double(item, where_of(source_, section, key)));
    return out;
}

std::optional<std::vector<std::uint64_t>> IniDocument::take_u64s(const std::string& section, const std::string& key) {
    const auto v = take(section, key);
    if (!v) return std::nullopt;
    std::vector<std::uint64_t> out;
    for (const auto& item : split_list(*v)) out.push_back(parse_u64(item, where_of(source_, section, key)));
    return out;
}

void IniDocument::finish() const {
    std::string unknown;
    for (const auto& [section, keys] : values_) {
        for (const auto& [key, value] : keys) {
            if (taken_.count({section, key})) continue;
            if (!unknown.empty()) unknown += ", ";
            unknown += section.empty() ? key : "[" + section + "] " + key;
        }
    }
    require(unknown.empty(), ErrorKind::configuration, source_ + ": unknown keys: " + unknown);
}

double parse_double(const std::string& s, const std::string& where) {
    double v = 0.0;
    const auto* end = s.data() + s.size();
    const auto res = std::from_chars(s.data(), end, v);
    require(res.ec == std::errc() && res.ptr == end && !s.empty() && std::isfinite(v), ErrorKind::configuration,
            where + ": expected a number, got '" + s + "'");
    return v;
}

std::uint64_t parse_u64(const std::string& s, const std::string& where) {
    std::uint64_t v = 0;
    const auto* end = s.data() + s.size();
    const auto res = std::from_chars(s.data(), end, v);
    require(res.ec == std::errc() && res.ptr == end && !s.empty(), ErrorKind::configuration,
            where + ": expected a non-negative integer, got '" + s + "'");
    return v;
}

bool parse_bool(const std::string& s, const std::string& where) {
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    fail(ErrorKind::configuration, where + ": expected true/false, got '" + s + "'");
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const auto pos = s.find(',', start);
        auto item = trim(s.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
        if (!item.empty()) out.push_back(std::move(item));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace deter
