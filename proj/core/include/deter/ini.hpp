#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace deter {

// Sectioned key = value text. Readers take() the keys they understand and then
// call finish(), which rejects anything left over.
class IniDocument {
public:
    static IniDocument parse(const std::string& text, const std::string& source);
    static IniDocument read(const std::string& path);

    bool has_section(const std::string& section) const;

    std::optional<std::string> take(const std::string& section, const std::string& key);
    std::string take_or(const std::string& section, const std::string& key, const std::string& fallback);

    std::optional<double> take_double(const std::string& section, const std::string& key);
    std::optional<std::uint64_t> take_u64(const std::string& section, const std::string& key);
    std::optional<bool> take_bool(const std::string& section, const std::string& key);
    std::optional<std::vector<double>> take_doubles(const std::string& section, const std::string& key);
    std::optional<std::vector<std::uint64_t>> take_u64s(const std::string& section, const std::string& key);

    // Throws Error(configuration) naming every unconsumed key or section.
    void finish() const;

    const std::string& source() const noexcept { return source_; }

private:
    std::string source_;
    std::map<std::string, std::map<std::string, std::string>> values_;
    std::set<std::pair<std::string, std::string>> taken_;
};

double parse_double(const std::string& s, const std::string& where);
std::uint64_t parse_u64(const std::string& s, const std::string& where);
bool parse_bool(const std::string& s, const std::string& where);
std::vector<std::string> split_list(const std::string& s);

// Shortest text that reads back to the same double.
std::string format_double(double v);

}  // namespace deter
