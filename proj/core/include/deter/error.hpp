#pragma once

#include <stdexcept>
#include <string>

namespace deter {

enum class ErrorKind {
    invalid_input,
    configuration,
    format,
    insufficient_classes,
    degenerate_split,
    generation,
};

const char* to_string(ErrorKind kind) noexcept;

// Single exception type for the library; callers branch on kind() when they care.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
    if (!cond) fail(kind, what);
}

}  // namespace deter
