#pragma once

#include <stdexcept>
#include <string>

namespace posecast {

// Error categories, mapped to distinct CLI exit codes.
enum class ErrorKind {
    Config,      // bad configuration / CLI arguments
    Format,      // malformed file contents (headers, payload sizes, versions)
    Validation,  // invariant violation on in-memory data
    Runtime,     // everything else (divergence, missing artifacts, ...)
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

    static Error config(const std::string& m) { return Error(ErrorKind::Config, m); }
    static Error format(const std::string& m) { return Error(ErrorKind::Format, m); }
    static Error validation(const std::string& m) { return Error(ErrorKind::Validation, m); }
    static Error runtime(const std::string& m) { return Error(ErrorKind::Runtime, m); }

private:
    ErrorKind kind_;
};

}  // namespace posecast
