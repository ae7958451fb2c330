#pragma once

#include <stdexcept>
#include <string>

namespace lamperti {

// Bad arguments to an otherwise healthy object (exit code 2 territory is the
// CLI's schema_error below; this one maps to code 4 only when it escapes).
struct domain_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// The model itself is invalid (divergent jump integral, degenerate triplet).
struct model_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Model is valid but outside what an operation supports (p=0, gamma=inf, ...).
struct unsupported_model_error : model_error {
    using model_error::model_error;
};

// A numeric procedure failed to converge; message carries diagnostics.
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A documented precondition (H0, H1, ...) fails; carries the condition name.
class precondition_error : public std::runtime_error {
public:
    precondition_error(std::string condition, const std::string& what)
        : std::runtime_error(what), condition_(std::move(condition)) {}
    const std::string& condition() const noexcept { return condition_; }

private:
    std::string condition_;
};

// Config file violates the schema; carries the JSON field path.
class schema_error : public std::runtime_error {
public:
    schema_error(std::string path, const std::string& what)
        : std::runtime_error(path + ": " + what), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

}  // namespace lamperti
