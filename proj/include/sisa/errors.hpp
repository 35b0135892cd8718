#pragma once

#include <stdexcept>
#include <string>

namespace sisa {

// Bad input data: unreadable files, malformed rows, invalid parameters.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Lookup of an id or key that does not exist.
struct NotFoundError : std::runtime_error {
    explicit NotFoundError(const std::string& msg) : std::runtime_error(msg) {}
};

// Checkpoint store failures: missing keys, digest mismatches, write errors.
struct StoreError : std::runtime_error {
    explicit StoreError(const std::string& msg) : std::runtime_error(msg) {}
};

// Run-directory state problems: missing prerequisites, locked directories.
struct StateError : std::runtime_error {
    explicit StateError(const std::string& msg) : std::runtime_error(msg) {}
};

// Command-line / config usage problems.
struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace sisa
