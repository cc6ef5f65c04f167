#pragma once

#include <stdexcept>
#include <string>

namespace tsonet {

// Error taxonomy mirrored by the CLI exit codes:
//   config_error -> 2, data_error (and subtypes) -> 3, numerical_error -> 4.
class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

class data_error : public std::runtime_error {
public:
    explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed on-disk sample (bad header, wrong shape, truncated payload).
class format_error : public data_error {
public:
    explicit format_error(const std::string& msg) : data_error(msg) {}
};

// Image present but its paired label (or sidecar) is missing.
class pairing_error : public data_error {
public:
    explicit pairing_error(const std::string& msg) : data_error(msg) {}
};

// Shape/contract violation between in-process components.
class contract_error : public std::logic_error {
public:
    explicit contract_error(const std::string& msg) : std::logic_error(msg) {}
};

class numerical_error : public std::runtime_error {
public:
    explicit numerical_error(const std::string& msg) : std::runtime_error(msg) {}
};

inline void check_contract(bool ok, const std::string& msg) {
    if (!ok) throw contract_error(msg);
}

} // namespace tsonet
