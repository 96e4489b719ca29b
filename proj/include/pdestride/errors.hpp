#pragma once

#include <stdexcept>
#include <string>

namespace pdestride {

// File/format problems: missing files, size mismatches, bad schemas.
class data_error : public std::runtime_error {
public:
    explicit data_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical breakdowns: instability, rank deficiency, divergence.
class numerical_error : public std::runtime_error {
public:
    explicit numerical_error(const std::string& msg) : std::runtime_error(msg) {}
};

// A solver run that failed on one problem instance. The stability engine
// catches these and counts the affected cell as an empty support.
class solver_failure : public numerical_error {
public:
    explicit solver_failure(const std::string& msg) : numerical_error(msg) {}
};

}  // namespace pdestride
