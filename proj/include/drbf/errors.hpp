#pragma once

#include <stdexcept>
#include <string>

namespace drbf {

/// Bad input: wrong shapes, schema violations, out-of-domain arguments.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Solver breakdown, non-finite state, divergence.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool cond, const std::string& msg)
{
    if (!cond) throw ValidationError(msg);
}

} // namespace detail
} // namespace drbf
