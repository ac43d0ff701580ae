#pragma once

#include <stdexcept>
#include <string>

namespace ssep
{
    /// Argument outside the mathematical domain of an operation (negative time, d < 2, ...).
    class DomainError : public std::domain_error
    {
    public:
        using std::domain_error::domain_error;
    };

    /// The requested evaluation is not supported for this input kind.
    class CapabilityError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    /// An infinite sum could not be truncated to the requested accuracy.
    class TruncationError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    /// Invalid or unsatisfiable run configuration.
    class ConfigError : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };
} // namespace ssep
