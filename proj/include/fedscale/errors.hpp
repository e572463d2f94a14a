#ifndef FEDSCALE_ERRORS_HPP
#define FEDSCALE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace fedscale {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NotPsd : public Error {
public:
    using Error::Error;
};

class SingularMatrix : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class BadSpectrum : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class UnstableStep : public Error {
public:
    using Error::Error;
};

class NoRoot : public Error {
public:
    using Error::Error;
};

class DegenerateInput : public Error {
public:
    using Error::Error;
};

/// Raised when an optimal-size denominator vanishes. Carries the log argument
/// value ln(x) at which the formula was evaluated and the critical value at
/// which the denominator is exactly zero.
class DegenerateDenominator : public Error {
public:
    DegenerateDenominator(const std::string& what, double log_argument, double critical_log_argument)
        : Error(what), log_argument_(log_argument), critical_log_argument_(critical_log_argument)
    {
    }

    double log_argument() const noexcept { return log_argument_; }
    double critical_log_argument() const noexcept { return critical_log_argument_; }

private:
    double log_argument_;
    double critical_log_argument_;
};

} // namespace fedscale

#endif // FEDSCALE_ERRORS_HPP
