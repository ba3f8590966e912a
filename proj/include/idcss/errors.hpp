#pragma once

#include <stdexcept>
#include <string>

namespace idcss {

// Bad dimensions, non-finite entries, out-of-range parameters, malformed files.
class InputDomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// An iterative kernel did not converge, or a factor that must be nonsingular is not.
class NumericalFailure : public std::runtime_error {
public:
    explicit NumericalFailure(const std::string& what, long iterations = -1)
        : std::runtime_error(what), iterations_(iterations) {}

    long iterations() const noexcept { return iterations_; }

private:
    long iterations_;
};

class IntegrationFailure : public NumericalFailure {
public:
    IntegrationFailure(const std::string& what, double time)
        : NumericalFailure(what + " (t = " + std::to_string(time) + ")"), time_(time) {}

    double time() const noexcept { return time_; }

private:
    double time_;
};

}  // namespace idcss
