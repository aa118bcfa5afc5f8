#pragma once

#include <stdexcept>
#include <string>

namespace bbmlab {

/// Bad user-supplied parameters (non-finite mu, beta <= 0, ...).
struct invalid_parameter_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Operation requires regime C (mu >= sqrt(2 beta)).
struct unsupported_regime_error : std::domain_error {
    using std::domain_error::domain_error;
};

/// Series evaluation requested outside the estimated disc of convergence.
struct out_of_disc_error : std::domain_error {
    double radius_estimate;
    double requested;
    out_of_disc_error(double radius, double z)
        : std::domain_error("series evaluation at |z|=" + std::to_string(std::abs(z)) +
                            " outside estimated radius " + std::to_string(radius)),
          radius_estimate(radius), requested(z) {}
};

/// Root bracketing walked outside the usable disc.
struct radius_exceeded_error : std::domain_error {
    double largest_usable;
    radius_exceeded_error(const std::string& what, double largest)
        : std::domain_error(what), largest_usable(largest) {}
};

/// s > s0: the exponential moment diverges.
struct no_finite_moment_error : std::domain_error {
    using std::domain_error::domain_error;
};

/// An iterative solver failed to converge or to bracket.
struct solver_failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace bbmlab
