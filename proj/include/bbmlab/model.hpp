#pragma once

#include <cmath>
#include <optional>

#include "bbmlab/errors.hpp"

namespace bbmlab {

/// Drift regime of the absorbed branching Brownian motion.
///   A: mu <= -sqrt(2 beta), sure extinction
///   B: |mu| < sqrt(2 beta), survival with infinitely many absorptions
///   C: mu >= sqrt(2 beta), escape with finitely many absorptions
enum class Regime { A, B, C_supercritical, C_critical };

inline const char* regime_name(Regime reg) {
    switch (reg) {
        case Regime::A: return "A";
        case Regime::B: return "B";
        case Regime::C_supercritical: return "C_supercritical";
        case Regime::C_critical: return "C_critical";
    }
    return "?";
}

/// Model parameters plus derived constants. Immutable after classify().
struct ModelParams {
    double mu = 0.0;
    double beta = 1.0;
    Regime regime = Regime::B;
    bool critical = false; // mu == sqrt(2 beta) (double root r == R)

    // Roots of (1/2) x^2 - mu x + beta = 0; populated only in regime C.
    std::optional<double> r;
    std::optional<double> R_small;
    // Rescaling p = 2 beta / r^2, in (0, 1]; regime C only.
    std::optional<double> p;

    bool in_regime_c() const { return regime == Regime::C_supercritical || regime == Regime::C_critical; }

    /// Larger root; throws outside regime C.
    double root_r() const {
        if (!r) throw unsupported_regime_error("decay root r requires regime C (mu >= sqrt(2 beta))");
        return *r;
    }
    double root_R() const {
        if (!R_small) throw unsupported_regime_error("root R requires regime C (mu >= sqrt(2 beta))");
        return *R_small;
    }
    double rescaling_p() const {
        if (!p) throw unsupported_regime_error("rescaling p requires regime C (mu >= sqrt(2 beta))");
        return *p;
    }
};

/// Classify drift/branching-rate parameters and derive the regime constants.
inline ModelParams classify(double mu, double beta) {
    if (!std::isfinite(mu) || !std::isfinite(beta) || beta <= 0.0)
        throw invalid_parameter_error("classify: mu must be finite and beta > 0");

    ModelParams out;
    out.mu = mu;
    out.beta = beta;

    const double crit = std::sqrt(2.0 * beta);
    double disc = mu * mu - 2.0 * beta;
    // Clamp the double root: sqrt() noise at mu = sqrt(2 beta) would otherwise
    // leak into r and break the exact p = 1 / a_n <= 1 identities downstream.
    const bool critical = mu > 0.0 && std::abs(disc) <= 1e-12 * std::max(mu * mu, 2.0 * beta);
    if (critical) disc = 0.0;

    if (mu <= -crit && !critical) {
        out.regime = Regime::A;
    } else if (mu < crit && !critical) {
        out.regime = Regime::B;
    } else {
        out.regime = critical ? Regime::C_critical : Regime::C_supercritical;
        out.critical = critical;
        const double sq = std::sqrt(disc);
        out.r = mu + sq;
        out.R_small = mu - sq;
        out.p = critical ? 1.0 : 2.0 * beta / (*out.r * *out.r);
    }
    return out;
}

} // namespace bbmlab
