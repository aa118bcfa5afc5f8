#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "bbmlab/model.hpp"

using namespace bbmlab;

static const double SQRT2 = std::sqrt(2.0);

TEST_CASE("classify: regime boundaries") {
    CHECK(classify(SQRT2, 1.0).regime == Regime::C_critical);
    CHECK(classify(2.0, 1.0).regime == Regime::C_supercritical);
    CHECK(classify(0.0, 1.0).regime == Regime::B);
    CHECK(classify(-2.0, 1.0).regime == Regime::A);
    CHECK(classify(-SQRT2, 1.0).regime == Regime::A);
    CHECK(classify(SQRT2 * 0.999, 1.0).regime == Regime::B);
}

TEST_CASE("classify: derived roots and rescaling") {
    const ModelParams crit = classify(SQRT2, 1.0);
    CHECK(crit.critical);
    CHECK(crit.root_r() == Catch::Approx(SQRT2).epsilon(1e-14));
    CHECK(crit.root_R() == Catch::Approx(SQRT2).epsilon(1e-14));
    CHECK(crit.rescaling_p() == 1.0);

    const ModelParams sup = classify(2.0, 1.0);
    CHECK_FALSE(sup.critical);
    CHECK(sup.root_r() == Catch::Approx(2.0 + SQRT2).epsilon(1e-14));
    CHECK(sup.root_R() == Catch::Approx(2.0 - SQRT2).epsilon(1e-14));
    CHECK(sup.rescaling_p() == Catch::Approx(2.0 / ((2.0 + SQRT2) * (2.0 + SQRT2))).epsilon(1e-14));
}

TEST_CASE("classify: roots satisfy the characteristic polynomial") {
    for (double mu : {SQRT2, 1.5, 2.0, 3.0, 10.0}) {
        for (double beta : {0.5, 1.0, 2.0}) {
            const ModelParams mp = classify(mu * std::sqrt(beta) / 1.0, beta);
            if (!mp.in_regime_c()) continue;
            for (double x : {mp.root_r(), mp.root_R()}) {
                const double res = 0.5 * x * x - mp.mu * x + mp.beta;
                CHECK(std::abs(res) <= 1e-12 * std::max(1.0, x * x));
            }
        }
    }
}

TEST_CASE("classify: scaling law preserves regime and p") {
    for (double lam : {0.25, 2.0, 16.0}) {
        for (double mu : {-2.0, 0.0, SQRT2, 3.0}) {
            const ModelParams base = classify(mu, 1.0);
            const ModelParams scaled = classify(std::sqrt(lam) * mu, lam);
            CHECK(scaled.regime == base.regime);
            if (base.in_regime_c())
                CHECK(scaled.rescaling_p() == Catch::Approx(base.rescaling_p()).epsilon(1e-12));
        }
    }
}

TEST_CASE("classify: critical point detected through sqrt noise") {
    const double beta = 1.0;
    const ModelParams mp = classify(std::sqrt(2.0 * beta), beta);
    CHECK(mp.regime == Regime::C_critical);
    CHECK(mp.rescaling_p() == 1.0);
    // The mirror drift -sqrt(2 beta) must land in regime A, not C.
    CHECK(classify(-std::sqrt(2.0 * beta), beta).regime == Regime::A);
}

TEST_CASE("classify: invalid parameters") {
    CHECK_THROWS_AS(classify(0.0, 0.0), invalid_parameter_error);
    CHECK_THROWS_AS(classify(0.0, -1.0), invalid_parameter_error);
    CHECK_THROWS_AS(classify(std::nan(""), 1.0), invalid_parameter_error);
    CHECK_THROWS_AS(classify(INFINITY, 1.0), invalid_parameter_error);
}

TEST_CASE("regime accessors throw outside regime C") {
    const ModelParams mp = classify(0.0, 1.0);
    CHECK_THROWS_AS(mp.root_r(), unsupported_regime_error);
    CHECK_THROWS_AS(mp.root_R(), unsupported_regime_error);
    CHECK_THROWS_AS(mp.rescaling_p(), unsupported_regime_error);
}
