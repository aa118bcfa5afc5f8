#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "bbmlab/series.hpp"
#include "bbmlab/waves.hpp"

using namespace bbmlab;

static const double SQRT2 = std::sqrt(2.0);

namespace {
double interp(const WaveSolution& w, double x) {
    std::size_t i = 0;
    while (i + 2 < w.grid.size() && w.grid[i + 1] < x) ++i;
    const double t = (x - w.grid[i]) / (w.grid[i + 1] - w.grid[i]);
    return w.values[i] + t * (w.values[i + 1] - w.values[i]);
}

// cubic Hermite using the stored derivatives; the linear version above is
// only good to ~1e-5 between nodes
double hinterp(const WaveSolution& w, double x) {
    std::size_t i = 0;
    while (i + 2 < w.grid.size() && w.grid[i + 1] < x) ++i;
    const double h = w.grid[i + 1] - w.grid[i];
    const double t = (x - w.grid[i]) / h;
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * w.values[i] + (t3 - 2 * t2 + t) * h * w.derivs[i] +
           (-2 * t3 + 3 * t2) * w.values[i + 1] + (t3 - t2) * h * w.derivs[i + 1];
}
} // namespace

TEST_CASE("shoot: fixed points and divergence taxonomy") {
    const ModelParams mp = classify(2.0, 1.0);
    const WaveSolution one = shoot_standing_wave(mp, 1.0, 0.0, 10.0);
    for (double v : one.values) CHECK(v == Catch::Approx(1.0).margin(1e-12));
    CHECK(one.residual_max < 1e-12);

    const WaveSolution zero = shoot_standing_wave(mp, 0.0, 0.0, 10.0);
    CHECK(zero.decay_class == DecayClass::DIVERGED);

    const WaveSolution up = shoot_standing_wave(mp, 0.0, 50.0, 10.0);
    CHECK((up.decay_class == DecayClass::CROSSED || up.decay_class == DecayClass::DIVERGED));
    CHECK_THROWS_AS(shoot_standing_wave(classify(0.0, 1.0), 0.0, 1.0, 10.0),
                    unsupported_regime_error);
}

TEST_CASE("solve_omega matches the series wave") {
    for (double mu : {SQRT2, 2.0, 3.0}) {
        const ModelParams mp = classify(mu, 1.0);
        const SeriesTable t = build_coefficients(mp, 400);
        const WaveConstants wc = find_wave_constants(t);
        const double r = mp.root_r();
        for (double s : {0.0, 0.5, wc.s0}) {
            const WaveSolution w = solve_omega(mp, s);
            CHECK(w.decay_class == DecayClass::FAST_B);
            double gap = 0.0;
            for (double x = 0.0; x <= 20.0 / r; x += 0.0371)
                gap = std::max(gap, std::abs(hinterp(w, x) - omega_s(t, wc, s, x)));
            CHECK(gap < 1e-5);
        }
        // the extremal wave launches flat: a(s0) = 0
        CHECK(std::abs(solve_omega(mp, wc.s0).shoot_c) < 1e-3);
    }
}

TEST_CASE("solve_omega: fast-decay acceptance and s above s0 refused") {
    const ModelParams mp = classify(2.0, 1.0);
    const double r = mp.root_r();
    const WaveSolution w = solve_omega(mp, 0.0);
    const double x1 = 14.0 / r, x2 = 20.0 / r;
    const double q1 = (1.0 - interp(w, x1)) * std::exp(r * x1);
    const double q2 = (1.0 - interp(w, x2)) * std::exp(r * x2);
    CHECK(q1 > 0.0);
    CHECK(q2 / q1 == Catch::Approx(1.0).margin(0.01));

    const SeriesTable t = build_coefficients(mp, 200);
    const WaveConstants wc = find_wave_constants(t);
    CHECK_THROWS_AS(solve_omega(mp, wc.s0 * 1.2), no_finite_moment_error);
}

TEST_CASE("s0 by shooting: reference values and series agreement") {
    CHECK(find_s0_by_shooting(classify(SQRT2, 1.0)) == Catch::Approx(1.3486).margin(0.0005));
    CHECK(find_s0_by_shooting(classify(3.0, 1.0)) == Catch::Approx(14.11).margin(0.02));
    for (double mu : {SQRT2, 1.6, 2.0, 2.5, 3.0}) {
        const ModelParams mp = classify(mu, 1.0);
        const SeriesTable t = build_coefficients(mp, 300);
        const WaveConstants wc = find_wave_constants(t);
        CHECK(find_s0_by_shooting(mp) == Catch::Approx(wc.s0).margin(1e-3));
    }
}

TEST_CASE("critical travelling wave h_*") {
    const WaveSolution h = solve_hstar(1.0);
    CHECK(interp(h, 0.0) == Catch::Approx(0.5).margin(1e-9));
    for (std::size_t i = 1; i < h.values.size(); ++i) CHECK(h.values[i] >= h.values[i - 1] - 1e-12);

    // left tail: log-slope of h equals the linearization rate
    const double lam = 2.0 - SQRT2;
    const double xa = h.grid.front() + 1.0, xb = h.grid.front() + 3.0;
    const double slope = (std::log(interp(h, xb)) - std::log(interp(h, xa))) / (xb - xa);
    CHECK(slope == Catch::Approx(lam).epsilon(0.01));

    // right tail: (1 - h) e^{sqrt(2) x} is asymptotically linear in x
    auto g = [&](double x) { return (1.0 - interp(h, x)) * std::exp(SQRT2 * x); };
    const double s1 = (g(9.5) - g(7.0)) / 2.5;
    const double s2 = (g(12.0) - g(9.5)) / 2.5;
    CHECK(s1 > 0.0);
    CHECK(s2 / s1 == Catch::Approx(1.0).margin(0.1));
}

TEST_CASE("extinction wave") {
    for (double mu : {0.0, 2.0}) {
        const ModelParams mp = classify(mu, 1.0);
        const WaveSolution th = solve_extinction(mp);
        CHECK(th.values.front() == 1.0);
        for (std::size_t i = 1; i < th.values.size(); ++i)
            CHECK(th.values[i] < th.values[i - 1]);
        const double rate = mu + std::sqrt(mu * mu + 2.0);
        const double x1 = 0.45 * th.grid.back(), x2 = 0.75 * th.grid.back();
        const double slope =
            -(std::log(interp(th, x2)) - std::log(interp(th, x1))) / (x2 - x1);
        CHECK(slope == Catch::Approx(rate).epsilon(0.02));
    }
    CHECK_THROWS_AS(solve_extinction(classify(-2.0, 1.0)), unsupported_regime_error);
}

TEST_CASE("a(s) cross-checks") {
    const ModelParams mp = classify(SQRT2, 1.0);
    std::vector<double> grid;
    for (double s = 0.0; s <= 1.3001; s += 0.05) grid.push_back(s);
    const auto rep = a_of_s_checks(mp, grid);
    REQUIRE(rep.size() == grid.size());
    for (const auto& c : rep) {
        CHECK(std::abs(c.a_shoot - c.a_integral) < 1e-4);
        // centered difference on a 0.05 grid; a(s) has a sqrt singularity at
        // s0 ~ 1.3486 so the difference quotient degrades near the endpoint
        if (c.s <= 1.2) CHECK(std::abs(c.ode_residual) < 5e-3);
        if (c.s < 1.0) CHECK(c.a_shoot > 0.0);
        if (c.s > 1.0 + 1e-9 && c.s < 1.3) CHECK(c.a_shoot < 0.0);
    }
    // a(1) = 0 and a(s0) = 0; a(s) ~ -sqrt(s0 - s) near s0, so s0 must be
    // sharp to many digits for the slope to vanish
    const SeriesTable t = build_coefficients(mp, 300);
    const WaveConstants wc = find_wave_constants(t);
    const auto ends = a_of_s_checks(mp, {1.0, wc.s0});
    CHECK(ends[0].a_shoot == 0.0);
    CHECK(std::abs(ends[1].a_shoot) < 1e-5);
}

TEST_CASE("maximality: sub-critical shots stay below the wave") {
    const ModelParams mp = classify(2.0, 1.0);
    const WaveSolution w = solve_omega(mp, 0.0);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> unif(0.05, 0.95);
    for (int k = 0; k < 10; ++k) {
        const double c = w.shoot_c * unif(rng);
        const WaveSolution sub = shoot_standing_wave(mp, 0.0, c, 20.0 / mp.root_r());
        if (sub.decay_class == DecayClass::CROSSED) continue; // cannot happen below c*
        for (double x = 0.1; x <= 15.0 / mp.root_r(); x += 0.3)
            CHECK(interp(sub, x) <= interp(w, x) + 1e-9);
    }
}

TEST_CASE("decay dichotomy: slow generic rate vs fast wave rate") {
    const ModelParams mp = classify(2.0, 1.0);
    const double r = mp.root_r(), R = mp.root_R();
    const WaveSolution w = solve_omega(mp, 0.0);

    // generic below-1 trajectory decays at the slow rate R
    const WaveSolution sub = shoot_standing_wave(mp, 0.0, 0.9 * w.shoot_c, 40.0 / R / 10.0);
    REQUIRE(sub.decay_class == DecayClass::SLOW_A);
    auto slope_of = [](const WaveSolution& ws, double xa, double xb) {
        double la = 0, lb = 0;
        std::size_t ia = 0, ib = 0;
        for (std::size_t i = 0; i < ws.grid.size(); ++i) {
            if (ws.grid[i] <= xa) ia = i;
            if (ws.grid[i] <= xb) ib = i;
        }
        la = std::log(std::abs(1.0 - ws.values[ia]));
        lb = std::log(std::abs(1.0 - ws.values[ib]));
        return -(lb - la) / (ws.grid[ib] - ws.grid[ia]);
    };
    const double xe = sub.grid.back();
    CHECK(slope_of(sub, 0.6 * xe, 0.95 * xe) == Catch::Approx(R).epsilon(0.03));

    const double xw = 25.0 / r;
    CHECK(slope_of(w, 0.55 * xw, 0.8 * xw) == Catch::Approx(r).epsilon(0.03));

    // c-sweep: crossing above c*, slow approach below
    for (double f : {0.2, 0.6, 0.99}) {
        const WaveSolution v = shoot_standing_wave(mp, 0.0, f * w.shoot_c, 30.0 / R / 10.0);
        CHECK(v.decay_class == DecayClass::SLOW_A);
    }
    for (double f : {1.01, 1.5, 3.0}) {
        const WaveSolution v = shoot_standing_wave(mp, 0.0, f * w.shoot_c, 40.0 / r);
        CHECK((v.decay_class == DecayClass::CROSSED || v.decay_class == DecayClass::DIVERGED));
    }
}

TEST_CASE("monotone wave grids") {
    const ModelParams mp = classify(SQRT2, 1.0);
    const SeriesTable t = build_coefficients(mp, 200);
    const WaveConstants wc = find_wave_constants(t);
    const WaveSolution lo = solve_omega(mp, 0.5);
    const WaveSolution hi = solve_omega(mp, wc.s0 * 0.999);
    const double x_ok = 20.0 / mp.root_r(); // beyond this the separatrix shot drifts
    for (std::size_t i = 1; i < lo.grid.size() && lo.grid[i] <= x_ok; ++i)
        CHECK(lo.values[i] > lo.values[i - 1]);
    for (std::size_t i = 1; i < hi.grid.size() && hi.grid[i] <= x_ok; ++i)
        CHECK(hi.values[i] < hi.values[i - 1]);
}
