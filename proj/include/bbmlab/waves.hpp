#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include "bbmlab/model.hpp"
#include "bbmlab/series.hpp"

namespace bbmlab {

/// Tail behaviour of a shot trajectory (asymptotics of 1 - v):
///   SLOW_A: generic e^{-Rx} approach to 1
///   FAST_B: the special e^{-rx} approach (the standing waves)
///   DIVERGED: left [-10, 10]
///   CROSSED: v passed through 1
enum class DecayClass { SLOW_A, FAST_B, DIVERGED, CROSSED };

inline const char* decay_class_name(DecayClass d) {
    switch (d) {
        case DecayClass::SLOW_A: return "SLOW_A";
        case DecayClass::FAST_B: return "FAST_B";
        case DecayClass::DIVERGED: return "DIVERGED";
        case DecayClass::CROSSED: return "CROSSED";
    }
    return "?";
}

struct WaveSolution {
    ModelParams params;
    double s = 0.0;       // boundary value at 0 (when applicable)
    double shoot_c = 0.0; // v'(0) of the accepted shot
    std::vector<double> grid;
    std::vector<double> values;
    std::vector<double> derivs;
    DecayClass decay_class = DecayClass::DIVERGED;
    double residual_max = 0.0; // step-halving defect of the integration
};

namespace detail {

struct OdeRhs {
    double mu, beta;
    // v'' = -2 mu v' - 2 beta (v^2 - v)
    std::array<double, 2> operator()(const std::array<double, 2>& y) const {
        return {y[1], -2.0 * mu * y[1] - 2.0 * beta * (y[0] * y[0] - y[0])};
    }
};

/// One Dormand-Prince 5(4) stage; returns (y5, error_estimate_norm).
inline std::pair<std::array<double, 2>, double> dopri_step(const OdeRhs& f,
                                                           const std::array<double, 2>& y,
                                                           double h) {
    using V = std::array<double, 2>;
    auto axpy = [](const V& a, double c, const V& b) {
        return V{a[0] + c * b[0], a[1] + c * b[1]};
    };
    const V k1 = f(y);
    const V k2 = f(axpy(y, h / 5.0, k1));
    V t = y;
    t = axpy(t, h * 3.0 / 40.0, k1);
    t = axpy(t, h * 9.0 / 40.0, k2);
    const V k3 = f(t);
    t = y;
    t = axpy(t, h * 44.0 / 45.0, k1);
    t = axpy(t, -h * 56.0 / 15.0, k2);
    t = axpy(t, h * 32.0 / 9.0, k3);
    const V k4 = f(t);
    t = y;
    t = axpy(t, h * 19372.0 / 6561.0, k1);
    t = axpy(t, -h * 25360.0 / 2187.0, k2);
    t = axpy(t, h * 64448.0 / 6561.0, k3);
    t = axpy(t, -h * 212.0 / 729.0, k4);
    const V k5 = f(t);
    t = y;
    t = axpy(t, h * 9017.0 / 3168.0, k1);
    t = axpy(t, -h * 355.0 / 33.0, k2);
    t = axpy(t, h * 46732.0 / 5247.0, k3);
    t = axpy(t, h * 49.0 / 176.0, k4);
    t = axpy(t, -h * 5103.0 / 18656.0, k5);
    const V k6 = f(t);
    V y5 = y;
    y5 = axpy(y5, h * 35.0 / 384.0, k1);
    y5 = axpy(y5, h * 500.0 / 1113.0, k3);
    y5 = axpy(y5, h * 125.0 / 192.0, k4);
    y5 = axpy(y5, -h * 2187.0 / 6784.0, k5);
    y5 = axpy(y5, h * 11.0 / 84.0, k6);
    const V k7 = f(y5);
    // embedded 4th-order difference
    V e{};
    e = axpy(e, h * (35.0 / 384.0 - 5179.0 / 57600.0), k1);
    e = axpy(e, h * (500.0 / 1113.0 - 7571.0 / 16695.0), k3);
    e = axpy(e, h * (125.0 / 192.0 - 393.0 / 640.0), k4);
    e = axpy(e, h * (-2187.0 / 6784.0 + 92097.0 / 339200.0), k5);
    e = axpy(e, h * (11.0 / 84.0 - 187.0 / 2100.0), k6);
    e = axpy(e, -h / 40.0, k7);
    return {y5, std::sqrt(e[0] * e[0] + e[1] * e[1])};
}

struct Trajectory {
    std::vector<double> x, v, vp;
    double defect_max = 0.0;
};

/// Adaptive integration of the standing-wave ODE from (v0, c) at x0 = 0
/// until x_max or until `stop(x, v, vp)` returns true.  rtol 1e-10.
inline Trajectory integrate(const OdeRhs& f, double v0, double c, double x_max,
                            const std::function<bool(double, double, double)>& stop = nullptr,
                            double max_h = 0.05) {
    Trajectory out;
    const double rtol = 1e-10, atol = 1e-12;
    double x = 0.0, h = std::min(max_h, 1e-3);
    std::array<double, 2> y{v0, c};
    out.x.push_back(x);
    out.v.push_back(y[0]);
    out.vp.push_back(y[1]);
    int rejects = 0;
    while (x < x_max) {
        h = std::min(h, x_max - x);
        auto [y5, err] = dopri_step(f, y, h);
        const double scale = atol + rtol * std::max({std::abs(y[0]), std::abs(y[1]), 1.0});
        if (err > scale && h > 1e-12) {
            h = std::max(1e-12, 0.9 * h * std::pow(scale / err, 0.2));
            if (++rejects > 10000) throw solver_failure("integrate: step control stalled");
            continue;
        }
        // step-halving defect estimate on accepted steps
        {
            auto [ya, e1] = dopri_step(f, y, h / 2.0);
            auto [yb, e2] = dopri_step(f, ya, h / 2.0);
            out.defect_max = std::max(out.defect_max,
                                      std::abs(yb[0] - y5[0]) / std::max(h, 1e-12));
        }
        x += h;
        y = y5;
        out.x.push_back(x);
        out.v.push_back(y[0]);
        out.vp.push_back(y[1]);
        if (stop && stop(x, y[0], y[1])) break;
        if (err > 0.0) h = std::min(max_h, 0.9 * h * std::pow(scale / err, 0.2));
        else h = max_h;
    }
    return out;
}

/// Log-slope of |1 - v| over the trailing window [x_end - span, x_end].
inline double tail_log_slope(const Trajectory& tr, double span) {
    const double x_end = tr.x.back();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < tr.x.size(); ++i) {
        if (tr.x[i] < x_end - span) continue;
        const double d = std::abs(1.0 - tr.v[i]);
        if (d <= 0.0) continue;
        const double lx = tr.x[i], ly = std::log(d);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++n;
    }
    if (n < 3) return 0.0;
    return (double(n) * sxy - sx * sy) / (double(n) * sxx - sx * sx);
}

} // namespace detail

/// Integrate from (v, v')(0) = (s, c) and classify the outcome.
inline WaveSolution shoot_standing_wave(const ModelParams& params, double s, double c,
                                        double x_max) {
    if (!params.in_regime_c())
        throw unsupported_regime_error("shoot_standing_wave requires regime C");
    const detail::OdeRhs f{params.mu, params.beta};

    bool crossed = false, diverged = false;
    const double side0 = (s > 1.0) ? 1.0 : -1.0; // sign of v - 1 at launch
    auto stop = [&](double, double v, double) {
        if (v > std::max(11.0, s + 1.0) || v < -10.0) {
            diverged = true;
            return true;
        }
        if ((v - 1.0) * side0 < -1e-13 && std::abs(v - 1.0) > 1e-13) {
            crossed = true;
            return true;
        }
        return false;
    };
    detail::Trajectory tr = detail::integrate(f, s, c, x_max, stop);

    WaveSolution out;
    out.params = params;
    out.s = s;
    out.shoot_c = c;
    out.grid = std::move(tr.x);
    out.values = std::move(tr.v);
    out.derivs = std::move(tr.vp);
    out.residual_max = tr.defect_max;

    if (crossed) {
        out.decay_class = DecayClass::CROSSED;
        return out;
    }
    if (diverged || std::abs(out.values.back() - 1.0) > 0.5) {
        out.decay_class = DecayClass::DIVERGED;
        return out;
    }
    if (s == 1.0 && c == 0.0) {
        out.decay_class = DecayClass::FAST_B;
        return out;
    }
    const double r = params.root_r(), R = params.root_R();
    detail::Trajectory tail{out.grid, out.values, out.derivs, 0.0};
    if (params.critical) {
        // (Ax + B) e^{-mu x} taxonomy: compare g = |1-v| e^{mu x} at the end
        // and the midpoint of the tail; linear growth means A != 0.
        const double x2 = out.grid.back();
        const double x1 = x2 * 0.5;
        auto g_at = [&](double xq) {
            std::size_t i = 0;
            while (i + 1 < out.grid.size() && out.grid[i + 1] < xq) ++i;
            return std::abs(1.0 - out.values[i]) * std::exp(params.mu * out.grid[i]);
        };
        const double g1 = g_at(x1), g2 = g_at(x2);
        out.decay_class = (g1 > 0.0 && g2 / g1 < 0.5 * (1.0 + x2 / x1))
                              ? DecayClass::FAST_B
                              : DecayClass::SLOW_A;
    } else {
        const double slope = -detail::tail_log_slope(tail, std::min(5.0 / R, 0.3 * out.grid.back()));
        out.decay_class = (slope > 0.5 * (r + R)) ? DecayClass::FAST_B : DecayClass::SLOW_A;
    }
    return out;
}

/// Bisection on c = v'(0) for the unique trajectory approaching 1 at the
/// fast rate: the separatrix between shots that cross 1 and shots that stay
/// on the launch side of 1.
inline WaveSolution solve_omega(const ModelParams& params, double s, double tol = 1e-13) {
    if (!params.in_regime_c())
        throw unsupported_regime_error("solve_omega requires regime C");
    if (s < 0.0) throw invalid_parameter_error("solve_omega: s >= 0 required");
    const double r = params.root_r();
    const double x_max = 40.0 / r;

    if (s == 1.0) return shoot_standing_wave(params, 1.0, 0.0, x_max);

    auto crosses = [&](double c) {
        const WaveSolution w = shoot_standing_wave(params, s, c, x_max);
        if (w.decay_class == DecayClass::CROSSED) return true;
        if (w.decay_class == DecayClass::DIVERGED)
            return s > 1.0 ? (w.values.back() > 1.0 ? false : true)
                           : (w.values.back() > 1.0);
        if (params.critical) {
            // Near the double root everything converges to 1 in double
            // precision; the eventual side of 1 is the sign of A in
            // (v - 1) e^{mu x} = A x + B, measured where roundoff is not
            // yet amplified.
            auto g_at = [&](double xq) {
                std::size_t i = 0;
                while (i + 1 < w.grid.size() && w.grid[i + 1] < xq) ++i;
                return std::make_pair(w.grid[i],
                                      (w.values[i] - 1.0) * std::exp(params.mu * w.grid[i]));
            };
            // window where the nonlinear correction (~e^{-mu x}) and the
            // amplified roundoff (~e^{+mu x}) are both below ~1e-7
            const auto [x1, g1] = g_at(0.32 * x_max);
            const auto [x2, g2] = g_at(0.46 * x_max);
            const double slope_A = (g2 - g1) / (x2 - x1);
            // decisive margin so the flat shot at s = s0 (A ~ 0 up to
            // roundoff) is not misread as crossing
            const double tol_A = 3e-7;
            return s < 1.0 ? (slope_A > tol_A) : (slope_A < -tol_A);
        }
        return false;
    };

    double c_lo, c_hi; // c_lo stays on the launch side, c_hi crosses
    if (s < 1.0) {
        c_lo = 0.0;
        c_hi = std::max(1.0, r * (1.0 - s));
        for (int it = 0; !crosses(c_hi); ++it) {
            c_hi *= 2.0;
            if (it > 60) throw solver_failure("solve_omega: no crossing bracket (s < 1)");
        }
        if (crosses(c_lo)) throw solver_failure("solve_omega: c = 0 already crosses (s < 1)");
    } else {
        // descending toward 1: c <= 0, crossing below 1 when |c| too large
        c_lo = 0.0;
        c_hi = -std::max(1.0, r * (s - 1.0));
        for (int it = 0; !crosses(c_hi); ++it) {
            c_hi *= 2.0;
            if (it > 60) throw solver_failure("solve_omega: no crossing bracket (s > 1)");
        }
        if (crosses(c_lo))
            throw no_finite_moment_error("solve_omega: flat shot already falls below 1 (s > s0)");
    }
    const double c_scale = std::max(std::abs(c_hi), 1.0);
    for (int it = 0; it < 300 && std::abs(c_hi - c_lo) > tol * c_scale; ++it) {
        const double mid = 0.5 * (c_lo + c_hi);
        (crosses(mid) ? c_hi : c_lo) = mid;
    }
    double c_best = 0.5 * (c_lo + c_hi);
    if (s > 1.0 && !params.critical && std::abs(c_best) < 1e-3) {
        // s is within the crossing-detection resolution of the extremal
        // parameter (a(s) ~ -sqrt(s0 - s) collapses there), and the
        // extremal wave launches flat; the flat shot is then the most
        // accurate trajectory available
        c_best = 0.0;
    } else if (s > 1.0 && params.critical && std::abs(c_best) < 1e-2) {
        // Near s0 the slow tail coefficient barely responds to c (the
        // perturbation moves the fast-mode amplitude instead), so the
        // bisection has an O(1e-4..1e-3) floor in c.  The extremal wave is
        // flat at the origin; keep whichever of the flat shot and the
        // bisected shot carries less of the slow (generic) tail mode.
        auto slow_mode = [&](double c) {
            const WaveSolution w = shoot_standing_wave(params, s, c, x_max);
            if (w.decay_class == DecayClass::CROSSED ||
                w.decay_class == DecayClass::DIVERGED)
                return std::numeric_limits<double>::infinity();
            auto g_at = [&](double rate, double xq) {
                std::size_t i = 0;
                while (i + 1 < w.grid.size() && w.grid[i + 1] < xq) ++i;
                return std::make_pair(w.grid[i],
                                      (w.values[i] - 1.0) * std::exp(rate * w.grid[i]));
            };
            // slow mode = x e^{-mu x}: Richardson-corrected slope of
            // (v - 1) e^{mu x}, the bias decaying like e^{-mu x}
            const auto [xa, ga] = g_at(params.mu, 0.21 * x_max);
            const auto [xb, gb] = g_at(params.mu, 0.32 * x_max);
            const auto [xc, gc] = g_at(params.mu, 0.46 * x_max);
            const double s1 = (gb - ga) / (xb - xa);
            const double s2 = (gc - gb) / (xc - xb);
            const double rho = std::exp(-params.mu * 0.5 * (xc - xa));
            return std::abs((s2 - rho * s1) / (1.0 - rho));
        };
        // rate the bisected candidate at the non-crossing bracket end (the
        // midpoint itself may sit a hair on the crossing side)
        if (slow_mode(0.0) <= slow_mode(c_lo)) c_best = 0.0;
    }
    WaveSolution w = shoot_standing_wave(params, s, c_best, x_max);
    w.decay_class = DecayClass::FAST_B;
    return w;
}

/// Largest s admitting a standing wave: bisection on s with flat shots
/// (s, 0).  Falling below 1 means s too large; turning upward means s too
/// small.
inline double find_s0_by_shooting(const ModelParams& params, double tol = 1e-7) {
    if (!params.in_regime_c())
        throw unsupported_regime_error("find_s0_by_shooting requires regime C");
    const detail::OdeRhs f{params.mu, params.beta};
    const double x_max = 40.0 / params.root_r();

    // +1: fell below 1 (s too large); -1: rose above launch value (s too small)
    auto shot_sign = [&](double s) {
        int sign = 0;
        auto stop = [&](double, double v, double vp) {
            if (v < 1.0 - 1e-10) {
                sign = +1;
                return true;
            }
            if (vp > 1e-10) {
                sign = -1;
                return true;
            }
            return false;
        };
        detail::Trajectory tr = detail::integrate(f, s, 0.0, x_max, stop);
        if (sign == 0 && params.critical) {
            // at criticality flat shots hug 1 to machine precision either
            // side of s0; read the eventual side of 1 from the sign of A in
            // (v - 1) e^{mu x} = A x + B
            auto g_at = [&](double xq) {
                std::size_t i = 0;
                while (i + 1 < tr.x.size() && tr.x[i + 1] < xq) ++i;
                return std::make_pair(tr.x[i],
                                      (tr.v[i] - 1.0) * std::exp(params.mu * tr.x[i]));
            };
            const auto [x1, g1] = g_at(0.32 * x_max);
            const auto [x2, g2] = g_at(0.46 * x_max);
            sign = (g2 - g1) / (x2 - x1) < 0.0 ? +1 : -1;
        }
        return sign; // 0: undecided flat approach; treat as existing wave
    };

    double lo = 1.0, hi = 2.0;
    while (shot_sign(hi) <= 0) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e6) throw solver_failure("find_s0_by_shooting: no upper bracket");
    }
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        (shot_sign(mid) > 0 ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
}

/// Critical whole-line travelling wave at speed sqrt(2 beta), normalized by
/// h(0) = 1/2.  Launched from the linearized left tail; no shooting needed
/// (the equation is autonomous and (1,0) is attracting).
inline WaveSolution solve_hstar(double beta, double x_right = 15.0) {
    if (!(beta > 0.0)) throw invalid_parameter_error("solve_hstar: beta > 0 required");
    const double c_speed = std::sqrt(2.0 * beta);
    // travelling frame: (1/2) h'' + sqrt(2 beta) h' + beta (h^2 - h) = 0
    const detail::OdeRhs f{c_speed, beta};
    const double lam = std::sqrt(beta) * (2.0 - std::sqrt(2.0)); // positive root of (1/2)l^2 + c l - b
    const double eps = 1e-8;
    const double x_left = -20.0 / std::sqrt(beta);
    const double span = (x_right - x_left) * 1.5 + 10.0;

    detail::Trajectory tr = detail::integrate(f, eps, lam * eps, span);

    // locate the h = 1/2 crossing and recenter
    std::size_t k = 0;
    while (k + 1 < tr.v.size() && tr.v[k + 1] < 0.5) ++k;
    if (k + 1 >= tr.v.size()) throw solver_failure("solve_hstar: no half-height crossing");
    const double t_frac = (0.5 - tr.v[k]) / (tr.v[k + 1] - tr.v[k]);
    const double x_half = tr.x[k] + t_frac * (tr.x[k + 1] - tr.x[k]);

    WaveSolution out;
    out.params = classify(0.0, beta);
    out.s = 0.5;
    out.residual_max = tr.defect_max;
    out.decay_class = DecayClass::FAST_B;
    for (std::size_t i = 0; i < tr.x.size(); ++i) {
        out.grid.push_back(tr.x[i] - x_half); // shift so h(0) = 1/2
        out.values.push_back(tr.v[i]);
        out.derivs.push_back(tr.vp[i]);
        if (i > 0 && tr.v[i] < tr.v[i - 1] - 1e-12)
            throw solver_failure("solve_hstar: non-monotone trajectory");
    }
    return out;
}

/// Extinction wave: (1/2)t'' + mu t' + beta(t^2 - t) = 0, t(0) = 1,
/// t(inf) = 0.  Saddle connection found by bisection on t'(0).
inline WaveSolution solve_extinction(const ModelParams& params, double tol = 1e-13) {
    if (params.regime == Regime::A)
        throw unsupported_regime_error("solve_extinction requires mu > -sqrt(2 beta)");
    const detail::OdeRhs f{params.mu, params.beta};
    const double rate = params.mu + std::sqrt(params.mu * params.mu + 2.0 * params.beta);
    const double x_max = 40.0 / rate;

    // +1: crossed below 0 (slope too steep); -1: turned upward (too shallow)
    auto shot_sign = [&](double c) {
        int sign = 0;
        auto stop = [&](double, double v, double vp) {
            if (v < -1e-12) {
                sign = +1;
                return true;
            }
            if (vp > 1e-12 || v > 1.0 + 1e-9) {
                sign = -1;
                return true;
            }
            return false;
        };
        detail::integrate(f, 1.0, c, x_max, stop);
        return sign;
    };

    double hi = -rate; // candidate steep slope
    while (shot_sign(hi) < 0) {
        hi *= 2.0;
        if (hi < -1e8) throw solver_failure("solve_extinction: no steep bracket");
    }
    double lo = hi / 2.0;
    while (shot_sign(lo) > 0) {
        lo /= 2.0;
        if (lo > -1e-12) throw solver_failure("solve_extinction: no shallow bracket");
    }
    // lo: shallow (turns up), hi: steep (crosses 0)
    for (int it = 0; it < 300 && std::abs(hi - lo) > tol * std::abs(hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        (shot_sign(mid) > 0 ? hi : lo) = mid;
    }
    const double c_star = 0.5 * (lo + hi);

    bool bad = false;
    auto stop = [&](double, double v, double vp) {
        if (v < -1e-9 || vp > 1e-6) {
            bad = true;
            return true;
        }
        return v < 1e-11; // stop above the roundoff floor of the saddle shot
    };
    detail::Trajectory tr = detail::integrate(f, 1.0, c_star, x_max, stop);
    WaveSolution out;
    out.params = params;
    out.s = 1.0;
    out.shoot_c = c_star;
    out.grid = std::move(tr.x);
    out.values = std::move(tr.v);
    out.derivs = std::move(tr.vp);
    out.residual_max = tr.defect_max;
    out.decay_class = DecayClass::FAST_B;
    return out;
}

struct AOfSCheck {
    double s = 0.0;
    double a_shoot = 0.0;    // omega_s'(0) from the ODE shot
    double a_integral = 0.0; // drift-integral representation
    double ode_residual = 0.0; // (1/2) a a' + mu a + beta (s^2 - s)
};

namespace detail {

/// Adaptive Simpson quadrature.
template <class F>
double simpson(F&& f, double a, double b, double fa, double fm, double fb, double tol,
               int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    const double flm = f(lm), frm = f(rm);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0) throw solver_failure("adaptive quadrature: depth exhausted");
    if (std::abs(left + right - whole) < 15.0 * tol) return left + right + (left + right - whole) / 15.0;
    return simpson(f, a, m, fa, flm, fm, tol / 2.0, depth - 1) +
           simpson(f, m, b, fm, frm, fb, tol / 2.0, depth - 1);
}

template <class F>
double integrate_quad(F&& f, double a, double b, double tol) {
    const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    return simpson(f, a, b, fa, fm, fb, tol, 60);
}

} // namespace detail

/// Cross-checks the slope a(s) = omega_s'(0) three ways.
inline std::vector<AOfSCheck> a_of_s_checks(const ModelParams& params,
                                            const std::vector<double>& s_grid) {
    if (!params.in_regime_c())
        throw unsupported_regime_error("a_of_s_checks requires regime C");
    const SeriesTable table = build_coefficients(params, 300);
    const WaveConstants consts = find_wave_constants(table);
    // Multiplying the wave ODE by e^{lam x} with lam = mu - sqrt(mu^2+2b)
    // kills the integrals of omega after two integrations by parts and
    // leaves a(s) = -(mu + sqrt(mu^2+2b)) s + 2b int omega_s^2 e^{lam x};
    // the prefactor is fixed by a(1) = 0 with omega_1 == 1.
    const double q = std::sqrt(params.mu * params.mu + 2.0 * params.beta);
    const double lam = params.mu - q;

    std::vector<AOfSCheck> out;
    out.reserve(s_grid.size());
    for (double s : s_grid) {
        AOfSCheck chk;
        chk.s = s;
        if (s == 1.0) {
            chk.a_shoot = 0.0;
        } else {
            chk.a_shoot = solve_omega(params, s).shoot_c;
        }
        const double x_cut = std::log(1e14 * std::max(1.0, s * s)) / (-lam);
        auto integrand = [&](double x) {
            const double w = omega_s(table, consts, s, x);
            return w * w * std::exp(lam * x);
        };
        chk.a_integral = -(params.mu + q) * s +
                         2.0 * params.beta *
                             detail::integrate_quad(integrand, 0.0, x_cut, 1e-11);
        out.push_back(chk);
    }
    // residual of (1/2) a a' + mu a + beta (s^2 - s) with centered a'
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (i == 0 || i + 1 == out.size()) {
            out[i].ode_residual = 0.0;
            continue;
        }
        const double ap = (out[i + 1].a_shoot - out[i - 1].a_shoot) /
                          (out[i + 1].s - out[i - 1].s);
        out[i].ode_residual = 0.5 * out[i].a_shoot * ap + params.mu * out[i].a_shoot +
                              params.beta * (out[i].s * out[i].s - out[i].s);
    }
    return out;
}

} // namespace bbmlab
