#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "bbmlab/model.hpp"

namespace bbmlab {

/// Power-series table for Phi(z) = sum a_n z^n representing the standing
/// waves via omega_s(x) = 1 - Phi(B_s e^{-r x}).  Also carries the rescaled
/// coefficients b_n = a_n / p^{n-1} of Psi^{(p)}(z) = p Phi(z/p).
struct SeriesTable {
    ModelParams params;
    std::size_t n_max = 0;
    std::vector<double> a; // a[1..n_max], a[0] unused
    std::vector<double> b; // b[1..n_max]
    double radius_estimate = 0.0;
    bool b_bound_holds = false;   // b_n <= 15 * 4^{-n} certified by the n<=14 seed check
    bool rescaled_limit = false;  // table is the p -> 0 limit (coefficients are b_n^{(0)})

    double truncation_bound(double z) const;
    bool inside_disc(double z) const { return std::abs(z) < radius_estimate; }
};

/// Constants locating the interesting members of the Phi family.
struct WaveConstants {
    double B0 = 0.0;   // smallest positive root of Phi = 1 (omega = omega_0)
    double B_s0 = 0.0; // largest negative critical point of Phi
    double s0 = 0.0;   // 1 - Phi(B_s0)
    double m_p = 0.0;  // p * B_s0, first local minimum of Psi^{(p)} left of 0
};

namespace detail {

/// Fill the b-recursion b_n = sum_{j} b_j b_{n-j} / ((n-1)(n-p)).
/// Valid for p in [0, 1]; p = 0 gives the rescaled limit table.
inline std::vector<double> b_recursion(double p, std::size_t n_max) {
    std::vector<double> b(n_max + 1, 0.0);
    b[1] = 1.0;
    for (std::size_t n = 2; n <= n_max; ++n) {
        double s = 0.0;
        for (std::size_t j = 1; j < n; ++j) s += b[j] * b[n - j];
        b[n] = s / (double(n - 1) * (double(n) - p));
    }
    return b;
}

/// Ratio-test radius estimate: median of c_n / c_{n+1} over the last 20% of
/// orders that have not underflowed.
inline double ratio_radius(const std::vector<double>& c) {
    std::size_t last = 0;
    for (std::size_t n = 1; n + 1 < c.size() + 1 && n < c.size(); ++n)
        if (c[n] > 1e-290) last = n;
    if (last < 5) return 0.0;
    const std::size_t k0 = std::max<std::size_t>(1, last - std::max<std::size_t>(2, last / 5));
    std::vector<double> ratios;
    for (std::size_t k = k0; k < last; ++k) ratios.push_back(c[k] / c[k + 1]);
    std::sort(ratios.begin(), ratios.end());
    return ratios[ratios.size() / 2];
}

/// Seed condition for the geometric majorant: max over n <= 14 of 4^n b_n
/// must not exceed 15 - p (then b_n <= 15 * 4^{-n} propagates to all n).
inline bool b_bound_seed(const std::vector<double>& b, double p) {
    const std::size_t top = std::min<std::size_t>(14, b.size() - 1);
    double pw = 1.0;
    for (std::size_t n = 1; n <= top; ++n) {
        pw *= 4.0;
        if (pw * b[n] > 15.0 - p) return false;
    }
    return true;
}

} // namespace detail

/// Build the coefficient table for regime-C parameters.  O(n_max^2).
inline SeriesTable build_coefficients(const ModelParams& params, std::size_t n_max = 200) {
    if (!params.in_regime_c())
        throw unsupported_regime_error("series expansion requires regime C (mu >= sqrt(2 beta))");
    if (n_max < 2) throw invalid_parameter_error("build_coefficients: n_max >= 2 required");

    SeriesTable t;
    t.params = params;
    t.n_max = n_max;
    const double p = params.rescaling_p();
    // All arithmetic happens in the rescaled variables: the b-recursion has
    // no large/small denominators. a_n = p^{n-1} b_n may underflow to 0 for
    // small p at high order; evaluation therefore also goes through b.
    t.b = detail::b_recursion(p, n_max);
    t.a.assign(n_max + 1, 0.0);
    double pw = 1.0; // p^{n-1}
    for (std::size_t n = 1; n <= n_max; ++n) {
        t.a[n] = pw * t.b[n];
        pw *= p;
    }
    t.radius_estimate = detail::ratio_radius(t.b) / p;
    t.b_bound_holds = detail::b_bound_seed(t.b, p);
    return t;
}

/// The p -> 0 limit table (coefficients b_n^{(0)}); a and b coincide so that
/// eval_phi on it evaluates Psi^{(0)}.
inline SeriesTable build_rescaled_limit(std::size_t n_max = 200) {
    SeriesTable t;
    t.params = classify(1.0e9, 1.0); // deep regime C placeholder; p ~ 0
    t.n_max = n_max;
    t.b = detail::b_recursion(0.0, n_max);
    t.a = t.b;
    t.radius_estimate = detail::ratio_radius(t.b);
    t.b_bound_holds = detail::b_bound_seed(t.b, 0.0);
    t.rescaled_limit = true;
    return t;
}

/// Upper bound on the dropped tail sum_{n > n_max} a_n |z|^n, via the
/// rescaled argument w = p|z| so small-p underflow cannot poison it.
inline double SeriesTable::truncation_bound(double z) const {
    const double p = rescaled_limit ? 1.0 : params.rescaling_p();
    const double w = std::abs(z) * p;
    if (b_bound_holds) {
        const double q = w / 4.0;
        if (q < 1.0) return 15.0 / p * std::pow(q, double(n_max + 1)) / (1.0 - q);
    }
    // Heuristic fallback: ten times the last retained term.
    return 10.0 / p * b[n_max] * std::pow(w, double(n_max));
}

namespace detail {

/// Evaluate sum b_n w^n (deriv = 0), sum n b_n w^{n-1} (1) or
/// sum n(n-1) b_n w^{n-2} (2), with an incremental term recurrence.
inline double eval_series(const std::vector<double>& b, std::size_t n_max, double w, int deriv) {
    if (w == 0.0) {
        if (deriv == 0) return 0.0;
        if (deriv == 1) return b[1];
        return 2.0 * b[2];
    }
    double total = 0.0;
    double t = b[1] * w; // t = b_n w^n
    for (std::size_t n = 1; n <= n_max; ++n) {
        switch (deriv) {
            case 0: total += t; break;
            case 1: total += t * double(n) / w; break;
            default: total += t * double(n) * double(n - 1) / (w * w); break;
        }
        if (n == n_max || b[n + 1] <= 0.0 || std::abs(t) < 1e-300) break;
        t *= w * (b[n + 1] / b[n]);
    }
    return total;
}

inline double rescale_p(const SeriesTable& t) {
    return t.rescaled_limit ? 1.0 : t.params.rescaling_p();
}

} // namespace detail

// Phi(z) = Psi(p z)/p with Psi(w) = sum b_n w^n, so
// Phi'(z) = Psi'(p z) and Phi''(z) = p Psi''(p z).

inline double eval_phi(const SeriesTable& t, double z) {
    if (!t.inside_disc(z)) throw out_of_disc_error(t.radius_estimate, z);
    const double p = detail::rescale_p(t);
    return detail::eval_series(t.b, t.n_max, p * z, 0) / p;
}

inline double eval_phi_prime(const SeriesTable& t, double z) {
    if (!t.inside_disc(z)) throw out_of_disc_error(t.radius_estimate, z);
    const double p = detail::rescale_p(t);
    return detail::eval_series(t.b, t.n_max, p * z, 1);
}

inline double eval_phi_second(const SeriesTable& t, double z) {
    if (!t.inside_disc(z)) throw out_of_disc_error(t.radius_estimate, z);
    const double p = detail::rescale_p(t);
    return p * detail::eval_series(t.b, t.n_max, p * z, 2);
}

namespace detail {

/// Bisection on [lo, hi] assuming f(lo) and f(hi) straddle zero.
template <class F>
double bisect(F&& f, double lo, double hi, double tol = 1e-10) {
    double flo = f(lo);
    for (int it = 0; it < 200 && hi - lo > tol; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if ((flo <= 0.0) == (fm <= 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

} // namespace detail

/// Locate B0, B_s0, s0, m_p.  Bracketing walks the rescaled coordinate
/// w = p z in fixed small steps (the targets live at |w| < 3 for every p),
/// then bisects to 1e-10 in z.
inline WaveConstants find_wave_constants(const SeriesTable& t) {
    WaveConstants out;
    const double p = detail::rescale_p(t);
    const double rad_w = t.radius_estimate * p;
    const double tol_w = 1e-10 * std::min(1.0, p);
    const double dw = 0.01;

    // B0: smallest positive root of Phi(z) = 1, i.e. Psi(w) = p.  Psi is
    // increasing on w > 0, so the first sign change is the root.
    {
        double hi = dw;
        while (hi < rad_w && detail::eval_series(t.b, t.n_max, hi, 0) < p) hi += dw;
        if (hi >= rad_w)
            throw radius_exceeded_error("find_wave_constants: Phi(z)=1 not bracketed inside the disc",
                                        (hi - dw) / p);
        out.B0 = detail::bisect([&](double w) { return detail::eval_series(t.b, t.n_max, w, 0) - p; },
                                hi - dw, hi, tol_w) / p;
    }

    // B_s0: first critical point left of zero, i.e. first sign change of
    // Psi' (Psi'(0) = 1 > 0).
    {
        double lo = -dw;
        while (-lo < rad_w && detail::eval_series(t.b, t.n_max, lo, 1) > 0.0) lo -= dw;
        if (-lo >= rad_w)
            throw radius_exceeded_error("find_wave_constants: Phi' sign change not found inside the disc",
                                        (-lo - dw) / p);
        out.B_s0 = detail::bisect([&](double w) { return detail::eval_series(t.b, t.n_max, w, 1); },
                                  lo, lo + dw, tol_w) / p;
    }

    out.s0 = 1.0 - eval_phi(t, out.B_s0);
    out.m_p = p * out.B_s0;
    return out;
}

/// Solve Phi(B_s) = 1 - s for the wave label B_s.
inline double solve_B_s(const SeriesTable& t, const WaveConstants& w, double s) {
    if (s < 0.0 || s > w.s0 * (1.0 + 1e-12))
        throw no_finite_moment_error("omega_s: s outside [0, s0]");
    if (s == 0.0) return w.B0;
    if (s == 1.0) return 0.0;
    if (s >= w.s0 * (1.0 - 1e-12)) return w.B_s0;
    const double target = 1.0 - s;
    if (s < 1.0)
        return detail::bisect([&](double z) { return eval_phi(t, z) - target; }, 0.0, w.B0);
    return detail::bisect([&](double z) { return eval_phi(t, z) - target; }, w.B_s0, 0.0);
}

/// omega_s(x) = 1 - Phi(B_s e^{-r x}).
inline double omega_s(const SeriesTable& t, const WaveConstants& w, double s, double x) {
    if (s == 1.0) return 1.0;
    const double B = solve_B_s(t, w, s);
    return 1.0 - eval_phi(t, B * std::exp(-t.params.root_r() * x));
}

/// d/dx omega_s(x) = r B_s e^{-r x} Phi'(B_s e^{-r x}).
inline double omega_s_prime(const SeriesTable& t, const WaveConstants& w, double s, double x) {
    if (s == 1.0) return 0.0;
    const double r = t.params.root_r();
    const double B = solve_B_s(t, w, s);
    const double z = B * std::exp(-r * x);
    return r * z * eval_phi_prime(t, z);
}

/// Predicted P^x[K(inf) = n] for large n (tail law):
///   -omega_s0'(x) / (2 s0^n n^{3/2} sqrt(pi beta (s0 - 1))).
inline double tail_prediction(const ModelParams& params, const WaveConstants& w,
                              double wave_deriv_at_x, unsigned n) {
    if (n == 0) throw invalid_parameter_error("tail_prediction: n >= 1 required (n = 0 is omega(x))");
    return -wave_deriv_at_x /
           (2.0 * std::pow(w.s0, double(n)) * std::pow(double(n), 1.5) *
            std::sqrt(M_PI * params.beta * (w.s0 - 1.0)));
}

struct S0CurvePoint {
    double ratio; // mu / sqrt(beta)
    double s0;
    double p_s0; // p * s0, tends to |Psi^(0)(m^(0))| as ratio grows
};

/// s0 along a list of drift ratios mu/sqrt(beta) (beta = 1 w.l.o.g.).
inline std::vector<S0CurvePoint> s0_limit_curve(const std::vector<double>& ratios,
                                                std::size_t n_max = 200) {
    std::vector<S0CurvePoint> out;
    out.reserve(ratios.size());
    for (double ratio : ratios) {
        const ModelParams mp = classify(ratio, 1.0);
        if (!mp.in_regime_c())
            throw unsupported_regime_error("s0_limit_curve: every ratio must be >= sqrt(2)");
        const SeriesTable t = build_coefficients(mp, n_max);
        const WaveConstants w = find_wave_constants(t);
        out.push_back({ratio, w.s0, mp.rescaling_p() * w.s0});
    }
    return out;
}

} // namespace bbmlab
