#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "bbmlab/waves.hpp"

namespace bbmlab {

/// Time-dependent generating function u(x, t) = E^x[s^{K(t)}], governed by
///   u_t = (1/2) u_xx + mu u_x + beta (u^2 - u),  u(0, t) = s,  u(x, 0) = 1.
/// Below the critical drift the absorbed region invades: u develops a front
/// travelling at sqrt(2 beta) - mu with the usual logarithmic lag, and its
/// shape converges to the critical travelling wave.  In regime C the same
/// equation relaxes monotonically onto the standing wave omega_s.
struct PdeConfig {
    double dx = 0.02;
    double dt = 0.005;
    double horizon = 400.0;
    double boundary_s = 0.0; // value held at the origin / behind the front
    double behind = 25.0;    // moving-window margin behind the half-height point
    double ahead = 40.0;     // margin ahead of it (the front is pulled: keep generous)
    double sample_dt = 0.5;  // cadence of front-position records
    std::vector<double> snapshot_times; // profiles to keep along the way
};

struct ProfileSnapshot {
    double t = 0.0;
    std::vector<double> grid;
    std::vector<double> values;
};

struct FrontSample {
    double t;
    double m_half; // lab-frame position of the u = 1/2 crossing
};

struct FrontRun {
    ModelParams params;
    PdeConfig config;
    std::vector<FrontSample> trace;
    std::vector<double> grid; // lab-frame x of the final profile
    std::vector<double> values;
    std::vector<ProfileSnapshot> snapshots;
};

/// Least-squares fit m(t) = speed * t + log_coeff * ln(t) + offset.
struct FrontFit {
    double speed = 0.0;
    double log_coeff = 0.0;
    double offset = 0.0;
    double rms = 0.0;
};

struct RelaxRun {
    ModelParams params;
    double s = 0.0;
    std::vector<double> grid;
    std::vector<double> values;
    double monotone_violation = 0.0; // worst wrong-direction move between samples
};

namespace detail {

/// Theta-scheme step for u_t = (1/2) u_xx + mu u_x + lin u + quad u^2 with
/// Dirichlet ends.  The linear part uses centered differences; the reaction
/// is advanced with a midpoint predictor.  Coefficients are constant, so the
/// Thomas elimination factors are precomputed.
class ThetaStepper {
  public:
    ThetaStepper(std::size_t n, double dx, double dt, double mu, double lin, double quad,
                 double theta)
        : lin_(lin), quad_(quad), dt_(dt) {
        const double al = 0.5 / (dx * dx) - 0.5 * mu / dx;
        const double au = 0.5 / (dx * dx) + 0.5 * mu / dx;
        const double ad = -1.0 / (dx * dx);
        lo_m_ = -theta * dt * al;
        di_m_ = 1.0 - theta * dt * ad;
        up_m_ = -theta * dt * au;
        lo_p_ = (1.0 - theta) * dt * al;
        di_p_ = 1.0 + (1.0 - theta) * dt * ad;
        up_p_ = (1.0 - theta) * dt * au;
        cp_.assign(n, 0.0);
        d_.assign(n, 0.0);
        double denom = di_m_;
        for (std::size_t i = 1; i + 1 < n; ++i) {
            cp_[i] = up_m_ / denom;
            denom = di_m_ - lo_m_ * cp_[i];
            inv_denom_.push_back(1.0 / denom);
        }
    }

    void step(std::vector<double>& u) const {
        const std::size_t n = u.size();
        auto f = [&](double v) { return lin_ * v + quad_ * v * v; };
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double mid = u[i] + 0.5 * dt_ * f(u[i]);
            d_[i] = lo_p_ * u[i - 1] + di_p_ * u[i] + up_p_ * u[i + 1] + dt_ * f(mid);
        }
        d_[1] -= lo_m_ * u[0];
        d_[n - 2] -= up_m_ * u[n - 1];
        d_[1] /= di_m_;
        for (std::size_t i = 2; i + 1 < n; ++i)
            d_[i] = (d_[i] - lo_m_ * d_[i - 1]) * inv_denom_[i - 2];
        u[n - 2] = d_[n - 2];
        for (std::size_t i = n - 3; i >= 1; --i) u[i] = d_[i] - cp_[i] * u[i + 1];
    }

  private:
    double lin_, quad_, dt_;
    double lo_m_, di_m_, up_m_, lo_p_, di_p_, up_p_;
    std::vector<double> cp_;
    std::vector<double> inv_denom_;
    mutable std::vector<double> d_;
};

/// First downward crossing of 1/2, linearly interpolated; -1 if none.
inline double half_crossing_down(const std::vector<double>& v, double x_lo, double dx) {
    for (std::size_t i = 0; i + 1 < v.size(); ++i)
        if (v[i] >= 0.5 && v[i + 1] < 0.5)
            return x_lo + dx * (double(i) + (v[i] - 0.5) / (v[i] - v[i + 1]));
    return -1.0;
}

/// Cubic Hermite read-off of an adaptively gridded wave.
inline double interp_wave(const WaveSolution& w, double x) {
    std::size_t i = 0;
    while (i + 2 < w.grid.size() && w.grid[i + 1] < x) ++i;
    const double h = w.grid[i + 1] - w.grid[i];
    const double t = (x - w.grid[i]) / h;
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * w.values[i] + (t3 - 2 * t2 + t) * h * w.derivs[i] +
           (-2 * t3 + 3 * t2) * w.values[i + 1] + (t3 - t2) * h * w.derivs[i + 1];
}

inline void check_pde_config(const PdeConfig& c) {
    if (!(c.dx > 0.0) || !(c.dt > 0.0) || !(c.horizon > c.dt))
        throw invalid_parameter_error("pde: dx, dt > 0 and horizon > dt required");
    if (c.boundary_s < 0.0 || c.boundary_s >= 1.0)
        throw invalid_parameter_error("pde front: boundary value must lie in [0, 1)");
}

} // namespace detail

/// Track the invasion front of the absorbed region on a moving window.
/// Requires a sub-critical drift (otherwise nothing travels; see
/// relax_standing_wave).
///
/// Internally the complement v = 1 - u is evolved: its far field is exactly
/// zero, which matters because u = 1 is the unstable state of the reaction --
/// in the u variable the ~1e-15 row-sum noise of the scheme ahead of the
/// front grows like e^{beta t} and nucleates a spurious front within a few
/// dozen time units.  The step IC rings under Crank-Nicolson, so the first
/// few steps are taken fully implicitly.
inline FrontRun evolve_front(const ModelParams& params, const PdeConfig& config = {}) {
    if (params.in_regime_c())
        throw unsupported_regime_error("evolve_front: needs mu < sqrt(2 beta) (travelling regime)");
    detail::check_pde_config(config);

    FrontRun out;
    out.params = params;
    out.config = config;

    const double dx = config.dx, dt = config.dt;
    const std::size_t n = std::size_t((config.behind + config.ahead) / dx) + 2;
    // v_t = (1/2) v_xx + mu v_x + beta (v - v^2)
    std::vector<double> v(n, 0.0);
    v[0] = 1.0 - config.boundary_s;
    double x_lo = 0.0;

    const detail::ThetaStepper startup(n, dx, dt, params.mu, params.beta, -params.beta, 1.0);
    const detail::ThetaStepper cn(n, dx, dt, params.mu, params.beta, -params.beta, 0.5);
    const std::size_t n_steps = std::size_t(config.horizon / dt + 0.5);
    const std::size_t sample_every = std::max<std::size_t>(1, std::size_t(config.sample_dt / dt + 0.5));
    const std::size_t shift_max = n / 4;

    std::vector<double> snap_times = config.snapshot_times;
    std::sort(snap_times.begin(), snap_times.end());
    std::size_t next_snap = 0;
    auto take_snapshot = [&](double tq) {
        ProfileSnapshot snap;
        snap.t = tq;
        snap.grid.resize(n);
        snap.values.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            snap.grid[i] = x_lo + double(i) * dx;
            snap.values[i] = 1.0 - v[i];
        }
        out.snapshots.push_back(std::move(snap));
    };

    for (std::size_t k = 1; k <= n_steps; ++k) {
        (k <= 10 ? startup : cn).step(v);
        while (next_snap < snap_times.size() && double(k) * dt >= snap_times[next_snap] - 0.5 * dt)
            take_snapshot(snap_times[next_snap++]);
        if (k % sample_every != 0 && k != n_steps) continue;

        const double m = detail::half_crossing_down(v, x_lo, dx);
        if (m < 0.0) throw solver_failure("evolve_front: lost the half-height crossing");
        out.trace.push_back({double(k) * dt, m});

        // slide the window so the crossing sits `behind` from the left edge;
        // behind the front v saturates at 1 - boundary_s, ahead it is 0
        if (m - x_lo > config.behind + 1.0) {
            std::size_t shift = std::size_t((m - x_lo - config.behind) / dx);
            shift = std::min(shift, shift_max);
            if (shift > 0) {
                v.erase(v.begin(), v.begin() + std::ptrdiff_t(shift));
                v.insert(v.end(), shift, 0.0);
                x_lo += double(shift) * dx;
                v[0] = 1.0 - config.boundary_s;
            }
        }
    }

    out.values.resize(n);
    out.grid.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.values[i] = 1.0 - v[i];
        out.grid[i] = x_lo + double(i) * dx;
    }
    return out;
}

/// Fit m(t) = speed t + log_coeff ln t + offset over samples with t >= t_min.
inline FrontFit fit_front_trace(const std::vector<FrontSample>& trace, double t_min) {
    std::vector<std::array<double, 3>> rows;
    std::vector<double> y;
    for (const FrontSample& s : trace)
        if (s.t >= t_min) {
            rows.push_back({s.t, std::log(s.t), 1.0});
            y.push_back(s.m_half);
        }
    if (rows.size() < 8) throw invalid_parameter_error("fit_front_trace: too few samples past t_min");

    double g[3][3] = {};
    double b[3] = {};
    for (std::size_t k = 0; k < rows.size(); ++k)
        for (int i = 0; i < 3; ++i) {
            b[i] += rows[k][std::size_t(i)] * y[k];
            for (int j = 0; j < 3; ++j) g[i][j] += rows[k][std::size_t(i)] * rows[k][std::size_t(j)];
        }
    // 3x3 Gaussian elimination with partial pivoting
    int piv[3] = {0, 1, 2};
    for (int c = 0; c < 3; ++c) {
        int best = c;
        for (int r2 = c + 1; r2 < 3; ++r2)
            if (std::abs(g[piv[r2]][c]) > std::abs(g[piv[best]][c])) best = r2;
        std::swap(piv[c], piv[best]);
        for (int r2 = c + 1; r2 < 3; ++r2) {
            const double f = g[piv[r2]][c] / g[piv[c]][c];
            for (int j = c; j < 3; ++j) g[piv[r2]][j] -= f * g[piv[c]][j];
            b[piv[r2]] -= f * b[piv[c]];
        }
    }
    double beta_hat[3];
    for (int c = 2; c >= 0; --c) {
        double acc = b[piv[c]];
        for (int j = c + 1; j < 3; ++j) acc -= g[piv[c]][j] * beta_hat[j];
        beta_hat[c] = acc / g[piv[c]][c];
    }

    FrontFit fit;
    fit.speed = beta_hat[0];
    fit.log_coeff = beta_hat[1];
    fit.offset = beta_hat[2];
    double ss = 0.0;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const double res = y[k] - fit.speed * rows[k][0] - fit.log_coeff * rows[k][1] - fit.offset;
        ss += res * res;
    }
    fit.rms = std::sqrt(ss / double(rows.size()));
    return fit;
}

/// Sup distance between the final front profile (centered at its half-height
/// point) and a reference wave with value 1/2 at 0.
inline double front_shape_distance(const FrontRun& run, const WaveSolution& reference,
                                   double y_lo = -10.0, double y_hi = 12.0) {
    if (run.trace.empty()) throw invalid_parameter_error("front_shape_distance: empty run");
    const double m = run.trace.back().m_half;
    const double dx = run.config.dx;
    const double x0 = run.grid.front();
    double dist = 0.0;
    for (double yq = y_lo; yq <= y_hi; yq += 0.05) {
        const double x = m + yq;
        if (x < run.grid.front() || x > run.grid.back() - dx) continue;
        const std::size_t i = std::size_t((x - x0) / dx);
        const double t = (x - (x0 + double(i) * dx)) / dx;
        const double uval = run.values[i] * (1.0 - t) + run.values[i + 1] * t;
        dist = std::max(dist, std::abs(uval - detail::interp_wave(reference, yq)));
    }
    return dist;
}

/// Regime C: relax the same equation on a fixed domain [0, x_max] with
/// u(x_max) pinned at 1; u descends (s < 1) or climbs (s > 1) onto the
/// standing wave omega_s.  monotone_violation records the worst move against
/// that direction between consecutive samples.
inline RelaxRun relax_standing_wave(const ModelParams& params, double s, double x_max,
                                    const PdeConfig& config = {}) {
    if (!params.in_regime_c())
        throw unsupported_regime_error("relax_standing_wave requires regime C");
    if (s < 0.0) throw invalid_parameter_error("relax_standing_wave: s >= 0 required");
    if (!(config.dx > 0.0) || !(config.dt > 0.0) || !(config.horizon > config.dt))
        throw invalid_parameter_error("pde: dx, dt > 0 and horizon > dt required");

    RelaxRun out;
    out.params = params;
    out.s = s;

    const double dx = config.dx, dt = config.dt;
    const std::size_t n = std::size_t(x_max / dx + 0.5) + 1;
    std::vector<double> u(n, 1.0);
    u[0] = s;
    const detail::ThetaStepper startup(n, dx, dt, params.mu, -params.beta, params.beta, 1.0);
    const detail::ThetaStepper cn(n, dx, dt, params.mu, -params.beta, params.beta, 0.5);
    const std::size_t n_steps = std::size_t(config.horizon / dt + 0.5);
    const std::size_t sample_every = std::max<std::size_t>(1, std::size_t(config.sample_dt / dt + 0.5));
    const double dir = s <= 1.0 ? -1.0 : 1.0; // expected sign of u_t

    std::vector<double> prev = u;
    for (std::size_t k = 1; k <= n_steps; ++k) {
        (k <= 10 ? startup : cn).step(u);
        if (k % sample_every == 0 || k == n_steps) {
            for (std::size_t i = 1; i + 1 < n; ++i)
                out.monotone_violation = std::max(out.monotone_violation, (u[i] - prev[i]) * -dir);
            prev = u;
        }
    }

    out.values = u;
    out.grid.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.grid[i] = double(i) * dx;
    return out;
}

} // namespace bbmlab
