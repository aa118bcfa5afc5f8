#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <random>
#include <thread>
#include <vector>

#include "bbmlab/series.hpp"

namespace bbmlab {

/// Shared knobs for the Monte Carlo estimators.  Every replica is seeded
/// deterministically from (seed, replica index), so results are identical
/// across thread counts.
struct McConfig {
    std::size_t n_replicas = 100000;
    double epsilon = 1e-6;    // unseen-mass scale; sets the automatic prune level
    double prune_level = 0.0; // 0 = automatic: min(ln(1/eps)/r, x0 + 6/r)
    double dt = 0.0;          // 0 = automatic; dt is only the prune-check cadence
    std::uint64_t seed = 1;
    unsigned n_threads = 1;          // 0 = hardware concurrency
    std::uint64_t k_cap = 1000000;   // per-replica absorption cap (OVERFLOW guard)
};

struct McEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::size_t n_replicas = 0;
    double mean_steps = 0.0;    // diffusion segments per replica
    std::uint64_t flagged = 0;  // replicas that overflowed or produced an extreme summand
};

enum class StopReason { EPSILON_RULE, EXTINCTION, HORIZON, OVERFLOW };

inline const char* stop_reason_name(StopReason s) {
    switch (s) {
        case StopReason::EPSILON_RULE: return "EPSILON_RULE";
        case StopReason::EXTINCTION: return "EXTINCTION";
        case StopReason::HORIZON: return "HORIZON";
        case StopReason::OVERFLOW: return "OVERFLOW";
    }
    return "?";
}

/// The sampler is exact in law: within each step a branching epoch is drawn
/// from Exp(beta), the particle moves by a Gaussian increment over the
/// sub-segment, and absorption on the sub-segment is decided by the Brownian
/// bridge minimum (the drift does not enter given the endpoints).  dt only
/// controls how often the prune barrier is checked, so halving it must not
/// move any estimate beyond noise.
inline double auto_dt(const ModelParams& m) {
    double dt = 0.01 / m.beta;
    if (m.mu != 0.0) dt = std::min(dt, 0.01 / (m.mu * m.mu));
    if (m.in_regime_c()) dt = std::min(dt, 0.01 / (m.root_r() * m.root_r()));
    return dt;
}

/// Particles above the prune level are removed and replaced by their exact
/// conditional expectation, so the level is a pure cost knob.  ln(1/eps)/r is
/// the height at which a pruned subtree still carries absorption mass eps;
/// the x0 + 6/r cap bounds the exponential occupation cost near criticality
/// (a pruned subtree then carries at most e^{-6} of the replica's own mass).
inline double auto_prune_level(const ModelParams& m, double x0, double epsilon) {
    const double r = m.root_r();
    return std::min(std::log(1.0 / epsilon) / r, x0 + 6.0 / r);
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t i) {
    return splitmix64(seed ^ splitmix64(i + 0x632be59bd9b4e019ULL));
}

struct Replica {
    std::uint64_t k_obs = 0;
    std::uint64_t steps = 0;
    bool overflow = false;
    std::vector<double> prunes; // positions at which subtrees were cut
};

struct PendingPart {
    double x;
    double rem; // remaining fraction of the current step
};

/// One absorbed-BBM replica from x0, pruned at `level`.  Branching epochs are
/// drawn inside each step, so the tree law is exact; only the prune barrier
/// is checked on the dt grid (with sub-dt resolution at branch points).
/// Stops early after max_generations dt-steps (live then holds the surviving
/// positions) or once k_cap absorptions have been counted (overflow).
inline void run_replica(const ModelParams& m, double x0, double level, double dt,
                        std::mt19937_64& rng, Replica& out,
                        std::vector<double>& live, std::vector<double>& next,
                        std::vector<PendingPart>& stack,
                        std::uint64_t max_generations = UINT64_MAX,
                        std::uint64_t k_cap = UINT64_MAX) {
    out.k_obs = 0;
    out.steps = 0;
    out.overflow = false;
    out.prunes.clear();
    live.clear();
    if (x0 >= level) {
        out.prunes.push_back(x0);
        return;
    }
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::exponential_distribution<double> expo(m.beta);
    live.assign(1, x0);
    std::uint64_t generation = 0;
    while (!live.empty()) {
        if (generation++ == max_generations) return;
        if (out.k_obs >= k_cap) {
            out.overflow = true;
            return;
        }
        next.clear();
        for (double x : live) {
            stack.assign(1, {x, dt});
            while (!stack.empty()) {
                const PendingPart p = stack.back();
                stack.pop_back();
                double a = p.x;
                double rem = p.rem;
                bool alive = true;
                while (rem > 0.0) {
                    const double e = expo(rng);
                    const double seg = std::min(e, rem);
                    const double b = a + m.mu * seg + std::sqrt(seg) * gauss(rng);
                    ++out.steps;
                    bool absorbed = b <= 0.0;
                    if (!absorbed) {
                        // bridge minimum: P(min < 0 | a, b) = exp(-2ab/seg)
                        const double e2 = 2.0 * a * b / seg;
                        if (e2 < 40.0 && unif(rng) < std::exp(-e2)) absorbed = true;
                    }
                    if (absorbed) {
                        ++out.k_obs;
                        alive = false;
                        break;
                    }
                    if (b >= level) {
                        out.prunes.push_back(b);
                        alive = false;
                        break;
                    }
                    const double rem_before = rem;
                    rem -= seg;
                    if (e < rem_before && rem > 0.0) stack.push_back({b, rem});
                    a = b;
                }
                if (alive) next.push_back(a);
            }
        }
        live.swap(next);
    }
}

/// Run replica blocks on a small pool; results land in a vector indexed by
/// block, merged sequentially by the caller, so the reduction order (and
/// hence the result bit pattern) is independent of the thread count.
template <class Block, class Fn>
std::vector<Block> map_blocks(std::size_t n_replicas, unsigned n_threads, Fn fn) {
    constexpr std::size_t block = 256;
    const std::size_t n_blocks = (n_replicas + block - 1) / block;
    if (n_threads == 0)
        n_threads = std::max(1u, std::thread::hardware_concurrency());
    std::vector<Block> out(n_blocks);
    std::atomic<std::size_t> cursor{0};
    auto work = [&] {
        for (std::size_t b = cursor.fetch_add(1); b < n_blocks; b = cursor.fetch_add(1))
            fn(out[b], b * block, std::min(n_replicas, (b + 1) * block));
    };
    if (n_threads <= 1 || n_blocks <= 1) {
        work();
        return out;
    }
    std::vector<std::thread> pool;
    pool.reserve(n_threads - 1);
    for (unsigned t = 0; t + 1 < n_threads; ++t) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
    return out;
}

struct MomentBlock {
    double sum = 0.0;
    double sumsq = 0.0;
    std::uint64_t steps = 0;
    std::uint64_t flagged = 0;
};

inline McEstimate reduce_moments(const std::vector<MomentBlock>& blocks, std::size_t n) {
    double sum = 0.0, sumsq = 0.0;
    std::uint64_t steps = 0, flagged = 0;
    for (const MomentBlock& b : blocks) {
        sum += b.sum;
        sumsq += b.sumsq;
        steps += b.steps;
        flagged += b.flagged;
    }
    McEstimate est;
    est.n_replicas = n;
    est.value = sum / double(n);
    const double var = std::max(0.0, sumsq / double(n) - est.value * est.value);
    est.std_error = std::sqrt(var / double(n));
    est.mean_steps = double(steps) / double(n);
    est.flagged = flagged;
    return est;
}

inline void check_mc_inputs(const ModelParams& m, double x0, const McConfig& cfg) {
    if (!m.in_regime_c())
        throw unsupported_regime_error("monte carlo estimators require regime C (finite K)");
    if (!(x0 > 0.0)) throw invalid_parameter_error("monte carlo: x0 > 0 required");
    if (cfg.n_replicas == 0) throw invalid_parameter_error("monte carlo: n_replicas >= 1 required");
    if (!(cfg.epsilon > 0.0) || cfg.epsilon >= 1.0)
        throw invalid_parameter_error("monte carlo: epsilon in (0, 1) required");
}

/// Gauss-Legendre nodes and weights on [0, 1].
inline void gauss_legendre_01(std::size_t n, std::vector<double>& x, std::vector<double>& w) {
    x.assign(n, 0.0);
    w.assign(n, 0.0);
    for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
        double z = std::cos(M_PI * (double(i) + 0.75) / (double(n) + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * double(j) + 1.0) * z * p1 - double(j) * p2) / double(j + 1);
            }
            pp = double(n) * (z * p0 - p1) / (z * z - 1.0);
            const double dz = p0 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        x[i] = 0.5 * (1.0 - z);
        x[n - 1 - i] = 0.5 * (1.0 + z);
        w[i] = w[n - 1 - i] = 1.0 / ((1.0 - z * z) * pp * pp);
    }
}

/// Coefficients beta_j of B_s = sum_j beta_j s^j, by Cauchy inversion of
/// Phi(B) = 1 - s on a circle |s| = rho < s0 (Newton with continuation
/// around the circle).  They encode the universal absorption-count law of a
/// subtree started high up: omega_s(x) = 1 - B_s e^{-r x} + O(e^{-2 r x}),
/// so P[K = j | start x] = -beta_j e^{-r x} for j >= 1, with total non-empty
/// mass beta_0 e^{-r x} = B0 e^{-r x} (the beta_j sum to zero since B_1 = 0).
inline std::vector<double> b_s_coefficients(const SeriesTable& t, const WaveConstants& wc,
                                            std::size_t j_max) {
    const std::size_t M = 2048;
    const double rho = 1.0 + 0.75 * (wc.s0 - 1.0);
    const double p = rescale_p(t);
    auto phi_pair = [&](std::complex<double> z, std::complex<double>& f,
                        std::complex<double>& fp) {
        const std::complex<double> w = p * z;
        std::complex<double> s0c = 0.0, s1c = 0.0, wp = w;
        for (std::size_t n = 1; n <= t.n_max; ++n) {
            s0c += t.b[n] * wp;
            s1c += double(n) * t.b[n] * (wp / w);
            wp *= w;
        }
        f = s0c / p;
        fp = s1c;
    };
    std::vector<std::complex<double>> F(M);
    std::complex<double> B = 0.5 * wc.B_s0;
    for (std::size_t k = 0; k <= M; ++k) {
        const std::complex<double> s =
            rho * std::exp(std::complex<double>(0.0, 2.0 * M_PI * double(k % M) / double(M)));
        std::complex<double> f, fp;
        for (int it = 0; it < 64; ++it) {
            phi_pair(B, f, fp);
            const std::complex<double> d = (f - (1.0 - s)) / fp;
            B -= d;
            if (std::abs(d) < 1e-13 * (1.0 + std::abs(B))) break;
        }
        if (std::abs(f - (1.0 - s)) > 1e-9)
            throw solver_failure("b_s_coefficients: continuation lost the branch");
        if (k < M) F[k] = B; // k == M only closes the loop as a sanity pass
    }
    std::vector<double> beta(j_max + 1, 0.0);
    double rp = 1.0;
    for (std::size_t j = 0; j <= j_max; ++j) {
        std::complex<double> acc = 0.0;
        for (std::size_t k = 0; k < M; ++k)
            acc += F[k] * std::exp(std::complex<double>(0.0, -2.0 * M_PI * double(j * k % M) /
                                                                 double(M)));
        beta[j] = acc.real() / (double(M) * rp);
        rp *= rho;
    }
    if (std::abs(beta[0] - wc.B0) > 1e-8)
        throw solver_failure("b_s_coefficients: beta_0 does not reproduce B0");
    return beta;
}

} // namespace detail

/// E[s^K] from x0 for several s at once, sharing one set of replicas.  Each
/// pruned subtree at x_p contributes its exact factor omega_s(x_p) from the
/// series, so the estimators are unbiased at every prune level; the level
/// only trades variance/cost.  Valid for s in [0, s0]; at s = s0 the summand
/// has infinite variance (the K-tail decays exactly like s0^{-n} n^{-3/2}),
/// so the reported standard error is itself noisy there.
inline std::vector<McEstimate> estimate_omega_multi(const SeriesTable& t, const WaveConstants& wc,
                                                    const std::vector<double>& s_values, double x0,
                                                    const McConfig& cfg) {
    const ModelParams& m = t.params;
    detail::check_mc_inputs(m, x0, cfg);
    if (s_values.empty()) throw invalid_parameter_error("estimate_omega: at least one s required");
    const std::size_t n_s = s_values.size();
    std::vector<double> B(n_s);
    for (std::size_t j = 0; j < n_s; ++j)
        B[j] = solve_B_s(t, wc, s_values[j]); // also validates s in [0, s0]
    const double r = m.root_r();
    const double level =
        cfg.prune_level > 0.0 ? cfg.prune_level : auto_prune_level(m, x0, cfg.epsilon);
    const double dt = cfg.dt > 0.0 ? cfg.dt : auto_dt(m);

    struct MultiBlock {
        std::vector<double> sum, sumsq;
        std::uint64_t steps = 0;
        std::uint64_t flagged = 0;
    };
    auto blocks = detail::map_blocks<MultiBlock>(
        cfg.n_replicas, cfg.n_threads,
        [&](MultiBlock& blk, std::size_t first, std::size_t last) {
            blk.sum.assign(n_s, 0.0);
            blk.sumsq.assign(n_s, 0.0);
            detail::Replica rep;
            std::vector<double> live, next;
            std::vector<detail::PendingPart> stack;
            for (std::size_t i = first; i < last; ++i) {
                std::mt19937_64 rng(detail::mix_seed(cfg.seed, i));
                detail::run_replica(m, x0, level, dt, rng, rep, live, next, stack,
                                    UINT64_MAX, cfg.k_cap);
                blk.steps += rep.steps;
                if (rep.overflow) {
                    ++blk.flagged;
                    continue;
                }
                bool extreme = false;
                for (std::size_t j = 0; j < n_s; ++j) {
                    double f = std::pow(s_values[j], double(rep.k_obs));
                    if (f != 0.0)
                        for (double xp : rep.prunes)
                            f *= 1.0 - eval_phi(t, B[j] * std::exp(-r * xp));
                    if (std::abs(f) > 1e12) extreme = true; // heavy tail near s0: report, keep
                    blk.sum[j] += f;
                    blk.sumsq[j] += f * f;
                }
                if (extreme) ++blk.flagged;
            }
        });

    std::vector<McEstimate> out(n_s);
    const double n = double(cfg.n_replicas);
    std::uint64_t steps = 0, flagged = 0;
    for (const MultiBlock& b : blocks) {
        steps += b.steps;
        flagged += b.flagged;
    }
    for (std::size_t j = 0; j < n_s; ++j) {
        double sum = 0.0, sumsq = 0.0;
        for (const MultiBlock& b : blocks) {
            sum += b.sum[j];
            sumsq += b.sumsq[j];
        }
        out[j].n_replicas = cfg.n_replicas;
        out[j].value = sum / n;
        out[j].std_error = std::sqrt(std::max(0.0, sumsq / n - out[j].value * out[j].value) / n);
        out[j].mean_steps = double(steps) / n;
        out[j].flagged = flagged;
    }
    return out;
}

inline McEstimate estimate_omega(const SeriesTable& t, const WaveConstants& wc, double s,
                                 double x0, const McConfig& cfg) {
    return estimate_omega_multi(t, wc, {s}, x0, cfg)[0];
}

/// E[K] from x0.  A pruned subtree at x_p contributes its exact conditional
/// mean e^{-r x_p}, so the estimate is unbiased at any prune level and should
/// match e^{-r x0} exactly in expectation.
inline McEstimate estimate_mean_k(const ModelParams& m, double x0, const McConfig& cfg) {
    detail::check_mc_inputs(m, x0, cfg);
    const double r = m.root_r();
    const double level =
        cfg.prune_level > 0.0 ? cfg.prune_level : auto_prune_level(m, x0, cfg.epsilon);
    const double dt = cfg.dt > 0.0 ? cfg.dt : auto_dt(m);

    auto blocks = detail::map_blocks<detail::MomentBlock>(
        cfg.n_replicas, cfg.n_threads,
        [&](detail::MomentBlock& blk, std::size_t first, std::size_t last) {
            detail::Replica rep;
            std::vector<double> live, next;
            std::vector<detail::PendingPart> stack;
            for (std::size_t i = first; i < last; ++i) {
                std::mt19937_64 rng(detail::mix_seed(cfg.seed, i));
                detail::run_replica(m, x0, level, dt, rng, rep, live, next, stack,
                                    UINT64_MAX, cfg.k_cap);
                blk.steps += rep.steps;
                if (rep.overflow) {
                    ++blk.flagged;
                    continue;
                }
                double k = double(rep.k_obs);
                for (double xp : rep.prunes) k += std::exp(-r * xp);
                blk.sum += k;
                blk.sumsq += k * k;
            }
        });
    return detail::reduce_moments(blocks, cfg.n_replicas);
}

/// Single-replica simulation, mainly a debugging / inspection entry point.
/// In regime C with an infinite horizon the replica terminates when every
/// particle is absorbed (EXTINCTION) or pruned (EPSILON_RULE, the pruned mass
/// being the epsilon-sized remainder); z_residual carries the frozen
/// martingale weight e^{-r x} of pruned subtrees and horizon survivors.
/// A finite horizon works in any regime (live positions are returned);
/// an infinite one requires regime C.
struct KOutcome {
    std::uint64_t k = 0;
    StopReason stopped_by = StopReason::EXTINCTION;
    double z_residual = 0.0;
    std::vector<double> live;
    std::uint64_t steps = 0;
};

inline KOutcome simulate_k(const ModelParams& m, double x0, const McConfig& cfg,
                           double horizon = std::numeric_limits<double>::infinity(),
                           std::uint64_t replica_index = 0) {
    if (!(x0 > 0.0)) throw invalid_parameter_error("monte carlo: x0 > 0 required");
    if (!(cfg.epsilon > 0.0) || cfg.epsilon >= 1.0)
        throw invalid_parameter_error("monte carlo: epsilon in (0, 1) required");
    const bool finite_t = std::isfinite(horizon);
    if (!m.in_regime_c() && !finite_t)
        throw unsupported_regime_error("simulate_k: infinite horizon requires regime C (finite K)");

    const double dt = cfg.dt > 0.0 ? cfg.dt : auto_dt(m);
    const double level = m.in_regime_c()
                             ? (cfg.prune_level > 0.0 ? cfg.prune_level
                                                      : auto_prune_level(m, x0, cfg.epsilon))
                             : std::numeric_limits<double>::infinity();
    const std::uint64_t max_gens =
        finite_t ? std::uint64_t(horizon / dt + 0.5) : UINT64_MAX;

    detail::Replica rep;
    std::vector<double> live, next;
    std::vector<detail::PendingPart> stack;
    std::mt19937_64 rng(detail::mix_seed(cfg.seed, replica_index));
    detail::run_replica(m, x0, level, dt, rng, rep, live, next, stack, max_gens, cfg.k_cap);

    KOutcome out;
    out.k = rep.k_obs;
    out.steps = rep.steps;
    out.live = live;
    if (m.in_regime_c()) {
        const double r = m.root_r();
        for (double xp : rep.prunes) out.z_residual += std::exp(-r * xp);
        for (double x : live) out.z_residual += std::exp(-r * x);
    }
    if (rep.overflow)
        out.stopped_by = StopReason::OVERFLOW;
    else if (!live.empty())
        out.stopped_by = StopReason::HORIZON;
    else if (!rep.prunes.empty())
        out.stopped_by = StopReason::EPSILON_RULE;
    else
        out.stopped_by = StopReason::EXTINCTION;
    return out;
}

/// Mean of the frozen weight Z(t) = K(t) + sum over remaining particles of
/// e^{-r X}, which is a conserved martingale: every checkpoint must return
/// e^{-r x0} up to noise.  Pruned subtrees contribute their frozen weight, so
/// the identity is exact at any prune level.
struct MartingaleCheckpoint {
    double t = 0.0;
    McEstimate z;
};

inline std::vector<MartingaleCheckpoint> martingale_check(const ModelParams& m, double x0,
                                                          const std::vector<double>& t_checkpoints,
                                                          const McConfig& cfg) {
    detail::check_mc_inputs(m, x0, cfg);
    const double r = m.root_r();
    const double level =
        cfg.prune_level > 0.0 ? cfg.prune_level : auto_prune_level(m, x0, cfg.epsilon);
    const double dt = cfg.dt > 0.0 ? cfg.dt : auto_dt(m);

    std::vector<MartingaleCheckpoint> out;
    for (double tc : t_checkpoints) {
        if (!(tc >= 0.0)) throw invalid_parameter_error("martingale_check: t >= 0 required");
        const std::uint64_t max_gens = std::uint64_t(tc / dt + 0.5);
        auto blocks = detail::map_blocks<detail::MomentBlock>(
            cfg.n_replicas, cfg.n_threads,
            [&](detail::MomentBlock& blk, std::size_t first, std::size_t last) {
                detail::Replica rep;
                std::vector<double> live, next;
                std::vector<detail::PendingPart> stack;
                for (std::size_t i = first; i < last; ++i) {
                    std::mt19937_64 rng(detail::mix_seed(cfg.seed, i));
                    detail::run_replica(m, x0, level, dt, rng, rep, live, next, stack,
                                        max_gens, cfg.k_cap);
                    blk.steps += rep.steps;
                    if (rep.overflow) {
                        ++blk.flagged;
                        continue;
                    }
                    double z = double(rep.k_obs);
                    for (double xp : rep.prunes) z += std::exp(-r * xp);
                    for (double x : live) z += std::exp(-r * x);
                    blk.sum += z;
                    blk.sumsq += z * z;
                }
            });
        out.push_back({tc, detail::reduce_moments(blocks, cfg.n_replicas)});
    }
    return out;
}

struct PmfEstimate {
    std::vector<std::uint64_t> counts; // counts[n]: replicas with observed K = n
    std::vector<double> prob;
    std::vector<double> std_error;
    std::size_t n_replicas = 0;
    double mean_steps = 0.0;
    bool sparse_tail = false; // fewer than 100 hits in the largest class
};

/// Histogram of K up to n_top.  Integer counts cannot absorb a multiplicative
/// prune correction, so instead every pruned subtree has its absorption count
/// *sampled* from its exact limiting law: a subtree from height x absorbs
/// j >= 1 particles with probability -beta_j e^{-r x} + O(e^{-2 r x}), where
/// the beta_j are the power-series coefficients of B_s (see
/// detail::b_s_coefficients).  The histogram is therefore unbiased up to
/// O(e^{-2 r level}) per prune; keep the level a few units of 1/r above x0.
inline PmfEstimate estimate_pmf(const ModelParams& m, double x0, unsigned n_top,
                                const McConfig& cfg) {
    detail::check_mc_inputs(m, x0, cfg);
    const double level =
        cfg.prune_level > 0.0 ? cfg.prune_level : auto_prune_level(m, x0, cfg.epsilon);
    const double dt = cfg.dt > 0.0 ? cfg.dt : auto_dt(m);
    const double r = m.root_r();

    const SeriesTable table = build_coefficients(m, 300);
    const WaveConstants wc = find_wave_constants(table);
    const std::size_t j_max = 64;
    const std::vector<double> beta = detail::b_s_coefficients(table, wc, j_max);
    std::vector<double> cum(j_max, 0.0); // cum[i]: P[J <= i+1 | J >= 1]
    double acc = 0.0;
    for (std::size_t j = 1; j <= j_max; ++j) {
        acc += std::max(0.0, -beta[j]) / beta[0];
        cum[j - 1] = acc;
    }

    struct CountBlock {
        std::vector<std::uint64_t> counts;
        std::uint64_t steps = 0;
    };
    auto blocks = detail::map_blocks<CountBlock>(
        cfg.n_replicas, cfg.n_threads,
        [&](CountBlock& blk, std::size_t first, std::size_t last) {
            blk.counts.assign(n_top + 1, 0);
            detail::Replica rep;
            std::vector<double> live, next;
            std::vector<detail::PendingPart> stack;
            std::uniform_real_distribution<double> uni(0.0, 1.0);
            for (std::size_t i = first; i < last; ++i) {
                std::mt19937_64 rng(detail::mix_seed(cfg.seed, i));
                detail::run_replica(m, x0, level, dt, rng, rep, live, next, stack,
                                    UINT64_MAX, cfg.k_cap);
                std::uint64_t k = rep.k_obs;
                for (double xp : rep.prunes) {
                    const double q = beta[0] * std::exp(-r * xp);
                    const double u = uni(rng);
                    if (u < q) {
                        const double v = u / q; // uniform again, given the hit
                        std::size_t j = 1;
                        while (j < j_max && v >= cum[j - 1]) ++j;
                        k += j;
                    }
                }
                if (!rep.overflow && k <= n_top) ++blk.counts[k];
                blk.steps += rep.steps;
            }
        });

    PmfEstimate out;
    out.n_replicas = cfg.n_replicas;
    out.counts.assign(n_top + 1, 0);
    std::uint64_t steps = 0;
    for (const CountBlock& b : blocks) {
        for (unsigned n = 0; n <= n_top; ++n) out.counts[n] += b.counts[n];
        steps += b.steps;
    }
    out.mean_steps = double(steps) / double(cfg.n_replicas);
    out.prob.assign(n_top + 1, 0.0);
    out.std_error.assign(n_top + 1, 0.0);
    for (unsigned n = 0; n <= n_top; ++n) {
        const double p = double(out.counts[n]) / double(cfg.n_replicas);
        out.prob[n] = p;
        out.std_error[n] = std::sqrt(p * (1.0 - p) / double(cfg.n_replicas));
    }
    out.sparse_tail = out.counts[n_top] < 100;
    return out;
}

struct SpineEstimate {
    McEstimate inv_k; // mean of 1/K under the size-biased (spine) measure
    double mean_k = 0.0; // diagnostic: spine-measure mean of K (should be ~E[K^2]/E[K])
};

/// Mean of 1/K under the K-size-biased measure, which equals
/// omega_0'(0)/E[K-weighting] = B0 at criticality.  The spine (the ancestral
/// line of a uniformly chosen absorbed particle, run backwards from the
/// origin) is a Bessel(3) process; branch points fall at rate 2 beta along it
/// and each sprouts an independent subtree.
///
/// Sampling: the Bessel(3) value at each Exp(2 beta) epoch is the modulus of
/// a 3D Brownian motion.  Once an epoch lands at y >= cutoff the walk returns
/// below the cutoff with probability cutoff/y (and by the Markov property
/// re-enters at the cutoff itself); otherwise no further subtree can launch
/// below the cutoff and the replica ends.  Subtrees launched above the cutoff
/// are dropped -- a relative bias of order e^{-r cutoff} (cutoff = 6 keeps it
/// around 1e-3 at criticality).
///
/// 1/K is averaged through 1/K = int_0^1 s^{K-1} ds: each replica evaluates
/// s^{K_obs - 1} times the pruned-subtree correction exp(-B_s M1 - k2 M2
/// - k3 M3) on a Gauss-Legendre grid, where Mj = sum_p e^{-j r x_p} and the
/// k's come from the cubic expansion of log omega_s; with prune positions at
/// x_p >= cutoff the quartic remainder is below 1e-12.  This keeps the
/// estimator unbiased at the (aggressively low) prune level = cutoff.
inline SpineEstimate spine_mean_inverse_k(const SeriesTable& t, const WaveConstants& wc,
                                          const McConfig& cfg, double cutoff = 6.0) {
    const ModelParams& m = t.params;
    if (!m.critical)
        throw unsupported_regime_error("spine sampler requires the critical drift mu = sqrt(2 beta)");
    if (cfg.n_replicas == 0) throw invalid_parameter_error("monte carlo: n_replicas >= 1 required");
    if (!(cutoff > 0.0)) throw invalid_parameter_error("spine: cutoff > 0 required");
    const double r = m.root_r();
    const double dt = cfg.dt > 0.0 ? cfg.dt : auto_dt(m);

    constexpr std::size_t n_nodes = 128;
    std::vector<double> sn, wn;
    detail::gauss_legendre_01(n_nodes, sn, wn);
    std::vector<double> Bn(n_nodes), k2(n_nodes), k3(n_nodes);
    const double a2 = t.a[2], a3 = t.a[3];
    for (std::size_t i = 0; i < n_nodes; ++i) {
        const double B = solve_B_s(t, wc, sn[i]);
        Bn[i] = B;
        k2[i] = (a2 + 0.5) * B * B;
        k3[i] = (a3 + a2 + 1.0 / 3.0) * B * B * B;
    }

    struct SpineBlock {
        double sum = 0.0;
        double sumsq = 0.0;
        double ksum = 0.0;
        std::uint64_t steps = 0;
    };
    auto blocks = detail::map_blocks<SpineBlock>(
        cfg.n_replicas, cfg.n_threads,
        [&](SpineBlock& blk, std::size_t first, std::size_t last) {
            detail::Replica rep;
            std::vector<double> live, next;
            std::vector<detail::PendingPart> stack;
            for (std::size_t i = first; i < last; ++i) {
                std::mt19937_64 rng(detail::mix_seed(cfg.seed, i));
                std::normal_distribution<double> gauss(0.0, 1.0);
                std::exponential_distribution<double> epoch(2.0 * m.beta);
                std::uniform_real_distribution<double> unif(0.0, 1.0);
                double w1 = 0.0, w2 = 0.0, w3 = 0.0;
                std::uint64_t k_total = 1; // the spine particle itself
                double M1 = 0.0, M2 = 0.0, M3 = 0.0;
                while (true) {
                    const double sd = std::sqrt(epoch(rng));
                    w1 += sd * gauss(rng);
                    w2 += sd * gauss(rng);
                    w3 += sd * gauss(rng);
                    const double y = std::sqrt(w1 * w1 + w2 * w2 + w3 * w3);
                    if (y >= cutoff) {
                        if (unif(rng) >= cutoff / y) break;
                        w1 = cutoff;
                        w2 = w3 = 0.0;
                        continue;
                    }
                    detail::run_replica(m, y, cutoff, dt, rng, rep, live, next, stack,
                                        UINT64_MAX, cfg.k_cap);
                    k_total += rep.k_obs;
                    for (double xp : rep.prunes) {
                        const double e1 = std::exp(-r * xp);
                        M1 += e1;
                        M2 += e1 * e1;
                        M3 += e1 * e1 * e1;
                    }
                    blk.steps += rep.steps;
                }
                double g = 0.0;
                for (std::size_t q = 0; q < n_nodes; ++q)
                    g += wn[q] * std::pow(sn[q], double(k_total - 1)) *
                         std::exp(-Bn[q] * M1 - k2[q] * M2 - k3[q] * M3);
                blk.sum += g;
                blk.sumsq += g * g;
                blk.ksum += double(k_total) + M1;
            }
        });

    SpineEstimate out;
    double sum = 0.0, sumsq = 0.0, ksum = 0.0;
    std::uint64_t steps = 0;
    for (const SpineBlock& b : blocks) {
        sum += b.sum;
        sumsq += b.sumsq;
        ksum += b.ksum;
        steps += b.steps;
    }
    const double n = double(cfg.n_replicas);
    out.inv_k.n_replicas = cfg.n_replicas;
    out.inv_k.value = sum / n;
    out.inv_k.std_error = std::sqrt(std::max(0.0, sumsq / n - out.inv_k.value * out.inv_k.value) / n);
    out.inv_k.mean_steps = double(steps) / n;
    out.mean_k = ksum / n;
    return out;
}

} // namespace bbmlab
