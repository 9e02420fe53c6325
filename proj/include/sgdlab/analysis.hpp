#pragma once

// Monte Carlo estimators and exact bound calculators confronting simulations
// with the theory: pure-strategy hitting times and their Lyapunov bound, club
// face energies and stability probabilities, harmonic energies, escape times,
// generator estimates and recurrence probes.
//
// Monte Carlo fan-out gives every run its own substream and integrator and
// reduces into run-indexed slots, so results are invariant under any
// execution schedule.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <thread>
#include <vector>

#include "sgdlab/dynamics.hpp"
#include "sgdlab/game.hpp"
#include "sgdlab/kernels.hpp"

namespace sgdlab {

namespace detail {

template <typename F>
void parallel_for_runs(int n_runs, F&& body) {
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const int workers = static_cast<int>(std::min<unsigned>(hw, static_cast<unsigned>(n_runs)));
    if (workers <= 1) {
        for (int r = 0; r < n_runs; ++r) body(r);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr err;
    std::atomic<bool> failed{false};
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (int r = next.fetch_add(1); r < n_runs; r = next.fetch_add(1)) {
                if (failed.load()) return;
                try {
                    body(r);
                } catch (...) {
                    if (!failed.exchange(true)) err = std::current_exception();
                    return;
                }
            }
        });
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

struct MeanStd {
    double mean = std::numeric_limits<double>::quiet_NaN();
    double std = std::numeric_limits<double>::quiet_NaN();
    int n = 0;
};

inline MeanStd mean_std(const std::vector<double>& v) {
    MeanStd m;
    m.n = static_cast<int>(v.size());
    if (m.n == 0) return m;
    double s = 0.0;
    for (double x : v) s += x;
    m.mean = s / m.n;
    if (m.n >= 2) {
        double q = 0.0;
        for (double x : v) q += (x - m.mean) * (x - m.mean);
        m.std = std::sqrt(q / (m.n - 1));
    } else {
        m.std = 0.0;
    }
    return m;
}

// Product of independent Dirichlet(1,...,1) draws, one per player.
inline MixedProfile random_profile(const Game& g, const rng::Stream& st, std::uint64_t& draw) {
    MixedProfile x;
    x.probs.resize(g.num_players);
    for (int i = 0; i < g.num_players; ++i) {
        x.probs[i].resize(g.action_counts[i]);
        double s = 0.0;
        for (double& p : x.probs[i]) s += (p = -std::log(st.uniform(draw++)));
        for (double& p : x.probs[i]) p /= s;
    }
    return x;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Hitting times of pure-strategy neighborhoods
// ---------------------------------------------------------------------------

struct HittingStats {
    int n_runs = 0;
    int n_hit = 0;
    int censored = 0;
    double mean_hit_time = std::numeric_limits<double>::quiet_NaN();
    double sample_std = std::numeric_limits<double>::quiet_NaN();
    double ci_low = std::numeric_limits<double>::quiet_NaN();
    double ci_high = std::numeric_limits<double>::quiet_NaN();
    double horizon = 0.0;
};

// First recorded time max_a X_{player,a}(t) >= 1 - eps; censored at horizon.
// The sigma = 0 control runs the RK4 deterministic flow when cfg asks for it
// (plain Euler spirals outward on conservative cycles over long horizons).
inline std::optional<double> pure_hitting_time(const Game& g, const RegularizerSet& regs,
                                               const NoiseModel& noise, const MixedProfile& x0,
                                               const SimConfig& cfg, int player, double eps) {
    if (player < 0 || player >= g.num_players)
        throw std::invalid_argument("pure_hitting_time: player out of range");
    const double amax = 1.0 - 1.0 / g.action_counts[player];
    if (!(eps > 0.0 && eps < amax))
        throw std::invalid_argument("pure_hitting_time: eps must lie in (0, 1 - 1/A_i)");
    SimConfig c = cfg;
    c.record_samples = false;
    const double target = 1.0 - eps;
    auto stop = [&](const StateView& v) { return v.max_prob(player) >= target; };
    Trajectory traj;
    if (cfg.scheme == Scheme::rk4) {
        if (!noise.is_zero())
            throw std::invalid_argument("pure_hitting_time: rk4 scheme is only for sigma = 0");
        traj = simulate_deterministic_ftrl(g, regs, x0, c, stop);
    } else {
        traj = simulate_sftrl_scores(g, regs, noise, x0, c, stop);
    }
    if (traj.terminal_reason == TerminalReason::numerical_failure)
        throw std::runtime_error("pure_hitting_time: integrator failed at t = " +
                                 std::to_string(traj.final_time()));
    if (traj.terminal_reason == TerminalReason::stop_predicate) return traj.final_time();
    return std::nullopt;
}

inline HittingStats estimate_hitting_time(const Game& g, const RegularizerSet& regs,
                                          const NoiseModel& noise, const MixedProfile& x0,
                                          const SimConfig& cfg, int player, double eps, int n_runs,
                                          std::uint64_t base_run_id = 0) {
    if (n_runs < 1) throw std::invalid_argument("estimate_hitting_time: n_runs must be >= 1");
    std::vector<std::optional<double>> hits(n_runs);
    detail::parallel_for_runs(n_runs, [&](int r) {
        SimConfig c = cfg;
        c.run_id = base_run_id + static_cast<std::uint64_t>(r);
        hits[r] = pure_hitting_time(g, regs, noise, x0, c, player, eps);
    });
    HittingStats s;
    s.n_runs = n_runs;
    s.horizon = cfg.horizon;
    std::vector<double> times;
    for (const auto& h : hits)
        if (h)
            times.push_back(*h);
        else
            ++s.censored;
    s.n_hit = static_cast<int>(times.size());
    const auto ms = detail::mean_std(times);
    s.mean_hit_time = ms.mean;
    s.sample_std = ms.std;
    if (s.n_hit >= 1) {
        const double half = 1.96 * ms.std / std::sqrt(static_cast<double>(s.n_hit));
        s.ci_low = ms.mean - half;
        s.ci_high = ms.mean + half;
    }
    return s;
}

// ---------------------------------------------------------------------------
// Lyapunov constants behind the pure-strategy hitting-time bound
// ---------------------------------------------------------------------------

// c_eps = min { g_a (1 - g_a/G)^2 : x_b <= 1-eps for all b, x_a >= 1/A },
// minimized over a simplex grid of the given resolution.
inline double compute_c_eps(const Kernel& k, double eps, int num_actions, int grid_resolution = 400) {
    if (!(eps > 0.0 && eps < 0.5)) throw std::invalid_argument("compute_c_eps: eps must be in (0, 1/2)");
    if (num_actions < 2) throw std::invalid_argument("compute_c_eps: need >= 2 actions");
    if (grid_resolution < 100) throw std::invalid_argument("compute_c_eps: grid_resolution >= 100");
    const int n = grid_resolution;
    const int A = num_actions;
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> counts(A, 0);
    std::vector<double> g(A);
    // enumerate compositions of n into A parts
    std::function<void(int, int)> rec = [&](int idx, int left) {
        if (idx == A - 1) {
            counts[idx] = left;
            bool ok = true;
            for (int a = 0; a < A && ok; ++a)
                if (counts[a] > (1.0 - eps) * n + 1e-9) ok = false;
            if (ok) {
                double G = 0.0;
                for (int a = 0; a < A; ++a)
                    G += (g[a] = detail::mirror_gain(k, static_cast<double>(counts[a]) / n));
                for (int a = 0; a < A; ++a) {
                    if (counts[a] * A < n) continue; // x_a < 1/A
                    const double r = 1.0 - g[a] / G;
                    best = std::min(best, g[a] * r * r);
                }
            }
            return;
        }
        for (int c = 0; c <= left; ++c) {
            counts[idx] = c;
            rec(idx + 1, left - c);
        }
    };
    rec(0, n);
    if (!(best > 0.0) || !std::isfinite(best))
        throw std::runtime_error("compute_c_eps: no valid grid point");
    return best;
}

struct LyapunovConstants {
    double eps = 0.0;
    int num_actions = 0;
    int driver_dim = 0;
    double M = 0.0;            // sup |theta'''| / theta''^2
    double M_v = 0.0;          // max |payoff| of the player (vertex max)
    double sigma_min_sq = 0.0; // player's covariance block
    double sigma_max_sq = 0.0;
    double B = 0.0;            // 2 A (M_v + m M sigma_max^2)
    double H_max = 0.0, H_min = 0.0;
    double c_eps = 0.0;
    double lambda = 0.0;       // equality in the lambda condition
    double bound_log = 0.0;    // log of the expectation bound
    double bound_value = 0.0;  // +inf when it overflows a double
};

// All constants of the hitting-time expectation bound
// E[tau] <= (2/lambda) (e^lambda + A) / (H_min e^{lambda/A}).
inline LyapunovConstants lambda_bound(const Game& g, int player, const Kernel& kernel,
                                      const NoiseModel& noise, double eps,
                                      int grid_resolution = 400) {
    LyapunovConstants L;
    L.eps = eps;
    L.num_actions = g.action_counts[player];
    L.driver_dim = noise.driver_dim();
    L.sigma_min_sq = noise.sigma_min_sq(player);
    L.sigma_max_sq = noise.sigma_max_sq(player);
    if (!(L.sigma_min_sq > 0.0))
        throw std::invalid_argument("lambda_bound: sigma_min^2 must be positive (noise assumption)");
    L.M = kernel.third_over_second_sq_sup();
    L.M_v = 0.0;
    for (double u : g.payoffs[player]) L.M_v = std::max(L.M_v, std::fabs(u));
    L.c_eps = compute_c_eps(kernel, eps, L.num_actions, grid_resolution);
    // theta''' < 0 makes 1/theta'' increasing, so both extrema sit at 1/A.
    L.H_max = detail::mirror_gain(kernel, 1.0 / L.num_actions);
    L.H_min = L.H_max;
    const int A = L.num_actions;
    L.B = 2.0 * A * (L.M_v + L.driver_dim * L.M * L.sigma_max_sq);
    L.lambda = (L.B + (L.H_max / L.H_min) * (A - 1) * L.B + 1.0) / (L.sigma_min_sq * L.c_eps);
    const double lam = L.lambda;
    const double log_sum = lam < 700.0 ? std::log(std::exp(lam) + A)
                                       : lam + std::log1p(A * std::exp(-lam));
    L.bound_log = std::log(2.0 / lam) + log_sum - std::log(L.H_min) - lam / A;
    L.bound_value = L.bound_log < 709.0 ? std::exp(L.bound_log)
                                        : std::numeric_limits<double>::infinity();
    return L;
}

// ---------------------------------------------------------------------------
// Faces: distance, energies and the two-sided sandwich
// ---------------------------------------------------------------------------

// Exact l1 distance to the span of a product face: 2 sum_i sum_{a not in S_i} x_ia.
inline double face_distance(const MixedProfile& x, const Face& face) {
    double out_mass = 0.0;
    for (size_t i = 0; i < x.probs.size(); ++i)
        for (size_t a = 0; a < x.probs[i].size(); ++a)
            if (!face.contains_action(static_cast<int>(i), static_cast<int>(a)))
                out_mass += x.probs[i][a];
    return 2.0 * out_mass;
}

struct FaceEnergy {
    int player;
    int action;
    double value; // D_i(e_{ia}, x_i)
};

// Bregman energies to the out-of-face vertices. A positive floor clamps the
// strategy coordinates before evaluating theta' (diagnostic use only).
inline std::vector<FaceEnergy> face_energies(const RegularizerSet& regs, const MixedProfile& x,
                                             const Face& face, double floor = 0.0) {
    std::vector<FaceEnergy> out;
    for (size_t i = 0; i < x.probs.size(); ++i) {
        std::vector<double> xi = x.probs[i];
        if (floor > 0.0)
            for (double& p : xi) p = std::max(p, floor);
        for (size_t a = 0; a < xi.size(); ++a) {
            if (face.contains_action(static_cast<int>(i), static_cast<int>(a))) continue;
            std::vector<double> vertex(xi.size(), 0.0);
            vertex[a] = 1.0;
            out.push_back({static_cast<int>(i), static_cast<int>(a),
                           bregman(regs.of(static_cast<int>(i)), vertex, xi)});
        }
    }
    return out;
}

// Constants of the two-sided distance bound (bounded kernels only):
// Phi(c2 - E) <= x_ia <= Phi(c1 - E) per out-pair.
struct FaceEnergyConstants {
    double c1, c2;
};

inline FaceEnergyConstants face_energy_constants(const Kernel& k, int num_actions) {
    if (!k.bounded())
        throw std::invalid_argument("face_energy_constants: kernel must be bounded");
    const double hv = k.theta(1.0) + (num_actions - 1) * k.theta(0.0); // h at a vertex
    FaceEnergyConstants c;
    c.c1 = hv - num_actions * k.theta_min_on_01() + k.dtheta(1.0);
    c.c2 = hv - num_actions * k.theta(0.0);
    return c;
}

struct FaceSandwich {
    double lower, upper, d1;
};

// sum Phi_i(c2 - E_ia) <= d1(x, S) <= 2 sum Phi_i(c1 - E_ia)
inline FaceSandwich face_sandwich(const RegularizerSet& regs, const MixedProfile& x,
                                  const Face& face) {
    const auto energies = face_energies(regs, x, face);
    FaceSandwich s{0.0, 0.0, face_distance(x, face)};
    for (const auto& e : energies) {
        const Kernel& k = regs.of(e.player);
        const auto c = face_energy_constants(k, static_cast<int>(x.probs[e.player].size()));
        auto phi = [&](double z) {
            if (z >= k.dtheta(1.0)) return 1.0;
            return std::min(1.0, k.inv_dtheta(z));
        };
        s.lower += phi(c.c2 - e.value);
        s.upper += 2.0 * phi(c.c1 - e.value);
    }
    return s;
}

// Smallest payoff loss over all pure out-deviations from the face; positive
// iff the face is club, and the drift margin of the out-face energies.
inline double min_out_deviation_gap(const Game& g, const Face& face) {
    double m = std::numeric_limits<double>::infinity();
    detail::for_each_profile_in_face(g, face, [&](const PureProfile& a) {
        PureProfile dev = a;
        for (int i = 0; i < g.num_players; ++i) {
            for (int b = 0; b < g.action_counts[i]; ++b) {
                if (face.contains_action(i, b)) continue;
                dev[i] = b;
                m = std::min(m, g.payoff(i, a) - g.payoff(i, dev));
            }
            dev[i] = a[i];
        }
    });
    return m;
}

// Energy level for a target stay probability: with lambda = m / sigma_max^2,
// the chance of ever dropping below M from energies >= 2M is at most
// n_out e^{-lambda M}; pick M so that this is <= eps_prob.
inline double stability_level_for(double min_gap, double sigma_max_sq, int n_out,
                                  double eps_prob) {
    if (!(min_gap > 0.0)) throw std::invalid_argument("stability_level_for: gap must be positive");
    const double lambda = min_gap / sigma_max_sq;
    return std::log(n_out / eps_prob) / lambda;
}

struct StabilityResult {
    double stay_fraction = 0.0;
    double converge_fraction = 0.0;
    double level = 0.0;
    int n_runs = 0;
};

// Initial points are sampled with all out-face energies >= 2M; a run "stays"
// if no out-face energy ever drops below M (checked at recorded samples) and
// "converges" if d1(X(T), face) < 0.01 at the horizon.
inline StabilityResult stability_experiment(const Game& g, const RegularizerSet& regs,
                                            const NoiseModel& noise, const Face& face, double M,
                                            int n_runs, const SimConfig& cfg,
                                            double converge_tol = 0.01) {
    face.validate(g);
    if (!regs.all_bounded())
        throw std::invalid_argument("stability_experiment: requires bounded kernels");
    std::vector<char> stayed(n_runs, 0), converged(n_runs, 0);
    detail::parallel_for_runs(n_runs, [&](int r) {
        SimConfig c = cfg;
        c.run_id = static_cast<std::uint64_t>(r);
        c.record_samples = false;
        // rejection-sample an initial point in the 2M energy neighborhood
        rng::Stream init(cfg.seed ^ 0xA11CE5EEDull, static_cast<std::uint64_t>(r), 0);
        std::uint64_t draw = 0;
        MixedProfile x0;
        bool found = false;
        for (int attempt = 0; attempt < 100000 && !found; ++attempt) {
            x0 = detail::random_profile(g, init, draw);
            found = true;
            for (const auto& e : face_energies(regs, x0, face))
                if (e.value < 2.0 * M) {
                    found = false;
                    break;
                }
        }
        if (!found)
            throw std::invalid_argument(
                "stability_experiment: could not sample initial points at energy level 2M");
        bool stay = true;
        auto observer = [&](const StateView& v) {
            const MixedProfile x = v.to_mixed();
            for (const auto& e : face_energies(regs, x, face, 1e-300))
                if (e.value < M) stay = false;
            return false;
        };
        const auto traj = simulate_sftrl_scores(g, regs, noise, x0, c, observer);
        stayed[r] = stay ? 1 : 0;
        converged[r] = face_distance(traj.final_strategy(), face) < converge_tol ? 1 : 0;
    });
    StabilityResult res;
    res.level = M;
    res.n_runs = n_runs;
    for (int r = 0; r < n_runs; ++r) {
        res.stay_fraction += stayed[r];
        res.converge_fraction += converged[r];
    }
    res.stay_fraction /= n_runs;
    res.converge_fraction /= n_runs;
    return res;
}

struct RateFit {
    double slope = std::numeric_limits<double>::quiet_NaN();
    double intercept = std::numeric_limits<double>::quiet_NaN();
    int n_points = 0;
};

// Regression of the theta'-transformed out-face mass against time; under club
// convergence the slope tracks -m. Series truncated at the first underflow.
inline RateFit convergence_rate_probe(const Trajectory& traj, const Face& face,
                                      const RegularizerSet& regs) {
    std::vector<double> ts, ws;
    for (size_t s = 0; s < traj.strategies.size(); ++s) {
        double w = std::numeric_limits<double>::infinity();
        bool underflow = false;
        const auto& x = traj.strategies[s];
        for (size_t i = 0; i < x.probs.size() && !underflow; ++i)
            for (size_t a = 0; a < x.probs[i].size(); ++a) {
                if (face.contains_action(static_cast<int>(i), static_cast<int>(a))) continue;
                if (x.probs[i][a] < 1e-300) {
                    underflow = true;
                    break;
                }
                w = std::min(w, regs.of(static_cast<int>(i)).dtheta(x.probs[i][a]));
            }
        if (underflow) break;
        if (std::isfinite(w)) {
            ts.push_back(traj.times[s]);
            ws.push_back(w);
        }
    }
    RateFit fit;
    fit.n_points = static_cast<int>(ts.size());
    if (fit.n_points < 2) return fit;
    double tm = 0.0, wm = 0.0;
    for (int i = 0; i < fit.n_points; ++i) {
        tm += ts[i];
        wm += ws[i];
    }
    tm /= fit.n_points;
    wm /= fit.n_points;
    double num = 0.0, den = 0.0;
    for (int i = 0; i < fit.n_points; ++i) {
        num += (ts[i] - tm) * (ws[i] - wm);
        den += (ts[i] - tm) * (ts[i] - tm);
    }
    fit.slope = num / den;
    fit.intercept = wm - fit.slope * tm;
    return fit;
}

// ---------------------------------------------------------------------------
// Harmonic energies, escape times, generator estimates, recurrence probes
// ---------------------------------------------------------------------------

// E(x) = sum_i m_i D_i(center_i, x_i); the constant of motion of the
// deterministic flow in harmonic games.
inline double harmonic_energy(const HarmonicStructure& s, const RegularizerSet& regs,
                              const MixedProfile& x, double floor = 0.0) {
    double e = 0.0;
    for (size_t i = 0; i < x.probs.size(); ++i) {
        std::vector<double> xi = x.probs[i];
        if (floor > 0.0)
            for (double& p : xi) p = std::max(p, floor);
        e += s.mass[i] * bregman(regs.of(static_cast<int>(i)), s.center.probs[i], xi);
    }
    return e;
}

// Dual representation F(y) = sum_i m_i F_i(center_i, y_i); equals E(Q(y)).
inline double harmonic_fenchel(const HarmonicStructure& s, const RegularizerSet& regs,
                               const ScoreProfile& y) {
    double e = 0.0;
    for (size_t i = 0; i < y.y.size(); ++i)
        e += s.mass[i] * fenchel(regs.of(static_cast<int>(i)), s.center.probs[i], y.y[i]);
    return e;
}

inline double weighted_trace_jacobian(const HarmonicStructure& s, const RegularizerSet& regs,
                                      const MixedProfile& x) {
    double tr = 0.0;
    for (size_t i = 0; i < x.probs.size(); ++i)
        tr += s.mass[i] * trace_jacobian_mirror_at(regs.of(static_cast<int>(i)), x.probs[i]);
    return tr;
}

namespace detail {

inline void require_harmonic(const Game& g, const HarmonicStructure& s) {
    double scale = 1.0;
    for (const auto& u : g.payoffs)
        for (double v : u) scale = std::max(scale, std::fabs(v));
    if (!is_harmonic(g, s.weights, 1e-9 * scale))
        throw std::invalid_argument("game is not harmonic for the supplied weights");
}

} // namespace detail

// eps(c) = min { sum_i m_i tr Jac Q_i : E(x) <= c } estimated by rejection
// sampling from product Dirichlet(1,..,1).
struct EpsCEstimate {
    double value = std::numeric_limits<double>::infinity();
    int accepted = 0;
    int sampled = 0;
};

inline EpsCEstimate estimate_eps_c(const Game& g, const HarmonicStructure& s,
                                   const RegularizerSet& regs, double level, int n_samples = 100000,
                                   std::uint64_t seed = 99) {
    EpsCEstimate e;
    e.sampled = n_samples;
    rng::Stream st(seed, 0, 1);
    std::uint64_t draw = 0;
    for (int i = 0; i < n_samples; ++i) {
        const auto x = detail::random_profile(g, st, draw);
        if (harmonic_energy(s, regs, x) > level) continue;
        ++e.accepted;
        e.value = std::min(e.value, weighted_trace_jacobian(s, regs, x));
    }
    if (e.accepted == 0) throw std::runtime_error("estimate_eps_c: no samples inside the sublevel set");
    return e;
}

struct EnergyStats {
    std::vector<double> times;
    std::vector<double> mean_energy;
    std::vector<double> std_energy;
    HittingStats tau;     // escape times of the level set {E <= c}
    double level = 0.0;
    double eps_c = 0.0;
    int eps_c_accepted = 0;
    double bound = 0.0;   // 2 (c - E(x0)) / (sigma_min^2 eps(c))
};

// Escape times from {E <= c} under stochastic FTRL, the sampled eps(c) and the
// resulting expectation bound; optionally also the mean-energy curve over a
// time grid (separate runs without the stop rule).
inline EnergyStats energy_escape_stats(const Game& g, const HarmonicStructure& s,
                                       const RegularizerSet& regs, const NoiseModel& noise,
                                       const MixedProfile& x0, double level, int n_runs,
                                       const SimConfig& cfg,
                                       const std::vector<double>& curve_times = {},
                                       int eps_c_samples = 100000) {
    detail::require_harmonic(g, s);
    if (!(noise.sigma_min_sq() > 0.0))
        throw std::invalid_argument("energy_escape_stats: sigma_min^2 must be positive");
    EnergyStats out;
    out.level = level;
    const auto eps_c = estimate_eps_c(g, s, regs, level, eps_c_samples, cfg.seed + 7);
    out.eps_c = eps_c.value;
    out.eps_c_accepted = eps_c.accepted;
    const double e0 = harmonic_energy(s, regs, x0);
    if (!(e0 < level))
        throw std::invalid_argument("energy_escape_stats: x0 must start inside the level set");
    out.bound = 2.0 * (level - e0) / (noise.sigma_min_sq() * eps_c.value);

    std::vector<std::optional<double>> taus(n_runs);
    detail::parallel_for_runs(n_runs, [&](int r) {
        SimConfig c = cfg;
        c.run_id = static_cast<std::uint64_t>(r);
        c.record_samples = false;
        auto stop = [&](const StateView& v) {
            return harmonic_energy(s, regs, v.to_mixed(), 1e-300) > level;
        };
        const auto traj = simulate_sftrl_scores(g, regs, noise, x0, c, stop);
        if (traj.terminal_reason == TerminalReason::stop_predicate)
            taus[r] = traj.final_time();
        else if (traj.terminal_reason == TerminalReason::numerical_failure)
            throw std::runtime_error("energy_escape_stats: integrator failure");
    });
    out.tau.n_runs = n_runs;
    out.tau.horizon = cfg.horizon;
    std::vector<double> hit;
    for (const auto& t : taus)
        if (t)
            hit.push_back(*t);
        else
            ++out.tau.censored;
    out.tau.n_hit = static_cast<int>(hit.size());
    const auto ms = detail::mean_std(hit);
    out.tau.mean_hit_time = ms.mean;
    out.tau.sample_std = ms.std;
    if (out.tau.n_hit >= 1) {
        const double half = 1.96 * ms.std / std::sqrt(static_cast<double>(out.tau.n_hit));
        out.tau.ci_low = ms.mean - half;
        out.tau.ci_high = ms.mean + half;
    }

    if (!curve_times.empty()) {
        out.times = curve_times;
        std::vector<std::vector<double>> samples(n_runs,
                                                 std::vector<double>(curve_times.size(), 0.0));
        detail::parallel_for_runs(n_runs, [&](int r) {
            SimConfig c = cfg;
            c.run_id = static_cast<std::uint64_t>(n_runs + r); // independent of the tau runs
            c.record_samples = false;
            c.horizon = curve_times.back();
            size_t next = 0;
            auto observer = [&](const StateView& v) {
                while (next < curve_times.size() && v.t >= curve_times[next] - 1e-12) {
                    samples[r][next] = harmonic_energy(s, regs, v.to_mixed(), 1e-300);
                    ++next;
                }
                return false;
            };
            simulate_sftrl_scores(g, regs, noise, x0, c, observer);
        });
        out.mean_energy.resize(curve_times.size());
        out.std_energy.resize(curve_times.size());
        for (size_t t = 0; t < curve_times.size(); ++t) {
            std::vector<double> col(n_runs);
            for (int r = 0; r < n_runs; ++r) col[r] = samples[r][t];
            const auto m = detail::mean_std(col);
            out.mean_energy[t] = m.mean;
            out.std_energy[t] = m.std;
        }
    }
    return out;
}

struct GeneratorEstimate {
    double value = 0.0; // E[F(Y + dY) - F(Y)] / dt
    double se = 0.0;
    double lower = 0.0; // (sigma_min^2 / 2) sum_i m_i tr Jac Q_i
    double upper = 0.0;
    bool conclusive = true; // false when the SE exceeds half the bound gap
};

// One-step ensemble estimator of the generator acting on the Fenchel energy
// at fixed probe states, compared against the trace bounds.
inline std::vector<GeneratorEstimate> generator_estimate(const Game& g, const HarmonicStructure& s,
                                                         const RegularizerSet& regs,
                                                         const NoiseModel& noise,
                                                         const std::vector<MixedProfile>& probes,
                                                         int n_draws, double dt,
                                                         std::uint64_t seed = 17) {
    detail::require_harmonic(g, s);
    std::vector<GeneratorEstimate> out(probes.size());
    const auto off = detail::player_offsets(g);
    const int n = off.back();
    const int kdim = noise.driver_dim();
    detail::parallel_for_runs(static_cast<int>(probes.size()), [&](int p) {
        const MixedProfile& x = probes[p];
        const ScoreProfile y0 = regs.scores_of(x);
        const double f0 = harmonic_fenchel(s, regs, y0);
        std::vector<double> xflat(n), yflat(n), v(n), xi(kdim);
        detail::flatten(x, off, xflat);
        for (int i = 0; i < g.num_players; ++i)
            std::copy(y0.y[i].begin(), y0.y[i].end(), yflat.begin() + off[i]);
        detail::FieldWorkspace fw;
        detail::payoff_field_flat(g, off, xflat.data(), v.data(), fw);
        Matrix work;
        const auto streams = detail::make_streams(seed, static_cast<std::uint64_t>(p), kdim);
        const double sqdt = std::sqrt(dt);
        std::vector<double> samples(n_draws);
        ScoreProfile y1 = y0;
        for (int d = 0; d < n_draws; ++d) {
            std::vector<double> ynew = yflat;
            for (int c = 0; c < n; ++c) ynew[c] += dt * v[c];
            for (int k = 0; k < kdim; ++k) xi[k] = streams[k].normal(static_cast<std::uint64_t>(d));
            noise.apply(xflat, xi.data(), sqdt, ynew.data(), work);
            for (int i = 0; i < g.num_players; ++i)
                y1.y[i].assign(ynew.begin() + off[i], ynew.begin() + off[i + 1]);
            samples[d] = (harmonic_fenchel(s, regs, y1) - f0) / dt;
        }
        const auto ms = detail::mean_std(samples);
        GeneratorEstimate e;
        e.value = ms.mean;
        e.se = ms.std / std::sqrt(static_cast<double>(n_draws));
        const double tr = weighted_trace_jacobian(s, regs, x);
        e.lower = 0.5 * noise.sigma_min_sq() * tr;
        e.upper = 0.5 * noise.sigma_max_sq() * tr;
        e.conclusive = e.se <= 0.5 * (e.upper - e.lower);
        out[p] = e;
    });
    return out;
}

enum class RecurrenceMode {
    escape_sublevel,     // time to leave {E <= c} from inside
    return_after_escape, // after leaving {E <= c}, time to come back
};

struct RecurrenceStats {
    int n_runs = 0;
    int n_escaped = 0;
    double escape_mean = std::numeric_limits<double>::quiet_NaN();
    int n_returned = 0;
    double return_mean = std::numeric_limits<double>::quiet_NaN();
    double censored_fraction = 0.0; // share of runs not completing the probe by the horizon
    double horizon = 0.0;
};

// Empirical escape/return probe for the transience statements: interior
// compacts are escaped in finite mean time; returns to them after escape are
// evidenced as heavy-tailed via censoring, never asserted finite.
inline RecurrenceStats recurrence_probe(const Game& g, const HarmonicStructure& s,
                                        const RegularizerSet& regs, const NoiseModel& noise,
                                        const MixedProfile& x0, double level, RecurrenceMode mode,
                                        int n_runs, const SimConfig& cfg) {
    detail::require_harmonic(g, s);
    RecurrenceStats out;
    out.n_runs = n_runs;
    out.horizon = cfg.horizon;
    std::vector<std::optional<double>> escape(n_runs), ret(n_runs);
    detail::parallel_for_runs(n_runs, [&](int r) {
        SimConfig c = cfg;
        c.run_id = static_cast<std::uint64_t>(r);
        c.record_samples = false;
        double t_escape = -1.0, t_return = -1.0;
        auto observer = [&](const StateView& v) {
            const double e = harmonic_energy(s, regs, v.to_mixed(), 1e-300);
            if (t_escape < 0.0) {
                if (e > level) {
                    t_escape = v.t;
                    return mode == RecurrenceMode::escape_sublevel;
                }
                return false;
            }
            if (e <= level) {
                t_return = v.t;
                return true;
            }
            return false;
        };
        simulate_sftrl_scores(g, regs, noise, x0, c, observer);
        if (t_escape >= 0.0) escape[r] = t_escape;
        if (t_return >= 0.0) ret[r] = t_return - t_escape;
    });
    std::vector<double> esc, rts;
    for (int r = 0; r < n_runs; ++r) {
        if (escape[r]) esc.push_back(*escape[r]);
        if (ret[r]) rts.push_back(*ret[r]);
    }
    out.n_escaped = static_cast<int>(esc.size());
    out.escape_mean = detail::mean_std(esc).mean;
    out.n_returned = static_cast<int>(rts.size());
    out.return_mean = detail::mean_std(rts).mean;
    const int completed = mode == RecurrenceMode::escape_sublevel ? out.n_escaped : out.n_returned;
    out.censored_fraction = static_cast<double>(n_runs - completed) / n_runs;
    return out;
}

} // namespace sgdlab
