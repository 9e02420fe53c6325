#pragma once

// Time integration: the deterministic FTRL flow (RK4 in score space), the
// stochastic stochastic FTRL score SDE (Euler-Maruyama), the equivalent strategy-space
// SDE, the three stochastic replicator variants, state-dependent noise models
// and the payoff-differences projection.
//
// Noise is drawn from counter-based substreams keyed by (seed, run_id,
// driver), so identical (seed, config, inputs) give identical trajectories and
// paired integrators share their Gaussian stream by construction.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "sgdlab/game.hpp"
#include "sgdlab/kernels.hpp"
#include "sgdlab/rng.hpp"

namespace sgdlab {

class NoiseModel {
  public:
    enum class Kind { uncorrelated_constant, full_constant, callback };
    // Fills sigma (total_actions x driver_dim) at the flat strategy state.
    using Callback = std::function<void(const std::vector<double>&, Matrix&)>;

    static NoiseModel none(const Game& g) { return uncorrelated_uniform(g, 0.0); }

    static NoiseModel uncorrelated_uniform(const Game& g, double sigma) {
        std::vector<std::vector<double>> s(g.num_players);
        for (int i = 0; i < g.num_players; ++i) s[i].assign(g.action_counts[i], sigma);
        return uncorrelated(g, std::move(s));
    }

    // One independent Brownian driver per (player, action); diagonal Sigma.
    static NoiseModel uncorrelated(const Game& g, std::vector<std::vector<double>> sigmas) {
        NoiseModel n(g);
        n.kind_ = Kind::uncorrelated_constant;
        n.driver_dim_ = n.total_actions_;
        n.diag_.reserve(n.total_actions_);
        if (static_cast<int>(sigmas.size()) != g.num_players)
            throw std::invalid_argument("NoiseModel::uncorrelated: player count mismatch");
        for (int i = 0; i < g.num_players; ++i) {
            if (static_cast<int>(sigmas[i].size()) != g.action_counts[i])
                throw std::invalid_argument("NoiseModel::uncorrelated: action count mismatch");
            for (double s : sigmas[i]) n.diag_.push_back(s);
        }
        n.per_player_sigmas_ = std::move(sigmas);
        n.compute_constant_bounds();
        return n;
    }

    static NoiseModel full_constant(const Game& g, Matrix sigma) {
        NoiseModel n(g);
        n.kind_ = Kind::full_constant;
        if (sigma.rows != n.total_actions_ || sigma.cols < 1)
            throw std::invalid_argument("NoiseModel::full_constant: bad matrix shape");
        n.driver_dim_ = sigma.cols;
        n.full_ = std::move(sigma);
        n.compute_constant_bounds();
        return n;
    }

    // State-dependent diffusion; eigen-bounds estimated on a probe grid of
    // random interior points.
    static NoiseModel state_dependent(const Game& g, int driver_dim, Callback cb,
                                      int probe_points = 256, std::uint64_t probe_seed = 2024) {
        NoiseModel n(g);
        n.kind_ = Kind::callback;
        n.driver_dim_ = driver_dim;
        n.cb_ = std::move(cb);
        n.probe_bounds(probe_points, probe_seed);
        return n;
    }

    Kind kind() const { return kind_; }
    int driver_dim() const { return driver_dim_; }
    int total_actions() const { return total_actions_; }
    const std::vector<int>& offsets() const { return offsets_; }
    bool is_diagonal() const { return kind_ == Kind::uncorrelated_constant; }
    bool is_zero() const { return sigma_max_sq_ == 0.0; }

    const std::vector<double>& diagonal_sigma(int player) const {
        if (!is_diagonal()) throw std::invalid_argument("NoiseModel: not a diagonal model");
        return per_player_sigmas_[player];
    }

    // Smallest / largest eigenvalue of Theta = Sigma Sigma^T over the state
    // space (exact for constant models, probed for callbacks).
    double sigma_min_sq() const { return sigma_min_sq_; }
    double sigma_max_sq() const { return sigma_max_sq_; }
    // Same for a single player's covariance block Theta_i.
    double sigma_min_sq(int player) const { return player_min_sq_[player]; }
    double sigma_max_sq(int player) const { return player_max_sq_[player]; }

    // out += scale * Sigma(x) * xi. `work` holds the callback's matrix buffer.
    void apply(const std::vector<double>& xflat, const double* xi, double scale, double* out,
               Matrix& work) const {
        switch (kind_) {
            case Kind::uncorrelated_constant:
                for (int c = 0; c < total_actions_; ++c) out[c] += scale * diag_[c] * xi[c];
                return;
            case Kind::full_constant:
                for (int r = 0; r < total_actions_; ++r) {
                    double s = 0.0;
                    for (int k = 0; k < driver_dim_; ++k) s += full_(r, k) * xi[k];
                    out[r] += scale * s;
                }
                return;
            case Kind::callback:
                if (work.rows != total_actions_ || work.cols != driver_dim_)
                    work = Matrix(total_actions_, driver_dim_);
                cb_(xflat, work);
                for (int r = 0; r < total_actions_; ++r) {
                    double s = 0.0;
                    for (int k = 0; k < driver_dim_; ++k) s += work(r, k) * xi[k];
                    out[r] += scale * s;
                }
                return;
        }
    }

    // Player i's rows of Sigma(x), row-major A_i x driver_dim.
    void player_rows(const std::vector<double>& xflat, int player, std::vector<double>& rows,
                     Matrix& work) const {
        const int A = offsets_[player + 1] - offsets_[player];
        rows.assign(static_cast<size_t>(A) * driver_dim_, 0.0);
        switch (kind_) {
            case Kind::uncorrelated_constant:
                for (int a = 0; a < A; ++a) {
                    const int c = offsets_[player] + a;
                    rows[static_cast<size_t>(a) * driver_dim_ + c] = diag_[c];
                }
                return;
            case Kind::full_constant:
                for (int a = 0; a < A; ++a)
                    for (int k = 0; k < driver_dim_; ++k)
                        rows[static_cast<size_t>(a) * driver_dim_ + k] = full_(offsets_[player] + a, k);
                return;
            case Kind::callback:
                if (work.rows != total_actions_ || work.cols != driver_dim_)
                    work = Matrix(total_actions_, driver_dim_);
                cb_(xflat, work);
                for (int a = 0; a < A; ++a)
                    for (int k = 0; k < driver_dim_; ++k)
                        rows[static_cast<size_t>(a) * driver_dim_ + k] = work(offsets_[player] + a, k);
                return;
        }
    }

  private:
    explicit NoiseModel(const Game& g) {
        offsets_ = detail::player_offsets(g);
        total_actions_ = offsets_.back();
        num_players_ = g.num_players;
    }

    void bounds_from_sigma(const Matrix& sigma, double& lo, double& hi,
                           std::vector<double>& plo, std::vector<double>& phi) const {
        const auto ev = symmetric_eigenvalues(matmul(sigma, sigma.transposed()));
        lo = *std::min_element(ev.begin(), ev.end());
        hi = *std::max_element(ev.begin(), ev.end());
        plo.resize(num_players_);
        phi.resize(num_players_);
        for (int i = 0; i < num_players_; ++i) {
            const int A = offsets_[i + 1] - offsets_[i];
            Matrix block(A, sigma.cols);
            for (int a = 0; a < A; ++a)
                for (int k = 0; k < sigma.cols; ++k) block(a, k) = sigma(offsets_[i] + a, k);
            const auto evi = symmetric_eigenvalues(matmul(block, block.transposed()));
            plo[i] = *std::min_element(evi.begin(), evi.end());
            phi[i] = *std::max_element(evi.begin(), evi.end());
        }
    }

    void compute_constant_bounds() {
        if (kind_ == Kind::uncorrelated_constant) {
            sigma_min_sq_ = std::numeric_limits<double>::infinity();
            sigma_max_sq_ = 0.0;
            player_min_sq_.resize(num_players_);
            player_max_sq_.resize(num_players_);
            for (int i = 0; i < num_players_; ++i) {
                double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
                for (double s : per_player_sigmas_[i]) {
                    lo = std::min(lo, s * s);
                    hi = std::max(hi, s * s);
                }
                player_min_sq_[i] = lo;
                player_max_sq_[i] = hi;
                sigma_min_sq_ = std::min(sigma_min_sq_, lo);
                sigma_max_sq_ = std::max(sigma_max_sq_, hi);
            }
        } else {
            bounds_from_sigma(full_, sigma_min_sq_, sigma_max_sq_, player_min_sq_, player_max_sq_);
        }
    }

    void probe_bounds(int points, std::uint64_t seed) {
        sigma_min_sq_ = std::numeric_limits<double>::infinity();
        sigma_max_sq_ = 0.0;
        player_min_sq_.assign(num_players_, std::numeric_limits<double>::infinity());
        player_max_sq_.assign(num_players_, 0.0);
        rng::Stream st(seed, 0, 0);
        std::uint64_t draw = 0;
        Matrix sigma(total_actions_, driver_dim_);
        std::vector<double> x(total_actions_);
        for (int p = 0; p < points; ++p) {
            for (int i = 0; i < num_players_; ++i) {
                double s = 0.0;
                for (int c = offsets_[i]; c < offsets_[i + 1]; ++c)
                    s += (x[c] = -std::log(st.uniform(draw++)));
                for (int c = offsets_[i]; c < offsets_[i + 1]; ++c) x[c] /= s;
            }
            cb_(x, sigma);
            double lo, hi;
            std::vector<double> plo, phi;
            bounds_from_sigma(sigma, lo, hi, plo, phi);
            sigma_min_sq_ = std::min(sigma_min_sq_, lo);
            sigma_max_sq_ = std::max(sigma_max_sq_, hi);
            for (int i = 0; i < num_players_; ++i) {
                player_min_sq_[i] = std::min(player_min_sq_[i], plo[i]);
                player_max_sq_[i] = std::max(player_max_sq_[i], phi[i]);
            }
        }
    }

    Kind kind_ = Kind::uncorrelated_constant;
    int num_players_ = 0;
    int total_actions_ = 0;
    int driver_dim_ = 0;
    std::vector<int> offsets_;
    std::vector<double> diag_;
    std::vector<std::vector<double>> per_player_sigmas_;
    Matrix full_;
    Callback cb_;
    double sigma_min_sq_ = 0.0, sigma_max_sq_ = 0.0;
    std::vector<double> player_min_sq_, player_max_sq_;
};

enum class Scheme { euler_maruyama, rk4 };
enum class SrdVariant { EW, AS, PI };

inline const char* to_string(SrdVariant v) {
    switch (v) {
        case SrdVariant::EW: return "EW";
        case SrdVariant::AS: return "AS";
        case SrdVariant::PI: return "PI";
    }
    return "?";
}

struct SimConfig {
    double step = 1e-2;
    double horizon = 1.0;
    int sample_stride = 1;      // record every stride-th step
    std::uint64_t seed = 0;
    std::uint64_t run_id = 0;   // substream selector for Monte Carlo fan-out
    Scheme scheme = Scheme::euler_maruyama;
    bool record_samples = true; // false: keep only the first and latest sample

    void validate() const {
        if (!(step > 0.0)) throw std::invalid_argument("SimConfig: step must be positive");
        if (!(horizon > 0.0)) throw std::invalid_argument("SimConfig: horizon must be positive");
        if (step > horizon) throw std::invalid_argument("SimConfig: step exceeds horizon");
        if (sample_stride < 1) throw std::invalid_argument("SimConfig: sample_stride must be >= 1");
    }

    std::int64_t num_steps() const {
        return static_cast<std::int64_t>(std::ceil(horizon / step - 1e-12));
    }
};

enum class TerminalReason { horizon, stop_predicate, numerical_failure };

inline const char* to_string(TerminalReason r) {
    switch (r) {
        case TerminalReason::horizon: return "horizon";
        case TerminalReason::stop_predicate: return "stop_predicate";
        case TerminalReason::numerical_failure: return "numerical_failure";
    }
    return "?";
}

struct Trajectory {
    std::vector<double> times;
    std::vector<ScoreProfile> scores;      // empty for strategy-space integrators
    std::vector<MixedProfile> strategies;
    SimConfig config;
    TerminalReason terminal_reason = TerminalReason::horizon;

    double final_time() const { return times.empty() ? 0.0 : times.back(); }
    const MixedProfile& final_strategy() const { return strategies.back(); }
};

// Zero-allocation view of the current sample handed to callbacks.
struct StateView {
    double t = 0.0;
    const std::vector<int>* offsets = nullptr;
    const double* x = nullptr;
    const double* y = nullptr; // null when the integrator has no score state

    int num_players() const { return static_cast<int>(offsets->size()) - 1; }
    int actions(int player) const { return (*offsets)[player + 1] - (*offsets)[player]; }
    double prob(int player, int action) const { return x[(*offsets)[player] + action]; }
    double score(int player, int action) const { return y[(*offsets)[player] + action]; }

    double max_prob(int player) const {
        double m = 0.0;
        for (int a = 0; a < actions(player); ++a) m = std::max(m, prob(player, a));
        return m;
    }

    MixedProfile to_mixed() const {
        MixedProfile m;
        m.probs.resize(num_players());
        for (int i = 0; i < num_players(); ++i)
            m.probs[i].assign(x + (*offsets)[i], x + (*offsets)[i + 1]);
        return m;
    }
};

// Called at every recorded sample; returning true stops the run.
using SampleCallback = std::function<bool(const StateView&)>;

namespace detail {

struct Recorder {
    Trajectory traj;
    bool with_scores;
    bool record_all;
    const std::vector<int>* offsets;

    Recorder(const SimConfig& cfg, bool scores, const std::vector<int>* off)
        : with_scores(scores), record_all(cfg.record_samples), offsets(off) {
        traj.config = cfg;
    }

    void push(double t, const double* x, const double* y) {
        MixedProfile m;
        m.probs.resize(offsets->size() - 1);
        for (size_t i = 0; i + 1 < offsets->size(); ++i)
            m.probs[i].assign(x + (*offsets)[i], x + (*offsets)[i + 1]);
        ScoreProfile s;
        if (with_scores) {
            s.y.resize(offsets->size() - 1);
            for (size_t i = 0; i + 1 < offsets->size(); ++i)
                s.y[i].assign(y + (*offsets)[i], y + (*offsets)[i + 1]);
        }
        if (!record_all && traj.times.size() >= 2) {
            traj.times.back() = t;
            traj.strategies.back() = std::move(m);
            if (with_scores) traj.scores.back() = std::move(s);
            return;
        }
        traj.times.push_back(t);
        traj.strategies.push_back(std::move(m));
        if (with_scores) traj.scores.push_back(std::move(s));
    }
};

inline std::vector<rng::Stream> make_streams(std::uint64_t seed, std::uint64_t run, int drivers) {
    std::vector<rng::Stream> s;
    s.reserve(drivers);
    for (int k = 0; k < drivers; ++k) s.emplace_back(seed, run, static_cast<std::uint64_t>(k));
    return s;
}

inline bool all_finite(const std::vector<double>& v) {
    for (double z : v)
        if (!std::isfinite(z)) return false;
    return true;
}

inline void flatten(const MixedProfile& x, const std::vector<int>& off, std::vector<double>& out) {
    out.resize(off.back());
    for (size_t i = 0; i < x.probs.size(); ++i)
        std::copy(x.probs[i].begin(), x.probs[i].end(), out.begin() + off[i]);
}

// Per-player Euler-Maruyama strategy increment of the stochastic FTRL strategy SDE:
// drift, martingale and Ito-correction terms with coefficients
//   g_a = 1/theta''(x_a),  hhat_a = g_a / G,
//   q2_{ak} = -(1/2) theta'''(x_a) g_a^2 [sigma_{ak} - sum_b hhat_b sigma_{bk}]^2.
// `noise_increment` must already carry sqrt(dt) (it is sigma rows * xi * sqrt(dt)
// assembled by the caller as dM_a).
struct StratWorkspace {
    std::vector<double> g, hhat, s, cmix;
};

inline void sftrl_strategy_increment(const Kernel& kern, int A, int kdim, const double* x,
                                     const double* v, const double* sigma_rows, const double* xi,
                                     double dt, double* dx, StratWorkspace& ws) {
    ws.g.resize(A);
    ws.hhat.resize(A);
    ws.s.resize(A);
    ws.cmix.resize(kdim);
    double G = 0.0;
    for (int a = 0; a < A; ++a) G += (ws.g[a] = mirror_gain(kern, x[a]));
    for (int a = 0; a < A; ++a) ws.hhat[a] = ws.g[a] / G;

    // c_k = sum_b hhat_b sigma_{bk}
    for (int k = 0; k < kdim; ++k) {
        double c = 0.0;
        for (int b = 0; b < A; ++b) c += ws.hhat[b] * sigma_rows[static_cast<size_t>(b) * kdim + k];
        ws.cmix[k] = c;
    }
    // s_a = sum_k q2_{ak}
    for (int a = 0; a < A; ++a) {
        double acc = 0.0;
        for (int k = 0; k < kdim; ++k) {
            const double d = sigma_rows[static_cast<size_t>(a) * kdim + k] - ws.cmix[k];
            acc += d * d;
        }
        ws.s[a] = -0.5 * kern.d3theta(x[a]) * ws.g[a] * ws.g[a] * acc;
    }
    double vbar = 0.0, sbar = 0.0, nbar = 0.0;
    const double sqdt = std::sqrt(dt);
    // n_a = dM_a = sum_k sigma_{ak} xi_k sqrt(dt)
    for (int a = 0; a < A; ++a) {
        double n = 0.0;
        for (int k = 0; k < kdim; ++k) n += sigma_rows[static_cast<size_t>(a) * kdim + k] * xi[k];
        dx[a] = n * sqdt; // reuse dx as scratch for n_a
    }
    for (int b = 0; b < A; ++b) {
        vbar += ws.hhat[b] * v[b];
        sbar += ws.hhat[b] * ws.s[b];
        nbar += ws.hhat[b] * dx[b];
    }
    for (int a = 0; a < A; ++a)
        dx[a] = ws.g[a] * ((v[a] - vbar) * dt + (dx[a] - nbar) + (ws.s[a] - sbar) * dt);
}

// Per-player Euler-Maruyama increment of the displayed SRD equations
// (diagonal noise, one driver per own action).
inline void srd_increment(SrdVariant variant, int A, const double* x, const double* v,
                          const double* sigma, const double* xi, double dt, double* dx) {
    const double sqdt = std::sqrt(dt);
    double vbar = 0.0, nbar = 0.0;
    for (int b = 0; b < A; ++b) {
        vbar += x[b] * v[b];
        nbar += x[b] * sigma[b] * xi[b];
    }
    for (int a = 0; a < A; ++a) {
        double ito = 0.0;
        if (variant == SrdVariant::EW) {
            double corr = 0.0;
            for (int b = 0; b < A; ++b) corr += sigma[b] * sigma[b] * x[b] * (1.0 - 2.0 * x[b]);
            ito = 0.5 * (sigma[a] * sigma[a] * (1.0 - 2.0 * x[a]) - corr);
        } else if (variant == SrdVariant::AS) {
            double corr = 0.0;
            for (int b = 0; b < A; ++b) corr += sigma[b] * sigma[b] * x[b] * x[b];
            ito = -(sigma[a] * sigma[a] * x[a] - corr);
        }
        dx[a] = x[a] * ((v[a] - vbar + ito) * dt + (sigma[a] * xi[a] - nbar) * sqdt);
    }
}

inline void clamp_renormalize(double* x, int A, double floor = 1e-14) {
    double s = 0.0;
    for (int a = 0; a < A; ++a) s += (x[a] = std::max(x[a], floor));
    for (int a = 0; a < A; ++a) x[a] /= s;
}

} // namespace detail

// Test-facing wrappers around the per-player increment kernels.
inline std::vector<double> sftrl_strategy_increment(const Kernel& k, const std::vector<double>& x,
                                                    const std::vector<double>& v,
                                                    const Matrix& sigma_rows,
                                                    const std::vector<double>& xi, double dt) {
    const int A = static_cast<int>(x.size());
    std::vector<double> dx(A);
    detail::StratWorkspace ws;
    detail::sftrl_strategy_increment(k, A, sigma_rows.cols, x.data(), v.data(), sigma_rows.a.data(),
                                     xi.data(), dt, dx.data(), ws);
    return dx;
}

inline std::vector<double> srd_increment(SrdVariant variant, const std::vector<double>& x,
                                         const std::vector<double>& v,
                                         const std::vector<double>& sigma,
                                         const std::vector<double>& xi, double dt) {
    const int A = static_cast<int>(x.size());
    std::vector<double> dx(A);
    detail::srd_increment(variant, A, x.data(), v.data(), sigma.data(), xi.data(), dt, dx.data());
    return dx;
}

// Deterministic FTRL flow dy = v(Q(y)) dt in score space, initialized at
// y(0) = grad h(x0). RK4 unless cfg.scheme asks for the plain Euler reference.
inline Trajectory simulate_deterministic_ftrl(const Game& g, const RegularizerSet& regs,
                                              const MixedProfile& x0, const SimConfig& cfg,
                                              const SampleCallback& on_sample = nullptr) {
    cfg.validate();
    if (!x0.valid_for(g) || !x0.interior())
        throw std::invalid_argument("simulate_deterministic_ftrl: x0 must be interior");
    const auto off = detail::player_offsets(g);
    const int n = off.back();
    std::vector<double> y(n), x(n), k1(n), k2(n), k3(n), k4(n), ystage(n), xscratch(n);
    detail::FieldWorkspace fw;
    {
        const auto y0 = regs.scores_of(x0);
        for (int i = 0; i < g.num_players; ++i)
            std::copy(y0.y[i].begin(), y0.y[i].end(), y.begin() + off[i]);
        detail::flatten(x0, off, x);
    }
    auto mirror_into = [&](const std::vector<double>& yy, std::vector<double>& xx) {
        for (int i = 0; i < g.num_players; ++i) {
            const std::vector<double> yi(yy.begin() + off[i], yy.begin() + off[i + 1]);
            const auto xi = mirror(regs.of(i), yi);
            std::copy(xi.begin(), xi.end(), xx.begin() + off[i]);
        }
    };
    auto field_at = [&](const std::vector<double>& yy, std::vector<double>& out) {
        mirror_into(yy, xscratch);
        detail::payoff_field_flat(g, off, xscratch.data(), out.data(), fw);
    };

    detail::Recorder rec(cfg, true, &off);
    rec.push(0.0, x.data(), y.data());
    StateView view{0.0, &off, x.data(), y.data()};
    if (on_sample && on_sample(view)) {
        rec.traj.terminal_reason = TerminalReason::stop_predicate;
        return std::move(rec.traj);
    }
    const std::int64_t N = cfg.num_steps();
    for (std::int64_t step = 0; step < N; ++step) {
        if (cfg.scheme == Scheme::rk4) {
            field_at(y, k1);
            for (int c = 0; c < n; ++c) ystage[c] = y[c] + 0.5 * cfg.step * k1[c];
            field_at(ystage, k2);
            for (int c = 0; c < n; ++c) ystage[c] = y[c] + 0.5 * cfg.step * k2[c];
            field_at(ystage, k3);
            for (int c = 0; c < n; ++c) ystage[c] = y[c] + cfg.step * k3[c];
            field_at(ystage, k4);
            for (int c = 0; c < n; ++c)
                y[c] += cfg.step / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        } else {
            detail::payoff_field_flat(g, off, x.data(), k1.data(), fw);
            for (int c = 0; c < n; ++c) y[c] += cfg.step * k1[c];
        }
        mirror_into(y, x);
        if (!detail::all_finite(x) || !detail::all_finite(y)) {
            rec.traj.terminal_reason = TerminalReason::numerical_failure;
            return std::move(rec.traj);
        }
        const bool last = step + 1 == N;
        if ((step + 1) % cfg.sample_stride == 0 || last) {
            const double t = (step + 1) * cfg.step;
            rec.push(t, x.data(), y.data());
            view.t = t;
            if (on_sample && on_sample(view)) {
                rec.traj.terminal_reason = TerminalReason::stop_predicate;
                return std::move(rec.traj);
            }
        }
    }
    rec.traj.terminal_reason = TerminalReason::horizon;
    return std::move(rec.traj);
}

// stochastic FTRL in score space (the reference stochastic integrator):
// Y_{n+1} = Y_n + v(X_n) dt + Sigma(X_n) xi sqrt(dt), X = Q(Y).
inline Trajectory simulate_sftrl_scores(const Game& g, const RegularizerSet& regs,
                                        const NoiseModel& noise, const MixedProfile& x0,
                                        const SimConfig& cfg,
                                        const SampleCallback& on_sample = nullptr) {
    cfg.validate();
    if (cfg.scheme != Scheme::euler_maruyama)
        throw std::invalid_argument("simulate_sftrl_scores: scheme must be euler_maruyama");
    if (!x0.valid_for(g) || !x0.interior())
        throw std::invalid_argument("simulate_sftrl_scores: x0 must be interior");
    const auto off = detail::player_offsets(g);
    if (noise.total_actions() != off.back())
        throw std::invalid_argument("simulate_sftrl_scores: noise dimensions do not match game");
    const int n = off.back();
    const int kdim = noise.driver_dim();
    std::vector<double> y(n), x(n), v(n), xi(kdim);
    detail::FieldWorkspace fw;
    Matrix noisework;
    const auto streams = detail::make_streams(cfg.seed, cfg.run_id, kdim);
    {
        const auto y0 = regs.scores_of(x0);
        for (int i = 0; i < g.num_players; ++i)
            std::copy(y0.y[i].begin(), y0.y[i].end(), y.begin() + off[i]);
        detail::flatten(x0, off, x);
    }
    detail::Recorder rec(cfg, true, &off);
    rec.push(0.0, x.data(), y.data());
    StateView view{0.0, &off, x.data(), y.data()};
    if (on_sample && on_sample(view)) {
        rec.traj.terminal_reason = TerminalReason::stop_predicate;
        return std::move(rec.traj);
    }
    const double sqdt = std::sqrt(cfg.step);
    const std::int64_t N = cfg.num_steps();
    std::vector<double> xprev(n), yprev(n);
    for (std::int64_t step = 0; step < N; ++step) {
        xprev = x;
        yprev = y;
        detail::payoff_field_flat(g, off, x.data(), v.data(), fw);
        for (int k = 0; k < kdim; ++k) xi[k] = streams[k].normal(static_cast<std::uint64_t>(step));
        for (int c = 0; c < n; ++c) y[c] += cfg.step * v[c];
        noise.apply(x, xi.data(), sqdt, y.data(), noisework);
        bool ok = detail::all_finite(y);
        if (ok) {
            try {
                for (int i = 0; i < g.num_players; ++i) {
                    const std::vector<double> yi(y.begin() + off[i], y.begin() + off[i + 1]);
                    const auto xm = mirror(regs.of(i), yi);
                    std::copy(xm.begin(), xm.end(), x.begin() + off[i]);
                }
                ok = detail::all_finite(x);
            } catch (const MirrorSolveError&) {
                ok = false;
            }
        }
        if (!ok) {
            rec.push(step * cfg.step, xprev.data(), yprev.data()); // last good sample
            rec.traj.terminal_reason = TerminalReason::numerical_failure;
            return std::move(rec.traj);
        }
        const bool last = step + 1 == N;
        if ((step + 1) % cfg.sample_stride == 0 || last) {
            const double t = (step + 1) * cfg.step;
            rec.push(t, x.data(), y.data());
            view.t = t;
            if (on_sample && on_sample(view)) {
                rec.traj.terminal_reason = TerminalReason::stop_predicate;
                return std::move(rec.traj);
            }
        }
    }
    rec.traj.terminal_reason = TerminalReason::horizon;
    return std::move(rec.traj);
}

// stochastic FTRL integrated directly in strategy space via the equivalent SDE
// (drift, martingale and Ito terms). Pairs pathwise with the score-space
// integrator when run under the same (seed, run_id). Coordinates are clamped
// to >= 1e-14 and renormalized after each step.
inline Trajectory simulate_sftrl_strategies(const Game& g, const RegularizerSet& regs,
                                            const NoiseModel& noise, const MixedProfile& x0,
                                            const SimConfig& cfg,
                                            const SampleCallback& on_sample = nullptr) {
    cfg.validate();
    if (!x0.valid_for(g) || !x0.interior())
        throw std::invalid_argument("simulate_sftrl_strategies: x0 must be interior");
    for (const auto& k : regs.kernels)
        if (!(k.d3theta(0.5) < 0.0))
            throw std::invalid_argument("simulate_sftrl_strategies: kernels must have theta''' < 0");
    const auto off = detail::player_offsets(g);
    if (noise.total_actions() != off.back())
        throw std::invalid_argument("simulate_sftrl_strategies: noise dimensions do not match game");
    const int n = off.back();
    const int kdim = noise.driver_dim();
    std::vector<double> x(n), v(n), xi(kdim), dx(n), rows;
    detail::FieldWorkspace fw;
    detail::StratWorkspace ws;
    Matrix noisework;
    const auto streams = detail::make_streams(cfg.seed, cfg.run_id, kdim);
    detail::flatten(x0, off, x);
    detail::Recorder rec(cfg, false, &off);
    rec.push(0.0, x.data(), nullptr);
    StateView view{0.0, &off, x.data(), nullptr};
    if (on_sample && on_sample(view)) {
        rec.traj.terminal_reason = TerminalReason::stop_predicate;
        return std::move(rec.traj);
    }
    const std::int64_t N = cfg.num_steps();
    std::vector<double> xprev(n);
    for (std::int64_t step = 0; step < N; ++step) {
        xprev = x;
        detail::payoff_field_flat(g, off, x.data(), v.data(), fw);
        for (int k = 0; k < kdim; ++k) xi[k] = streams[k].normal(static_cast<std::uint64_t>(step));
        for (int i = 0; i < g.num_players; ++i) {
            const int A = off[i + 1] - off[i];
            noise.player_rows(x, i, rows, noisework);
            detail::sftrl_strategy_increment(regs.of(i), A, kdim, x.data() + off[i],
                                             v.data() + off[i], rows.data(), xi.data(), cfg.step,
                                             dx.data() + off[i], ws);
        }
        for (int c = 0; c < n; ++c) x[c] += dx[c];
        if (!detail::all_finite(x)) {
            rec.push(step * cfg.step, xprev.data(), nullptr);
            rec.traj.terminal_reason = TerminalReason::numerical_failure;
            return std::move(rec.traj);
        }
        for (int i = 0; i < g.num_players; ++i)
            detail::clamp_renormalize(x.data() + off[i], off[i + 1] - off[i]);
        const bool last = step + 1 == N;
        if ((step + 1) % cfg.sample_stride == 0 || last) {
            const double t = (step + 1) * cfg.step;
            rec.push(t, x.data(), nullptr);
            view.t = t;
            if (on_sample && on_sample(view)) {
                rec.traj.terminal_reason = TerminalReason::stop_predicate;
                return std::move(rec.traj);
            }
        }
    }
    rec.traj.terminal_reason = TerminalReason::horizon;
    return std::move(rec.traj);
}

// The three stochastic replicator models (EW / aggregate shocks / pairwise
// imitation), as displayed coordinate-wise equations; diagonal noise only.
inline Trajectory simulate_srd(const Game& g, const NoiseModel& noise, const MixedProfile& x0,
                               const SimConfig& cfg, SrdVariant variant,
                               const SampleCallback& on_sample = nullptr) {
    cfg.validate();
    if (!noise.is_diagonal())
        throw std::invalid_argument("simulate_srd: requires an uncorrelated (diagonal) noise model");
    if (!x0.valid_for(g) || !x0.interior())
        throw std::invalid_argument("simulate_srd: x0 must be interior");
    const auto off = detail::player_offsets(g);
    if (noise.total_actions() != off.back())
        throw std::invalid_argument("simulate_srd: noise dimensions do not match game");
    const int n = off.back();
    std::vector<double> x(n), v(n), xi(n), dx(n);
    detail::FieldWorkspace fw;
    const auto streams = detail::make_streams(cfg.seed, cfg.run_id, noise.driver_dim());
    detail::flatten(x0, off, x);
    detail::Recorder rec(cfg, false, &off);
    rec.push(0.0, x.data(), nullptr);
    StateView view{0.0, &off, x.data(), nullptr};
    if (on_sample && on_sample(view)) {
        rec.traj.terminal_reason = TerminalReason::stop_predicate;
        return std::move(rec.traj);
    }
    const std::int64_t N = cfg.num_steps();
    std::vector<double> xprev(n);
    for (std::int64_t step = 0; step < N; ++step) {
        xprev = x;
        detail::payoff_field_flat(g, off, x.data(), v.data(), fw);
        for (int k = 0; k < n; ++k) xi[k] = streams[k].normal(static_cast<std::uint64_t>(step));
        for (int i = 0; i < g.num_players; ++i) {
            const int A = off[i + 1] - off[i];
            detail::srd_increment(variant, A, x.data() + off[i], v.data() + off[i],
                                  noise.diagonal_sigma(i).data(), xi.data() + off[i], cfg.step,
                                  dx.data() + off[i]);
        }
        for (int c = 0; c < n; ++c) x[c] += dx[c];
        if (!detail::all_finite(x)) {
            rec.push(step * cfg.step, xprev.data(), nullptr);
            rec.traj.terminal_reason = TerminalReason::numerical_failure;
            return std::move(rec.traj);
        }
        for (int i = 0; i < g.num_players; ++i)
            detail::clamp_renormalize(x.data() + off[i], off[i + 1] - off[i]);
        const bool last = step + 1 == N;
        if ((step + 1) % cfg.sample_stride == 0 || last) {
            const double t = (step + 1) * cfg.step;
            rec.push(t, x.data(), nullptr);
            view.t = t;
            if (on_sample && on_sample(view)) {
                rec.traj.terminal_reason = TerminalReason::stop_predicate;
                return std::move(rec.traj);
            }
        }
    }
    rec.traj.terminal_reason = TerminalReason::horizon;
    return std::move(rec.traj);
}

// Projection onto the payoff-differences space: z_{ia} = y_{ia} - y_{i,bench}
// for a != bench. Score-free trajectories use z_{ia} = theta'(x_{ia}) -
// theta'(x_{i,bench}), which requires interior samples.
struct ZTrajectory {
    std::vector<double> times;
    // z[sample][player][j], j running over actions != benchmark in order
    std::vector<std::vector<std::vector<double>>> z;
};

inline ZTrajectory project_payoff_differences(const Trajectory& traj,
                                              const std::vector<int>& benchmarks,
                                              const RegularizerSet* regs = nullptr) {
    ZTrajectory out;
    out.times = traj.times;
    const size_t P = traj.strategies.empty() ? 0 : traj.strategies[0].probs.size();
    if (benchmarks.size() != P)
        throw std::invalid_argument("project_payoff_differences: benchmark count mismatch");
    const bool have_scores = !traj.scores.empty();
    if (!have_scores && regs == nullptr)
        throw std::invalid_argument(
            "project_payoff_differences: strategy-only trajectory needs the regularizer set");
    out.z.resize(traj.strategies.size());
    for (size_t s = 0; s < traj.strategies.size(); ++s) {
        out.z[s].resize(P);
        for (size_t i = 0; i < P; ++i) {
            const int A = static_cast<int>(traj.strategies[s].probs[i].size());
            const int bench = benchmarks[i];
            if (bench < 0 || bench >= A)
                throw std::invalid_argument("project_payoff_differences: benchmark out of range");
            auto& zi = out.z[s][i];
            zi.reserve(A - 1);
            for (int a = 0; a < A; ++a) {
                if (a == bench) continue;
                if (have_scores) {
                    zi.push_back(traj.scores[s].y[i][a] - traj.scores[s].y[i][bench]);
                } else {
                    const double xa = traj.strategies[s].probs[i][a];
                    const double xb = traj.strategies[s].probs[i][bench];
                    if (!(xa > 0.0) || !(xb > 0.0))
                        throw std::domain_error(
                            "project_payoff_differences: boundary sample on the theta' route");
                    const auto& k = regs->of(static_cast<int>(i));
                    zi.push_back(k.dtheta(xa) - k.dtheta(xb));
                }
            }
        }
    }
    return out;
}

} // namespace sgdlab
