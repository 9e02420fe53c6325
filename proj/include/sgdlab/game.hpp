#pragma once

// Finite normal-form games and the exact, deterministic analysis on them:
// payoffs, the payoff field, Nash classification, better replies, faces
// closed under better replies ("club" faces), and harmonic-game algebra.
//
// All types are immutable value objects after construction and all operations
// are pure, so everything here is safe to share across threads.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sgdlab/linalg.hpp"

namespace sgdlab {

using PureProfile = std::vector<int>;

struct Game {
    int num_players = 0;
    std::vector<int> action_counts;
    // payoffs[i][flat(a)] = u_i(a); flat profile index is row-major with the
    // last player's action index varying fastest.
    std::vector<std::vector<double>> payoffs;

    int num_profiles() const {
        int n = 1;
        for (int c : action_counts) n *= c;
        return n;
    }

    int flat_index(const PureProfile& a) const {
        int idx = 0;
        for (int i = 0; i < num_players; ++i) idx = idx * action_counts[i] + a[i];
        return idx;
    }

    PureProfile unflatten(int idx) const {
        PureProfile a(num_players);
        for (int i = num_players - 1; i >= 0; --i) {
            a[i] = idx % action_counts[i];
            idx /= action_counts[i];
        }
        return a;
    }

    double payoff(int player, const PureProfile& a) const { return payoffs[player][flat_index(a)]; }

    int total_actions() const {
        int n = 0;
        for (int c : action_counts) n += c;
        return n;
    }

    void validate() const {
        if (num_players < 2) throw std::invalid_argument("Game: num_players must be >= 2");
        if (static_cast<int>(action_counts.size()) != num_players)
            throw std::invalid_argument("Game: action_counts size != num_players");
        for (int c : action_counts)
            if (c < 2) throw std::invalid_argument("Game: every player needs >= 2 actions");
        if (static_cast<int>(payoffs.size()) != num_players)
            throw std::invalid_argument("Game: payoffs size != num_players");
        const int np = num_profiles();
        for (const auto& u : payoffs) {
            if (static_cast<int>(u.size()) != np)
                throw std::invalid_argument("Game: payoff tensor not fully populated");
            for (double v : u)
                if (!std::isfinite(v)) throw std::invalid_argument("Game: non-finite payoff");
        }
    }
};

struct MixedProfile {
    std::vector<std::vector<double>> probs; // probs[i][a]

    static MixedProfile uniform(const Game& g) {
        MixedProfile x;
        x.probs.resize(g.num_players);
        for (int i = 0; i < g.num_players; ++i)
            x.probs[i].assign(g.action_counts[i], 1.0 / g.action_counts[i]);
        return x;
    }

    static MixedProfile vertex(const Game& g, const PureProfile& a) {
        MixedProfile x;
        x.probs.resize(g.num_players);
        for (int i = 0; i < g.num_players; ++i) {
            x.probs[i].assign(g.action_counts[i], 0.0);
            x.probs[i][a[i]] = 1.0;
        }
        return x;
    }

    bool valid_for(const Game& g, double tol = 1e-12) const {
        if (static_cast<int>(probs.size()) != g.num_players) return false;
        for (int i = 0; i < g.num_players; ++i) {
            if (static_cast<int>(probs[i].size()) != g.action_counts[i]) return false;
            double s = 0.0;
            for (double p : probs[i]) {
                if (!(p >= 0.0)) return false;
                s += p;
            }
            if (std::fabs(s - 1.0) > tol) return false;
        }
        return true;
    }

    bool interior(double floor = 0.0) const {
        for (const auto& xi : probs)
            for (double p : xi)
                if (p <= floor) return false;
        return true;
    }
};

struct ScoreProfile {
    std::vector<std::vector<double>> y; // y[i][a]
};

// A product face, given by per-player nonempty action subsets.
struct Face {
    std::vector<std::vector<int>> actions; // sorted, unique

    static Face full(const Game& g) {
        Face f;
        f.actions.resize(g.num_players);
        for (int i = 0; i < g.num_players; ++i)
            for (int a = 0; a < g.action_counts[i]; ++a) f.actions[i].push_back(a);
        return f;
    }

    static Face singleton(const PureProfile& a) {
        Face f;
        for (int ai : a) f.actions.push_back({ai});
        return f;
    }

    void validate(const Game& g) const {
        if (static_cast<int>(actions.size()) != g.num_players)
            throw std::invalid_argument("Face: player count mismatch");
        for (int i = 0; i < g.num_players; ++i) {
            if (actions[i].empty()) throw std::invalid_argument("Face: empty action subset");
            for (int a : actions[i])
                if (a < 0 || a >= g.action_counts[i])
                    throw std::invalid_argument("Face: action index out of range");
        }
    }

    bool is_proper(const Game& g) const {
        for (int i = 0; i < g.num_players; ++i)
            if (static_cast<int>(actions[i].size()) < g.action_counts[i]) return true;
        return false;
    }

    bool contains_action(int player, int a) const {
        const auto& s = actions[player];
        return std::find(s.begin(), s.end(), a) != s.end();
    }

    bool contains(const PureProfile& a) const {
        for (size_t i = 0; i < a.size(); ++i)
            if (!contains_action(static_cast<int>(i), a[i])) return false;
        return true;
    }

    int support_size() const {
        int n = 0;
        for (const auto& s : actions) n += static_cast<int>(s.size());
        return n;
    }
};

// Positive per-action weights m_ia with their per-player mass m_i = sum_a m_ia
// and the induced strategic center p_ia = m_ia / m_i.
struct HarmonicStructure {
    std::vector<std::vector<double>> weights;
    std::vector<double> mass;
    MixedProfile center;
};

enum class NashClass { not_nash, nash_mixed, nash_pure, nash_strict };

inline const char* to_string(NashClass c) {
    switch (c) {
        case NashClass::not_nash: return "not_nash";
        case NashClass::nash_mixed: return "nash_mixed";
        case NashClass::nash_pure: return "nash_pure";
        case NashClass::nash_strict: return "nash_strict";
    }
    return "?";
}

namespace detail {

// Visits every pure profile once via an odometer; f(flat_index, profile).
template <typename F>
void for_each_profile(const Game& g, F&& f) {
    PureProfile a(g.num_players, 0);
    const int np = g.num_profiles();
    for (int idx = 0; idx < np; ++idx) {
        f(idx, a);
        for (int i = g.num_players - 1; i >= 0; --i) {
            if (++a[i] < g.action_counts[i]) break;
            a[i] = 0;
        }
    }
}

} // namespace detail

// u_i(x) = sum_a u_i(a) prod_j x_{j a_j}, the exact multilinear expansion.
inline double mixed_payoff(const Game& g, int player, const MixedProfile& x) {
    if (player < 0 || player >= g.num_players)
        throw std::invalid_argument("mixed_payoff: player index out of range");
    if (!x.valid_for(g)) throw std::invalid_argument("mixed_payoff: invalid mixed profile");
    double total = 0.0;
    detail::for_each_profile(g, [&](int idx, const PureProfile& a) {
        double p = 1.0;
        for (int j = 0; j < g.num_players; ++j) p *= x.probs[j][a[j]];
        if (p != 0.0) total += g.payoffs[player][idx] * p;
    });
    return total;
}

namespace detail {

// Flat-buffer payoff field used in integrator hot loops: x and v are stacked
// player coordinates (offsets[i] is the start of player i's block).
struct FieldWorkspace {
    std::vector<double> prefix, suffix;
};

inline void payoff_field_flat(const Game& g, const std::vector<int>& offsets, const double* x,
                              double* v, FieldWorkspace& ws) {
    const int n = g.num_players;
    ws.prefix.assign(n + 1, 1.0);
    ws.suffix.assign(n + 1, 1.0);
    std::fill(v, v + offsets[n], 0.0);
    for_each_profile(g, [&](int idx, const PureProfile& a) {
        // leave-one-out products per player
        for (int i = 0; i < n; ++i) ws.prefix[i + 1] = ws.prefix[i] * x[offsets[i] + a[i]];
        ws.suffix[n] = 1.0;
        for (int i = n - 1; i >= 0; --i) ws.suffix[i] = ws.suffix[i + 1] * x[offsets[i] + a[i]];
        for (int i = 0; i < n; ++i) {
            const double loo = ws.prefix[i] * ws.suffix[i + 1];
            if (loo != 0.0) v[offsets[i] + a[i]] += g.payoffs[i][idx] * loo;
        }
    });
}

inline std::vector<int> player_offsets(const Game& g) {
    std::vector<int> off(g.num_players + 1, 0);
    for (int i = 0; i < g.num_players; ++i) off[i + 1] = off[i] + g.action_counts[i];
    return off;
}

} // namespace detail

// v_{i a}(x) = u_i(a; x_{-i}) for every player and action.
inline std::vector<std::vector<double>> payoff_field(const Game& g, const MixedProfile& x) {
    if (!x.valid_for(g)) throw std::invalid_argument("payoff_field: invalid mixed profile");
    const auto off = detail::player_offsets(g);
    std::vector<double> xf(off.back()), vf(off.back());
    for (int i = 0; i < g.num_players; ++i)
        std::copy(x.probs[i].begin(), x.probs[i].end(), xf.begin() + off[i]);
    detail::FieldWorkspace ws;
    detail::payoff_field_flat(g, off, xf.data(), vf.data(), ws);
    std::vector<std::vector<double>> v(g.num_players);
    for (int i = 0; i < g.num_players; ++i)
        v[i].assign(vf.begin() + off[i], vf.begin() + off[i + 1]);
    return v;
}

// Nash taxonomy at tolerance tol: supported actions must be tol-optimal;
// "strict" additionally requires a pure profile with margin > tol over every
// deviation. Support membership uses the same tol as the probability cutoff.
inline NashClass classify_profile(const Game& g, const MixedProfile& x, double tol = 1e-9) {
    if (tol <= 0.0) throw std::invalid_argument("classify_profile: tol must be positive");
    if (!x.valid_for(g)) throw std::invalid_argument("classify_profile: invalid mixed profile");
    const auto v = payoff_field(g, x);
    bool nash = true, pure = true, strict = true;
    for (int i = 0; i < g.num_players && nash; ++i) {
        double best = *std::max_element(v[i].begin(), v[i].end());
        int support = 0;
        int top = -1;
        for (int a = 0; a < g.action_counts[i]; ++a) {
            if (x.probs[i][a] > tol) {
                ++support;
                top = a;
                if (v[i][a] < best - tol) nash = false;
            }
        }
        if (support != 1) {
            pure = false;
        } else {
            for (int a = 0; a < g.action_counts[i]; ++a)
                if (a != top && v[i][top] <= v[i][a] + tol) strict = false;
        }
    }
    if (!nash) return NashClass::not_nash;
    if (pure && strict) return NashClass::nash_strict;
    if (pure) return NashClass::nash_pure;
    return NashClass::nash_mixed;
}

// Payoff difference of the unique player deviating between the unilateral
// pair a ~ b: paydev(a, b) = u_i(a) - u_i(b_i; a_{-i}); positive means the
// deviation away from a loses.
inline double pure_deviation_gain(const Game& g, const PureProfile& a, const PureProfile& b) {
    int who = -1;
    for (int i = 0; i < g.num_players; ++i)
        if (a[i] != b[i]) {
            if (who >= 0) throw std::invalid_argument("pure_deviation_gain: not a unilateral pair");
            who = i;
        }
    if (who < 0) throw std::invalid_argument("pure_deviation_gain: profiles coincide");
    return g.payoff(who, a) - g.payoff(who, b);
}

// Product of per-player weak better replies to the pure profile a.
inline std::vector<PureProfile> better_replies(const Game& g, const PureProfile& a,
                                               double tol = 0.0) {
    std::vector<std::vector<int>> per_player(g.num_players);
    for (int i = 0; i < g.num_players; ++i) {
        const double base = g.payoff(i, a);
        PureProfile dev = a;
        for (int b = 0; b < g.action_counts[i]; ++b) {
            dev[i] = b;
            if (g.payoff(i, dev) >= base - tol) per_player[i].push_back(b);
        }
    }
    std::vector<PureProfile> out;
    PureProfile cursor(g.num_players, 0);
    bool done = false;
    while (!done) {
        PureProfile b(g.num_players);
        for (int i = 0; i < g.num_players; ++i) b[i] = per_player[i][cursor[i]];
        out.push_back(std::move(b));
        done = true;
        for (int i = g.num_players - 1; i >= 0; --i) {
            if (++cursor[i] < static_cast<int>(per_player[i].size())) {
                done = false;
                break;
            }
            cursor[i] = 0;
        }
    }
    return out;
}

namespace detail {

template <typename F>
void for_each_profile_in_face(const Game& g, const Face& face, F&& f) {
    std::vector<int> cursor(g.num_players, 0);
    bool done = false;
    while (!done) {
        PureProfile a(g.num_players);
        for (int i = 0; i < g.num_players; ++i) a[i] = face.actions[i][cursor[i]];
        f(a);
        done = true;
        for (int i = g.num_players - 1; i >= 0; --i) {
            if (++cursor[i] < static_cast<int>(face.actions[i].size())) {
                done = false;
                break;
            }
            cursor[i] = 0;
        }
    }
}

} // namespace detail

// Face closed under better replies, by the pure characterization: every
// unilateral deviation leaving the face must strictly lose (margin > tol).
inline bool is_club_face(const Game& g, const Face& face, double tol = 1e-9) {
    face.validate(g);
    bool club = true;
    detail::for_each_profile_in_face(g, face, [&](const PureProfile& a) {
        if (!club) return;
        PureProfile dev = a;
        for (int i = 0; i < g.num_players && club; ++i) {
            for (int b = 0; b < g.action_counts[i]; ++b) {
                if (face.contains_action(i, b)) continue;
                dev[i] = b;
                if (g.payoff(i, a) - g.payoff(i, dev) <= tol) {
                    club = false;
                    break;
                }
            }
            dev[i] = a[i];
        }
    });
    return club;
}

// All product faces closed under better replies, sorted by total support size
// (full face always qualifies: it has no outward deviations).
inline std::vector<Face> enumerate_club_faces(const Game& g, double tol = 1e-9,
                                              std::int64_t cap = 1000000) {
    std::int64_t count = 1;
    for (int c : g.action_counts) {
        count *= (std::int64_t(1) << c) - 1;
        if (count > cap)
            throw std::invalid_argument("enumerate_club_faces: " + std::to_string(count) +
                                        " candidate faces exceed cap " + std::to_string(cap) +
                                        "; raise the cap to proceed");
    }
    std::vector<Face> found;
    std::vector<std::uint32_t> mask(g.num_players, 1);
    bool done = false;
    while (!done) {
        Face f;
        f.actions.resize(g.num_players);
        for (int i = 0; i < g.num_players; ++i)
            for (int a = 0; a < g.action_counts[i]; ++a)
                if (mask[i] & (1u << a)) f.actions[i].push_back(a);
        if (is_club_face(g, f, tol)) found.push_back(std::move(f));
        done = true;
        for (int i = g.num_players - 1; i >= 0; --i) {
            const std::uint32_t limit = (1u << g.action_counts[i]) - 1;
            if (++mask[i] <= limit) {
                done = false;
                break;
            }
            mask[i] = 1;
        }
    }
    std::stable_sort(found.begin(), found.end(), [](const Face& a, const Face& b) {
        if (a.support_size() != b.support_size()) return a.support_size() < b.support_size();
        return a.actions < b.actions;
    });
    return found;
}

// residual[a] = sum_i sum_{b_i} m_{i b_i} [u_i(a) - u_i(b_i; a_{-i})];
// the game is harmonic for these weights iff all residuals vanish.
inline std::vector<double> harmonic_residuals(const Game& g,
                                              const std::vector<std::vector<double>>& weights) {
    if (static_cast<int>(weights.size()) != g.num_players)
        throw std::invalid_argument("harmonic_residuals: weights size mismatch");
    for (int i = 0; i < g.num_players; ++i) {
        if (static_cast<int>(weights[i].size()) != g.action_counts[i])
            throw std::invalid_argument("harmonic_residuals: weights size mismatch");
        for (double w : weights[i])
            if (!(w > 0.0)) throw std::invalid_argument("harmonic_residuals: weights must be positive");
    }
    std::vector<double> residual(g.num_profiles(), 0.0);
    detail::for_each_profile(g, [&](int idx, const PureProfile& a) {
        double r = 0.0;
        PureProfile dev = a;
        for (int i = 0; i < g.num_players; ++i) {
            const double ua = g.payoffs[i][idx];
            for (int b = 0; b < g.action_counts[i]; ++b) {
                dev[i] = b;
                r += weights[i][b] * (ua - g.payoff(i, dev));
            }
            dev[i] = a[i];
        }
        residual[idx] = r;
    });
    return residual;
}

inline bool is_harmonic(const Game& g, const std::vector<std::vector<double>>& weights,
                        double tol = 1e-9) {
    for (double r : harmonic_residuals(g, weights))
        if (std::fabs(r) > tol) return false;
    return true;
}

inline HarmonicStructure harmonic_structure(const std::vector<std::vector<double>>& weights) {
    HarmonicStructure s;
    s.weights = weights;
    s.mass.resize(weights.size());
    s.center.probs.resize(weights.size());
    for (size_t i = 0; i < weights.size(); ++i) {
        double m = 0.0;
        for (double w : weights[i]) {
            if (!(w > 0.0)) throw std::invalid_argument("harmonic_structure: weights must be positive");
            m += w;
        }
        s.mass[i] = m;
        s.center.probs[i].resize(weights[i].size());
        for (size_t a = 0; a < weights[i].size(); ++a) s.center.probs[i][a] = weights[i][a] / m;
    }
    return s;
}

// 2x2x2 uniform harmonic game from the five free payoff deviations of its
// response graph (a,b,c,d,delta label the bottom/top square edges; the seven
// remaining deviations are fixed by the unit-weight harmonicity condition).
// Payoff levels are anchored at zero whenever a player picks their first
// action, which in particular makes u_i = 0 at the all-first-action profile.
inline Game make_harmonic_2x2x2(double a, double b, double c, double d, double delta) {
    Game g;
    g.num_players = 3;
    g.action_counts = {2, 2, 2};
    g.payoffs.assign(3, std::vector<double>(8, 0.0));
    auto at = [&](int i, int j, int k) { return (i * 2 + j) * 2 + k; };
    // player 0 (vertical axis of the response graph): payoff when playing 1
    g.payoffs[0][at(1, 0, 0)] = c - d;
    g.payoffs[0][at(1, 1, 0)] = d - a;
    g.payoffs[0][at(1, 1, 1)] = a - b;
    g.payoffs[0][at(1, 0, 1)] = b - c;
    // player 1 (left/right axis)
    g.payoffs[1][at(0, 1, 0)] = d;
    g.payoffs[1][at(0, 1, 1)] = -b;
    g.payoffs[1][at(1, 1, 0)] = delta;
    g.payoffs[1][at(1, 1, 1)] = b - d - delta;
    // player 2 (anterior/posterior axis)
    g.payoffs[2][at(0, 1, 1)] = a;
    g.payoffs[2][at(0, 0, 1)] = -c;
    g.payoffs[2][at(1, 1, 1)] = -a + d + delta;
    g.payoffs[2][at(1, 0, 1)] = c - d - delta;
    return g;
}

struct ZeroSumGame {
    Game game;
    std::optional<HarmonicStructure> structure; // present iff an interior equilibrium exists
    std::optional<MixedProfile> equilibrium;
};

namespace detail {

// Full-support equilibrium of a two-player zero-sum game u1 = M, solved from
// the indifference systems; accepted only if strictly positive.
inline std::optional<MixedProfile> interior_zero_sum_equilibrium(const Matrix& M) {
    const int nr = M.rows, nc = M.cols;
    std::vector<double> p, q;
    if (nr == 2 && nc == 2) {
        const double den = M(0, 0) - M(0, 1) - M(1, 0) + M(1, 1);
        if (std::fabs(den) < 1e-13) return std::nullopt;
        const double qq = (M(1, 1) - M(0, 1)) / den; // column mix making rows indifferent
        const double pp = (M(1, 1) - M(1, 0)) / den; // row mix making columns indifferent
        p = {pp, 1.0 - pp};
        q = {qq, 1.0 - qq};
    } else {
        if (nr != nc) return std::nullopt; // full-support interior equilibria need square support
        // (M q)_r constant v, sum q = 1  ->  unknowns (q, v)
        Matrix A(nr + 1, nc + 1);
        std::vector<double> rhs(nr + 1, 0.0);
        for (int r = 0; r < nr; ++r) {
            for (int c = 0; c < nc; ++c) A(r, c) = M(r, c);
            A(r, nc) = -1.0;
        }
        for (int c = 0; c < nc; ++c) A(nr, c) = 1.0;
        rhs[nr] = 1.0;
        std::vector<double> sol;
        if (!solve_linear(A, rhs, sol)) return std::nullopt;
        q.assign(sol.begin(), sol.begin() + nc);
        // (p^T M)_c constant w, sum p = 1
        Matrix B(nc + 1, nr + 1);
        std::vector<double> rhs2(nc + 1, 0.0);
        for (int c = 0; c < nc; ++c) {
            for (int r = 0; r < nr; ++r) B(c, r) = M(r, c);
            B(c, nr) = -1.0;
        }
        for (int r = 0; r < nr; ++r) B(nc, r) = 1.0;
        rhs2[nc] = 1.0;
        if (!solve_linear(B, rhs2, sol)) return std::nullopt;
        p.assign(sol.begin(), sol.begin() + nr);
    }
    for (double v : p)
        if (!(v > 1e-12)) return std::nullopt;
    for (double v : q)
        if (!(v > 1e-12)) return std::nullopt;
    MixedProfile x;
    x.probs = {p, q};
    return x;
}

} // namespace detail

// Two-player zero-sum game u1 = matrix, u2 = -matrix. If a fully mixed
// equilibrium x* exists, the game is harmonic with weights m_ia = x*_ia
// (unit masses, center x*).
inline ZeroSumGame make_zero_sum(const Matrix& matrix) {
    for (double v : matrix.a)
        if (!std::isfinite(v)) throw std::invalid_argument("make_zero_sum: non-finite entry");
    ZeroSumGame out;
    out.game.num_players = 2;
    out.game.action_counts = {matrix.rows, matrix.cols};
    out.game.payoffs.assign(2, std::vector<double>(matrix.rows * matrix.cols));
    for (int r = 0; r < matrix.rows; ++r)
        for (int c = 0; c < matrix.cols; ++c) {
            out.game.payoffs[0][r * matrix.cols + c] = matrix(r, c);
            out.game.payoffs[1][r * matrix.cols + c] = -matrix(r, c);
        }
    if (auto eq = detail::interior_zero_sum_equilibrium(matrix)) {
        out.structure = harmonic_structure(eq->probs);
        out.equilibrium = std::move(eq);
    }
    return out;
}

} // namespace sgdlab
