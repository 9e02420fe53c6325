#pragma once

// Convex kernels, regularizers, mirror maps, Bregman divergence and the
// Fenchel coupling. Everything the dynamics and the energy statistics rest on.
//
// A kernel is a smooth convex function theta on (0,1) with theta' -> -inf at
// 0 (steepness), inf theta'' > 0 (strong convexity) and theta''' < 0. Three
// variants are provided:
//   entropic     theta(z) = z log z
//   log_barrier  theta(z) = -log z              (unbounded)
//   tsallis(q)   theta(z) = (z^q - z)/(q(q-1)),  q in (0,1)
//
// Kernels are stateless value objects; all operations here are pure.

#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sgdlab/game.hpp"

namespace sgdlab {

enum class KernelType { entropic, log_barrier, tsallis };

class Kernel {
  public:
    static Kernel entropic() { return Kernel(KernelType::entropic, 0.0); }
    static Kernel log_barrier() { return Kernel(KernelType::log_barrier, 0.0); }
    static Kernel tsallis(double q = 0.5) {
        if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("tsallis: q must be in (0,1)");
        return Kernel(KernelType::tsallis, q);
    }

    // "entropic" | "log_barrier" | "tsallis:q=<v>"
    static Kernel parse(const std::string& spec) {
        if (spec == "entropic") return entropic();
        if (spec == "log_barrier") return log_barrier();
        if (spec.rfind("tsallis", 0) == 0) {
            double q = 0.5;
            const auto pos = spec.find("q=");
            if (pos != std::string::npos) q = std::stod(spec.substr(pos + 2));
            return tsallis(q);
        }
        throw std::invalid_argument("unknown kernel spec: " + spec);
    }

    KernelType type() const { return type_; }
    double tsallis_q() const { return q_; }

    std::string name() const {
        switch (type_) {
            case KernelType::entropic: return "entropic";
            case KernelType::log_barrier: return "log_barrier";
            case KernelType::tsallis: {
                std::ostringstream os;
                os << "tsallis:q=" << q_;
                return os.str();
            }
        }
        return "?";
    }

    double theta(double z) const {
        switch (type_) {
            case KernelType::entropic: return z == 0.0 ? 0.0 : z * std::log(z);
            case KernelType::log_barrier:
                return z == 0.0 ? std::numeric_limits<double>::infinity() : -std::log(z);
            case KernelType::tsallis:
                return z == 0.0 ? 0.0 : (std::pow(z, q_) - z) / (q_ * (q_ - 1.0));
        }
        return 0.0;
    }

    double dtheta(double z) const {
        switch (type_) {
            case KernelType::entropic: return 1.0 + std::log(z);
            case KernelType::log_barrier: return -1.0 / z;
            case KernelType::tsallis:
                return (q_ * std::pow(z, q_ - 1.0) - 1.0) / (q_ * (q_ - 1.0));
        }
        return 0.0;
    }

    double d2theta(double z) const {
        switch (type_) {
            case KernelType::entropic: return 1.0 / z;
            case KernelType::log_barrier: return 1.0 / (z * z);
            case KernelType::tsallis: return std::pow(z, q_ - 2.0);
        }
        return 0.0;
    }

    double d3theta(double z) const {
        switch (type_) {
            case KernelType::entropic: return -1.0 / (z * z);
            case KernelType::log_barrier: return -2.0 / (z * z * z);
            case KernelType::tsallis: return (q_ - 2.0) * std::pow(z, q_ - 3.0);
        }
        return 0.0;
    }

    // Inverse of theta' on its natural extension to (0, inf); arguments at or
    // above dtheta_sup() map to +inf (no finite preimage).
    double inv_dtheta(double w) const {
        switch (type_) {
            case KernelType::entropic: return std::exp(w - 1.0);
            case KernelType::log_barrier:
                return w < 0.0 ? -1.0 / w : std::numeric_limits<double>::infinity();
            case KernelType::tsallis: {
                const double t = (q_ - 1.0) * w + 1.0 / q_;
                if (!(t > 0.0)) return std::numeric_limits<double>::infinity();
                return std::pow(t, 1.0 / (q_ - 1.0));
            }
        }
        return 0.0;
    }

    // sup of theta' over (0, inf): the upper edge of inv_dtheta's domain.
    double dtheta_sup() const {
        switch (type_) {
            case KernelType::entropic: return std::numeric_limits<double>::infinity();
            case KernelType::log_barrier: return 0.0;
            case KernelType::tsallis: return 1.0 / (q_ * (1.0 - q_));
        }
        return 0.0;
    }

    bool bounded() const { return type_ != KernelType::log_barrier; }

    // inf theta'' over (0,1); equals 1 for all three variants (theta'' is
    // decreasing, so the infimum sits at z = 1).
    double strong_convexity() const { return d2theta(1.0); }

    // M of the growth assumption: sup_z |theta'''| / theta''^2 on (0,1).
    double third_over_second_sq_sup() const {
        switch (type_) {
            case KernelType::entropic: return 1.0;     // (1/z^2) / (1/z)^2
            case KernelType::log_barrier: return 2.0;  // (2/z^3) / (1/z^4) = 2z -> 2
            case KernelType::tsallis: return 2.0 - q_; // (2-q) z^{1-q} -> 2-q
        }
        return 0.0;
    }

    double theta_min_on_01() const {
        switch (type_) {
            case KernelType::entropic: return -1.0 / std::exp(1.0); // at z = 1/e
            case KernelType::log_barrier: return 0.0;               // at z = 1
            case KernelType::tsallis: {
                const double zstar = std::pow(1.0 / q_, 1.0 / (q_ - 1.0));
                return theta(zstar);
            }
        }
        return 0.0;
    }

  private:
    Kernel(KernelType t, double q) : type_(t), q_(q) {}
    KernelType type_;
    double q_;
};

// Raised when the mirror root-finder fails to converge; carries the bracket
// state rather than silently clamping.
struct MirrorSolveError : std::runtime_error {
    double lo, hi, residual;
    MirrorSolveError(double lo_, double hi_, double res)
        : std::runtime_error("mirror solve did not converge: bracket [" + std::to_string(lo_) +
                             ", " + std::to_string(hi_) + "], residual " + std::to_string(res)),
          lo(lo_), hi(hi_), residual(res) {}
};

// Closed-form logit map (entropic kernel), max-shifted for stability.
inline std::vector<double> logit_map(const std::vector<double>& y) {
    double m = y[0];
    for (double v : y) m = std::max(m, v);
    std::vector<double> x(y.size());
    double s = 0.0;
    for (size_t a = 0; a < y.size(); ++a) s += (x[a] = std::exp(y[a] - m));
    for (double& v : x) v /= s;
    return x;
}

// Mirror map by safeguarded scalar root finding on the KKT multiplier:
// solve sum_a inv_dtheta(y_a - mu) = 1, x_a = inv_dtheta(y_a - mu).
// Bisection on the always-valid bracket [max y - theta'(1), max y - theta'(1/A)]
// followed by Newton polishing; target 1e-13 on the simplex sum.
inline std::vector<double> mirror_root(const Kernel& k, const std::vector<double>& y) {
    const int A = static_cast<int>(y.size());
    if (A == 1) return {1.0};
    double ymax = y[0];
    for (double v : y) ymax = std::max(ymax, v);

    auto sum_at = [&](double mu) {
        double s = 0.0;
        for (double v : y) s += k.inv_dtheta(v - mu);
        return s;
    };

    double lo = ymax - k.dtheta(1.0);              // sum >= 1 here
    double hi = ymax - k.dtheta(1.0 / A);          // sum <= 1 here
    for (int i = 0; i < 64 && !(sum_at(hi) <= 1.0); ++i) hi += std::max(1.0, hi - lo);

    double mu = 0.5 * (lo + hi);
    for (int i = 0; i < 200; ++i) {
        mu = 0.5 * (lo + hi);
        const double s = sum_at(mu);
        if (s > 1.0)
            lo = mu;
        else
            hi = mu;
        if (hi - lo <= 1e-15 * std::max(1.0, std::fabs(mu))) break;
    }
    // Newton polish: d/dmu sum = -sum_a 1/theta''(x_a)
    for (int i = 0; i < 5; ++i) {
        const double s = sum_at(mu);
        if (std::fabs(s - 1.0) <= 1e-14) break;
        double slope = 0.0;
        for (double v : y) {
            const double x = k.inv_dtheta(v - mu);
            if (x > 0.0 && std::isfinite(x)) slope -= 1.0 / k.d2theta(x);
        }
        if (slope == 0.0) break;
        const double next = mu - (s - 1.0) / slope;
        if (next > lo && next < hi) mu = next;
    }
    const double res = sum_at(mu) - 1.0;
    if (!(std::fabs(res) <= 1e-10)) throw MirrorSolveError(lo, hi, res);
    std::vector<double> x(A);
    for (int a = 0; a < A; ++a) x[a] = k.inv_dtheta(y[a] - mu);
    return x;
}

// Regularized best response argmax_x { <y,x> - sum_a theta(x_a) }.
inline std::vector<double> mirror(const Kernel& k, const std::vector<double>& y) {
    if (k.type() == KernelType::entropic) return logit_map(y);
    return mirror_root(k, y);
}

// h(x) = sum_a theta(x_a); +inf off the kernel's domain (log-barrier at 0).
inline double regularizer_value(const Kernel& k, const std::vector<double>& x) {
    double h = 0.0;
    for (double z : x) h += k.theta(z);
    return h;
}

// Bregman distance D(p, x) = h(p) - h(x) - <grad h(x), p - x>. x must be
// interior; p may touch the boundary only for bounded kernels (otherwise the
// divergence is +inf by steepness).
inline double bregman(const Kernel& k, const std::vector<double>& p, const std::vector<double>& x) {
    if (p.size() != x.size()) throw std::invalid_argument("bregman: size mismatch");
    for (double z : x)
        if (!(z > 0.0)) throw std::domain_error("bregman: x must be strictly interior");
    double d = 0.0;
    for (size_t a = 0; a < x.size(); ++a) {
        if (p[a] == 0.0 && !k.bounded()) return std::numeric_limits<double>::infinity();
        d += k.theta(p[a]) - k.theta(x[a]) - k.dtheta(x[a]) * (p[a] - x[a]);
    }
    return d;
}

// Convex conjugate h*(y) = <y, Q(y)> - h(Q(y)).
inline double conjugate_value(const Kernel& k, const std::vector<double>& y) {
    const auto x = mirror(k, y);
    double s = 0.0;
    for (size_t a = 0; a < y.size(); ++a) s += y[a] * x[a] - k.theta(x[a]);
    return s;
}

// Fenchel coupling F(p, y) = h(p) + h*(y) - <y, p>; equals D(p, Q(y)).
inline double fenchel(const Kernel& k, const std::vector<double>& p, const std::vector<double>& y) {
    if (p.size() != y.size()) throw std::invalid_argument("fenchel: size mismatch");
    double f = conjugate_value(k, y);
    for (size_t a = 0; a < p.size(); ++a) {
        if (p[a] == 0.0 && !k.bounded()) return std::numeric_limits<double>::infinity();
        f += k.theta(p[a]) - y[a] * p[a];
    }
    return f;
}

// ||Q(y') - Q(y)|| / ||y' - y||; probes the 1/K Lipschitz bound.
inline double mirror_lipschitz_ratio(const Kernel& k, const std::vector<double>& y,
                                     const std::vector<double>& y2) {
    const auto x = mirror(k, y), x2 = mirror(k, y2);
    double dx = 0.0, dy = 0.0;
    for (size_t a = 0; a < y.size(); ++a) {
        dx += (x2[a] - x[a]) * (x2[a] - x[a]);
        dy += (y2[a] - y[a]) * (y2[a] - y[a]);
    }
    if (dy == 0.0) throw std::invalid_argument("mirror_lipschitz_ratio: y == y'");
    return std::sqrt(dx) / std::sqrt(dy);
}

namespace detail {

// g_a = 1/theta''(x_a), with the steepness limit g(0) = 0.
inline double mirror_gain(const Kernel& k, double z) { return z == 0.0 ? 0.0 : 1.0 / k.d2theta(z); }

} // namespace detail

// Jacobian of the mirror map in full coordinates at x = Q(y):
// J_ab = g_a (delta_ab - g_b / G). Symmetric PSD with zero row sums.
inline Matrix jacobian_mirror_at(const Kernel& k, const std::vector<double>& x) {
    const int A = static_cast<int>(x.size());
    std::vector<double> g(A);
    double G = 0.0;
    for (int a = 0; a < A; ++a) G += (g[a] = detail::mirror_gain(k, x[a]));
    Matrix J(A, A);
    for (int a = 0; a < A; ++a)
        for (int b = 0; b < A; ++b) J(a, b) = g[a] * ((a == b ? 1.0 : 0.0) - g[b] / G);
    return J;
}

inline Matrix jacobian_mirror(const Kernel& k, const std::vector<double>& y) {
    return jacobian_mirror_at(k, mirror(k, y));
}

// tr Jac Q = sum_a g_a (1 - g_a / G) at x = Q(y); strictly positive in the
// interior. Entropic case reduces to sum_a x_a (1 - x_a).
inline double trace_jacobian_mirror_at(const Kernel& k, const std::vector<double>& x) {
    double G = 0.0;
    std::vector<double> g(x.size());
    for (size_t a = 0; a < x.size(); ++a) G += (g[a] = detail::mirror_gain(k, x[a]));
    double tr = 0.0;
    for (double ga : g) tr += ga * (1.0 - ga / G);
    return tr;
}

inline double trace_jacobian_mirror(const Kernel& k, const std::vector<double>& y) {
    return trace_jacobian_mirror_at(k, mirror(k, y));
}

// One kernel per player.
struct RegularizerSet {
    std::vector<Kernel> kernels;

    static RegularizerSet uniform(const Game& g, const Kernel& k) {
        RegularizerSet r;
        r.kernels.assign(g.num_players, k);
        return r;
    }

    const Kernel& of(int player) const { return kernels[player]; }
    int num_players() const { return static_cast<int>(kernels.size()); }

    bool all_bounded() const {
        for (const auto& k : kernels)
            if (!k.bounded()) return false;
        return true;
    }

    MixedProfile mirror_profile(const ScoreProfile& y) const {
        MixedProfile x;
        x.probs.resize(y.y.size());
        for (size_t i = 0; i < y.y.size(); ++i) x.probs[i] = mirror(kernels[i], y.y[i]);
        return x;
    }

    // y = grad h(x), the inverse of the mirror map on the interior.
    ScoreProfile scores_of(const MixedProfile& x) const {
        ScoreProfile y;
        y.y.resize(x.probs.size());
        for (size_t i = 0; i < x.probs.size(); ++i) {
            y.y[i].resize(x.probs[i].size());
            for (size_t a = 0; a < x.probs[i].size(); ++a) {
                if (!(x.probs[i][a] > 0.0))
                    throw std::domain_error("scores_of: profile must be strictly interior");
                y.y[i][a] = kernels[i].dtheta(x.probs[i][a]);
            }
        }
        return y;
    }
};

// Rate function of club-face convergence: Phi(z) = max_i (theta_i')^{-1}(z),
// clamped to (0, 1].
inline double rate_function(const RegularizerSet& regs, double z) {
    double phi = 0.0;
    for (const auto& k : regs.kernels) {
        const double v = z >= k.dtheta(1.0) ? 1.0 : k.inv_dtheta(z);
        phi = std::max(phi, std::min(v, 1.0));
    }
    return phi;
}

} // namespace sgdlab
