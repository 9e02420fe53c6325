#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "sgdlab/analysis.hpp"
#include "sgdlab/builtins.hpp"
#include "sgdlab/dynamics.hpp"

using namespace sgdlab;

namespace {

MixedProfile mp_x0() {
    MixedProfile x;
    x.probs = {{0.7, 0.3}, {0.4, 0.6}};
    return x;
}

double sup_gap(const Trajectory& a, const Trajectory& b) {
    REQUIRE(a.times.size() == b.times.size());
    double g = 0.0;
    for (size_t s = 0; s < a.times.size(); ++s)
        for (size_t i = 0; i < a.strategies[s].probs.size(); ++i)
            for (size_t c = 0; c < a.strategies[s].probs[i].size(); ++c)
                g = std::max(g, std::fabs(a.strategies[s].probs[i][c] -
                                          b.strategies[s].probs[i][c]));
    return g;
}

Game zero_game(int players = 2, int actions = 2) {
    Game g;
    g.num_players = players;
    g.action_counts.assign(players, actions);
    g.payoffs.assign(players, std::vector<double>(g.num_profiles(), 0.0));
    return g;
}

} // namespace

TEST_CASE("sim config validation") {
    SimConfig c;
    c.step = 0.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c.step = 2.0;
    c.horizon = 1.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c.step = 0.5;
    c.sample_stride = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("noise model bounds") {
    const Game g = builtins::matching_pennies();
    const auto u = NoiseModel::uncorrelated(g, {{0.2, 0.1}, {0.3, 0.2}});
    CHECK(u.sigma_min_sq() == Catch::Approx(0.01));
    CHECK(u.sigma_max_sq() == Catch::Approx(0.09));
    CHECK(u.sigma_min_sq(0) == Catch::Approx(0.01));
    CHECK(u.sigma_max_sq(0) == Catch::Approx(0.04));
    CHECK(u.is_diagonal());
    CHECK_FALSE(u.is_zero());
    CHECK(NoiseModel::none(g).is_zero());

    // full constant: rank-one coupling 2x2 block per player
    Matrix s(4, 2);
    s(0, 0) = 1.0;
    s(1, 0) = 1.0; // player 1 both actions driven by W1
    s(2, 1) = 2.0;
    s(3, 1) = 0.0;
    const auto f = NoiseModel::full_constant(g, s);
    CHECK_FALSE(f.is_diagonal());
    // Theta = diag blocks [[1,1],[1,1]] and [[4,0],[0,0]]: eigenvalues {0,2,0,4}
    CHECK(f.sigma_min_sq() == Catch::Approx(0.0).margin(1e-12));
    CHECK(f.sigma_max_sq() == Catch::Approx(4.0));
    CHECK(f.sigma_max_sq(0) == Catch::Approx(2.0));
    CHECK(f.sigma_min_sq(1) == Catch::Approx(0.0).margin(1e-12));

    // state-dependent callback: sigma = x_{11} * I
    const auto cb = NoiseModel::state_dependent(
        g, 4,
        [](const std::vector<double>& x, Matrix& out) {
            out = Matrix(4, 4);
            for (int i = 0; i < 4; ++i) out(i, i) = x[0];
        },
        512);
    CHECK(cb.sigma_max_sq() <= 1.0);
    CHECK(cb.sigma_min_sq() >= 0.0);
    CHECK(cb.sigma_max_sq() > 0.5); // probe grid reaches large x_{11}
}

TEST_CASE("zero field keeps the state fixed") {
    const Game g = zero_game();
    const auto regs = RegularizerSet::uniform(g, Kernel::entropic());
    SimConfig cfg;
    cfg.step = 1e-2;
    cfg.horizon = 5.0;
    cfg.scheme = Scheme::rk4;
    const auto traj = simulate_deterministic_ftrl(g, regs, mp_x0(), cfg);
    CHECK(traj.terminal_reason == TerminalReason::horizon);
    for (const auto& xs : traj.strategies) {
        CHECK(xs.probs[0][0] == Catch::Approx(0.7).margin(1e-12));
        CHECK(xs.probs[1][1] == Catch::Approx(0.6).margin(1e-12));
    }
}

TEST_CASE("deterministic replicator extinguishes dominated strategies") {
    const Game pd = builtins::prisoners_dilemma();
    const auto regs = RegularizerSet::uniform(pd, Kernel::entropic());
    SimConfig cfg;
    cfg.step = 1e-3;
    cfg.horizon = 50.0;
    cfg.sample_stride = 100;
    cfg.scheme = Scheme::rk4;
    const auto traj = simulate_deterministic_ftrl(pd, regs, MixedProfile::uniform(pd), cfg);
    const auto& xT = traj.final_strategy();
    CHECK(std::fabs(xT.probs[0][1] - 1.0) < 1e-3);
    CHECK(std::fabs(xT.probs[1][1] - 1.0) < 1e-3);
}

TEST_CASE("noiseless stochastic integrators reduce to the Euler flow") {
    const Game mp = builtins::matching_pennies();
    const auto regs = RegularizerSet::uniform(mp, Kernel::entropic());
    const auto zero = NoiseModel::none(mp);
    SimConfig cfg;
    cfg.step = 1e-3;
    cfg.horizon = 5.0;
    cfg.sample_stride = 10;
    auto euler_cfg = cfg;
    euler_cfg.scheme = Scheme::euler_maruyama; // plain Euler on the deterministic path
    const auto ref = simulate_deterministic_ftrl(mp, regs, mp_x0(), euler_cfg);
    const auto scores = simulate_sftrl_scores(mp, regs, zero, mp_x0(), cfg);
    CHECK(sup_gap(ref, scores) < 1e-8);

    // strategy-space run differs from the Euler flow at O(step); halving the
    // step roughly halves the gap
    const auto strat1 = simulate_sftrl_strategies(mp, regs, zero, mp_x0(), cfg);
    const double g1 = sup_gap(ref, strat1);
    auto cfg2 = cfg;
    cfg2.step = 5e-4;
    cfg2.sample_stride = 20;
    auto euler2 = cfg2;
    euler2.scheme = Scheme::euler_maruyama;
    const auto ref2 = simulate_deterministic_ftrl(mp, regs, mp_x0(), euler2);
    const auto strat2 = simulate_sftrl_strategies(mp, regs, zero, mp_x0(), cfg2);
    const double g2 = sup_gap(ref2, strat2);
    CHECK(g1 < 2e-3);
    CHECK(g2 < g1);
    CHECK(g1 / g2 == Catch::Approx(2.0).epsilon(0.5));
}

TEST_CASE("seed determinism and run separation") {
    const Game mp = builtins::matching_pennies();
    const auto regs = RegularizerSet::uniform(mp, Kernel::entropic());
    const auto noise = NoiseModel::uncorrelated_uniform(mp, 0.2);
    SimConfig cfg;
    cfg.step = 1e-3;
    cfg.horizon = 1.0;
    cfg.seed = 987;
    const auto a = simulate_sftrl_scores(mp, regs, noise, mp_x0(), cfg);
    const auto b = simulate_sftrl_scores(mp, regs, noise, mp_x0(), cfg);
    REQUIRE(a.times.size() == b.times.size());
    for (size_t s = 0; s < a.times.size(); ++s)
        for (int i = 0; i < 2; ++i)
            for (int c = 0; c < 2; ++c) {
                CHECK(a.strategies[s].probs[i][c] == b.strategies[s].probs[i][c]); // byte-equal
                CHECK(a.scores[s].y[i][c] == b.scores[s].y[i][c]);
            }
    auto cfg2 = cfg;
    cfg2.run_id = 1;
    const auto c = simulate_sftrl_scores(mp, regs, noise, mp_x0(), cfg2);
    CHECK(sup_gap(a, c) > 1e-3);
}

TEST_CASE("trajectory samples stay on the simplex and match their scores") {
    const Game mp = builtins::matching_pennies();
    const auto regs = RegularizerSet::uniform(mp, Kernel::tsallis(0.5));
    const auto noise = NoiseModel::uncorrelated_uniform(mp, 0.3);
    SimConfig cfg;
    cfg.step = 1e-2;
    cfg.horizon = 20.0;
    cfg.sample_stride = 7;
    cfg.seed = 5;
    const auto traj = simulate_sftrl_scores(mp, regs, noise, mp_x0(), cfg);
    for (size_t s = 0; s < traj.times.size(); ++s) {
        for (int i = 0; i < 2; ++i) {
            double sum = 0.0;
            for (double p : traj.strategies[s].probs[i]) {
                CHECK(p >= 0.0);
                sum += p;
            }
            CHECK(sum == Catch::Approx(1.0).margin(1e-9));
            const auto xm = mirror(regs.of(i), traj.scores[s].y[i]);
            for (int c = 0; c < 2; ++c)
                CHECK(traj.strategies[s].probs[i][c] == Catch::Approx(xm[c]).margin(1e-10));
        }
    }
}

TEST_CASE("SRD-EW coincides with the entropic strategy SDE") {
    const Game mp = builtins::matching_pennies();
    const auto e = Kernel::entropic();

    // per-step increments at a probe state, shared draws
    const std::vector<double> x = {0.62, 0.38};
    const std::vector<double> v = {0.3, -0.3};
    const std::vector<double> sig = {0.25, 0.15};
    Matrix rows(2, 2);
    rows(0, 0) = sig[0];
    rows(1, 1) = sig[1];
    for (int trial = 0; trial < 100; ++trial) {
        rng::Stream st(50 + trial, 0, 0);
        const std::vector<double> xi = {st.normal(0), st.normal(1)};
        const auto da = srd_increment(SrdVariant::EW, x, v, sig, xi, 1e-3);
        const auto db = sftrl_strategy_increment(e, x, v, rows, xi, 1e-3);
        for (int a = 0; a < 2; ++a) CHECK(da[a] == Catch::Approx(db[a]).margin(1e-12));
    }

    // short paired paths under the same stream
    const auto regs = RegularizerSet::uniform(mp, e);
    const auto noise = NoiseModel::uncorrelated(mp, {{0.25, 0.15}, {0.2, 0.1}});
    SimConfig cfg;
    cfg.step = 1e-3;
    cfg.horizon = 0.05;
    cfg.seed = 3;
    const auto ew = simulate_srd(mp, noise, mp_x0(), cfg, SrdVariant::EW);
    const auto strat = simulate_sftrl_strategies(mp, regs, noise, mp_x0(), cfg);
    CHECK(sup_gap(ew, strat) < 1e-10);
}

TEST_CASE("hand-coded SRD-EW drift matches the strategy-SDE drift term") {
    const auto e = Kernel::entropic();
    const std::vector<double> x = {0.3, 0.5, 0.2};
    const std::vector<double> v = {1.0, -0.5, 0.25};
    const std::vector<double> sig = {0.3, 0.2, 0.1};
    Matrix rows(3, 3);
    for (int a = 0; a < 3; ++a) rows(a, a) = sig[a];
    const std::vector<double> xi = {0.0, 0.0, 0.0}; // isolate the drift + Ito terms
    const double dt = 1.0;
    const auto inc = sftrl_strategy_increment(e, x, v, rows, xi, dt);
    for (int a = 0; a < 3; ++a) {
        double vbar = 0.0, corr = 0.0;
        for (int b = 0; b < 3; ++b) {
            vbar += x[b] * v[b];
            corr += sig[b] * sig[b] * x[b] * (1.0 - 2.0 * x[b]);
        }
        const double expected =
            x[a] * (v[a] - vbar) + 0.5 * x[a] * (sig[a] * sig[a] * (1.0 - 2.0 * x[a]) - corr);
        CHECK(inc[a] == Catch::Approx(expected).margin(1e-12));
    }
}

TEST_CASE("score-space and strategy-space coupling tightens with the step") {
    const Game mp = builtins::matching_pennies();
    const auto regs = RegularizerSet::uniform(mp, Kernel::entropic());
    const auto noise = NoiseModel::uncorrelated_uniform(mp, 0.2);
    std::vector<double> gaps;
    for (const double dt : {4e-3, 2e-3, 1e-3}) {
        double mean = 0.0;
        for (int seed = 0; seed < 6; ++seed) {
            SimConfig cfg;
            cfg.step = dt;
            cfg.horizon = 1.0;
            cfg.seed = 100 + seed;
            cfg.sample_stride = static_cast<int>(std::lround(4e-3 / dt));
            const auto a = simulate_sftrl_scores(mp, regs, noise, mp_x0(), cfg);
            const auto b = simulate_sftrl_strategies(mp, regs, noise, mp_x0(), cfg);
            mean += sup_gap(a, b);
        }
        gaps.push_back(mean / 6.0);
    }
    CHECK(gaps[1] < gaps[0]);
    CHECK(gaps[2] < gaps[1]);
}

TEST_CASE("srd requires diagonal noise") {
    const Game mp = builtins::matching_pennies();
    Matrix s(4, 1);
    for (int r = 0; r < 4; ++r) s(r, 0) = 0.1;
    const auto full = NoiseModel::full_constant(mp, s);
    SimConfig cfg;
    cfg.step = 1e-2;
    cfg.horizon = 1.0;
    CHECK_THROWS_AS(simulate_srd(mp, full, mp_x0(), cfg, SrdVariant::AS), std::invalid_argument);
}

TEST_CASE("aggregate shocks extinguish the noisier action in the zero game") {
    const Game g = zero_game();
    const auto noise = NoiseModel::uncorrelated(g, {{0.2, 0.1}, {0.2, 0.1}});
    SimConfig cfg;
    cfg.step = 1e-2;
    cfg.horizon = 2000.0;
    cfg.sample_stride = 1000;
    cfg.seed = 21;
    cfg.record_samples = false;
    int extinct = 0;
    for (int r = 0; r < 10; ++r) {
        cfg.run_id = r;
        const auto traj = simulate_srd(g, noise, MixedProfile::uniform(g), cfg, SrdVariant::AS);
        if (traj.final_strategy().probs[0][0] < 0.01) ++extinct;
    }
    CHECK(extinct >= 8);
}

TEST_CASE("pairwise imitation is sticky near vertices in the zero game") {
    const Game g = zero_game();
    const auto noise = NoiseModel::uncorrelated_uniform(g, 0.05);
    MixedProfile x0;
    x0.probs = {{0.99, 0.01}, {0.99, 0.01}};
    SimConfig cfg;
    cfg.step = 1e-2;
    cfg.horizon = 100.0;
    cfg.sample_stride = 10;
    cfg.seed = 33;
    int stayed = 0;
    const int runs = 40;
    for (int r = 0; r < runs; ++r) {
        cfg.run_id = r;
        bool inside = true;
        auto obs = [&](const StateView& v) {
            if (v.prob(0, 0) < 0.95 || v.prob(1, 0) < 0.95) inside = false;
            return false;
        };
        simulate_srd(g, noise, x0, cfg, SrdVariant::PI, obs);
        if (inside) ++stayed;
    }
    CHECK(stayed >= static_cast<int>(0.95 * runs));
}

TEST_CASE("stop predicate and non-recording mode") {
    const Game mp = builtins::matching_pennies();
    const auto regs = RegularizerSet::uniform(mp, Kernel::entropic());
    const auto noise = NoiseModel::uncorrelated_uniform(mp, 0.5);
    SimConfig cfg;
    cfg.step = 1e-2;
    cfg.horizon = 1000.0;
    cfg.sample_stride = 5;
    cfg.seed = 8;
    cfg.record_samples = false;
    auto stop = [](const StateView& v) { return v.max_prob(0) >= 0.9; };
    const auto traj = simulate_sftrl_scores(mp, regs, noise, mp_x0(), cfg, stop);
    CHECK(traj.terminal_reason == TerminalReason::stop_predicate);
    CHECK(traj.times.size() == 2); // first and latest samples only
    CHECK((traj.final_strategy().probs[0][0] >= 0.9 - 1e-12 ||
           traj.final_strategy().probs[0][1] >= 0.9 - 1e-12));
    // hitting times land on the stride grid
    const double grid = cfg.step * cfg.sample_stride;
    const double ratio = traj.final_time() / grid;
    CHECK(std::fabs(ratio - std::lround(ratio)) < 1e-9);
}

TEST_CASE("numerical failure reports the last good sample") {
    Game g = zero_game();
    g.payoffs[0].assign(4, 1e308);
    g.payoffs[1].assign(4, -1e308);
    const auto regs = RegularizerSet::uniform(g, Kernel::entropic());
    const auto noise = NoiseModel::none(g);
    SimConfig cfg;
    cfg.step = 1.0;
    cfg.horizon = 10.0;
    const auto traj = simulate_sftrl_scores(g, regs, noise, MixedProfile::uniform(g), cfg);
    CHECK(traj.terminal_reason == TerminalReason::numerical_failure);
    REQUIRE(!traj.strategies.empty());
    for (double p : traj.strategies.back().probs[0]) CHECK(std::isfinite(p));
}

TEST_CASE("payoff-difference projection") {
    // direct subtraction on scores
    Trajectory traj;
    traj.times = {0.0};
    ScoreProfile y;
    y.y = {{3.0, 1.0}};
    traj.scores = {y};
    MixedProfile x;
    x.probs = {{0.5, 0.5}};
    traj.strategies = {x};
    const auto z = project_payoff_differences(traj, {0});
    CHECK(z.z[0][0][0] == Catch::Approx(-2.0));

    // theta' route for strategy-only trajectories
    Trajectory ts;
    ts.times = {0.0};
    MixedProfile xs;
    xs.probs = {{0.75, 0.25}};
    ts.strategies = {xs};
    RegularizerSet regs;
    regs.kernels = {Kernel::entropic()};
    const auto z2 = project_payoff_differences(ts, {0}, &regs);
    CHECK(z2.z[0][0][0] == Catch::Approx(-std::log(3.0)));
    CHECK_THROWS_AS(project_payoff_differences(ts, {0}), std::invalid_argument);

    MixedProfile xb;
    xb.probs = {{1.0, 0.0}};
    ts.strategies = {xb};
    CHECK_THROWS_AS(project_payoff_differences(ts, {0}, &regs), std::domain_error);

    // gauge invariance: adding a constant to the scores leaves z unchanged
    Trajectory t2 = traj;
    for (auto& yy : t2.scores[0].y[0]) yy += 42.0;
    CHECK(project_payoff_differences(t2, {0}).z[0][0][0] == Catch::Approx(-2.0));
}

TEST_CASE("pure-noise z increments diffuse at the Brownian rate") {
    const Game g = zero_game();
    const auto regs = RegularizerSet::uniform(g, Kernel::entropic());
    const auto noise = NoiseModel::uncorrelated_uniform(g, 1.0);
    SimConfig cfg;
    cfg.step = 1e-3;
    cfg.horizon = 10.0;
    cfg.seed = 61;
    const auto traj = simulate_sftrl_scores(g, regs, noise, MixedProfile::uniform(g), cfg);
    const auto z = project_payoff_differences(traj, {0, 0});
    for (int i = 0; i < 2; ++i) {
        std::vector<double> inc;
        for (size_t s = 1; s < z.z.size(); ++s) inc.push_back(z.z[s][i][0] - z.z[s - 1][i][0]);
        double m = 0.0, v = 0.0;
        for (double e : inc) m += e;
        m /= inc.size();
        for (double e : inc) v += (e - m) * (e - m);
        v /= (inc.size() - 1);
        CHECK(v == Catch::Approx(2.0 * cfg.step).epsilon(0.15));
    }
}

TEST_CASE("noiseless SRD variants coincide and track the replicator flow") {
    const Game mp = builtins::matching_pennies();
    const auto zero = NoiseModel::none(mp);
    SimConfig cfg;
    cfg.step = 1e-3;
    cfg.horizon = 5.0;
    cfg.sample_stride = 10;
    const auto ew = simulate_srd(mp, zero, mp_x0(), cfg, SrdVariant::EW);
    const auto as = simulate_srd(mp, zero, mp_x0(), cfg, SrdVariant::AS);
    const auto pi = simulate_srd(mp, zero, mp_x0(), cfg, SrdVariant::PI);
    CHECK(sup_gap(ew, as) == 0.0); // identical updates without noise
    CHECK(sup_gap(ew, pi) == 0.0);
    SimConfig rcfg = cfg;
    rcfg.scheme = Scheme::rk4;
    const auto regs = RegularizerSet::uniform(mp, Kernel::entropic());
    const auto flow = simulate_deterministic_ftrl(mp, regs, mp_x0(), rcfg);
    CHECK(sup_gap(ew, flow) < 2e-3); // Euler-vs-RK4 discretization gap
}

TEST_CASE("noise model shape validation") {
    const Game mp = builtins::matching_pennies();
    CHECK_THROWS_AS(NoiseModel::uncorrelated(mp, {{0.1, 0.1}}), std::invalid_argument);
    CHECK_THROWS_AS(NoiseModel::uncorrelated(mp, {{0.1}, {0.1, 0.1}}), std::invalid_argument);
    CHECK_THROWS_AS(NoiseModel::full_constant(mp, Matrix(3, 2)), std::invalid_argument);
    // dimension mismatch against another game
    Game big;
    big.num_players = 2;
    big.action_counts = {3, 3};
    big.payoffs.assign(2, std::vector<double>(9, 0.0));
    const auto noise = NoiseModel::none(big);
    SimConfig cfg;
    cfg.step = 1e-2;
    cfg.horizon = 1.0;
    const auto regs = RegularizerSet::uniform(mp, Kernel::entropic());
    CHECK_THROWS_AS(simulate_sftrl_scores(mp, regs, noise, mp_x0(), cfg), std::invalid_argument);
}

TEST_CASE("correlated noise drives both integrators consistently") {
    const Game mp = builtins::matching_pennies();
    const auto regs = RegularizerSet::uniform(mp, Kernel::entropic());
    // one shared Brownian driver per player: perfectly correlated shocks
    // within a player, rank-deficient overall covariance
    Matrix s(4, 2);
    s(0, 0) = 0.2;
    s(1, 0) = -0.2;
    s(2, 1) = 0.15;
    s(3, 1) = 0.1;
    const auto noise = NoiseModel::full_constant(mp, s);
    CHECK(noise.sigma_min_sq() == Catch::Approx(0.0).margin(1e-12));
    CHECK(noise.sigma_max_sq() == Catch::Approx(0.08));
    MixedProfile x0;
    x0.probs = {{0.6, 0.4}, {0.45, 0.55}};
    SimConfig cfg;
    cfg.step = 1e-3;
    cfg.horizon = 0.5;
    cfg.seed = 9;
    const auto a = simulate_sftrl_scores(mp, regs, noise, x0, cfg);
    const auto b = simulate_sftrl_strategies(mp, regs, noise, x0, cfg);
    CHECK(sup_gap(a, b) < 1e-3); // pathwise coupling through the shared stream
    // player 1's score increments are perfectly anticorrelated by construction
    double dot = 0.0, n1 = 0.0, n2 = 0.0;
    for (size_t k = 1; k < a.times.size(); ++k) {
        const double d0 = a.scores[k].y[0][0] - a.scores[k - 1].y[0][0];
        const double d1 = a.scores[k].y[0][1] - a.scores[k - 1].y[0][1];
        dot += d0 * d1;
        n1 += d0 * d0;
        n2 += d1 * d1;
    }
    CHECK(dot / std::sqrt(n1 * n2) < -0.99);
}

TEST_CASE("three-action stochastic runs stay consistent") {
    Game rps;
    rps.num_players = 2;
    rps.action_counts = {3, 3};
    const std::vector<double> u1 = {0, -1, 1, 1, 0, -1, -1, 1, 0};
    rps.payoffs = {u1, {}};
    rps.payoffs[1].resize(9);
    for (int k = 0; k < 9; ++k) rps.payoffs[1][k] = -u1[k];
    const auto regs = RegularizerSet::uniform(rps, Kernel::tsallis(0.5));
    const auto noise = NoiseModel::uncorrelated_uniform(rps, 0.25);
    SimConfig cfg;
    cfg.step = 1e-2;
    cfg.horizon = 30.0;
    cfg.sample_stride = 5;
    cfg.seed = 14;
    const auto traj = simulate_sftrl_scores(rps, regs, noise, MixedProfile::uniform(rps), cfg);
    CHECK(traj.terminal_reason == TerminalReason::horizon);
    for (size_t k = 0; k < traj.times.size(); ++k)
        for (int i = 0; i < 2; ++i) {
            double sum = 0.0;
            for (double p : traj.strategies[k].probs[i]) {
                CHECK(p >= 0.0);
                sum += p;
            }
            CHECK(sum == Catch::Approx(1.0).margin(1e-9));
        }
    const auto strat = simulate_sftrl_strategies(rps, regs, noise, MixedProfile::uniform(rps), cfg);
    CHECK(strat.terminal_reason == TerminalReason::horizon);
    CHECK(sup_gap(traj, strat) < 0.05);
}
