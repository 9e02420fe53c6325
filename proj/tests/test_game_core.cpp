#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "sgdlab/builtins.hpp"
#include "sgdlab/game.hpp"
#include "sgdlab/rng.hpp"

using namespace sgdlab;

namespace {

Game random_game(int players, int actions, std::uint64_t seed) {
    Game g;
    g.num_players = players;
    g.action_counts.assign(players, actions);
    rng::Stream st(seed, 0, 0);
    std::uint64_t d = 0;
    g.payoffs.assign(players, {});
    for (auto& u : g.payoffs) {
        u.resize(g.num_profiles());
        for (double& v : u) v = 2.0 * st.uniform(d++) - 1.0;
    }
    return g;
}

MixedProfile random_mixed(const Game& g, std::uint64_t seed) {
    rng::Stream st(seed, 1, 0);
    std::uint64_t d = 0;
    MixedProfile x;
    x.probs.resize(g.num_players);
    for (int i = 0; i < g.num_players; ++i) {
        x.probs[i].resize(g.action_counts[i]);
        double s = 0.0;
        for (double& p : x.probs[i]) s += (p = -std::log(st.uniform(d++)));
        for (double& p : x.probs[i]) p /= s;
    }
    return x;
}

// Independent club oracle: direct closure of the pure better-reply
// correspondence over the face's profiles.
bool club_by_closure(const Game& g, const Face& face) {
    bool closed = true;
    detail::for_each_profile_in_face(g, face, [&](const PureProfile& a) {
        for (const auto& b : better_replies(g, a))
            if (!face.contains(b)) closed = false;
    });
    return closed;
}

std::vector<Face> all_product_faces(const Game& g) {
    std::vector<Face> all;
    std::vector<std::uint32_t> mask(g.num_players, 1);
    bool done = false;
    while (!done) {
        Face f;
        f.actions.resize(g.num_players);
        for (int i = 0; i < g.num_players; ++i)
            for (int a = 0; a < g.action_counts[i]; ++a)
                if (mask[i] & (1u << a)) f.actions[i].push_back(a);
        all.push_back(std::move(f));
        done = true;
        for (int i = g.num_players - 1; i >= 0; --i) {
            if (++mask[i] <= (1u << g.action_counts[i]) - 1) {
                done = false;
                break;
            }
            mask[i] = 1;
        }
    }
    return all;
}

} // namespace

TEST_CASE("mixed payoffs on matching pennies") {
    const Game mp = builtins::matching_pennies();
    mp.validate();
    CHECK(mixed_payoff(mp, 0, MixedProfile::uniform(mp)) == Catch::Approx(0.0).margin(1e-15));
    CHECK(mixed_payoff(mp, 0, MixedProfile::vertex(mp, {0, 0})) == Catch::Approx(1.0));
    MixedProfile x;
    x.probs = {{1.0, 0.0}, {0.75, 0.25}};
    CHECK(mixed_payoff(mp, 0, x) == Catch::Approx(0.5));
    CHECK_THROWS_AS(mixed_payoff(mp, 2, x), std::invalid_argument);
}

TEST_CASE("payoff field examples and linearity identity") {
    const Game mp = builtins::matching_pennies();
    MixedProfile x = MixedProfile::uniform(mp);
    auto v = payoff_field(mp, x);
    CHECK(v[0][0] == Catch::Approx(0.0).margin(1e-15));
    CHECK(v[0][1] == Catch::Approx(0.0).margin(1e-15));
    x.probs[1] = {0.75, 0.25};
    v = payoff_field(mp, x);
    CHECK(v[0][0] == Catch::Approx(0.5));
    CHECK(v[0][1] == Catch::Approx(-0.5));

    // vertex evaluation reduces to tensor lookups
    const Game g = random_game(3, 2, 7);
    const PureProfile a = {1, 0, 1};
    const auto vv = payoff_field(g, MixedProfile::vertex(g, a));
    for (int i = 0; i < 3; ++i)
        for (int b = 0; b < 2; ++b) {
            PureProfile dev = a;
            dev[i] = b;
            CHECK(vv[i][b] == Catch::Approx(g.payoff(i, dev)).margin(1e-12));
        }

    // <v_i(x), x_i> = u_i(x) on random games and profiles
    for (std::uint64_t s = 0; s < 20; ++s) {
        const Game rg = random_game(2 + static_cast<int>(s % 2), 2 + static_cast<int>(s % 3), s);
        const MixedProfile rx = random_mixed(rg, s + 100);
        const auto rv = payoff_field(rg, rx);
        for (int i = 0; i < rg.num_players; ++i) {
            double dot = 0.0;
            for (int b = 0; b < rg.action_counts[i]; ++b) dot += rv[i][b] * rx.probs[i][b];
            CHECK(dot == Catch::Approx(mixed_payoff(rg, i, rx)).margin(1e-10));
        }
    }
}

TEST_CASE("nash classification") {
    const Game pd = builtins::prisoners_dilemma();
    CHECK(classify_profile(pd, MixedProfile::vertex(pd, {1, 1})) == NashClass::nash_strict);
    CHECK(classify_profile(pd, MixedProfile::vertex(pd, {0, 0})) == NashClass::not_nash);
    const Game mp = builtins::matching_pennies();
    CHECK(classify_profile(mp, MixedProfile::uniform(mp)) == NashClass::nash_mixed);
    CHECK_THROWS_AS(classify_profile(mp, MixedProfile::uniform(mp), 0.0), std::invalid_argument);

    // weak pure equilibrium: coordination with a payoff tie
    Game weak;
    weak.num_players = 2;
    weak.action_counts = {2, 2};
    weak.payoffs = {{1, 1, 0, 0}, {1, 1, 0, 0}};
    CHECK(classify_profile(weak, MixedProfile::vertex(weak, {0, 0})) == NashClass::nash_pure);
}

TEST_CASE("better replies") {
    const Game pd = builtins::prisoners_dilemma();
    CHECK(better_replies(pd, {0, 0}).size() == 4);
    const auto brs = better_replies(pd, {1, 1});
    REQUIRE(brs.size() == 1);
    CHECK(brs[0] == PureProfile{1, 1});

    // a is always its own better reply; strict NE iff singleton better replies
    for (std::uint64_t s = 0; s < 30; ++s) {
        const Game g = random_game(2, 3, 200 + s);
        detail::for_each_profile(g, [&](int, const PureProfile& a) {
            const auto br = better_replies(g, a);
            CHECK(std::find(br.begin(), br.end(), a) != br.end());
            const bool strict =
                classify_profile(g, MixedProfile::vertex(g, a)) == NashClass::nash_strict;
            CHECK(strict == (br.size() == 1));
        });
    }
}

TEST_CASE("club faces: characterization matches better-reply closure") {
    const Game pd = builtins::prisoners_dilemma();
    Face dd;
    dd.actions = {{1}, {1}};
    Face cc;
    cc.actions = {{0}, {0}};
    CHECK(is_club_face(pd, dd));
    CHECK_FALSE(is_club_face(pd, cc));
    CHECK(is_club_face(pd, Face::full(pd)));

    for (std::uint64_t s = 0; s < 25; ++s) {
        const Game g = random_game(2, s % 2 ? 2 : 3, 300 + s);
        for (const auto& f : all_product_faces(g))
            CHECK(is_club_face(g, f) == club_by_closure(g, f));
    }
}

TEST_CASE("club face enumeration") {
    // Prisoner's dilemma: {D}x{D} plus the two non-minimal faces fixing D for
    // one player, plus the full face (cross-checked against the closure
    // oracle above).
    const Game pd = builtins::prisoners_dilemma();
    const auto faces = enumerate_club_faces(pd);
    REQUIRE(faces.size() == 4);
    CHECK(faces[0].actions == std::vector<std::vector<int>>{{1}, {1}});
    CHECK(faces[1].actions == std::vector<std::vector<int>>{{0, 1}, {1}});
    CHECK(faces[2].actions == std::vector<std::vector<int>>{{1}, {0, 1}});
    CHECK(faces[3].actions == std::vector<std::vector<int>>{{0, 1}, {0, 1}});
    for (const auto& f : faces) CHECK(club_by_closure(pd, f));

    const Game mp = builtins::matching_pennies();
    const auto mp_faces = enumerate_club_faces(mp);
    REQUIRE(mp_faces.size() == 1);
    CHECK_FALSE(mp_faces[0].is_proper(mp));

    // dominant-strategy common-interest game contains the strict-NE singleton
    Game ci;
    ci.num_players = 2;
    ci.action_counts = {2, 2};
    ci.payoffs = {{3, 1, 2, 0}, {3, 1, 2, 0}};
    const auto ci_faces = enumerate_club_faces(ci);
    bool has_singleton = false;
    for (const auto& f : ci_faces)
        if (f.actions == std::vector<std::vector<int>>{{0}, {0}}) has_singleton = true;
    CHECK(has_singleton);

    CHECK_THROWS_AS(enumerate_club_faces(mp, 1e-9, 2), std::invalid_argument);
}

TEST_CASE("singleton club faces are exactly strict equilibria") {
    for (std::uint64_t s = 0; s < 25; ++s) {
        const Game g = random_game(2, 3, 400 + s);
        detail::for_each_profile(g, [&](int, const PureProfile& a) {
            const bool club = is_club_face(g, Face::singleton(a));
            const bool strict =
                classify_profile(g, MixedProfile::vertex(g, a)) == NashClass::nash_strict;
            CHECK(club == strict);
        });
    }
}

TEST_CASE("harmonic residuals") {
    const Game mp = builtins::matching_pennies();
    const std::vector<std::vector<double>> unit2 = {{1, 1}, {1, 1}};
    for (double r : harmonic_residuals(mp, unit2)) CHECK(r == Catch::Approx(0.0).margin(1e-12));
    CHECK(is_harmonic(mp, unit2));

    // Hand value at (D,D): each player's deviation to C drops their payoff
    // from 1 to 0, so the residual is 1 + 1 = 2 (nonzero: PD is not harmonic).
    const Game pd = builtins::prisoners_dilemma();
    const auto res = harmonic_residuals(pd, unit2);
    CHECK(res[pd.flat_index({1, 1})] == Catch::Approx(2.0));
    CHECK(res[pd.flat_index({0, 0})] == Catch::Approx(-4.0));
    CHECK_FALSE(is_harmonic(pd, unit2));

    // profile where all unilateral gaps vanish
    Game flat;
    flat.num_players = 2;
    flat.action_counts = {2, 2};
    flat.payoffs = {{5, 5, 5, 5}, {2, 2, 2, 2}};
    for (double r : harmonic_residuals(flat, unit2)) CHECK(r == Catch::Approx(0.0).margin(1e-12));

    // linearity in the payoff tensor
    Game a = random_game(2, 3, 500), b = random_game(2, 3, 501);
    const std::vector<std::vector<double>> w = {{1, 2, 0.5}, {0.3, 1, 1.5}};
    Game sum = a;
    for (int i = 0; i < 2; ++i)
        for (size_t k = 0; k < sum.payoffs[i].size(); ++k) sum.payoffs[i][k] += b.payoffs[i][k];
    const auto ra = harmonic_residuals(a, w), rb = harmonic_residuals(b, w),
               rs = harmonic_residuals(sum, w);
    for (size_t k = 0; k < rs.size(); ++k)
        CHECK(rs[k] == Catch::Approx(ra[k] + rb[k]).margin(1e-10));

    CHECK_THROWS_AS(harmonic_residuals(mp, {{1, 0}, {1, 1}}), std::invalid_argument);
}

TEST_CASE("harmonic structure from weights") {
    const auto s = harmonic_structure({{1, 1}, {1, 3}, {2, 2, 4}});
    CHECK(s.mass[0] == Catch::Approx(2.0));
    CHECK(s.center.probs[0][0] == Catch::Approx(0.5));
    CHECK(s.mass[1] == Catch::Approx(4.0));
    CHECK(s.center.probs[1][1] == Catch::Approx(0.75));
    CHECK(s.center.probs[2][0] == Catch::Approx(0.25));
    CHECK(s.center.probs[2][2] == Catch::Approx(0.5));
    CHECK_THROWS_AS(harmonic_structure({{1, -1}}), std::invalid_argument);
}

TEST_CASE("2x2x2 harmonic constructor") {
    const std::vector<std::vector<double>> unit = {{1, 1}, {1, 1}, {1, 1}};
    for (double r : harmonic_residuals(make_harmonic_2x2x2(0, 0, 0, 0, 0), unit))
        CHECK(r == Catch::Approx(0.0).margin(1e-12));
    const Game g = make_harmonic_2x2x2(1, 2, 3, 4, 5);
    for (double r : harmonic_residuals(g, unit)) CHECK(r == Catch::Approx(0.0).margin(1e-9));

    // response-graph labels: bottom-face edges carry a,b,c,d; the top-face
    // edges carry -a+d+delta, -b+d+delta, -c+d+delta
    const double a = 1, b = 2, c = 3, d = 4, delta = 5;
    CHECK(pure_deviation_gain(g, {0, 1, 0}, {0, 0, 0}) == Catch::Approx(d));        // A->B
    CHECK(pure_deviation_gain(g, {0, 1, 1}, {0, 1, 0}) == Catch::Approx(a));        // B->F
    CHECK(pure_deviation_gain(g, {0, 0, 1}, {0, 1, 1}) == Catch::Approx(b));        // F->E
    CHECK(pure_deviation_gain(g, {0, 0, 0}, {0, 0, 1}) == Catch::Approx(c));        // E->A
    CHECK(pure_deviation_gain(g, {1, 1, 0}, {1, 0, 0}) == Catch::Approx(delta));    // D->C
    CHECK(pure_deviation_gain(g, {1, 1, 1}, {1, 1, 0}) == Catch::Approx(-a + d + delta));
    CHECK(pure_deviation_gain(g, {1, 0, 1}, {1, 1, 1}) == Catch::Approx(-b + d + delta));
    CHECK(pure_deviation_gain(g, {1, 0, 0}, {1, 0, 1}) == Catch::Approx(-c + d + delta));
    // anchoring: payoff zero whenever a player picks action 0
    detail::for_each_profile(g, [&](int idx, const PureProfile& p) {
        for (int i = 0; i < 3; ++i)
            if (p[i] == 0) CHECK(g.payoffs[i][idx] == 0.0);
    });

    // no proper club face regardless of parameters
    rng::Stream st(9, 0, 0);
    for (std::uint64_t trial = 0; trial < 25; ++trial) {
        double p[5];
        for (std::uint64_t j = 0; j < 5; ++j) p[j] = 4.0 * st.uniform(5 * trial + j) - 2.0;
        const Game h = make_harmonic_2x2x2(p[0], p[1], p[2], p[3], p[4]);
        CHECK(enumerate_club_faces(h).size() == 1);
    }
}

TEST_CASE("weighted antisymmetric contraction vanishes on arbitrary subsets") {
    rng::Stream st(11, 0, 0);
    std::uint64_t d = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const Game g = trial % 2 ? random_game(2, 3, 600 + trial)
                                 : make_harmonic_2x2x2(st.uniform(d), st.uniform(d + 1),
                                                       st.uniform(d + 2), st.uniform(d + 3),
                                                       st.uniform(d + 4));
        d += 5;
        std::vector<std::vector<double>> w(g.num_players);
        for (int i = 0; i < g.num_players; ++i) {
            w[i].resize(g.action_counts[i]);
            for (double& x : w[i]) x = 0.2 + st.uniform(d++);
        }
        // random subset of pure profiles
        std::set<int> subset;
        detail::for_each_profile(g, [&](int idx, const PureProfile&) {
            if (st.uniform(d++) < 0.55) subset.insert(idx);
        });
        double contraction = 0.0;
        detail::for_each_profile(g, [&](int idx, const PureProfile& p) {
            if (!subset.count(idx)) return;
            double wprod = 1.0;
            for (int i = 0; i < g.num_players; ++i) wprod *= w[i][p[i]];
            PureProfile q = p;
            for (int i = 0; i < g.num_players; ++i) {
                for (int bi = 0; bi < g.action_counts[i]; ++bi) {
                    if (bi == p[i]) continue;
                    q[i] = bi;
                    if (subset.count(g.flat_index(q)))
                        contraction += wprod * w[i][bi] * pure_deviation_gain(g, p, q);
                }
                q[i] = p[i];
            }
        });
        CHECK(contraction == Catch::Approx(0.0).margin(1e-10));
    }
}

TEST_CASE("zero-sum constructor and interior equilibria") {
    Matrix mp(2, 2);
    mp(0, 0) = 1;
    mp(0, 1) = -1;
    mp(1, 0) = -1;
    mp(1, 1) = 1;
    const auto zs = make_zero_sum(mp);
    REQUIRE(zs.structure.has_value());
    CHECK(zs.structure->weights[0][0] == Catch::Approx(0.5));
    CHECK(zs.structure->weights[1][1] == Catch::Approx(0.5));
    CHECK(zs.structure->mass[0] == Catch::Approx(1.0));
    CHECK(is_harmonic(zs.game, zs.structure->weights));

    Matrix m2(2, 2);
    m2(0, 0) = 2;
    m2(0, 1) = 0;
    m2(1, 0) = 0;
    m2(1, 1) = 1;
    const auto z2 = make_zero_sum(m2);
    REQUIRE(z2.equilibrium.has_value());
    CHECK(z2.equilibrium->probs[0][0] == Catch::Approx(1.0 / 3.0));
    CHECK(z2.equilibrium->probs[0][1] == Catch::Approx(2.0 / 3.0));
    CHECK(z2.equilibrium->probs[1][0] == Catch::Approx(1.0 / 3.0));
    CHECK(is_harmonic(z2.game, z2.structure->weights));

    // dominant column: no interior equilibrium, game still returned
    Matrix m3(2, 2);
    m3(0, 0) = 1;
    m3(0, 1) = 0;
    m3(1, 0) = 0;
    m3(1, 1) = 0;
    const auto z3 = make_zero_sum(m3);
    CHECK_FALSE(z3.structure.has_value());
    CHECK(z3.game.payoffs[1][0] == -1.0);

    // rock-paper-scissors exercises the linear-system route
    Matrix rps(3, 3);
    const int wins[3][3] = {{0, -1, 1}, {1, 0, -1}, {-1, 1, 0}};
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) rps(r, c) = wins[r][c];
    const auto zr = make_zero_sum(rps);
    REQUIRE(zr.structure.has_value());
    for (int i = 0; i < 3; ++i)
        CHECK(zr.equilibrium->probs[0][i] == Catch::Approx(1.0 / 3.0).margin(1e-10));
}

TEST_CASE("game construction rejects bad input") {
    Matrix bad(2, 2);
    bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(make_zero_sum(bad), std::invalid_argument);
    Game g;
    g.num_players = 1;
    g.action_counts = {2};
    g.payoffs = {{0.0, 0.0}};
    CHECK_THROWS_AS(g.validate(), std::invalid_argument);
    Game h = builtins::matching_pennies();
    h.payoffs[0][2] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(h.validate(), std::invalid_argument);
}
