#pragma once

// Builtin game catalog for the experiment runner.

#include <optional>
#include <string>
#include <vector>

#include "sgdlab/game.hpp"

namespace sgdlab::builtins {

struct CatalogEntry {
    std::string name;
    std::string parameters; // human-readable parameter docs, empty if none
    std::string provenance;
};

inline Game matching_pennies() {
    Game g;
    g.num_players = 2;
    g.action_counts = {2, 2};
    g.payoffs = {{1, -1, -1, 1}, {-1, 1, 1, -1}};
    return g;
}

// Actions: 0 = Cooperate, 1 = Defect.
inline Game prisoners_dilemma() {
    Game g;
    g.num_players = 2;
    g.action_counts = {2, 2};
    g.payoffs = {{3, 0, 5, 1}, {3, 5, 0, 1}};
    return g;
}

// Conventional Entry Deterrence tensor (entrant: 0 = enter, 1 = stay out;
// incumbent: 0 = accommodate, 1 = fight). Strict equilibrium (enter,
// accommodate) plus the weak (stay out, fight) component.
inline Game entry_deterrence() {
    Game g;
    g.num_players = 2;
    g.action_counts = {2, 2};
    g.payoffs = {{1, -1, 0, 0}, {1, -1, 2, 2}};
    return g;
}

inline std::vector<CatalogEntry> catalog() {
    return {
        {"matching_pennies", "",
         "standard convention: u1 = [[1,-1],[-1,1]], u2 = -u1; unique fully mixed equilibrium at "
         "the uniform profile"},
        {"prisoners_dilemma", "",
         "u(C,C)=(3,3), u(C,D)=(0,5), u(D,C)=(5,0), u(D,D)=(1,1); strict equilibrium (D,D)"},
        {"entry_deterrence", "",
         "conventional textbook payoffs; strict equilibrium (enter, accommodate) and a weak "
         "(stay out, fight) component; not used by the acceptance suite"},
        {"harmonic_2x2x2", "a, b, c, d, delta",
         "2x2x2 uniform harmonic game from the five free response-graph deviations; payoff "
         "levels anchored at zero whenever a player picks their first action"},
        {"zero_sum", "matrix (row player payoffs)",
         "two-player zero-sum game; harmonic with weights x* when an interior equilibrium "
         "exists"},
    };
}

inline std::optional<Game> by_name(const std::string& name) {
    if (name == "matching_pennies") return matching_pennies();
    if (name == "prisoners_dilemma") return prisoners_dilemma();
    if (name == "entry_deterrence") return entry_deterrence();
    return std::nullopt;
}

} // namespace sgdlab::builtins
