#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "fsum/model.hpp"

namespace fsum {

// Loss-weight search space: {0.1, 0.4, 0.7} per free axis. Configuration
// presets pin excluded axes to zero.
struct LambdaGrid {
    std::vector<double> gen_values{0.1, 0.4, 0.7};
    std::vector<double> k_values{0.1, 0.4, 0.7};
    std::vector<double> e_values{0.1, 0.4, 0.7};

    static LambdaGrid full();
    static LambdaGrid gen_only();    // k and e pinned to 0
    static LambdaGrid dual_moo();    // k pinned to 0
    static LambdaGrid triple_moo();  // all three axes free

    // Canonical enumeration: gen outermost, then k, then e.
    std::vector<LambdaTriple> points() const;
};

struct TuneEvaluation {
    LambdaTriple lambdas;
    double loss = 0.0;  // +inf when the objective returned a non-finite value
};

struct TuneResult {
    std::vector<TuneEvaluation> evaluations;  // in evaluation order
    LambdaTriple best;
    double best_loss = 0.0;
    int evaluation_count = 0;
};

using TuneObjective = std::function<double(const LambdaTriple&)>;

// Gaussian-process surrogate (squared-exponential kernel over the
// unit-scaled grid) with expected-improvement acquisition, warm-started
// from 3 seeded random points. A budget covering the whole grid degrades
// to exhaustive search and therefore returns the exact grid minimum.
TuneResult tune_lambdas(const TuneObjective& objective, const LambdaGrid& grid, int budget,
                        std::uint64_t seed);

}  // namespace fsum
