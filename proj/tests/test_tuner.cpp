#include "fsum/tuner.hpp"

#include <cmath>
#include <limits>

#include "doctest.h"

using namespace fsum;

namespace {

double squared_distance_to(const LambdaTriple& x, const LambdaTriple& target) {
    const double dg = x.lambda_gen - target.lambda_gen;
    const double dk = x.lambda_k - target.lambda_k;
    const double de = x.lambda_e - target.lambda_e;
    return dg * dg + dk * dk + de * de;
}

}  // namespace

TEST_CASE("lambda grids enumerate the expected points") {
    CHECK(LambdaGrid::full().points().size() == 27);
    CHECK(LambdaGrid::triple_moo().points().size() == 27);
    CHECK(LambdaGrid::dual_moo().points().size() == 9);
    CHECK(LambdaGrid::gen_only().points().size() == 3);

    for (const LambdaTriple& p : LambdaGrid::dual_moo().points()) {
        CHECK(p.lambda_k == 0.0);
    }
    for (const LambdaTriple& p : LambdaGrid::gen_only().points()) {
        CHECK(p.lambda_k == 0.0);
        CHECK(p.lambda_e == 0.0);
    }
    for (const LambdaTriple& p : LambdaGrid::full().points()) {
        for (double v : {p.lambda_gen, p.lambda_k, p.lambda_e}) {
            CHECK(v >= 0.1);
            CHECK(v <= 0.9);
        }
    }
}

TEST_CASE("exhaustive budget returns the exact planted optimum") {
    const LambdaTriple target{0.4, 0.4, 0.7};
    const auto objective = [&](const LambdaTriple& x) { return squared_distance_to(x, target); };
    const TuneResult result = tune_lambdas(objective, LambdaGrid::full(), 27, 1);
    CHECK(result.evaluation_count == 27);
    CHECK(result.best.lambda_gen == 0.4);
    CHECK(result.best.lambda_k == 0.4);
    CHECK(result.best.lambda_e == 0.7);
    CHECK(result.best_loss == 0.0);
}

TEST_CASE("budget 3 evaluates exactly 3 points and best is their minimum") {
    const LambdaTriple target{0.7, 0.1, 0.1};
    const auto objective = [&](const LambdaTriple& x) { return squared_distance_to(x, target); };
    const TuneResult result = tune_lambdas(objective, LambdaGrid::full(), 3, 42);
    CHECK(result.evaluation_count == 3);
    REQUIRE(result.evaluations.size() == 3);
    double min_loss = std::numeric_limits<double>::infinity();
    for (const TuneEvaluation& e : result.evaluations) {
        min_loss = std::min(min_loss, e.loss);
    }
    CHECK(result.best_loss == min_loss);
}

TEST_CASE("expected improvement finds the planted optimum with budget 15") {
    const LambdaTriple target{0.4, 0.4, 0.7};
    const auto objective = [&](const LambdaTriple& x) { return squared_distance_to(x, target); };
    int hits = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const TuneResult result = tune_lambdas(objective, LambdaGrid::full(), 15, seed);
        CHECK(result.evaluation_count == 15);
        if (result.best.lambda_gen == 0.4 && result.best.lambda_k == 0.4 &&
            result.best.lambda_e == 0.7) {
            ++hits;
        }
    }
    CHECK(hits >= 4);
}

TEST_CASE("budget is capped by the grid size") {
    const auto objective = [](const LambdaTriple& x) { return x.lambda_gen; };
    const TuneResult result = tune_lambdas(objective, LambdaGrid::gen_only(), 100, 3);
    CHECK(result.evaluation_count == 3);
    CHECK(result.best.lambda_gen == 0.1);
}

TEST_CASE("non-finite objective values are recorded as +inf and skipped") {
    const auto objective = [](const LambdaTriple& x) {
        if (x.lambda_gen == 0.1) {
            return std::numeric_limits<double>::quiet_NaN();
        }
        return x.lambda_gen + x.lambda_k + x.lambda_e;
    };
    const TuneResult result = tune_lambdas(objective, LambdaGrid::full(), 27, 7);
    CHECK(result.evaluation_count == 27);
    CHECK(result.best.lambda_gen == 0.4);
    CHECK(result.best.lambda_k == 0.1);
    CHECK(result.best.lambda_e == 0.1);
    int inf_count = 0;
    for (const TuneEvaluation& e : result.evaluations) {
        if (std::isinf(e.loss)) ++inf_count;
    }
    CHECK(inf_count == 9);
}

TEST_CASE("all-non-finite objective is an error") {
    const auto objective = [](const LambdaTriple&) {
        return std::numeric_limits<double>::infinity();
    };
    CHECK_THROWS(tune_lambdas(objective, LambdaGrid::gen_only(), 3, 1));
}

TEST_CASE("budget below 2 is rejected") {
    const auto objective = [](const LambdaTriple&) { return 0.0; };
    CHECK_THROWS(tune_lambdas(objective, LambdaGrid::full(), 1, 1));
}

TEST_CASE("tuner is deterministic per seed") {
    const LambdaTriple target{0.1, 0.7, 0.4};
    const auto objective = [&](const LambdaTriple& x) { return squared_distance_to(x, target); };
    const TuneResult a = tune_lambdas(objective, LambdaGrid::full(), 10, 11);
    const TuneResult b = tune_lambdas(objective, LambdaGrid::full(), 10, 11);
    REQUIRE(a.evaluations.size() == b.evaluations.size());
    for (std::size_t i = 0; i < a.evaluations.size(); ++i) {
        CHECK(a.evaluations[i].lambdas.lambda_gen == b.evaluations[i].lambdas.lambda_gen);
        CHECK(a.evaluations[i].lambdas.lambda_k == b.evaluations[i].lambdas.lambda_k);
        CHECK(a.evaluations[i].lambdas.lambda_e == b.evaluations[i].lambdas.lambda_e);
        CHECK(a.evaluations[i].loss == b.evaluations[i].loss);
    }
}
