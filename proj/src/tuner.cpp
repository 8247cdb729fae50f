#include "fsum/tuner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "fsum/util.hpp"

namespace fsum {

namespace {

constexpr double kKernelLengthScale = 0.5;  // in unit-scaled grid coordinates
constexpr double kJitter = 1e-8;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }

// Maps each axis to [0, 1]; pinned (single-value) axes contribute nothing
// to kernel distances.
std::vector<std::array<double, 3>> unit_scale(const std::vector<LambdaTriple>& points,
                                              const LambdaGrid& grid) {
    auto axis_range = [](const std::vector<double>& values) {
        const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
        return std::pair<double, double>(*mn, *mx - *mn);
    };
    const auto [g0, gr] = axis_range(grid.gen_values);
    const auto [k0, kr] = axis_range(grid.k_values);
    const auto [e0, er] = axis_range(grid.e_values);
    std::vector<std::array<double, 3>> scaled(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        scaled[i] = {gr > 0 ? (points[i].lambda_gen - g0) / gr : 0.0,
                     kr > 0 ? (points[i].lambda_k - k0) / kr : 0.0,
                     er > 0 ? (points[i].lambda_e - e0) / er : 0.0};
    }
    return scaled;
}

double kernel(const std::array<double, 3>& a, const std::array<double, 3>& b) {
    double sq = 0.0;
    for (int i = 0; i < 3; ++i) {
        const double d = a[i] - b[i];
        sq += d * d;
    }
    return std::exp(-sq / (2.0 * kKernelLengthScale * kKernelLengthScale));
}

// In-place Cholesky factorization of a symmetric positive-definite matrix
// stored row-major; returns the lower triangle.
void cholesky(std::vector<double>& a, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double sum = a[i * n + j];
            for (std::size_t k = 0; k < j; ++k) {
                sum -= a[i * n + k] * a[j * n + k];
            }
            if (i == j) {
                if (sum <= 0.0) {
                    throw std::runtime_error("tuner: surrogate covariance not positive definite");
                }
                a[i * n + i] = std::sqrt(sum);
            } else {
                a[i * n + j] = sum / a[j * n + j];
            }
        }
    }
}

// Solves L L^T x = b given the Cholesky factor L.
std::vector<double> cholesky_solve(const std::vector<double>& l, std::size_t n,
                                   std::vector<double> b) {
    for (std::size_t i = 0; i < n; ++i) {
        double sum = b[i];
        for (std::size_t k = 0; k < i; ++k) sum -= l[i * n + k] * b[k];
        b[i] = sum / l[i * n + i];
    }
    for (std::size_t i = n; i-- > 0;) {
        double sum = b[i];
        for (std::size_t k = i + 1; k < n; ++k) sum -= l[k * n + i] * b[k];
        b[i] = sum / l[i * n + i];
    }
    return b;
}

}  // namespace

LambdaGrid LambdaGrid::full() { return LambdaGrid{}; }

LambdaGrid LambdaGrid::gen_only() {
    LambdaGrid g;
    g.k_values = {0.0};
    g.e_values = {0.0};
    return g;
}

LambdaGrid LambdaGrid::dual_moo() {
    LambdaGrid g;
    g.k_values = {0.0};
    return g;
}

LambdaGrid LambdaGrid::triple_moo() { return LambdaGrid{}; }

std::vector<LambdaTriple> LambdaGrid::points() const {
    if (gen_values.empty() || k_values.empty() || e_values.empty()) {
        throw std::invalid_argument("lambda grid: every axis needs at least one value");
    }
    std::vector<LambdaTriple> pts;
    pts.reserve(gen_values.size() * k_values.size() * e_values.size());
    for (double g : gen_values) {
        for (double k : k_values) {
            for (double e : e_values) {
                LambdaTriple lt{g, k, e};
                lt.validate();
                pts.push_back(lt);
            }
        }
    }
    return pts;
}

TuneResult tune_lambdas(const TuneObjective& objective, const LambdaGrid& grid, int budget,
                        std::uint64_t seed) {
    if (budget < 2) {
        throw std::invalid_argument("tune_lambdas: budget must be >= 2");
    }
    const std::vector<LambdaTriple> points = grid.points();
    const auto scaled = unit_scale(points, grid);
    const std::size_t total = points.size();
    const std::size_t max_evals = std::min<std::size_t>(static_cast<std::size_t>(budget), total);

    TuneResult result;
    std::vector<char> evaluated(total, 0);
    std::vector<std::size_t> eval_indices;
    std::vector<double> raw_losses;

    auto evaluate_point = [&](std::size_t idx) {
        double y = objective(points[idx]);
        if (!std::isfinite(y)) {
            y = std::numeric_limits<double>::infinity();
        }
        evaluated[idx] = 1;
        eval_indices.push_back(idx);
        raw_losses.push_back(y);
        result.evaluations.push_back(TuneEvaluation{points[idx], y});
    };

    if (max_evals >= total) {
        // Exhaustive sweep in canonical order.
        for (std::size_t i = 0; i < total; ++i) {
            evaluate_point(i);
        }
    } else {
        std::mt19937_64 rng(seed);
        const std::size_t init_count = std::min<std::size_t>(3, max_evals);
        while (eval_indices.size() < init_count) {
            const std::size_t idx = static_cast<std::size_t>(uniform_below(rng, total));
            if (!evaluated[idx]) {
                evaluate_point(idx);
            }
        }

        while (eval_indices.size() < max_evals) {
            const std::size_t n = eval_indices.size();

            // Non-finite observations enter the surrogate as a large finite
            // penalty so they repel the search without breaking the fit.
            double finite_max = -std::numeric_limits<double>::infinity();
            for (double y : raw_losses) {
                if (std::isfinite(y)) finite_max = std::max(finite_max, y);
            }
            std::vector<double> y(n);
            for (std::size_t i = 0; i < n; ++i) {
                y[i] = std::isfinite(raw_losses[i])
                           ? raw_losses[i]
                           : (std::isfinite(finite_max) ? finite_max + 1.0 : 1.0);
            }
            double mean = 0.0;
            for (double v : y) mean += v;
            mean /= static_cast<double>(n);
            double var = 0.0;
            for (double v : y) var += (v - mean) * (v - mean);
            double sd = std::sqrt(var / static_cast<double>(n));
            if (sd < 1e-12) sd = 1.0;
            for (double& v : y) v = (v - mean) / sd;
            const double y_best = *std::min_element(y.begin(), y.end());

            std::vector<double> k_mat(n * n);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    k_mat[i * n + j] = kernel(scaled[eval_indices[i]], scaled[eval_indices[j]]);
                }
                k_mat[i * n + i] += kJitter;
            }
            cholesky(k_mat, n);
            const std::vector<double> alpha = cholesky_solve(k_mat, n, y);

            std::size_t best_idx = total;
            double best_ei = -1.0;
            std::vector<double> k_star(n);
            for (std::size_t c = 0; c < total; ++c) {
                if (evaluated[c]) continue;
                for (std::size_t i = 0; i < n; ++i) {
                    k_star[i] = kernel(scaled[c], scaled[eval_indices[i]]);
                }
                double mu = 0.0;
                for (std::size_t i = 0; i < n; ++i) mu += k_star[i] * alpha[i];
                const std::vector<double> v = cholesky_solve(k_mat, n, k_star);
                double var_c = 1.0 + kJitter;
                for (std::size_t i = 0; i < n; ++i) var_c -= k_star[i] * v[i];
                const double sigma = std::sqrt(std::max(var_c, 0.0));

                double ei;
                if (sigma < 1e-12) {
                    ei = std::max(y_best - mu, 0.0);
                } else {
                    const double z = (y_best - mu) / sigma;
                    ei = (y_best - mu) * normal_cdf(z) + sigma * normal_pdf(z);
                }
                if (ei > best_ei) {
                    best_ei = ei;
                    best_idx = c;
                }
            }
            if (best_idx == total) {
                break;  // nothing left to evaluate
            }
            evaluate_point(best_idx);
        }
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i < raw_losses.size(); ++i) {
        if (raw_losses[i] < raw_losses[best]) {
            best = i;
        }
    }
    if (!std::isfinite(raw_losses[best])) {
        throw std::runtime_error("tune_lambdas: every evaluated point returned a non-finite loss");
    }
    result.best = result.evaluations[best].lambdas;
    result.best_loss = raw_losses[best];
    result.evaluation_count = static_cast<int>(result.evaluations.size());
    return result;
}

}  // namespace fsum
