#pragma once

#include <cstdint>
#include <vector>

#include "edgelearn/data.hpp"
#include "edgelearn/model.hpp"

namespace edgelearn::learn {

struct GreedyTLConfig {
    double lambda = 1e-2;      // Tikhonov weight on all coefficients
    int kappa = 50;            // sparsity budget over feature + source columns
    int bag_sample_size = 50;  // m, rows per bag; capped at the local set size
    int bag_count = 0;         // 0 = auto: min(20, max(1, ceil(n/m)))
    double source_clip = 1.0;  // clip bound for source predictions; <= 0 disables
    std::uint64_t seed = 0;
};

// Source models imported from other locations, in a stable global order
// (ascending location id) that every location reproduces identically.
using SourceSet = std::vector<LinearModel>;

// i-th entry = sources[i]'s raw margin on x, clamped to [-clip, +clip] when
// clip > 0. Sources must be raw-space models without beta blocks.
std::vector<double> source_features(const double* x, std::size_t d, const SourceSet& sources,
                                    double clip);

// Exact solution of (A^T A / m + lambda I) w = A^T y / m where A's columns are
// columns[0..p-1], each of length m. Solved by Cholesky; lambda > 0 keeps the
// system positive definite.
std::vector<double> ridge_solve(const std::vector<std::vector<double>>& columns,
                                const std::vector<double>& targets, double lambda);

// One regularized least-squares forward-regression pass over candidate
// columns. The intercept (constant-1 column) is always included first and is
// exempt from the kappa budget; remaining columns are accepted greedily while
// the penalized objective
//   (1/m) |A_S w - y|^2 + lambda |w|^2
// strictly improves, at most kappa of them. Ties on the objective break to the
// lowest column index.
struct ForwardSelection {
    std::vector<int> support;              // accepted candidate indices, acceptance order
    std::vector<double> dense_coef;        // per-candidate coefficients (zeros off-support)
    double intercept = 0.0;
    double objective = 0.0;                // final penalized objective
    std::vector<double> objective_path;    // objective before any / after each acceptance
    std::vector<double> incremental_coef;  // solution straight from the incremental
                                           // factorization: [intercept, support...]
};

ForwardSelection forward_select(const std::vector<std::vector<double>>& columns,
                                const std::vector<double>& targets, double lambda, int kappa);

// GreedyTL: hypothesis transfer by forward regression over the d z-scored
// feature columns plus the L clipped source-prediction columns, bagged over
// bag_count random row samples of size m and averaged coefficient-wise. The
// returned model lives in raw coordinates (the z-fit is folded back), so it
// can be exchanged directly.
LinearModel greedy_tl(const std::vector<data::Sample>& samples, const std::vector<int>& targets,
                      const data::Scaler& scaler, const SourceSet& sources,
                      const GreedyTLConfig& cfg);

}  // namespace edgelearn::learn
