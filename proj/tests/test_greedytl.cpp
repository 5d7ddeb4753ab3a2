#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "edgelearn/common.hpp"
#include "edgelearn/data.hpp"
#include "edgelearn/greedytl.hpp"

using namespace edgelearn;

namespace {

// Independent dense solver for (G + lambda I) w = r via Gaussian elimination
// with partial pivoting; deliberately a different algorithm from the
// library's Cholesky so agreement is meaningful.
std::vector<double> gauss_ridge(const std::vector<std::vector<double>>& columns,
                                const std::vector<double>& y, double lambda) {
    const std::size_t p = columns.size();
    const std::size_t m = y.size();
    std::vector<std::vector<double>> A(p, std::vector<double>(p + 1, 0.0));
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j < p; ++j) {
            double g = 0.0;
            for (std::size_t t = 0; t < m; ++t) g += columns[i][t] * columns[j][t];
            A[i][j] = g / double(m) + (i == j ? lambda : 0.0);
        }
        double b = 0.0;
        for (std::size_t t = 0; t < m; ++t) b += columns[i][t] * y[t];
        A[i][p] = b / double(m);
    }
    for (std::size_t col = 0; col < p; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < p; ++r)
            if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
        std::swap(A[col], A[piv]);
        for (std::size_t r = 0; r < p; ++r) {
            if (r == col) continue;
            double f = A[r][col] / A[col][col];
            for (std::size_t cc = col; cc <= p; ++cc) A[r][cc] -= f * A[col][cc];
        }
    }
    std::vector<double> w(p);
    for (std::size_t i = 0; i < p; ++i) w[i] = A[i][p] / A[i][i];
    return w;
}

// Penalized objective (1/m)|A w - y|^2 + lambda |w|^2 for a column subset.
double ridge_objective(const std::vector<std::vector<double>>& columns,
                       const std::vector<double>& y, const std::vector<double>& w,
                       double lambda) {
    const std::size_t m = y.size();
    double sq = 0.0;
    for (std::size_t t = 0; t < m; ++t) {
        double pred = 0.0;
        for (std::size_t j = 0; j < columns.size(); ++j) pred += w[j] * columns[j][t];
        double r = pred - y[t];
        sq += r * r;
    }
    double pen = 0.0;
    for (double v : w) pen += v * v;
    return sq / double(m) + lambda * pen;
}

std::vector<std::vector<double>> random_columns(std::size_t p, std::size_t m,
                                                std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<std::vector<double>> cols(p, std::vector<double>(m));
    for (auto& c : cols)
        for (auto& v : c) v = g(rng);
    return cols;
}

std::vector<double> random_targets(std::size_t m, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> y(m);
    for (auto& v : y) v = g(rng);
    return y;
}

LinearModel raw_source(std::vector<double> w, double b) {
    LinearModel m =
        LinearModel::zeros(w.size(), 0, ModelKind::base, "raw:" + std::to_string(w.size()));
    for (std::size_t i = 0; i < w.size(); ++i) m.coef[i] = w[i];
    m.intercept() = b;
    return m;
}

}  // namespace

TEST_CASE("ridge_solve agrees with an independent dense solver") {
    for (int inst = 0; inst < 25; ++inst) {
        std::size_t p = 1 + inst % 6, m = 5 + (inst * 7) % 20;
        auto cols = random_columns(p, m, 100 + inst);
        auto y = random_targets(m, 200 + inst);
        double lambda = 0.01 * (1 + inst % 5);
        auto a = learn::ridge_solve(cols, y, lambda);
        auto b = gauss_ridge(cols, y, lambda);
        REQUIRE(a.size() == p);
        for (std::size_t j = 0; j < p; ++j) CHECK(a[j] == doctest::Approx(b[j]).epsilon(1e-10));
    }
}

TEST_CASE("kappa = 0 fits the penalized intercept only") {
    auto y = std::vector<double>{1.0, 2.0, 3.0, 6.0};
    auto cols = random_columns(3, 4, 5);
    double lambda = 0.5;
    auto sel = learn::forward_select(cols, y, lambda, 0);
    CHECK(sel.support.empty());
    // min over b of (1/m)sum (b - y_t)^2 + lambda b^2  ->  b = mean(y)/(1+lambda).
    CHECK(sel.intercept == doctest::Approx(3.0 / 1.5));
    for (double c : sel.dense_coef) CHECK(c == 0.0);
}

TEST_CASE("duplicate columns tie to the lowest index") {
    std::vector<double> y = {1.0, -1.0, 1.0, -1.0};
    std::vector<double> useful = {1.0, -1.0, 1.0, -1.0};
    std::vector<std::vector<double>> cols = {useful, useful, useful};
    auto sel = learn::forward_select(cols, y, 1e-3, 1);
    REQUIRE(sel.support.size() == 1);
    CHECK(sel.support[0] == 0);
}

TEST_CASE("forward selection matches greedy enumeration step for step") {
    // Small instances; the oracle recomputes every candidate objective from a
    // dense solve at each step.
    for (int inst = 0; inst < 15; ++inst) {
        std::size_t p = 3 + inst % 4, m = 8 + inst % 9;
        int kappa = 1 + inst % 3;
        double lambda = 0.05 * (1 + inst % 3);
        auto cols = random_columns(p, m, 300 + inst);
        auto y = random_targets(m, 400 + inst);

        auto sel = learn::forward_select(cols, y, lambda, kappa);

        // Oracle: start with the intercept, greedily add the best column.
        std::vector<std::vector<double>> chosen = {std::vector<double>(m, 1.0)};
        std::vector<int> chosen_idx;
        auto w0 = gauss_ridge(chosen, y, lambda);
        double best_obj = ridge_objective(chosen, y, w0, lambda);
        std::vector<double> path = {best_obj};
        while (int(chosen_idx.size()) < kappa) {
            int best_j = -1;
            double cand_obj = best_obj;
            for (std::size_t j = 0; j < p; ++j) {
                bool used = false;
                for (int cj : chosen_idx) used = used || cj == int(j);
                if (used) continue;
                auto trial = chosen;
                trial.push_back(cols[j]);
                auto w = gauss_ridge(trial, y, lambda);
                double obj = ridge_objective(trial, y, w, lambda);
                if (obj < cand_obj - 1e-12) {
                    cand_obj = obj;
                    best_j = int(j);
                }
            }
            if (best_j < 0) break;
            chosen.push_back(cols[std::size_t(best_j)]);
            chosen_idx.push_back(best_j);
            best_obj = cand_obj;
            path.push_back(best_obj);
        }

        REQUIRE(sel.support.size() == chosen_idx.size());
        for (std::size_t t = 0; t < chosen_idx.size(); ++t) CHECK(sel.support[t] == chosen_idx[t]);
        REQUIRE(sel.objective_path.size() == path.size());
        for (std::size_t t = 0; t < path.size(); ++t)
            CHECK(sel.objective_path[t] == doctest::Approx(path[t]).epsilon(1e-6));
        CHECK(sel.objective == doctest::Approx(path.back()).epsilon(1e-6));
    }
}

TEST_CASE("objective path is strictly decreasing over acceptances") {
    auto cols = random_columns(6, 20, 77);
    auto y = random_targets(20, 78);
    auto sel = learn::forward_select(cols, y, 0.01, 4);
    for (std::size_t t = 1; t < sel.objective_path.size(); ++t)
        CHECK(sel.objective_path[t] < sel.objective_path[t - 1]);
}

TEST_CASE("incremental factorization agrees with the from-scratch refit") {
    for (int inst = 0; inst < 20; ++inst) {
        auto cols = random_columns(8, 25, 900 + inst);
        auto y = random_targets(25, 950 + inst);
        auto sel = learn::forward_select(cols, y, 0.02, 5);
        // incremental_coef = [intercept, support coefficients...]; the dense
        // refit solves the same system from scratch.
        REQUIRE(sel.incremental_coef.size() == sel.support.size() + 1);
        CHECK(sel.incremental_coef[0] == doctest::Approx(sel.intercept).epsilon(1e-10));
        for (std::size_t t = 0; t < sel.support.size(); ++t)
            CHECK(sel.incremental_coef[t + 1] ==
                  doctest::Approx(sel.dense_coef[std::size_t(sel.support[t])]).epsilon(1e-10));
    }
}

TEST_CASE("a perfectly informative source column is selected via its beta") {
    // Local features are noise; one source model predicts the target exactly.
    std::mt19937_64 rng(321);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<data::Sample> samples;
    std::vector<int> targets;
    for (int i = 0; i < 60; ++i) {
        double hidden = g(rng);
        // Feature 2 carries the label; features 0 and 1 are noise. The source
        // model is the only candidate that amplifies feature 2 strongly, so
        // with kappa = 1 its margin column must win the selection.
        samples.push_back({{g(rng), g(rng), hidden}, 1});
        targets.push_back(hidden > 0 ? +1 : -1);
    }
    // Source model reads feature 2 only.
    learn::SourceSet sources = {raw_source({0.0, 0.0, 5.0}, 0.0)};
    auto scaler = data::Scaler::fit(samples);
    learn::GreedyTLConfig cfg;
    cfg.kappa = 1;
    cfg.bag_sample_size = 60;
    cfg.bag_count = 1;
    cfg.source_clip = 1.0;
    cfg.seed = 9;
    auto m = learn::greedy_tl(samples, targets, scaler, sources, cfg);
    REQUIRE(m.num_sources == 1);
    // The beta coefficient on the informative source carries the fit.
    CHECK(std::abs(m.betas()[0]) > 1e-3);
    int correct = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        auto sf = learn::source_features(samples[i].features.data(), 3, sources, cfg.source_clip);
        double margin = m.margin(samples[i].features.data(), 3, sf.data(), sf.size());
        if ((margin >= 0 ? +1 : -1) == targets[i]) ++correct;
    }
    CHECK(correct >= 55);
}

TEST_CASE("greedy_tl validates its configuration") {
    std::vector<data::Sample> samples = {{{1.0}, 1}, {{2.0}, 2}};
    std::vector<int> targets = {+1, -1};
    auto scaler = data::Scaler::fit(samples);
    learn::GreedyTLConfig cfg;
    cfg.kappa = 50;  // exceeds d + L + 1 = 2
    CHECK_THROWS_AS(learn::greedy_tl(samples, targets, scaler, {}, cfg), ConfigError);

    learn::GreedyTLConfig small = cfg;
    small.kappa = 1;
    small.bag_sample_size = 0;
    CHECK_THROWS_AS(learn::greedy_tl(samples, targets, scaler, {}, small), ConfigError);
}

TEST_CASE("greedy_tl is deterministic in the seed and bags average") {
    auto pool = data::synth_blobs(2, 6, 50, 2.0, 55);
    std::vector<int> targets;
    for (const auto& s : pool) targets.push_back(s.label == 1 ? +1 : -1);
    auto scaler = data::Scaler::fit(pool);
    learn::GreedyTLConfig cfg;
    cfg.kappa = 4;
    cfg.bag_sample_size = 30;
    cfg.bag_count = 3;
    cfg.seed = 41;
    auto a = learn::greedy_tl(pool, targets, scaler, {}, cfg);
    auto b = learn::greedy_tl(pool, targets, scaler, {}, cfg);
    CHECK(a.coef == b.coef);
    cfg.seed = 42;
    auto c = learn::greedy_tl(pool, targets, scaler, {}, cfg);
    CHECK(a.coef != c.coef);
}

TEST_CASE("source_features clamps margins symmetrically") {
    learn::SourceSet sources = {raw_source({3.0}, 0.0)};
    double x = 2.0;
    auto clipped = learn::source_features(&x, 1, sources, 1.5);
    CHECK(clipped[0] == doctest::Approx(1.5));
    double xm = -2.0;
    auto clipped2 = learn::source_features(&xm, 1, sources, 1.5);
    CHECK(clipped2[0] == doctest::Approx(-1.5));
    auto raw = learn::source_features(&x, 1, sources, 0.0);
    CHECK(raw[0] == doctest::Approx(6.0));
}
