#pragma once

#include <cstdint>
#include <vector>

#include "edgelearn/data.hpp"
#include "edgelearn/model.hpp"

namespace edgelearn::learn {

struct SvmConfig {
    double C = 1.0;
    int max_epochs = 200;
    double tol = 1e-6;
    std::uint64_t seed = 0;
};

// Binary L2-regularized hinge-loss SVM via dual coordinate descent. The
// intercept travels as a constant-1 augmented feature (regularized like any
// other weight). rows[i] points at a feature vector of length d; y[i] is +-1.
// Single-sign data yields the constant classifier for that sign, flagged
// degenerate instead of raising.
LinearModel train_svm(const std::vector<const double*>& rows, const std::vector<int>& y,
                      std::size_t d, const SvmConfig& cfg);

// Primal objective 0.5*(|w|^2 + b^2) + C * sum_i hinge(y_i, margin_i), used by
// tests to check that training never loses to the zero model.
double svm_objective(const LinearModel& model, const std::vector<const double*>& rows,
                     const std::vector<int>& y, double C);

// Rewrites a model fitted on z-scored features into raw-space coordinates:
// w_raw[j] = w[j] / sigma_j, intercept_raw = b - sum_j w[j] mu_j / sigma_j.
// The beta block (if any) is untouched because source predictions are
// computed from raw inputs.
LinearModel fold_back(const LinearModel& z_model, const data::Scaler& scaler);

}  // namespace edgelearn::learn
