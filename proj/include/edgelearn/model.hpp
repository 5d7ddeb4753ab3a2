#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace edgelearn {

enum class ModelKind { base, gtl, aggregate };

std::string to_string(ModelKind k);
ModelKind model_kind_from_string(const std::string& s);

// Binary linear classifier over the raw feature space, optionally augmented
// with source-prediction features. Coefficient layout is a single vector
//   [ w_0 .. w_{d-1} | beta_0 .. beta_{L-1} | intercept ]
// so averaging, corruption and non-null counting treat all parameters
// uniformly. L == 0 for base and plain-aggregate models.
struct LinearModel {
    std::vector<double> coef;
    std::size_t dim = 0;           // d, raw feature count
    std::size_t num_sources = 0;   // L
    ModelKind kind = ModelKind::base;
    std::string feature_space_id;
    double source_clip = 0.0;  // clip bound used when the beta block was fit; 0 = none
    bool degenerate = false;   // single-class training data

    static LinearModel zeros(std::size_t dim, std::size_t num_sources, ModelKind kind,
                             std::string feature_space_id);

    std::size_t size() const { return coef.size(); }
    double intercept() const { return coef[dim + num_sources]; }
    double& intercept() { return coef[dim + num_sources]; }
    const double* weights() const { return coef.data(); }
    const double* betas() const { return coef.data() + dim; }

    // Raw-feature margin w.x + b; beta block must be empty.
    double margin(const double* x, std::size_t n) const;
    // Augmented margin w.x + sum_i beta_i * s_i + b, with s_i the (already
    // clipped) source predictions for x.
    double margin(const double* x, std::size_t n, const double* source_values,
                  std::size_t num_values) const;

    std::size_t non_null_count(double eps_zero) const;
    bool all_finite() const;
};

// Wire/file record: {version, feature_space_id, kind, dense or sparse payload}.
// Sparse payloads carry (index,value) pairs; this is also what the network
// simulator meters.
std::string to_json(const LinearModel& m, bool sparse);
LinearModel model_from_json(const std::string& json_text);

}  // namespace edgelearn
