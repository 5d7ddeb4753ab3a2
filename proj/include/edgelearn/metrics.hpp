#pragma once

#include <cstddef>
#include <vector>

namespace edgelearn::metrics {

// Multiclass quality summary on one evaluation set.
//   precision: overall fraction of correct predictions.
//   recall:    per-class hit rates averaged over the classes actually present
//              in the truth vector (absent classes are excluded, not zeroed).
//   f_measure: harmonic mean of the two; defined as 0 when both are 0.
struct Scores {
    double precision = 0.0;
    double recall = 0.0;
    double f_measure = 0.0;
    std::size_t support = 0;  // number of evaluated samples
};

Scores score(const std::vector<int>& truth, const std::vector<int>& predicted, int num_classes);

double f_measure(double precision, double recall);

// Relative performance gain of a protocol step over a baseline,
//   rho = 1 - (1 - f_step) / (1 - f_base).
// Undefined when the baseline is already perfect; is_ppg_defined guards that.
bool is_ppg_defined(double f_base);
double ppg(double f_base, double f_step);

// Per-class hit rates, length k. Classes absent from the truth vector are
// flagged not-applicable with NaN.
std::vector<double> per_class_accuracy(const std::vector<int>& truth,
                                       const std::vector<int>& predicted, int num_classes);

// Mean with a two-sided 95% confidence half-width from Student's t
// distribution. With fewer than two values the half-width is 0.
struct MeanCI {
    double mean = 0.0;
    double half_width = 0.0;
    std::size_t n = 0;
};

MeanCI mean_ci95(const std::vector<double>& values);

// Critical value t_{0.975, df}; df > 30 uses the normal-limit value.
double t_critical_975(std::size_t df);

}  // namespace edgelearn::metrics
