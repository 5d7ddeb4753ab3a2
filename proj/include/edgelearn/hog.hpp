#pragma once

#include <cstddef>
#include <vector>

namespace edgelearn::hog {

struct HogConfig {
    int image_size = 28;   // square input
    int grid = 6;          // grid x grid cells
    int bins = 9;          // unsigned orientation bins over [0, pi)
};

inline int descriptor_dim(const HogConfig& cfg) { return cfg.grid * cfg.grid * cfg.bins; }

// Histogram-of-oriented-gradients descriptor. Central-difference gradients
// with clamped borders, hard orientation binning, per-cell L2 normalization
// (cells with zero energy stay zero). 28x28 input with the default config
// yields 6*6*9 = 324 values.
std::vector<double> descriptor(const double* image, const HogConfig& cfg = {});

std::vector<double> descriptor(const std::vector<double>& image, const HogConfig& cfg = {});

}  // namespace edgelearn::hog
