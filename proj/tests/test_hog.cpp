#include "doctest.h"

#include <cmath>
#include <vector>

#include "edgelearn/common.hpp"
#include "edgelearn/hog.hpp"

using namespace edgelearn;

TEST_CASE("descriptor length is grid*grid*bins") {
    hog::HogConfig cfg;
    CHECK(hog::descriptor_dim(cfg) == 324);
    std::vector<double> img(784, 0.3);
    auto d = hog::descriptor(img, cfg);
    CHECK(d.size() == 324);
}

TEST_CASE("constant image has no gradients and a zero descriptor") {
    std::vector<double> img(784, 0.7);
    auto d = hog::descriptor(img);
    for (double v : d) CHECK(v == 0.0);
}

TEST_CASE("single bright pixel produces a normalized local histogram") {
    std::vector<double> img(784, 0.0);
    img[14 * 28 + 14] = 1.0;  // centre pixel
    auto d = hog::descriptor(img);
    double total = 0.0;
    for (double v : d) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0 + 1e-12);  // per-cell L2 normalization caps entries at 1
        total += v;
    }
    CHECK(total > 0.0);
    // Gradients exist only around the centre; the touched cells are L2-normal.
    hog::HogConfig cfg;
    int cells = cfg.grid * cfg.grid;
    int touched = 0;
    for (int c = 0; c < cells; ++c) {
        double ss = 0.0;
        for (int b = 0; b < cfg.bins; ++b) ss += d[c * cfg.bins + b] * d[c * cfg.bins + b];
        if (ss > 0.0) {
            CHECK(std::sqrt(ss) == doctest::Approx(1.0));
            ++touched;
        }
    }
    CHECK(touched >= 1);
}

TEST_CASE("horizontal edge lands in the vertical-gradient bin") {
    // Top half dark, bottom half bright: gradient points down the rows, so
    // the fold of atan2 lands the angle at pi/2 (middle bin of 9).
    std::vector<double> img(784, 0.0);
    for (int r = 14; r < 28; ++r)
        for (int c = 0; c < 28; ++c) img[r * 28 + c] = 1.0;
    auto d = hog::descriptor(img);
    hog::HogConfig cfg;
    // Collect the histogram mass per bin over all cells.
    std::vector<double> mass(cfg.bins, 0.0);
    for (int cell = 0; cell < cfg.grid * cfg.grid; ++cell)
        for (int b = 0; b < cfg.bins; ++b) mass[b] += d[cell * cfg.bins + b];
    int strongest = 0;
    for (int b = 1; b < cfg.bins; ++b)
        if (mass[b] > mass[strongest]) strongest = b;
    CHECK(strongest == cfg.bins / 2);
}

TEST_CASE("descriptor is deterministic and size-checked") {
    std::vector<double> img(784);
    for (std::size_t i = 0; i < img.size(); ++i) img[i] = std::sin(double(i) * 0.13) * 0.5 + 0.5;
    auto d1 = hog::descriptor(img);
    auto d2 = hog::descriptor(img);
    CHECK(d1 == d2);

    std::vector<double> wrong(100, 0.0);
    CHECK_THROWS_AS(hog::descriptor(wrong), DimensionError);
}
