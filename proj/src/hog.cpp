#include "edgelearn/hog.hpp"

#include <algorithm>
#include <cmath>

#include "edgelearn/common.hpp"

namespace edgelearn::hog {

std::vector<double> descriptor(const double* image, const HogConfig& cfg) {
    const int n = cfg.image_size;
    const int g = cfg.grid;
    const int nb = cfg.bins;
    if (n < 2 || g < 1 || nb < 1) throw ConfigError("hog: invalid configuration");

    std::vector<double> out(std::size_t(g) * g * nb, 0.0);
    auto at = [&](int r, int c) { return image[r * n + c]; };

    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            // Central differences, borders clamped to the edge pixel.
            int cl = std::max(c - 1, 0), cr = std::min(c + 1, n - 1);
            int rt = std::max(r - 1, 0), rb = std::min(r + 1, n - 1);
            double gx = at(r, cr) - at(r, cl);
            double gy = at(rb, c) - at(rt, c);
            double mag = std::sqrt(gx * gx + gy * gy);
            if (mag == 0.0) continue;

            // Unsigned orientation in [0, pi).
            double theta = std::atan2(gy, gx);
            if (theta < 0.0) theta += M_PI;
            if (theta >= M_PI) theta -= M_PI;
            int bin = std::min(int(theta / M_PI * nb), nb - 1);

            int cell_r = r * g / n;
            int cell_c = c * g / n;
            out[(std::size_t(cell_r) * g + cell_c) * nb + bin] += mag;
        }
    }

    // Per-cell L2 normalization; zero-energy cells are left as zeros.
    for (int cell = 0; cell < g * g; ++cell) {
        double* h = out.data() + std::size_t(cell) * nb;
        double norm2 = 0.0;
        for (int b = 0; b < nb; ++b) norm2 += h[b] * h[b];
        if (norm2 > 0.0) {
            double inv = 1.0 / std::sqrt(norm2);
            for (int b = 0; b < nb; ++b) h[b] *= inv;
        }
    }
    return out;
}

std::vector<double> descriptor(const std::vector<double>& image, const HogConfig& cfg) {
    if (image.size() != std::size_t(cfg.image_size) * cfg.image_size)
        throw DimensionError("hog: image size does not match configuration");
    return descriptor(image.data(), cfg);
}

}  // namespace edgelearn::hog
