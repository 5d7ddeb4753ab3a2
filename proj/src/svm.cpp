#include "edgelearn/svm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "edgelearn/common.hpp"
#include "edgelearn/kernels.hpp"

namespace edgelearn::learn {

LinearModel train_svm(const std::vector<const double*>& rows, const std::vector<int>& y,
                      std::size_t d, const SvmConfig& cfg) {
    if (rows.empty() || rows.size() != y.size())
        throw DimensionError("train_svm: empty data or label length mismatch");
    if (cfg.C <= 0.0 || cfg.tol <= 0.0)
        throw ConfigError("train_svm: C and tolerance must be positive");

    const std::size_t n = rows.size();
    bool has_pos = false, has_neg = false;
    for (int yi : y) {
        if (yi == +1) has_pos = true;
        else if (yi == -1) has_neg = true;
        else throw ConfigError("train_svm: labels must be +-1");
    }

    LinearModel m = LinearModel::zeros(d, 0, ModelKind::base, "");
    if (!has_pos || !has_neg) {
        // Single-class location: constant classifier for the observed sign.
        m.intercept() = has_pos ? 1.0 : -1.0;
        m.degenerate = true;
        return m;
    }

    // Dual coordinate descent on
    //   min_a 0.5 a^T Q a - e^T a,  0 <= a_i <= C,  Q_ij = y_i y_j (x_i.x_j + 1)
    // (the +1 is the intercept feature). Maintains w and b as the primal image
    // of a; stops when the largest projected gradient over an epoch is below
    // tol or after max_epochs sweeps.
    std::vector<double> alpha(n, 0.0), qdiag(n);
    for (std::size_t i = 0; i < n; ++i) qdiag[i] = kernels::dot(rows[i], rows[i], d) + 1.0;

    std::vector<double> w(d, 0.0);
    double b = 0.0;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(derive_seed(cfg.seed, 0x53564dull));

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double max_pg = 0.0;
        for (std::size_t i : order) {
            double g = y[i] * (kernels::dot(w.data(), rows[i], d) + b) - 1.0;
            double pg = g;
            if (alpha[i] <= 0.0) pg = std::min(g, 0.0);
            else if (alpha[i] >= cfg.C) pg = std::max(g, 0.0);
            max_pg = std::max(max_pg, std::fabs(pg));
            if (std::fabs(pg) < 1e-14) continue;

            double a_new = std::clamp(alpha[i] - g / qdiag[i], 0.0, cfg.C);
            double delta = (a_new - alpha[i]) * y[i];
            if (delta == 0.0) continue;
            alpha[i] = a_new;
            kernels::axpy(delta, rows[i], w.data(), d);
            b += delta;
        }
        if (max_pg < cfg.tol) break;
    }

    std::copy(w.begin(), w.end(), m.coef.begin());
    m.intercept() = b;
    if (!m.all_finite()) throw NumericError("train_svm: non-finite coefficients");
    return m;
}

double svm_objective(const LinearModel& model, const std::vector<const double*>& rows,
                     const std::vector<int>& y, double C) {
    const std::size_t d = model.dim;
    double reg = 0.5 * (kernels::sumsq(model.weights(), d) +
                        model.intercept() * model.intercept());
    double hinge = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        double margin = y[i] * model.margin(rows[i], d);
        hinge += std::max(0.0, 1.0 - margin);
    }
    return reg + C * hinge;
}

LinearModel fold_back(const LinearModel& z_model, const data::Scaler& scaler) {
    if (scaler.mean.size() != z_model.dim)
        throw DimensionError("fold_back: scaler dimensionality mismatch");
    LinearModel raw = z_model;
    if (!scaler.enabled) return raw;
    double shift = 0.0;
    for (std::size_t j = 0; j < z_model.dim; ++j) {
        raw.coef[j] = z_model.coef[j] * scaler.inv_std[j];
        shift += z_model.coef[j] * scaler.mean[j] * scaler.inv_std[j];
    }
    raw.intercept() = z_model.intercept() - shift;
    return raw;
}

}  // namespace edgelearn::learn
