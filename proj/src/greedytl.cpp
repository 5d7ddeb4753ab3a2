#include "edgelearn/greedytl.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "edgelearn/common.hpp"
#include "edgelearn/kernels.hpp"
#include "edgelearn/svm.hpp"

namespace edgelearn::learn {

std::vector<double> source_features(const double* x, std::size_t d, const SourceSet& sources,
                                    double clip) {
    std::vector<double> out(sources.size());
    for (std::size_t i = 0; i < sources.size(); ++i) {
        const LinearModel& src = sources[i];
        if (src.dim != d || src.num_sources != 0)
            throw DimensionError("source_features: source model does not match the raw space");
        double margin = src.margin(x, d);
        if (clip > 0.0) margin = std::clamp(margin, -clip, clip);
        out[i] = margin;
    }
    return out;
}

namespace {

void check_finite_columns(const std::vector<std::vector<double>>& columns,
                          const std::vector<double>& targets) {
    for (double v : targets)
        if (!std::isfinite(v)) throw NumericError("ridge: non-finite target");
    for (const auto& col : columns)
        for (double v : col)
            if (!std::isfinite(v)) throw NumericError("ridge: non-finite column entry");
}

// Dense Cholesky solve of G w = rhs for symmetric positive definite G (row
// major, p x p). Overwrites G with its factor.
std::vector<double> cholesky_solve(std::vector<double>& G, std::vector<double> rhs,
                                   std::size_t p) {
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double s = G[i * p + j];
            for (std::size_t t = 0; t < j; ++t) s -= G[i * p + t] * G[j * p + t];
            if (i == j) {
                if (s <= 0.0) throw NumericError("ridge: matrix not positive definite");
                G[i * p + i] = std::sqrt(s);
            } else {
                G[i * p + j] = s / G[j * p + j];
            }
        }
    }
    // Forward then backward substitution.
    for (std::size_t i = 0; i < p; ++i) {
        double s = rhs[i];
        for (std::size_t t = 0; t < i; ++t) s -= G[i * p + t] * rhs[t];
        rhs[i] = s / G[i * p + i];
    }
    for (std::size_t ii = p; ii-- > 0;) {
        double s = rhs[ii];
        for (std::size_t t = ii + 1; t < p; ++t) s -= G[t * p + ii] * rhs[t];
        rhs[ii] = s / G[ii * p + ii];
    }
    return rhs;
}

}  // namespace

std::vector<double> ridge_solve(const std::vector<std::vector<double>>& columns,
                                const std::vector<double>& targets, double lambda) {
    if (lambda <= 0.0) throw ConfigError("ridge_solve: lambda must be positive");
    const std::size_t p = columns.size();
    const std::size_t m = targets.size();
    if (m == 0) throw DimensionError("ridge_solve: empty targets");
    for (const auto& col : columns)
        if (col.size() != m) throw DimensionError("ridge_solve: column length mismatch");
    check_finite_columns(columns, targets);
    if (p == 0) return {};

    const double inv_m = 1.0 / double(m);
    std::vector<double> G(p * p, 0.0), rhs(p);
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double v = kernels::dot(columns[i].data(), columns[j].data(), m) * inv_m;
            G[i * p + j] = v;
            G[j * p + i] = v;
        }
        G[i * p + i] += lambda;
        rhs[i] = kernels::dot(columns[i].data(), targets.data(), m) * inv_m;
    }
    return cholesky_solve(G, std::move(rhs), p);
}

ForwardSelection forward_select(const std::vector<std::vector<double>>& columns,
                                const std::vector<double>& targets, double lambda, int kappa) {
    if (lambda <= 0.0) throw ConfigError("forward_select: lambda must be positive");
    if (kappa < 0) throw ConfigError("forward_select: kappa must be non-negative");
    const std::size_t p = columns.size();
    const std::size_t m = targets.size();
    if (m == 0) throw DimensionError("forward_select: empty targets");
    for (const auto& col : columns)
        if (col.size() != m) throw DimensionError("forward_select: column length mismatch");
    check_finite_columns(columns, targets);

    const double inv_m = 1.0 / double(m);
    const std::size_t max_sel = std::min<std::size_t>(std::size_t(kappa), p);

    // Per-candidate constants.
    std::vector<double> diag(p), b(p);
    for (std::size_t j = 0; j < p; ++j) {
        diag[j] = kernels::sumsq(columns[j].data(), m) * inv_m + lambda;
        b[j] = kernels::dot(columns[j].data(), targets.data(), m) * inv_m;
    }

    // Incremental Cholesky over the growing selected set S, intercept first.
    // For every candidate j we keep z_j = L^{-1} M_{S,j}, its squared norm and
    // its inner product with u = L^{-1} b_S; each acceptance extends all three
    // by one entry, giving O(1) gain evaluation per candidate per step.
    const std::size_t cap = max_sel + 1;
    std::vector<double> z(p * cap, 0.0);   // z[j*cap + t]
    std::vector<double> znorm2(p, 0.0), zu(p, 0.0);
    std::vector<double> u;                 // length |S|
    std::vector<double> Ldiag;             // diagonal of the Cholesky factor
    std::vector<double> accepted_z;        // flattened z-vectors of accepted columns

    // Intercept column: M_II = 1 + lambda, b_I = mean(y).
    const double mean_y = kernels::sum(targets.data(), m) * inv_m;
    Ldiag.push_back(std::sqrt(1.0 + lambda));
    u.push_back(mean_y / Ldiag[0]);
    // z_j[0] = M_{I,j} / L_00 = mean(col_j) / sqrt(1 + lambda).
    for (std::size_t j = 0; j < p; ++j) {
        double v = kernels::sum(columns[j].data(), m) * inv_m / Ldiag[0];
        z[j * cap + 0] = v;
        znorm2[j] = v * v;
        zu[j] = v * u[0];
    }

    ForwardSelection fs;
    fs.dense_coef.assign(p, 0.0);
    double yy = kernels::sumsq(targets.data(), m) * inv_m;
    double obj = yy - u[0] * u[0];
    fs.objective_path.push_back(obj);

    std::vector<char> in_S(p, 0);
    while (fs.support.size() < max_sel) {
        int best = -1;
        double best_gain = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            if (in_S[j]) continue;
            double r = diag[j] - znorm2[j];
            if (r < 1e-12) continue;  // numerically dependent column
            double num = b[j] - zu[j];
            double gain = num * num / r;
            if (gain > best_gain) {
                best_gain = gain;
                best = int(j);
            }
        }
        if (best < 0 || best_gain <= 0.0) break;

        const std::size_t t = fs.support.size() + 1;  // new row index in L
        const std::size_t q = std::size_t(best);
        double r_q = diag[q] - znorm2[q];
        double delta = std::sqrt(r_q);
        double u_t = (b[q] - zu[q]) / delta;

        // Extend every remaining candidate's z by
        //   z_j[t] = (M_{q,j} - z_j . z_q) / delta.
        const double* zq = z.data() + q * cap;
        for (std::size_t j = 0; j < p; ++j) {
            if (in_S[j] || j == q) continue;
            double M_qj = kernels::dot(columns[q].data(), columns[j].data(), m) * inv_m;
            double cross = kernels::dot(z.data() + j * cap, zq, t);
            double v = (M_qj - cross) / delta;
            z[j * cap + t] = v;
            znorm2[j] += v * v;
            zu[j] += v * u_t;
        }

        accepted_z.insert(accepted_z.end(), zq, zq + t);
        Ldiag.push_back(delta);
        u.push_back(u_t);
        in_S[q] = 1;
        fs.support.push_back(best);
        obj -= u_t * u_t;
        fs.objective_path.push_back(obj);
    }

    // Back-substitute L^T w = u for the incremental solution. The factor's
    // strictly-lower rows are the accepted z-vectors; row t has t leading
    // entries followed by Ldiag[t].
    const std::size_t sel = fs.support.size();
    std::vector<double> w(u);
    for (std::size_t ii = sel + 1; ii-- > 0;) {
        double s = w[ii];
        for (std::size_t t = ii + 1; t <= sel; ++t) {
            // Row t of L starts at accepted_z offset t(t-1)/2 and has t entries.
            s -= accepted_z[t * (t - 1) / 2 + ii] * w[t];
        }
        w[ii] = s / Ldiag[ii];
    }
    fs.incremental_coef = w;
    fs.objective = obj;

    // Refit on the selected set from scratch; this is the exported solution.
    std::vector<std::vector<double>> sel_cols;
    sel_cols.emplace_back(m, 1.0);  // intercept
    for (int j : fs.support) sel_cols.push_back(columns[std::size_t(j)]);
    std::vector<double> refit = ridge_solve(sel_cols, targets, lambda);
    fs.intercept = refit[0];
    for (std::size_t t = 0; t < sel; ++t) fs.dense_coef[std::size_t(fs.support[t])] = refit[t + 1];
    return fs;
}

LinearModel greedy_tl(const std::vector<data::Sample>& samples, const std::vector<int>& targets,
                      const data::Scaler& scaler, const SourceSet& sources,
                      const GreedyTLConfig& cfg) {
    const std::size_t n = samples.size();
    if (n == 0) throw ConfigError("greedy_tl: empty local dataset");
    if (targets.size() != n) throw DimensionError("greedy_tl: target length mismatch");
    const std::size_t d = samples.front().features.size();
    if (scaler.mean.size() != d) throw DimensionError("greedy_tl: scaler dimensionality mismatch");
    const std::size_t L = sources.size();
    if (cfg.kappa < 0 || std::size_t(cfg.kappa) > d + L + 1)
        throw ConfigError("greedy_tl: kappa outside [0, d+L+1]");
    if (cfg.bag_sample_size < 1) throw ConfigError("greedy_tl: bag_sample_size must be positive");
    if (cfg.bag_sample_size < cfg.kappa)
        throw ConfigError("greedy_tl: bag_sample_size must be at least kappa");

    // A bag larger than the local set degenerates to one pass over the whole
    // set: sampling is without replacement, so the cap keeps refits exact.
    std::size_t m = std::min(std::size_t(cfg.bag_sample_size), n);
    int bags = cfg.bag_count > 0
                   ? cfg.bag_count
                   : int(std::min<std::size_t>(20, std::max<std::size_t>(1, (n + m - 1) / m)));

    LinearModel acc = LinearModel::zeros(d, L, ModelKind::gtl, "");
    acc.source_clip = cfg.source_clip > 0.0 ? cfg.source_clip : 0.0;

    std::vector<std::size_t> base_idx(n);
    std::iota(base_idx.begin(), base_idx.end(), 0);

    for (int bag = 0; bag < bags; ++bag) {
        std::mt19937_64 rng(derive_seed(cfg.seed, 0x424147ull, std::uint64_t(bag)));
        // Partial Fisher-Yates: first m entries become the bag rows.
        std::vector<std::size_t> idx = base_idx;
        for (std::size_t i = 0; i < m; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, n - 1);
            std::swap(idx[i], idx[pick(rng)]);
        }

        // Candidate columns: d z-scored features, then L source predictions.
        std::vector<std::vector<double>> cols(d + L, std::vector<double>(m));
        std::vector<double> y(m);
        std::vector<double> zrow(d);
        for (std::size_t i = 0; i < m; ++i) {
            const data::Sample& s = samples[idx[i]];
            scaler.transform(s.features.data(), zrow.data());
            for (std::size_t j = 0; j < d; ++j) cols[j][i] = zrow[j];
            std::vector<double> sf =
                source_features(s.features.data(), d, sources, cfg.source_clip);
            for (std::size_t l = 0; l < L; ++l) cols[d + l][i] = sf[l];
            y[i] = double(targets[idx[i]]);
        }

        ForwardSelection fs = forward_select(cols, y, cfg.lambda, cfg.kappa);

        LinearModel bag_model = LinearModel::zeros(d, L, ModelKind::gtl, "");
        for (std::size_t j = 0; j < d + L; ++j) bag_model.coef[j] = fs.dense_coef[j];
        bag_model.intercept() = fs.intercept;
        bag_model.source_clip = acc.source_clip;
        bag_model = fold_back(bag_model, scaler);

        for (std::size_t j = 0; j < acc.coef.size(); ++j) acc.coef[j] += bag_model.coef[j];
    }

    kernels::scale(acc.coef.data(), 1.0 / double(bags), acc.coef.size());
    if (!acc.all_finite()) throw NumericError("greedy_tl: non-finite coefficients");
    return acc;
}

}  // namespace edgelearn::learn
