#include "edgelearn/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "edgelearn/common.hpp"

namespace edgelearn::data {

namespace fs = std::filesystem;

Regime regime_from_string(const std::string& s) {
    if (s == "balanced") return Regime::balanced;
    if (s == "class_unbalance") return Regime::class_unbalance;
    if (s == "node_unbalance") return Regime::node_unbalance;
    throw ConfigError("unknown partition regime: " + s);
}

std::string to_string(Regime r) {
    switch (r) {
        case Regime::balanced: return "balanced";
        case Regime::class_unbalance: return "class_unbalance";
        default: return "node_unbalance";
    }
}

int num_classes(const std::vector<Sample>& pool) {
    int k = 0;
    for (const auto& s : pool) k = std::max(k, s.label);
    return k;
}

// --- IDX (MNIST) -----------------------------------------------------------

namespace {

std::uint32_t read_be32(std::istream& in, const std::string& path) {
    unsigned char buf[4];
    in.read(reinterpret_cast<char*>(buf), 4);
    if (!in) throw FormatError("truncated IDX file: " + path);
    return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
           (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

}  // namespace

std::vector<Sample> load_mnist(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw FormatError("cannot open IDX image file: " + images_path);
    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw FormatError("cannot open IDX label file: " + labels_path);

    if (read_be32(img, images_path) != 0x00000803u)
        throw FormatError("bad IDX image magic in " + images_path);
    if (read_be32(lab, labels_path) != 0x00000801u)
        throw FormatError("bad IDX label magic in " + labels_path);

    const std::uint32_t n_img = read_be32(img, images_path);
    const std::uint32_t rows = read_be32(img, images_path);
    const std::uint32_t cols = read_be32(img, images_path);
    const std::uint32_t n_lab = read_be32(lab, labels_path);
    if (n_img != n_lab)
        throw FormatError("IDX image/label count mismatch: " + images_path + " vs " + labels_path);

    const std::size_t pixels = std::size_t(rows) * cols;
    std::vector<unsigned char> ibuf(pixels);
    std::vector<Sample> out;
    out.reserve(n_img);
    for (std::uint32_t i = 0; i < n_img; ++i) {
        img.read(reinterpret_cast<char*>(ibuf.data()), std::streamsize(pixels));
        if (!img) throw FormatError("truncated IDX file: " + images_path);
        int lbl = lab.get();
        if (lbl == EOF) throw FormatError("truncated IDX file: " + labels_path);
        if (lbl < 0 || lbl > 9) throw FormatError("label out of range in " + labels_path);
        Sample s;
        s.features.resize(pixels);
        for (std::size_t p = 0; p < pixels; ++p) s.features[p] = ibuf[p] / 255.0;
        s.label = lbl + 1;
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<Sample> load_mnist_dir(const std::string& dir) {
    auto pick = [&](const char* primary, const char* alt) {
        fs::path p = fs::path(dir) / primary;
        if (fs::exists(p)) return p.string();
        return (fs::path(dir) / alt).string();
    };
    auto all = load_mnist(pick("train-images-idx3-ubyte", "train-images.idx3-ubyte"),
                          pick("train-labels-idx1-ubyte", "train-labels.idx1-ubyte"));
    fs::path t = fs::path(dir) / "t10k-images-idx3-ubyte";
    fs::path t_alt = fs::path(dir) / "t10k-images.idx3-ubyte";
    if (fs::exists(t) || fs::exists(t_alt)) {
        auto test = load_mnist(pick("t10k-images-idx3-ubyte", "t10k-images.idx3-ubyte"),
                               pick("t10k-labels-idx1-ubyte", "t10k-labels.idx1-ubyte"));
        all.insert(all.end(), std::make_move_iterator(test.begin()),
                   std::make_move_iterator(test.end()));
    }
    return all;
}

// --- HAPT ------------------------------------------------------------------

std::vector<std::pair<int, Sample>> load_hapt(const std::string& features_path,
                                              const std::string& labels_path,
                                              const std::string& subjects_path) {
    std::ifstream feat(features_path);
    if (!feat) throw FormatError("cannot open HAPT features file: " + features_path);
    std::ifstream lab(labels_path);
    if (!lab) throw FormatError("cannot open HAPT labels file: " + labels_path);
    std::ifstream subj(subjects_path);
    if (!subj) throw FormatError("cannot open HAPT subjects file: " + subjects_path);

    std::vector<std::pair<int, Sample>> out;
    std::string line;
    std::size_t dim = 0;
    while (std::getline(feat, line)) {
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        Sample s;
        std::istringstream ls(line);
        double v;
        while (ls >> v) s.features.push_back(v);
        if (dim == 0) dim = s.features.size();
        if (s.features.size() != dim)
            throw FormatError("ragged feature row in " + features_path);

        int label;
        if (!(lab >> label))
            throw FormatError("row count mismatch: more features than labels (" + labels_path + ")");
        if (label < 1 || label > 12)
            throw FormatError("label out of range 1..12 in " + labels_path);
        s.label = label;

        int user;
        if (!(subj >> user))
            throw FormatError("row count mismatch: more features than subjects (" + subjects_path + ")");
        out.emplace_back(user, std::move(s));
    }
    int extra;
    if (lab >> extra) throw FormatError("row count mismatch: more labels than features (" + labels_path + ")");
    if (subj >> extra)
        throw FormatError("row count mismatch: more subjects than features (" + subjects_path + ")");
    return out;
}

std::vector<std::pair<int, Sample>> load_hapt_dir(const std::string& dir) {
    fs::path base(dir);
    // Accept either the merged layout (X.txt/y.txt/subject_id.txt) or the
    // official Train/Test split.
    if (fs::exists(base / "X.txt")) {
        return load_hapt((base / "X.txt").string(), (base / "y.txt").string(),
                         (base / "subject_id.txt").string());
    }
    auto train = load_hapt((base / "Train" / "X_train.txt").string(),
                           (base / "Train" / "y_train.txt").string(),
                           (base / "Train" / "subject_id_train.txt").string());
    auto test = load_hapt((base / "Test" / "X_test.txt").string(),
                          (base / "Test" / "y_test.txt").string(),
                          (base / "Test" / "subject_id_test.txt").string());
    train.insert(train.end(), std::make_move_iterator(test.begin()),
                 std::make_move_iterator(test.end()));
    return train;
}

std::vector<LocalDataset> hapt_redistribute(const std::vector<std::pair<int, Sample>>& tagged,
                                            std::uint64_t seed) {
    int k = 0;
    for (const auto& [user, s] : tagged) k = std::max(k, s.label);

    std::map<int, std::set<int>> classes_by_user;
    for (const auto& [user, s] : tagged) classes_by_user[user].insert(s.label);

    std::vector<int> complete;
    for (const auto& [user, classes] : classes_by_user) {
        if (int(classes.size()) == k) complete.push_back(user);
    }
    if (complete.size() < 2)
        throw ConfigError("hapt_redistribute: fewer than 2 users hold a complete class set");
    std::sort(complete.begin(), complete.end());

    std::map<int, int> location_of;  // user id -> location index
    std::vector<LocalDataset> out(complete.size());
    for (std::size_t i = 0; i < complete.size(); ++i) {
        out[i].location_id = int(i);
        location_of[complete[i]] = int(i);
    }

    std::mt19937_64 rng(derive_seed(seed, 0x4841'5054ull));
    std::uniform_int_distribution<std::size_t> pick(0, complete.size() - 1);
    for (const auto& [user, s] : tagged) {
        auto it = location_of.find(user);
        std::size_t loc = (it != location_of.end()) ? std::size_t(it->second) : pick(rng);
        out[loc].samples.push_back(s);
    }
    return out;
}

// --- partitioning ----------------------------------------------------------

namespace {

std::map<int, std::vector<std::size_t>> indices_by_class(const std::vector<Sample>& pool) {
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < pool.size(); ++i) by_class[pool[i].label].push_back(i);
    return by_class;
}

std::vector<LocalDataset> deal_balanced(const std::vector<Sample>& pool,
                                        const std::vector<std::size_t>& order, int s) {
    std::vector<LocalDataset> out(s);
    for (int l = 0; l < s; ++l) out[l].location_id = l;
    // `order` is grouped by class; dealing round-robin keeps per-location
    // class histograms equal up to +-1.
    for (std::size_t i = 0; i < order.size(); ++i) {
        out[i % s].samples.push_back(pool[order[i]]);
    }
    return out;
}

}  // namespace

std::vector<LocalDataset> partition(const std::vector<Sample>& pool, const PartitionSpec& spec) {
    if (pool.empty()) throw ConfigError("partition: empty pool");
    if (spec.num_locations < 1) throw ConfigError("partition: num_locations must be >= 1");
    const int s = spec.num_locations;
    const int k = num_classes(pool);

    auto by_class = indices_by_class(pool);
    std::mt19937_64 rng(derive_seed(spec.seed, 0x5041'5254ull));
    for (auto& [c, idx] : by_class) std::shuffle(idx.begin(), idx.end(), rng);

    switch (spec.regime) {
        case Regime::balanced: {
            std::vector<std::size_t> order;
            order.reserve(pool.size());
            for (auto& [c, idx] : by_class) order.insert(order.end(), idx.begin(), idx.end());
            return deal_balanced(pool, order, s);
        }
        case Regime::class_unbalance: {
            std::vector<std::size_t> order;
            order.reserve(pool.size());
            for (auto& [c, idx] : by_class) {
                std::size_t keep = idx.size();
                if (spec.underrepresented_classes.count(c)) {
                    keep = std::size_t(std::llround(spec.depletion_keep * double(idx.size())));
                    keep = std::max<std::size_t>(keep, 1);
                }
                order.insert(order.end(), idx.begin(), idx.begin() + keep);
            }
            return deal_balanced(pool, order, s);
        }
        case Regime::node_unbalance: {
            if (s < k)
                throw ConfigError("partition: node_unbalance needs at least one location per class");
            // Location j is dominated by class (j % k) + 1, so each class is
            // dominant at ceil/floor(s/k) locations and the rotation is even.
            std::vector<int> dominant(s);
            std::vector<std::vector<int>> locs_of_class(k + 1);
            for (int l = 0; l < s; ++l) {
                dominant[l] = (l % k) + 1;
                locs_of_class[dominant[l]].push_back(l);
            }
            const double target_size = double(pool.size()) / s;
            std::vector<LocalDataset> out(s);
            for (int l = 0; l < s; ++l) out[l].location_id = l;

            for (int c = 1; c <= k; ++c) {
                auto it = by_class.find(c);
                std::size_t avail = (it == by_class.end()) ? 0 : it->second.size();
                const auto& dom_locs = locs_of_class[c];
                std::size_t per_dom =
                    std::size_t(std::llround(spec.dominant_fraction * target_size));
                if (avail < per_dom * dom_locs.size())
                    throw ConfigError("partition: not enough samples of class " + std::to_string(c) +
                                      " for the requested dominant fraction");
                // Dominant locations take their 70% share; the remainder of
                // this class is spread equally over all other locations so
                // the pool is covered exactly.
                std::size_t pos = 0;
                const auto& idx = it->second;
                for (int l : dom_locs) {
                    for (std::size_t i = 0; i < per_dom; ++i)
                        out[l].samples.push_back(pool[idx[pos++]]);
                }
                std::vector<int> others;
                for (int l = 0; l < s; ++l)
                    if (dominant[l] != c) others.push_back(l);
                std::size_t left = avail - pos;
                std::size_t base = others.empty() ? 0 : left / others.size();
                std::size_t rem = others.empty() ? 0 : left % others.size();
                for (std::size_t oi = 0; oi < others.size(); ++oi) {
                    std::size_t take = base + (oi < rem ? 1 : 0);
                    for (std::size_t i = 0; i < take; ++i)
                        out[others[oi]].samples.push_back(pool[idx[pos++]]);
                }
            }
            return out;
        }
    }
    throw ConfigError("partition: unreachable");
}

HoldoutSplit holdout(const std::vector<Sample>& pool, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0))
        throw ConfigError("holdout: ratio must lie in (0,1)");
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(derive_seed(seed, 0x484f'4c44ull));
    std::shuffle(order.begin(), order.end(), rng);

    HoldoutSplit split;
    split.ratio = ratio;
    std::size_t n_test = std::size_t(std::llround(ratio * double(pool.size())));
    split.test.reserve(n_test);
    split.train.reserve(pool.size() - n_test);
    for (std::size_t i = 0; i < order.size(); ++i) {
        (i < n_test ? split.test : split.train).push_back(pool[order[i]]);
    }
    return split;
}

// --- synthetic -------------------------------------------------------------

std::vector<Sample> synth_blobs(int k, int d, int per_class, double separation,
                                std::uint64_t seed) {
    if (k < 2 || d < 2 || per_class < 1)
        throw ConfigError("synth_blobs: need k >= 2, d >= 2, per_class >= 1");
    std::mt19937_64 rng(derive_seed(seed, 0x424c'4f42ull));
    std::normal_distribution<double> gauss(0.0, 1.0);

    // Seeded random unit directions; identical means when separation == 0.
    std::vector<std::vector<double>> means(k, std::vector<double>(d, 0.0));
    for (int c = 0; c < k; ++c) {
        double norm2 = 0.0;
        for (int j = 0; j < d; ++j) {
            means[c][j] = gauss(rng);
            norm2 += means[c][j] * means[c][j];
        }
        double inv = separation / std::sqrt(std::max(norm2, 1e-300));
        for (int j = 0; j < d; ++j) means[c][j] *= inv;
    }

    std::vector<Sample> out;
    out.reserve(std::size_t(k) * per_class);
    for (int c = 0; c < k; ++c) {
        for (int i = 0; i < per_class; ++i) {
            Sample s;
            s.label = c + 1;
            s.features.resize(d);
            for (int j = 0; j < d; ++j) s.features[j] = means[c][j] + gauss(rng);
            out.push_back(std::move(s));
        }
    }
    return out;
}

namespace {

// Smooth per-class prototype: coarse seeded Gaussian grid, bilinearly
// upsampled to 28x28 and squashed to [0,1].
std::vector<double> digit_prototype(std::mt19937_64& rng) {
    constexpr int coarse = 5, size = 28;
    std::normal_distribution<double> gauss(0.0, 1.0);
    double grid[coarse][coarse];
    for (auto& row : grid)
        for (double& v : row) v = gauss(rng);
    std::vector<double> img(size * size);
    for (int r = 0; r < size; ++r) {
        for (int c = 0; c < size; ++c) {
            double fr = double(r) / (size - 1) * (coarse - 1);
            double fc = double(c) / (size - 1) * (coarse - 1);
            int r0 = int(fr), c0 = int(fc);
            int r1 = std::min(r0 + 1, coarse - 1), c1 = std::min(c0 + 1, coarse - 1);
            double ar = fr - r0, ac = fc - c0;
            double v = grid[r0][c0] * (1 - ar) * (1 - ac) + grid[r1][c0] * ar * (1 - ac) +
                       grid[r0][c1] * (1 - ar) * ac + grid[r1][c1] * ar * ac;
            img[r * size + c] = 1.0 / (1.0 + std::exp(-2.0 * v));
        }
    }
    return img;
}

void write_be32(std::ostream& out, std::uint32_t v) {
    unsigned char buf[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                            static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(buf), 4);
}

}  // namespace

void write_synth_mnist(const std::string& dir, const SynthDigitsConfig& cfg) {
    fs::create_directories(dir);
    constexpr int size = 28;
    std::mt19937_64 rng(derive_seed(cfg.seed, 0x4449'4749ull));
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<std::vector<double>> protos;
    for (int c = 0; c < cfg.num_classes; ++c) protos.push_back(digit_prototype(rng));

    const std::uint32_t n = std::uint32_t(cfg.num_classes) * cfg.per_class;
    std::ofstream img(fs::path(dir) / "train-images-idx3-ubyte", std::ios::binary);
    std::ofstream lab(fs::path(dir) / "train-labels-idx1-ubyte", std::ios::binary);
    if (!img || !lab) throw ConfigError("write_synth_mnist: cannot create files in " + dir);
    write_be32(img, 0x00000803u);
    write_be32(img, n);
    write_be32(img, size);
    write_be32(img, size);
    write_be32(lab, 0x00000801u);
    write_be32(lab, n);

    std::uniform_int_distribution<int> shift(-cfg.max_shift, cfg.max_shift);
    // Interleave classes so any prefix subsample stays roughly balanced.
    for (std::uint32_t i = 0; i < n; ++i) {
        int c = int(i) % cfg.num_classes;
        int dr = shift(rng), dc = shift(rng);
        for (int r = 0; r < size; ++r) {
            for (int col = 0; col < size; ++col) {
                int sr = r - dr, sc = col - dc;
                double v = (sr >= 0 && sr < size && sc >= 0 && sc < size)
                               ? protos[c][sr * size + sc]
                               : 0.0;
                v += cfg.noise * gauss(rng);
                v = std::clamp(v, 0.0, 1.0);
                img.put(char(std::lround(v * 255.0)));
            }
        }
        lab.put(char(c));
    }
}

void write_synth_hapt(const std::string& dir, const SynthHaptConfig& cfg) {
    fs::create_directories(dir);
    constexpr int d = 561, k = 12;
    std::mt19937_64 rng(derive_seed(cfg.seed, 0x4841'5054ull));
    std::normal_distribution<double> gauss(0.0, 1.0);

    // Class means on seeded random directions; class frequencies mimic the
    // real profile (six frequent postures, six rare transitions).
    std::vector<std::vector<double>> means(k, std::vector<double>(d));
    for (int c = 0; c < k; ++c) {
        double norm2 = 0.0;
        for (int j = 0; j < d; ++j) {
            means[c][j] = gauss(rng);
            norm2 += means[c][j] * means[c][j];
        }
        double inv = cfg.separation / std::sqrt(norm2);
        for (int j = 0; j < d; ++j) means[c][j] *= inv;
    }
    std::vector<double> class_weight = {1.0, 1.0, 1.0, 1.0, 1.0, 1.0,
                                        0.07, 0.07, 0.07, 0.07, 0.07, 0.07};
    std::discrete_distribution<int> class_pick(class_weight.begin(), class_weight.end());
    std::uniform_int_distribution<int> user_pick(1, cfg.num_users);

    std::ofstream X(fs::path(dir) / "X.txt");
    std::ofstream y(fs::path(dir) / "y.txt");
    std::ofstream subj(fs::path(dir) / "subject_id.txt");
    if (!X || !y || !subj) throw ConfigError("write_synth_hapt: cannot create files in " + dir);
    X.precision(7);

    for (int i = 0; i < cfg.total_samples; ++i) {
        int c = class_pick(rng);
        // Every user must end up with all 12 classes; cycle rare classes
        // through users deterministically often enough.
        int user = user_pick(rng);
        if (i < cfg.num_users * k) {  // guarantee coverage in a leading block
            user = (i % cfg.num_users) + 1;
            c = (i / cfg.num_users) % k;
        }
        for (int j = 0; j < d; ++j) {
            double v = means[c][j] + cfg.noise * gauss(rng);
            X << v << (j + 1 == d ? '\n' : ' ');
        }
        y << (c + 1) << '\n';
        subj << user << '\n';
    }
}

// --- standardization --------------------------------------------------------

Scaler Scaler::fit(const std::vector<Sample>& samples, bool enabled) {
    if (samples.empty()) throw ConfigError("Scaler::fit: empty sample set");
    std::size_t d = samples.front().features.size();
    Scaler sc;
    sc.enabled = enabled;
    sc.mean.assign(d, 0.0);
    sc.inv_std.assign(d, 1.0);
    if (!enabled) return sc;

    const double n = double(samples.size());
    for (const auto& s : samples)
        for (std::size_t j = 0; j < d; ++j) sc.mean[j] += s.features[j];
    for (std::size_t j = 0; j < d; ++j) sc.mean[j] /= n;
    std::vector<double> var(d, 0.0);
    for (const auto& s : samples) {
        for (std::size_t j = 0; j < d; ++j) {
            double dev = s.features[j] - sc.mean[j];
            var[j] += dev * dev;
        }
    }
    for (std::size_t j = 0; j < d; ++j) {
        double sd = std::sqrt(var[j] / n);
        sc.inv_std[j] = sd > 0.0 ? 1.0 / sd : 1.0;
    }
    return sc;
}

Scaler Scaler::identity(std::size_t dim) {
    Scaler sc;
    sc.enabled = false;
    sc.mean.assign(dim, 0.0);
    sc.inv_std.assign(dim, 1.0);
    return sc;
}

void Scaler::transform(const double* x, double* out) const {
    for (std::size_t j = 0; j < mean.size(); ++j) out[j] = (x[j] - mean[j]) * inv_std[j];
}

std::vector<std::vector<double>> Scaler::transform_all(const std::vector<Sample>& samples) const {
    std::vector<std::vector<double>> out(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        out[i].resize(mean.size());
        transform(samples[i].features.data(), out[i].data());
    }
    return out;
}

// --- export ------------------------------------------------------------------

void export_csv(const std::string& path, const std::vector<LocalDataset>& locations) {
    std::ofstream out(path);
    if (!out) throw ConfigError("export_csv: cannot create " + path);
    std::size_t d = 0;
    for (const auto& loc : locations)
        if (!loc.samples.empty()) d = loc.samples.front().features.size();
    for (std::size_t j = 1; j <= d; ++j) out << 'f' << j << ',';
    out << "label,location\n";
    char buf[32];
    for (const auto& loc : locations) {
        for (const auto& s : loc.samples) {
            for (double v : s.features) {
                std::snprintf(buf, sizeof buf, "%.17g", v);
                out << buf << ',';
            }
            out << s.label << ',' << loc.location_id << '\n';
        }
    }
}

std::vector<Sample> subsample(const std::vector<Sample>& pool, std::size_t n, std::uint64_t seed) {
    if (n >= pool.size()) return pool;
    std::vector<std::size_t> order(pool.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(derive_seed(seed, 0x5355'4253ull));
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<Sample> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(pool[order[i]]);
    return out;
}

}  // namespace edgelearn::data
