#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace edgelearn::data {

// One labelled pattern. Labels are 1-based class indices in {1..k}.
struct Sample {
    std::vector<double> features;
    int label = 0;
};

struct LocalDataset {
    int location_id = 0;
    std::vector<Sample> samples;

    std::size_t size() const { return samples.size(); }
    std::size_t dim() const { return samples.empty() ? 0 : samples.front().features.size(); }
};

enum class Regime { balanced, class_unbalance, node_unbalance };

Regime regime_from_string(const std::string& s);
std::string to_string(Regime r);

struct PartitionSpec {
    Regime regime = Regime::balanced;
    int num_locations = 2;
    double dominant_fraction = 0.7;              // node_unbalance
    std::set<int> underrepresented_classes;      // class_unbalance, 1-based
    double depletion_keep = 0.1;                 // fraction of depleted-class samples kept
    std::uint64_t seed = 0;
};

struct HoldoutSplit {
    std::vector<Sample> train;  // pool still to be partitioned
    std::vector<Sample> test;
    double ratio = 0.3;
};

int num_classes(const std::vector<Sample>& pool);

// --- loaders -------------------------------------------------------------

// IDX-format MNIST (magic 0x803 images / 0x801 labels). Pixels scaled to
// [0,1], digit D becomes class D+1.
std::vector<Sample> load_mnist(const std::string& images_path, const std::string& labels_path);
std::vector<Sample> load_mnist_dir(const std::string& dir);  // expects the four official file names

// UCI HAPT text layout: whitespace-separated feature rows plus one label and
// one subject id per row.
std::vector<std::pair<int, Sample>> load_hapt(const std::string& features_path,
                                              const std::string& labels_path,
                                              const std::string& subjects_path);
std::vector<std::pair<int, Sample>> load_hapt_dir(const std::string& dir);

// Users missing at least one class are dropped and their samples spread
// uniformly at random over the remaining users; one location per kept user.
std::vector<LocalDataset> hapt_redistribute(const std::vector<std::pair<int, Sample>>& tagged,
                                            std::uint64_t seed);

// --- partitioning --------------------------------------------------------

std::vector<LocalDataset> partition(const std::vector<Sample>& pool, const PartitionSpec& spec);

HoldoutSplit holdout(const std::vector<Sample>& pool, double ratio, std::uint64_t seed);

// --- synthetic data ------------------------------------------------------

std::vector<Sample> synth_blobs(int k, int d, int per_class, double separation, std::uint64_t seed);

// Digit-like stand-in imagery: k noisy, jittered variants of smooth random
// 28x28 prototypes, written in the same IDX layout as the real files so the
// production loader is exercised end to end.
struct SynthDigitsConfig {
    int num_classes = 10;
    int per_class = 400;
    // Calibrated so HOG + linear one-vs-all lands near the real corpus:
    // centralized F ~0.88, 300-sample local models ~0.68.
    double noise = 0.15;
    int max_shift = 2;
    std::uint64_t seed = 7;
};
void write_synth_mnist(const std::string& dir, const SynthDigitsConfig& cfg);

// HAPT-like stand-in: 561-dim Gaussian clusters with the real dataset's
// skewed class profile, spread over 30 synthetic users in the UCI text
// layout consumed by load_hapt.
struct SynthHaptConfig {
    int num_users = 30;
    int total_samples = 10929;
    // Calibrated so the rare transition classes stay learnable from the
    // handful of per-user examples: consensus-mean F ~0.98, locals ~0.92.
    double separation = 14.0;
    double noise = 1.0;
    std::uint64_t seed = 11;
};
void write_synth_hapt(const std::string& dir, const SynthHaptConfig& cfg);

// --- standardization -----------------------------------------------------

// Per-feature z-score fitted on one location's training data only. A model
// trained in z-space folds back to raw coordinates, so exchanged models always
// live in the raw feature space.
struct Scaler {
    std::vector<double> mean;
    std::vector<double> inv_std;  // 1/sigma, 1.0 where sigma == 0
    bool enabled = true;

    static Scaler fit(const std::vector<Sample>& samples, bool enabled = true);
    static Scaler identity(std::size_t dim);
    void transform(const double* x, double* out) const;
    std::vector<std::vector<double>> transform_all(const std::vector<Sample>& samples) const;
};

// --- export --------------------------------------------------------------

// CSV with header f1..fd,label,location.
void export_csv(const std::string& path, const std::vector<LocalDataset>& locations);

std::vector<Sample> subsample(const std::vector<Sample>& pool, std::size_t n, std::uint64_t seed);

}  // namespace edgelearn::data
