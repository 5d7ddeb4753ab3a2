#pragma once

#include <functional>
#include <vector>

#include "edgelearn/greedytl.hpp"
#include "edgelearn/model.hpp"

namespace edgelearn::multiclass {

// One-hot output codebook: row c (1-based) is +1 at position c and -1
// elsewhere. Rows are pairwise distinct by construction.
struct CodeBook {
    int k = 0;
    explicit CodeBook(int classes) : k(classes) {}
    int entry(int class_label, int position) const {
        return position == class_label - 1 ? +1 : -1;
    }
    std::vector<int> row(int class_label) const;
};

// One-vs-all composition: models[c-1] answers "is it class c?".
struct OvaClassifier {
    std::vector<LinearModel> models;
    int num_classes() const { return int(models.size()); }
};

// Trains one binary model per class; the trainer receives the class label and
// the +-1 target vector (+1 for that class, -1 for the rest).
using BinaryTrainer = std::function<LinearModel(int class_label, const std::vector<int>& targets)>;
OvaClassifier train_ova(const std::vector<data::Sample>& samples, int k,
                        const BinaryTrainer& trainer);

// Codebook decoding: argmin_c sum_i max(0, 1 - responses[i] * b_c[i]), ties to
// the lowest class index. responses holds +-1 entries.
int decode(const std::vector<int>& responses, const CodeBook& book);
int decode(const std::vector<int>& responses);  // implicit one-hot book

// Margins -> responses (sign(0) = +1) -> decode.
int decode_margins(const std::vector<double>& margins);

// Prediction with raw-space models only (no beta blocks).
int predict(const OvaClassifier& clf, const double* x, std::size_t d);

// Per-class clipped source-prediction margins precomputed over an evaluation
// set, shared by every classifier that uses the same per-class source sets.
// value(c, l, i) = clipped margin of source l's class-c model on point i.
struct SourceMarginTable {
    std::vector<std::vector<std::vector<double>>> margins;  // [class-1][source][point]
    double clip = 0.0;
    std::size_t num_points = 0;
};

SourceMarginTable build_source_margin_table(const std::vector<learn::SourceSet>& per_class_sources,
                                            const std::vector<data::Sample>& points, double clip);

// Prediction for classifiers whose models may carry beta blocks; point_index
// selects the precomputed source margins.
int predict(const OvaClassifier& clf, const double* x, std::size_t d,
            const SourceMarginTable& table, std::size_t point_index);

std::vector<int> predict_all(const OvaClassifier& clf, const std::vector<data::Sample>& points);
std::vector<int> predict_all(const OvaClassifier& clf, const std::vector<data::Sample>& points,
                             const SourceMarginTable& table);

// Coefficient-wise mean in the models' (shared) coefficient space;
// kind=aggregate. Mixed shapes raise.
LinearModel consensus_mean(const std::vector<LinearModel>& models);
OvaClassifier consensus_mean(const std::vector<OvaClassifier>& classifiers);

// Modal label; ties break to the lowest class index.
int majority_vote(const std::vector<int>& predictions);

}  // namespace edgelearn::multiclass
