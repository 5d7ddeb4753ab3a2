#include "edgelearn/multiclass.hpp"

#include <algorithm>
#include <limits>

#include "edgelearn/common.hpp"

namespace edgelearn::multiclass {

std::vector<int> CodeBook::row(int class_label) const {
    if (class_label < 1 || class_label > k)
        throw ConfigError("CodeBook::row: class label out of range");
    std::vector<int> out(k, -1);
    out[class_label - 1] = +1;
    return out;
}

OvaClassifier train_ova(const std::vector<data::Sample>& samples, int k,
                        const BinaryTrainer& trainer) {
    if (k < 2) throw ConfigError("train_ova: need at least two classes");
    if (samples.empty()) throw ConfigError("train_ova: empty dataset");
    OvaClassifier clf;
    clf.models.reserve(k);
    std::vector<int> targets(samples.size());
    for (int c = 1; c <= k; ++c) {
        for (std::size_t i = 0; i < samples.size(); ++i)
            targets[i] = samples[i].label == c ? +1 : -1;
        clf.models.push_back(trainer(c, targets));
    }
    return clf;
}

int decode(const std::vector<int>& responses, const CodeBook& book) {
    const int k = int(responses.size());
    if (k != book.k) throw DimensionError("decode: response length does not match codebook");
    int best = 1;
    double best_loss = std::numeric_limits<double>::infinity();
    for (int c = 1; c <= k; ++c) {
        double loss = 0.0;
        for (int i = 0; i < k; ++i)
            loss += std::max(0.0, 1.0 - double(responses[i] * book.entry(c, i)));
        if (loss < best_loss) {
            best_loss = loss;
            best = c;
        }
    }
    return best;
}

int decode(const std::vector<int>& responses) {
    return decode(responses, CodeBook(int(responses.size())));
}

int decode_margins(const std::vector<double>& margins) {
    std::vector<int> responses(margins.size());
    for (std::size_t i = 0; i < margins.size(); ++i) responses[i] = margins[i] >= 0.0 ? +1 : -1;
    return decode(responses);
}

int predict(const OvaClassifier& clf, const double* x, std::size_t d) {
    std::vector<double> margins(clf.models.size());
    for (std::size_t c = 0; c < clf.models.size(); ++c) margins[c] = clf.models[c].margin(x, d);
    return decode_margins(margins);
}

SourceMarginTable build_source_margin_table(const std::vector<learn::SourceSet>& per_class_sources,
                                            const std::vector<data::Sample>& points, double clip) {
    SourceMarginTable table;
    table.clip = clip;
    table.num_points = points.size();
    table.margins.resize(per_class_sources.size());
    for (std::size_t c = 0; c < per_class_sources.size(); ++c) {
        const learn::SourceSet& sources = per_class_sources[c];
        table.margins[c].assign(sources.size(), std::vector<double>(points.size()));
        for (std::size_t l = 0; l < sources.size(); ++l) {
            for (std::size_t i = 0; i < points.size(); ++i) {
                double margin =
                    sources[l].margin(points[i].features.data(), points[i].features.size());
                if (clip > 0.0) margin = std::clamp(margin, -clip, clip);
                table.margins[c][l][i] = margin;
            }
        }
    }
    return table;
}

int predict(const OvaClassifier& clf, const double* x, std::size_t d,
            const SourceMarginTable& table, std::size_t point_index) {
    std::vector<double> margins(clf.models.size());
    std::vector<double> source_values;
    for (std::size_t c = 0; c < clf.models.size(); ++c) {
        const LinearModel& m = clf.models[c];
        if (m.num_sources == 0) {
            margins[c] = m.margin(x, d);
            continue;
        }
        if (c >= table.margins.size() || table.margins[c].size() != m.num_sources)
            throw DimensionError("predict: source margin table does not match the model");
        source_values.resize(m.num_sources);
        for (std::size_t l = 0; l < m.num_sources; ++l)
            source_values[l] = table.margins[c][l][point_index];
        margins[c] = m.margin(x, d, source_values.data(), source_values.size());
    }
    return decode_margins(margins);
}

std::vector<int> predict_all(const OvaClassifier& clf, const std::vector<data::Sample>& points) {
    std::vector<int> out(points.size());
    for (std::size_t i = 0; i < points.size(); ++i)
        out[i] = predict(clf, points[i].features.data(), points[i].features.size());
    return out;
}

std::vector<int> predict_all(const OvaClassifier& clf, const std::vector<data::Sample>& points,
                             const SourceMarginTable& table) {
    std::vector<int> out(points.size());
    for (std::size_t i = 0; i < points.size(); ++i)
        out[i] = predict(clf, points[i].features.data(), points[i].features.size(), table, i);
    return out;
}

LinearModel consensus_mean(const std::vector<LinearModel>& models) {
    if (models.empty()) throw ConfigError("consensus_mean: empty model list");
    const LinearModel& first = models.front();
    LinearModel mean = LinearModel::zeros(first.dim, first.num_sources, ModelKind::aggregate,
                                          first.feature_space_id);
    mean.source_clip = first.source_clip;
    for (const LinearModel& m : models) {
        if (m.dim != first.dim || m.num_sources != first.num_sources ||
            m.feature_space_id != first.feature_space_id)
            throw DimensionError("consensus_mean: mixed feature spaces");
        for (std::size_t j = 0; j < mean.coef.size(); ++j) mean.coef[j] += m.coef[j];
    }
    double inv = 1.0 / double(models.size());
    for (double& v : mean.coef) v *= inv;
    return mean;
}

OvaClassifier consensus_mean(const std::vector<OvaClassifier>& classifiers) {
    if (classifiers.empty()) throw ConfigError("consensus_mean: empty classifier list");
    const int k = classifiers.front().num_classes();
    OvaClassifier out;
    out.models.reserve(k);
    std::vector<LinearModel> column;
    column.reserve(classifiers.size());
    for (int c = 0; c < k; ++c) {
        column.clear();
        for (const OvaClassifier& clf : classifiers) {
            if (clf.num_classes() != k)
                throw DimensionError("consensus_mean: classifiers disagree on class count");
            column.push_back(clf.models[std::size_t(c)]);
        }
        out.models.push_back(consensus_mean(column));
    }
    return out;
}

int majority_vote(const std::vector<int>& predictions) {
    if (predictions.empty()) throw ConfigError("majority_vote: empty prediction list");
    int max_label = *std::max_element(predictions.begin(), predictions.end());
    std::vector<int> counts(std::size_t(std::max(max_label, 1)) + 1, 0);
    for (int p : predictions) {
        if (p < 1) throw ConfigError("majority_vote: labels must be >= 1");
        ++counts[std::size_t(p)];
    }
    int best = 1, best_count = -1;
    for (std::size_t c = 1; c < counts.size(); ++c) {
        if (counts[c] > best_count) {
            best_count = counts[c];
            best = int(c);
        }
    }
    return best;
}

}  // namespace edgelearn::multiclass
